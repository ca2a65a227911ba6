"""Input validation helpers shared by every module.

These follow the scikit-learn ``check_*`` idiom: each helper takes loosely
typed input, returns a clean ``numpy`` array, and raises a ``ValueError``
subclass describing what is wrong.
"""

import numpy as np

OPERATOR_TOL = 1e-10
STATE_TOL = 1e-12


class DimensionError(ValueError):
    """Operand shapes do not match."""


class NotUnitaryError(ValueError):
    """A matrix expected to be unitary is not."""


class InvalidStateError(ValueError):
    """A state vector or density matrix violates its invariants."""


class InvalidProjectorSetError(ValueError):
    """A set of projectors is not exhaustive, exclusive, or idempotent."""


class ConsistencyError(ValueError):
    """An operation requires a consistency level the family does not meet."""


class GuardExceededError(RuntimeError):
    """An enumeration exceeded its configured size guard."""


def as_complex_matrix(a, name="matrix"):
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def check_square(a, name="matrix"):
    arr = as_complex_matrix(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_unitary(u, tol=OPERATOR_TOL, name="operator"):
    arr = check_square(u, name)
    err = np.max(np.abs(arr.conj().T @ arr - np.eye(arr.shape[0])))
    if err > tol:
        raise NotUnitaryError(f"{name} is not unitary (max |U'U - 1| = {err:.3e})")
    return arr


def check_state_vector(psi, tol=STATE_TOL, dim=None):
    arr = np.asarray(psi, dtype=complex).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidStateError("state vector has non-finite entries")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"state has dimension {arr.shape[0]}, expected {dim}")
    norm2 = np.vdot(arr, arr).real
    if abs(norm2 - 1.0) > tol:
        raise InvalidStateError(f"state vector is not normalized (|psi|^2 = {norm2:.6g})")
    return arr


def check_density_matrix(rho, tol=STATE_TOL, dim=None):
    arr = check_square(rho, "density matrix")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"density matrix has dimension {arr.shape[0]}, expected {dim}")
    if np.max(np.abs(arr - arr.conj().T)) > tol:
        raise InvalidStateError("density matrix is not Hermitian")
    tr = np.trace(arr).real
    if abs(tr - 1.0) > tol:
        raise InvalidStateError(f"density matrix has trace {tr:.6g}")
    if np.linalg.eigvalsh(arr).min() < -tol:
        raise InvalidStateError("density matrix has a negative eigenvalue")
    return arr


def check_qubit_subset(subset, qubits):
    keep = tuple(int(q) for q in subset)
    if len(set(keep)) != len(keep):
        raise ValueError(f"qubit subset {keep} has duplicates")
    for q in keep:
        if not 0 <= q < qubits:
            raise ValueError(f"qubit {q} out of range for a {qubits}-qubit register")
    return keep


def n_qubits_for(dim):
    q = int(round(np.log2(dim))) if dim > 0 else -1
    if q < 0 or 2**q != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return q
