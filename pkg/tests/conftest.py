from pathlib import Path

import numpy as np
import pytest
from scipy.stats import unitary_group

from histoq import io
from histoq.histories import HistoryFamily
from histoq.quantum import CNOT, H, I2, Circuit, ProjectorSet, S, T, X, Z, embed, gate_U, ket, qft

DATA = Path(__file__).resolve().parents[1] / "src" / "histoq" / "data"

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def worked_circuit():
    return io.load_circuit(DATA / "worked_circuit.json")


@pytest.fixture
def worked_family(worked_circuit):
    return HistoryFamily.from_circuit(worked_circuit, {2: ProjectorSet.computational(4)})


def build_worked_circuit():
    prep = CNOT @ np.kron(H, I2)
    return Circuit(2, ket("01"), (prep, qft(4), gate_U()))


# ---------------------------------------------------------------------------
# random generators shared by the property and acceptance suites


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(rng, dim, rank):
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng, dim):
    return unitary_group.rvs(dim, random_state=rng)


def random_basis_set(rng, dim):
    return ProjectorSet.from_basis(random_unitary(rng, dim))


def random_coarse(rng, pset):
    """Random partition of a fine set into at most ``m`` groups."""
    labels = rng.integers(0, max(2, pset.m // 2), size=pset.m)
    groups = [tuple(np.flatnonzero(labels == g)) for g in np.unique(labels)]
    return pset.coarse_grain(groups)


CLASSICAL_1Q = (X, Z, S, T, I2)


def random_classical_circuit(rng, qubits, n_stages, h_prob=0.15, initial=None):
    """Circuit from X, Z, S, T, CNOT with an occasional Hadamard."""
    stages = []
    for _ in range(n_stages):
        if qubits > 1 and rng.random() < 0.35:
            a, b = rng.choice(qubits, size=2, replace=False)
            stages.append(embed(CNOT, (int(a), int(b)), qubits))
        else:
            q = int(rng.integers(qubits))
            g = H if rng.random() < h_prob else CLASSICAL_1Q[rng.integers(len(CLASSICAL_1Q))]
            stages.append(embed(g, (q,), qubits))
    if initial is None:
        bits = "".join(str(b) for b in rng.integers(0, 2, size=qubits))
        initial = ket(bits)
    return Circuit(qubits, initial, tuple(stages))


def random_family(rng, rank_one=False, pure=None):
    """Random family mixing structured (often consistent) and generic pieces."""
    qubits = int(rng.integers(1, 3))
    dim = 2**qubits
    n = int(rng.integers(1, 4))
    kind = rng.random()
    if kind < 0.4:
        circ = random_classical_circuit(rng, qubits, n)
    else:
        circ = Circuit(qubits, ket("0" * qubits), tuple(random_unitary(rng, dim) for _ in range(n)))
    if pure is None:
        pure = rng.random() < 0.6
    if not pure:
        circ = circ.with_initial(random_density(rng, dim, int(rng.integers(1, min(dim, 4) + 1))))
    elif kind >= 0.4:
        circ = circ.with_initial(random_state(rng, dim))
    insert = {}
    for k in range(n):
        if rng.random() < 0.6:
            s = ProjectorSet.computational(dim) if rng.random() < 0.6 else random_basis_set(rng, dim)
            if not rank_one and rng.random() < 0.3:
                s = random_coarse(rng, s)
            insert[k] = s
    return HistoryFamily.from_circuit(circ, insert)
