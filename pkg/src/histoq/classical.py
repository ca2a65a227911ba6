"""Stochastic chains compiled from consistent families of rank-1 sets.

When a family is computing-consistent, replacing every unitary between two
measured stages by the matrix of squared transition amplitudes reproduces
the quantum final distribution. Chains use column-stochastic matrices acting
on column probability vectors.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import ConsistencyError, DimensionError, InvalidProjectorSetError
from .histories import DEFAULT_EPSILON, HistoryFamily, check_computing
from .quantum import ProjectorSet, density

STOCHASTIC_TOL = 1e-10


def _basis_matrix(basis):
    if isinstance(basis, ProjectorSet):
        if not basis.is_fine:
            raise InvalidProjectorSetError("transition matrices need rank-1 projector sets")
        return basis.vectors(), tuple(basis.labels)
    mat = np.asarray(basis, dtype=complex)
    if mat.ndim != 2:
        raise DimensionError("basis must be a matrix with basis vectors as columns")
    if np.abs(mat.conj().T @ mat - np.eye(mat.shape[1])).max() > 1e-10:
        raise InvalidProjectorSetError("basis vectors are not orthonormal")
    return mat, tuple(str(i) for i in range(mat.shape[1]))


@dataclass(frozen=True, eq=False)
class Distribution:
    probabilities: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float).reshape(-1)
        if np.any(p < -STOCHASTIC_TOL) or abs(p.sum() - 1.0) > STOCHASTIC_TOL:
            raise ValueError(f"not a probability distribution (sum {p.sum()!r})")
        object.__setattr__(self, "probabilities", p)
        labels = tuple(self.labels) or tuple(str(i) for i in range(len(p)))
        if len(labels) != len(p):
            raise ValueError("one label per outcome required")
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.probabilities)

    def to_dict(self):
        return {"labels": list(self.labels), "probabilities": self.probabilities.tolist()}


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """``entries[i, j]``: probability of outcome ``i`` given input ``j``."""

    entries: np.ndarray
    in_labels: tuple = ()
    out_labels: tuple = ()

    def __post_init__(self):
        t = np.asarray(self.entries, dtype=float)
        if t.ndim != 2:
            raise DimensionError("transition matrix must be 2-dimensional")
        if np.any(t < -STOCHASTIC_TOL) or np.any(t > 1 + STOCHASTIC_TOL):
            raise ValueError("transition entries must lie in [0, 1]")
        err = np.abs(t.sum(axis=0) - 1.0).max()
        if err > STOCHASTIC_TOL:
            raise ValueError(f"columns do not sum to 1 (max error {err:.3e})")
        object.__setattr__(self, "entries", t)

    @property
    def shape(self):
        return self.entries.shape

    def is_doubly_stochastic(self, tol=STOCHASTIC_TOL):
        t = self.entries
        return t.shape[0] == t.shape[1] and np.abs(t.sum(axis=1) - 1.0).max() <= tol


def transition_matrix(u, basis_in, basis_out):
    """``T[i, j] = |<out_i|U|in_j>|^2`` for orthonormal bases (columns or rank-1 sets)."""
    bi, li = _basis_matrix(basis_in)
    bo, lo = _basis_matrix(basis_out)
    u = np.asarray(u, dtype=complex)
    if u.shape != (bo.shape[0], bi.shape[0]):
        raise DimensionError(f"gate shape {u.shape} does not match bases ({bo.shape[0]}, {bi.shape[0]})")
    return TransitionMatrix(np.abs(bo.conj().T @ u @ bi) ** 2, li, lo)


@dataclass(frozen=True, eq=False)
class TransitionChain:
    """Initial distribution at ``stages[0]`` and one matrix per later set."""

    initial: Distribution
    matrices: tuple
    stages: tuple = ()

    def __post_init__(self):
        size = len(self.initial)
        for k, t in enumerate(self.matrices):
            if t.shape[1] != size:
                raise DimensionError(f"matrix {k} expects {t.shape[1]} inputs, got {size}")
            size = t.shape[0]
        object.__setattr__(self, "matrices", tuple(self.matrices))
        object.__setattr__(self, "stages", tuple(self.stages))

    def distributions(self):
        """Distribution after each step, starting with the initial one."""
        p = self.initial.probabilities
        out = [self.initial]
        for t in self.matrices:
            p = t.entries @ p
            out.append(Distribution(p, t.out_labels))
        return out

    def to_dict(self):
        return {
            "format": 1,
            "stages": list(self.stages),
            "initial": self.initial.to_dict(),
            "matrices": [
                {"entries": t.entries.tolist(), "in_labels": list(t.in_labels), "out_labels": list(t.out_labels)}
                for t in self.matrices
            ],
        }


def run_chain(chain):
    """``T_n ... T_1`` applied to the initial distribution."""
    return chain.distributions()[-1]


def _born(rho, pset):
    return np.clip(np.einsum("aij,ji->a", pset.projectors, rho).real, 0.0, 1.0)


def stage_marginals(family):
    """Born distribution of every set on the unmeasured state at its stage."""
    out = []
    for s, k in zip(family.sets, family.stages):
        rho = family.circuit.state_at(k)
        if rho.ndim == 1:
            rho = density(rho)
        out.append(Distribution(_born(rho, s) / _born(rho, s).sum(), s.labels))
    return out


def compile_chain(family, epsilon=DEFAULT_EPSILON, require_consistent=True):
    """Chain of a family whose sets are all rank-1.

    The chain starts from the Born distribution of the first set; the gates
    between consecutive sets are composed into one transition matrix. With
    ``require_consistent`` the family must pass the computing check.
    """
    if not isinstance(family, HistoryFamily):
        raise TypeError("compile_chain expects a HistoryFamily")
    for k, s in zip(family.stages, family.sets):
        if not s.is_fine:
            raise InvalidProjectorSetError(f"set at stage {k} is not rank-1")
    if require_consistent:
        rep = check_computing(family, epsilon)
        if not rep.passed:
            raise ConsistencyError(
                f"family fails the computing check (violation {rep.max_violation:.3e} > {epsilon:g})"
            )
    initial = stage_marginals(family)[0]
    mats = []
    for a in range(1, family.n_sets):
        u = family.circuit.unitary_between(family.stages[a - 1], family.stages[a])
        mats.append(transition_matrix(u, family.sets[a - 1], family.sets[a]))
    return TransitionChain(initial, tuple(mats), family.stages)


@dataclass
class SumRuleReport:
    """Quantum marginals against chain-propagated distributions.

    ``passed`` compares the final stage, where the equality is guaranteed for
    computing-consistent families. ``all_stages_agree`` also requires the
    intermediate stages to match.
    """

    passed: bool
    max_violation: float
    epsilon: float
    stages: tuple
    quantum: list
    classical: list
    stage_violations: list = field(default_factory=list)

    @property
    def all_stages_agree(self):
        return all(v <= self.epsilon for v in self.stage_violations)

    def to_dict(self):
        return {
            "passed": self.passed,
            "max_violation": self.max_violation,
            "epsilon": self.epsilon,
            "all_stages_agree": self.all_stages_agree,
            "stages": list(self.stages),
            "quantum": [d.probabilities.tolist() for d in self.quantum],
            "classical": [d.probabilities.tolist() for d in self.classical],
            "stage_violations": self.stage_violations,
        }


def verify_sum_rule(circuit, family=None, epsilon=1e-12):
    """Compare ``P_i(t_k) = sum_j T_ij P_j(t_{k-1})`` with the quantum marginals."""
    if family is None:
        family = HistoryFamily.from_circuit(circuit)
    if family.circuit is not circuit and family.circuit.dim != circuit.dim:
        raise DimensionError("family and circuit dimensions differ")
    chain = compile_chain(family, require_consistent=False)
    quantum = stage_marginals(family)
    classical = chain.distributions()
    viol = [float(np.abs(q.probabilities - c.probabilities).max()) for q, c in zip(quantum, classical)]
    return SumRuleReport(viol[-1] <= epsilon, viol[-1], epsilon, family.stages, quantum, classical, viol)
