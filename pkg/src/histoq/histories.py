"""Families of histories, the coherence functional and consistency checks.

A :class:`HistoryFamily` attaches Schrodinger-picture projector sets to
stages of a :class:`~histoq.quantum.Circuit`; its last set is the final
measurement. Histories are enumerated lexicographically, earliest set most
significant, so the final outcome varies fastest.

Two independent routes compute the coherence matrix ``D(a; b) = Tr{C_a^dag
rho C_b}``: explicit Heisenberg history operators, and branch vectors
propagated set by set. They must agree.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._validation import (
    ConsistencyError,
    GuardExceededError,
    InvalidStateError,
    n_qubits_for,
)
from .quantum import (
    Circuit,
    ProjectorSet,
    density,
    eigensystem,
    gram_schmidt,
    phase_shift_gate,
    pseudopure,
    qft,
)

LEVELS = ("strong", "medium", "weak", "computing")
DEFAULT_EPSILON = 1e-10
ZERO_PROBABILITY = 1e-14
SUPPORT_TOL = 1e-12
MAX_HISTORIES = 10**7
MAX_COHERENCE = 4096
MAX_STRONG_RANK = 4


@dataclass(frozen=True, eq=False)
class HistoryFamily:
    """Initial state, circuit and projector sets at strictly increasing stages.

    ``sets[i]`` acts right after gate ``stages[i]``. The last entry must sit at
    the final stage ``circuit.n_stages``.
    """

    circuit: Circuit
    sets: tuple
    stages: tuple

    def __post_init__(self):
        sets, stages = tuple(self.sets), tuple(int(s) for s in self.stages)
        if len(sets) != len(stages) or not sets:
            raise ValueError("need one stage per projector set and at least the final set")
        if any(b <= a for a, b in zip(stages, stages[1:])):
            raise ValueError(f"stages must be strictly increasing, got {stages}")
        if stages[0] < 0 or stages[-1] != self.circuit.n_stages:
            raise ValueError(
                f"sets must lie in stages 0..{self.circuit.n_stages} with the final set last"
            )
        for s in sets:
            if s.dim != self.circuit.dim:
                raise ValueError("projector set dimension does not match the circuit")
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "stages", stages)
        if self.size > MAX_HISTORIES:
            raise GuardExceededError(f"family has {self.size} histories (> {MAX_HISTORIES})")

    @classmethod
    def from_circuit(cls, circuit, insertions=None, final=None):
        """One-event family of ``circuit`` extended by ``{stage: ProjectorSet}``."""
        insertions = dict(insertions or {})
        for k in insertions:
            if not 0 <= k < circuit.n_stages:
                raise ValueError(
                    f"insertion stage {k} must precede the final stage {circuit.n_stages}"
                )
        order = sorted(insertions)
        sets = [insertions[k] for k in order] + [final if final is not None else circuit.final]
        return cls(circuit, tuple(sets), tuple(order) + (circuit.n_stages,))

    @property
    def dim(self):
        return self.circuit.dim

    @property
    def sizes(self):
        return tuple(s.m for s in self.sets)

    @property
    def size(self):
        return int(np.prod(self.sizes, dtype=np.int64))

    @property
    def n_sets(self):
        return len(self.sets)

    def initial_density(self):
        return self.circuit.initial_density()

    @property
    def rank(self):
        lam, _ = self.support()
        return len(lam)

    @property
    def is_pure(self):
        return self.rank == 1

    def support(self):
        """Nonzero eigenvalues of the initial state and their eigenvectors (columns)."""
        if self.circuit.is_pure:
            return np.ones(1), np.asarray(self.circuit.initial).reshape(-1, 1)
        lam, vecs = eigensystem(self.circuit.initial)
        keep = lam > SUPPORT_TOL
        return lam[keep], vecs[:, keep]

    def multi_index(self, flat):
        return tuple(int(i) for i in np.unravel_index(flat, self.sizes))

    def flat_index(self, alpha):
        alpha = tuple(alpha)
        if len(alpha) != self.n_sets or any(not 0 <= a < m for a, m in zip(alpha, self.sizes)):
            raise IndexError(f"invalid multi-index {alpha} for set sizes {self.sizes}")
        return int(np.ravel_multi_index(alpha, self.sizes))

    def histories(self):
        return itertools.product(*(range(m) for m in self.sizes))

    def with_initial(self, initial):
        return HistoryFamily(self.circuit.with_initial(initial), self.sets, self.stages)

    def with_set(self, index, new_set):
        sets = list(self.sets)
        sets[index] = new_set
        return HistoryFamily(self.circuit, tuple(sets), self.stages)

    def inserted(self, stage, new_set):
        """Family with ``new_set`` added at ``stage`` (before the final set)."""
        if stage in self.stages:
            raise ValueError(f"stage {stage} already holds a set")
        if not 0 <= stage < self.circuit.n_stages:
            raise ValueError(f"insertion stage {stage} must precede the final stage")
        pairs = sorted(zip(self.stages, self.sets), key=lambda p: p[0])
        pairs.append((stage, new_set))
        pairs.sort(key=lambda p: p[0])
        return HistoryFamily(self.circuit, tuple(p[1] for p in pairs), tuple(p[0] for p in pairs))


@dataclass(frozen=True, eq=False)
class CoherenceMatrix:
    """``D[a, b] = D(alpha; beta)`` with flat lexicographic history indices."""

    matrix: np.ndarray
    sizes: tuple

    @property
    def n(self):
        return self.matrix.shape[0]

    def multi_index(self, flat):
        return tuple(int(i) for i in np.unravel_index(flat, self.sizes))

    def flat_index(self, alpha):
        return int(np.ravel_multi_index(tuple(alpha), self.sizes))

    def __getitem__(self, pair):
        a, b = pair
        return self.matrix[self.flat_index(a), self.flat_index(b)]

    def probabilities(self):
        return np.clip(np.diag(self.matrix).real, 0.0, 1.0)


def _listify(x):
    if isinstance(x, (tuple, list, np.ndarray)):
        return [_listify(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    return x


@dataclass
class ConsistencyReport:
    level: str
    passed: bool
    max_violation: float
    epsilon: float
    witnesses: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "level": self.level,
            "passed": bool(self.passed),
            "max_violation": float(self.max_violation),
            "epsilon": float(self.epsilon),
            "witnesses": [_listify(w) for w in self.witnesses],
            "details": self.details,
        }


# ---------------------------------------------------------------------------
# history operators (the operator-chain route)


def heisenberg_projector(family, k, alpha_k):
    """``U^dag P U`` for outcome ``alpha_k`` of set ``k``, ``U`` the evolution up to its stage."""
    if not 0 <= k < family.n_sets:
        raise IndexError(f"set index {k} out of range")
    s = family.sets[k]
    if not 0 <= alpha_k < s.m:
        raise IndexError(f"outcome {alpha_k} out of range for set {k}")
    u = family.circuit.unitary_between(0, family.stages[k])
    return u.conj().T @ s.projectors[alpha_k] @ u


def history_operator(family, alpha):
    """``C_alpha = P1_{a1} P2_{a2} ... Pn_{an}`` in the Heisenberg picture."""
    family.flat_index(alpha)
    c = np.eye(family.dim, dtype=complex)
    for k, a in enumerate(alpha):
        c = c @ heisenberg_projector(family, k, a)
    return c


def _operator_coherence(family, rho):
    ops = [history_operator(family, alpha) for alpha in family.histories()]
    n = len(ops)
    d = np.empty((n, n), dtype=complex)
    left = [c.conj().T @ rho for c in ops]
    for a in range(n):
        for b in range(n):
            d[a, b] = np.trace(left[a] @ ops[b])
    return d


# ---------------------------------------------------------------------------
# branch vectors (the propagation route)


def branch_vectors(family, upto=None, vectors=None):
    """Schrodinger-picture branch vectors, shape ``(r, N, dim)``.

    Row ``alpha`` of component ``i`` is ``P_n U ... P_1 U psi_i`` evaluated at
    the stage of the last included set. ``upto`` truncates after that many
    sets. ``vectors`` overrides the initial eigenvectors (columns).
    """
    if vectors is None:
        _, vectors = family.support()
    upto = family.n_sets if upto is None else upto
    v = np.asarray(vectors, dtype=complex).T[:, None, :]
    stage = 0
    for s, k in zip(family.sets[:upto], family.stages[:upto]):
        u = family.circuit.unitary_between(stage, k)
        v = v @ u.T
        r, m, dim = v.shape
        v = np.einsum("aij,rmj->rmai", s.projectors, v).reshape(r, m * s.m, dim)
        stage = k
    return v


def _branch_coherence(family, weights, vecs):
    v = branch_vectors(family, vectors=vecs)
    return np.einsum("r,rax,rbx->ab", weights, v, v.conj())


def coherence_matrix(family, method="branch", rho=None):
    """Full coherence matrix of ``family``.

    ``method="branch"`` contracts propagated branch vectors;
    ``method="operator"`` evaluates ``Tr{C_a^dag rho C_b}`` with explicit
    history operators. ``rho`` replaces the family's initial state.
    """
    if family.size > MAX_COHERENCE:
        raise GuardExceededError(
            f"coherence matrix of {family.size} histories exceeds the guard {MAX_COHERENCE}"
        )
    if rho is None:
        rho = family.initial_density()
        weights, vecs = family.support()
    else:
        weights, vecs = eigensystem(rho)
        keep = weights > SUPPORT_TOL
        weights, vecs = weights[keep], vecs[:, keep]
    if method == "branch":
        d = _branch_coherence(family, weights, vecs)
    elif method == "operator":
        d = _operator_coherence(family, rho)
    else:
        raise ValueError(f"unknown method {method!r}")
    return CoherenceMatrix(d, family.sizes)


def probabilities(family):
    """Probability of every history, flat lexicographic order."""
    weights, _ = family.support()
    v = branch_vectors(family)
    p = np.einsum("r,rax->a", weights, np.abs(v) ** 2)
    return np.clip(p, 0.0, 1.0)


def probability(family, alpha):
    return float(probabilities(family)[family.flat_index(alpha)])


def marginal(family, set_index):
    """Outcome distribution of one set, summed over all other sets."""
    p = probabilities(family).reshape(family.sizes)
    axes = tuple(i for i in range(family.n_sets) if i != set_index)
    return p.sum(axis=axes)


def _final_blocks(family):
    """Per final outcome: flat indices and the block of the coherence matrix."""
    weights, vecs = family.support()
    v = branch_vectors(family, vectors=vecs)
    m = family.sizes[-1]
    for k in range(m):
        idx = np.arange(k, family.size, m)
        vk = v[:, idx, :] * np.sqrt(weights)[:, None, None]
        flat = vk.transpose(1, 0, 2).reshape(len(idx), -1)
        yield k, idx, flat @ flat.conj().T


def _blocks_from(source):
    if isinstance(source, CoherenceMatrix):
        m = source.sizes[-1]
        for k in range(m):
            idx = np.arange(k, source.n, m)
            yield k, idx, source.matrix[np.ix_(idx, idx)]
    else:
        yield from _final_blocks(source)


def _sizes_of(source):
    return source.sizes


def _offdiag_check(source, epsilon, level, value, n_witnesses=5):
    sizes = _sizes_of(source)
    worst = []
    max_v = 0.0
    for _, idx, block in _blocks_from(source):
        vals = value(block)
        np.fill_diagonal(vals, 0.0)
        if vals.size == 0:
            continue
        iu = np.triu_indices(len(idx), 1)
        upper = vals[iu]
        if upper.size == 0:
            continue
        order = np.argsort(-upper, kind="stable")[:n_witnesses]
        for o in order:
            worst.append((float(upper[o]), int(idx[iu[0][o]]), int(idx[iu[1][o]])))
        max_v = max(max_v, float(upper.max()))
    worst.sort(key=lambda w: -w[0])
    witnesses = [
        (tuple(map(int, np.unravel_index(a, sizes))), tuple(map(int, np.unravel_index(b, sizes))))
        for v, a, b in worst[:n_witnesses]
        if v > 0
    ]
    return ConsistencyReport(level, max_v <= epsilon, max_v, epsilon, witnesses)


def check_weak(source, epsilon=DEFAULT_EPSILON):
    """Largest ``|Re D(a; b)|`` over distinct histories, compared with ``epsilon``."""
    return _offdiag_check(source, epsilon, "weak", lambda b: np.abs(b.real))


def check_medium(source, epsilon=DEFAULT_EPSILON):
    """Largest ``|D(a; b)|`` over distinct histories, compared with ``epsilon``."""
    return _offdiag_check(source, epsilon, "medium", lambda b: np.abs(b))


def computing_sums(source):
    """For each final outcome ``k``, the sum of ``Re D`` over unordered pairs of distinct
    histories ending in ``k``."""
    if isinstance(source, HistoryFamily):
        # block sum is |sum_a v_a|^2 and the trace sum_a |v_a|^2; no full block needed
        weights, vecs = source.support()
        v = branch_vectors(source, vectors=vecs)
        m = source.sizes[-1]
        v = v.reshape(v.shape[0], -1, m, v.shape[-1])
        total = np.einsum("r,rkx->k", weights, np.abs(v.sum(axis=1)) ** 2)
        trace = np.einsum("r,rakx->k", weights, np.abs(v) ** 2)
        return 0.5 * (total - trace)
    sums = []
    for _, _, block in _blocks_from(source):
        re = block.real
        sums.append(0.5 * (re.sum() - np.trace(re)))
    return np.array(sums)


def check_computing(source, epsilon=DEFAULT_EPSILON):
    """One condition per final outcome; the family's last set must be the final measurement."""
    sums = computing_sums(source)
    worst = int(np.argmax(np.abs(sums))) if sums.size else 0
    max_v = float(np.abs(sums).max()) if sums.size else 0.0
    return ConsistencyReport(
        "computing",
        max_v <= epsilon,
        max_v,
        epsilon,
        [worst] if max_v > 0 else [],
        {"per_outcome": [float(s) for s in sums], "conditions": int(sums.size)},
    )


def check_strong(family, epsilon=DEFAULT_EPSILON):
    """Existence of mutually orthogonal record projectors ``R_a`` with ``C_a^dag rho = R_a rho``.

    With ``W_a`` the branch vectors of every support eigenvector ``psi_i``, a
    projector ``R_a`` with ``R_a psi_i = W_a[i]`` exists iff
    ``W_a^dag W_a = Psi^dag W_a``; records for distinct histories are
    orthogonal iff ``W_a^dag W_b = 0``. Both residuals must stay within
    ``epsilon``.
    """
    if not isinstance(family, HistoryFamily):
        raise TypeError("strong consistency needs the family, not only its coherence matrix")
    weights, vecs = family.support()
    if len(weights) > MAX_STRONG_RANK:
        raise ConsistencyError(
            f"strong check supports rank <= {MAX_STRONG_RANK}, initial state has rank {len(weights)}"
        )
    if family.size * len(weights) > MAX_COHERENCE:
        raise GuardExceededError("family too large for the strong-consistency check")
    v = branch_vectors(family, vectors=vecs)  # (r, N, dim) at the final stage
    u = family.circuit.unitary_between(0, family.stages[-1])
    psi_t = u @ vecs  # support carried to the same stage; inner products are invariant
    w = np.transpose(v, (1, 2, 0))  # (N, dim, r)
    gram_self = np.einsum("axi,axj->aij", w.conj(), w)
    overlap = np.einsum("xi,axj->aij", psi_t.conj(), w)
    record = np.abs(gram_self - overlap).max(axis=(1, 2))
    flat = v.transpose(1, 0, 2).reshape(family.size * len(weights), -1)
    cross = np.abs(flat.conj() @ flat.T).reshape(family.size, len(weights), family.size, len(weights))
    cross = cross.max(axis=(1, 3))
    np.fill_diagonal(cross, 0.0)
    rec_v = float(record.max())
    orth_v = float(cross.max())
    max_v = max(rec_v, orth_v)
    witnesses = []
    if orth_v > 0:
        a, b = np.unravel_index(int(np.argmax(cross)), cross.shape)
        witnesses.append((family.multi_index(a), family.multi_index(b)))
    return ConsistencyReport(
        "strong",
        max_v <= epsilon,
        max_v,
        epsilon,
        witnesses,
        {"record_residual": rec_v, "orthogonality_residual": orth_v},
    )


def check(source, level, epsilon=DEFAULT_EPSILON):
    level = level.lower()
    if level == "weak":
        return check_weak(source, epsilon)
    if level == "medium":
        return check_medium(source, epsilon)
    if level == "computing":
        return check_computing(source, epsilon)
    if level == "strong":
        return check_strong(source, epsilon)
    raise ValueError(f"unknown consistency level {level!r}; expected one of {LEVELS}")


def check_all(family, epsilon=DEFAULT_EPSILON):
    """Reports for every level; strong is skipped (``None``) above the supported rank."""
    out = {}
    for level in LEVELS:
        if level == "strong" and (family.rank > MAX_STRONG_RANK or family.size * family.rank > MAX_COHERENCE):
            out[level] = None
            continue
        out[level] = check(family, level, epsilon)
    return out


def count_nonzero_histories(family, epsilon=ZERO_PROBABILITY):
    """Number of histories with probability above ``epsilon``."""
    return int(np.sum(probabilities(family) > epsilon))


# ---------------------------------------------------------------------------
# bound constructions


def aligned_eigensystem(rho):
    """Eigen-decomposition with eigenvectors permuted to best match ``|0>, |1>, ...``.

    For a density matrix diagonal in the computational basis this puts ``|j>``
    in column ``j``.
    """
    lam, vecs = eigensystem(rho)
    _, order = linear_sum_assignment(-np.abs(vecs) ** 2)
    return lam[order], vecs[:, order]


def _circuit_for(rho, stages):
    dim = rho.shape[0]
    q = n_qubits_for(dim) if dim & (dim - 1) == 0 else None
    lam, vecs = eigensystem(rho)
    initial = vecs[:, 0] if np.sum(lam > SUPPORT_TOL) == 1 else rho
    return Circuit(q, initial, tuple(stages))


def build_diosi_family(rho):
    """Two-event family reaching ``rank * dim`` nonzero medium-consistent histories.

    The first set is the eigenbasis of ``rho`` at stage 0; one gate maps
    eigenvector ``j`` to the Fourier state ``F|j>`` and the computational basis
    is measured.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = density(rho)
    _, vecs = aligned_eigensystem(rho)
    dim = rho.shape[0]
    gate = qft(dim) @ vecs.conj().T
    circuit = _circuit_for(rho, [gate])
    return HistoryFamily(circuit, (ProjectorSet.from_basis(vecs), circuit.final), (0, 1))


def build_weak_bound_family(dim, rho=None, initial_index=1):
    """Three-event family (eigenbasis, Fourier, shifted Fourier): weak, not medium.

    ``rho`` defaults to the basis state ``|initial_index>``.
    """
    if dim < 2 or dim % 2:
        raise ValueError(f"weak-bound construction needs an even dimension, got {dim}")
    if rho is None:
        rho = np.zeros((dim, dim), dtype=complex)
        rho[initial_index, initial_index] = 1.0
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = density(rho)
    _, vecs = aligned_eigensystem(rho)
    gates = [qft(dim) @ vecs.conj().T, phase_shift_gate(dim)]
    circuit = _circuit_for(rho, gates)
    comp = ProjectorSet.computational(dim)
    return HistoryFamily(circuit, (ProjectorSet.from_basis(vecs), comp, circuit.final), (0, 1, 2))


# ---------------------------------------------------------------------------
# coarse and fine graining


def coarse_grain(pset, partition):
    """Merge outcomes of ``pset`` group by group."""
    return pset.coarse_grain(partition)


def fine_grain(family, epsilon=DEFAULT_EPSILON):
    """Refine every set of a medium-consistent pure-state family to rank-1 projectors.

    Sets are processed from the last to the first. In each outcome subspace the
    normalized branch vectors (largest probability first) are completed to an
    orthonormal basis of the subspace by Gram-Schmidt of the projected
    computational basis.

    Raises
    ------
    InvalidStateError
        If the initial state is mixed.
    ConsistencyError
        If the family is not medium consistent within ``epsilon``.
    """
    if not family.is_pure:
        raise InvalidStateError("fine graining requires a pure initial state")
    rep = check_medium(family, epsilon)
    if not rep.passed:
        raise ConsistencyError(f"family is not medium consistent (violation {rep.max_violation:.3e})")
    dim = family.dim
    eye = np.eye(dim, dtype=complex)
    sets = list(family.sets)
    for s_idx in range(family.n_sets - 1, -1, -1):
        pset = family.sets[s_idx]
        v = branch_vectors(family, upto=s_idx + 1)[0]  # (N_prefix * m, dim)
        v = v.reshape(-1, pset.m, dim)
        vectors, labels = [], []
        for a in range(pset.m):
            branches = v[:, a, :]
            norms = np.sum(np.abs(branches) ** 2, axis=1)
            live = np.flatnonzero(norms >= ZERO_PROBABILITY)
            live = live[np.argsort(-norms[live], kind="stable")]
            proj = pset.projectors[a]
            nu = gram_schmidt(branches[live].T) if live.size else np.zeros((dim, 0), complex)
            rest = gram_schmidt(proj @ eye, against=nu)
            block = np.column_stack([nu, rest])
            if block.shape[1] != pset.ranks[a]:
                raise ConsistencyError(f"could not refine outcome {a} of set {s_idx}")
            vectors.append(block)
            labels.extend(f"{pset.labels[a]}.{i}" for i in range(block.shape[1]))
        sets[s_idx] = ProjectorSet.from_basis(np.column_stack(vectors), tuple(labels))
    return HistoryFamily(family.circuit, tuple(sets), family.stages)


def refinement_groups(coarse, fine):
    """Indices of ``fine`` outcomes grouped by the ``coarse`` outcome they refine."""
    groups = [[] for _ in range(coarse.m)]
    for j, p in enumerate(fine.projectors):
        overlaps = [np.trace(c @ p).real for c in coarse.projectors]
        groups[int(np.argmax(overlaps))].append(j)
    return groups


# ---------------------------------------------------------------------------
# extensions


def _inserted_position(base, extended):
    if extended.n_sets != base.n_sets + 1 or extended.circuit.n_stages != base.circuit.n_stages:
        raise ValueError("extended family must add exactly one set to the base family")
    for p in range(extended.n_sets - 1):
        stages = extended.stages[:p] + extended.stages[p + 1:]
        sets = extended.sets[:p] + extended.sets[p + 1:]
        if stages == base.stages and all(a == b for a, b in zip(sets, base.sets)):
            return p
    raise ValueError("extended family is not the base family plus one inserted set before the final one")


def is_trivial_extension(base, extended, epsilon=ZERO_PROBABILITY):
    """True iff every nonzero base history allows at most one nonzero inserted outcome."""
    p = _inserted_position(base, extended)
    probs = probabilities(extended).reshape(extended.sizes)
    probs = np.moveaxis(probs, p, -1).reshape(-1, extended.sizes[p])
    base_probs = probabilities(base)
    live = base_probs > epsilon
    nonzero = np.sum(probs > epsilon, axis=1)
    return bool(np.all(nonzero[live] <= 1))


def check_pseudopure_family(family, nu, epsilon=DEFAULT_EPSILON):
    """Computing consistency of ``family`` rebuilt on a pseudopure initial state.

    The coherence matrix is also checked against its split
    ``(1 - nu)/dim * D_identity + nu * D_pure``; for two-event families the
    identity part must be diagonal, and in general its computing sums vanish.
    """
    if not family.is_pure:
        raise InvalidStateError("the pseudopure check starts from a pure-state family")
    psi = family.support()[1][:, 0]
    rho = pseudopure(psi, nu)
    mixed = family.with_initial(rho)
    report = check_computing(mixed, epsilon)
    d_mixed = coherence_matrix(mixed).matrix
    d_pure = coherence_matrix(family).matrix
    d_id = coherence_matrix(family, rho=np.eye(family.dim) / family.dim).matrix * family.dim
    dim = family.dim
    split_err = float(np.abs(d_mixed - ((1 - nu) / dim * d_id + nu * d_pure)).max())
    off = d_id - np.diag(np.diag(d_id))
    id_sums = computing_sums(CoherenceMatrix(d_id, family.sizes))
    report.details.update(
        {
            "nu": float(nu),
            "decomposition_error": split_err,
            "identity_offdiagonal": float(np.abs(off).max()) if off.size else 0.0,
            "identity_computing_sum": float(np.abs(id_sums).max()) if id_sums.size else 0.0,
            "two_event": family.n_sets == 2,
        }
    )
    return report
