"""Dense linear algebra for small qubit registers.

States, gates, projector sets, local measurement bases and circuits. Qubit 0
is the most significant bit of a basis index, so ``|01>`` is index 1 of 4.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    OPERATOR_TOL,
    STATE_TOL,
    DimensionError,
    InvalidProjectorSetError,
    InvalidStateError,
    check_density_matrix,
    check_qubit_subset,
    check_square,
    check_state_vector,
    check_unitary,
    n_qubits_for,
)

SQRT2 = np.sqrt(2.0)
ZERO_AMPLITUDE = 1e-12


# ---------------------------------------------------------------------------
# states and basic operations


def ket(bits):
    """Computational basis state from a bitstring such as ``"01"``."""
    if not bits or any(b not in "01" for b in bits):
        raise ValueError(f"invalid bitstring {bits!r}")
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[int(bits, 2)] = 1.0
    return psi


def density(psi):
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def is_density_like(s):
    return np.ndim(s) == 2


def apply_unitary(u, s):
    """Apply ``u`` to a state vector or, by conjugation, to a density matrix.

    Raises
    ------
    DimensionError
        If ``u`` and ``s`` have different dimensions.
    NotUnitaryError
        If ``u`` is not unitary within 1e-10.
    """
    u = check_unitary(u)
    s = np.asarray(s, dtype=complex)
    if s.shape[0] != u.shape[0]:
        raise DimensionError(f"operator is {u.shape[0]}-dimensional, state is {s.shape[0]}-dimensional")
    if is_density_like(s):
        return u @ s @ u.conj().T
    return u @ s


def canonical_phase(vec, tol=ZERO_AMPLITUDE):
    """Rotate the global phase so the first non-negligible amplitude is real positive."""
    vec = np.asarray(vec, dtype=complex)
    idx = np.flatnonzero(np.abs(vec) > tol)
    if idx.size == 0:
        return vec.copy()
    a = vec[idx[0]]
    return vec * (abs(a) / a)


def canonical_basis(vectors):
    """Apply :func:`canonical_phase` to each column."""
    out = np.array(vectors, dtype=complex)
    for j in range(out.shape[1]):
        out[:, j] = canonical_phase(out[:, j])
    return out


def gram_schmidt(candidates, tol=1e-10, against=None):
    """Orthonormalize columns of ``candidates`` in order, skipping dependent ones."""
    basis = [] if against is None else [against[:, j] for j in range(against.shape[1])]
    start = len(basis)
    for j in range(candidates.shape[1]):
        v = candidates[:, j].astype(complex)
        for _ in range(2):
            for b in basis:
                v = v - np.vdot(b, v) * b
        n = np.linalg.norm(v)
        if n > tol:
            basis.append(v / n)
    if len(basis) == start:
        return np.zeros((candidates.shape[0], 0), dtype=complex)
    return np.column_stack(basis[start:])


def eigensystem(rho, tol=STATE_TOL, degeneracy_tol=1e-10):
    """Eigenvalues (descending) and a deterministic orthonormal eigenbasis.

    Inside a degenerate eigenspace the vectors are fixed by Gram-Schmidt of the
    projected computational basis in index order; each vector then gets the
    canonical phase. Eigenvalues in ``[-tol, 0)`` are clamped to zero.
    """
    rho = check_square(rho, "density matrix")
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    if w.min() < -tol:
        raise InvalidStateError(f"density matrix has eigenvalue {w.min():.3e} < 0")
    w = np.clip(w, 0.0, None)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    dim = rho.shape[0]
    vals, vecs = [], []
    i = 0
    while i < dim:
        j = i + 1
        while j < dim and abs(w[j] - w[i]) <= degeneracy_tol:
            j += 1
        block = v[:, i:j]
        proj = block @ block.conj().T
        fixed = gram_schmidt(proj @ np.eye(dim))
        if fixed.shape[1] != j - i:
            fixed = block
        vals.extend([w[i:j].mean()] * (j - i))
        vecs.append(fixed)
        i = j
    return np.array(vals), canonical_basis(np.column_stack(vecs))


def rank_of(rho, tol=STATE_TOL):
    return int(np.sum(np.linalg.eigvalsh(rho) > tol))


def pseudopure(psi, nu):
    """The mixture ``(1 - nu)/dim * 1 + nu |psi><psi|``."""
    if not 0.0 <= nu <= 1.0:
        raise ValueError(f"nu must lie in [0, 1], got {nu}")
    psi = check_state_vector(psi)
    dim = psi.shape[0]
    return (1.0 - nu) / dim * np.eye(dim, dtype=complex) + nu * density(psi)


def partial_trace(rho, keep):
    """Reduced density matrix on the qubits listed in ``keep`` (in that order)."""
    rho = check_square(rho, "density matrix")
    q = n_qubits_for(rho.shape[0])
    keep = check_qubit_subset(keep, q)
    drop = [k for k in range(q) if k not in keep]
    t = rho.reshape((2,) * (2 * q))
    # trace pairs of axes, highest index first so earlier axis numbers stay valid
    for k in sorted(drop, reverse=True):
        nq = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=k + nq)
    remaining = sorted(keep)
    perm = [remaining.index(k) for k in keep]
    nk = len(keep)
    t = t.transpose(perm + [p + nk for p in perm])
    d = 2**nk
    return t.reshape(d, d)


def von_neumann_entropy(rho, base=np.e):
    w = np.linalg.eigvalsh(check_square(rho))
    w = w[w > 1e-15]
    return float(max(0.0, -np.sum(w * np.log(w)) / np.log(base)))


def entanglement_entropy(psi, cut, base=2):
    """Entropy of the reduced state of ``psi`` on the qubits in ``cut``."""
    if base not in (2, np.e, "e"):
        raise ValueError("base must be 2 or e")
    base = np.e if base == "e" else base
    psi = check_state_vector(psi)
    return von_neumann_entropy(partial_trace(density(psi), cut), base=base)


# ---------------------------------------------------------------------------
# gates

I2 = np.eye(2, dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / SQRT2
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
S = np.diag([1, 1j]).astype(complex)
T = np.diag([1, np.exp(1j * np.pi / 4)]).astype(complex)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CZ = np.diag([1, 1, 1, -1]).astype(complex)


def qft(dim):
    """Fourier matrix with ``F[y, x] = exp(2 pi i x y / dim) / sqrt(dim)``."""
    if dim < 1:
        raise ValueError("Fourier transform needs dimension >= 1")
    idx = np.arange(dim)
    return np.exp(2j * np.pi * np.outer(idx, idx) / dim) / np.sqrt(dim)


def phase_shift_gate(dim):
    """Map ``|j> -> (i|j> + |(j + dim/2) mod dim>)/sqrt(2)``."""
    if dim < 2 or dim % 2:
        raise ValueError(f"phase-shift gate needs an even dimension, got {dim}")
    g = np.zeros((dim, dim), dtype=complex)
    for j in range(dim):
        g[j, j] = 1j / SQRT2
        g[(j + dim // 2) % dim, j] = 1 / SQRT2
    return g


def gate_U():
    """The two-qubit gate of the worked example, columns are images of |00>..|11>."""
    r = SQRT2
    cols = [
        [1, 0, 0, 0],
        [0, 0.5, r / 2, 0.5],
        [0, 0.5, -r / 2, 0.5],
        [0, 1 / r, 0, -1 / r],
    ]
    return np.array(cols, dtype=complex).T


def bell_states():
    """``(Phi+, Psi+, Phi-, Psi-)``, the images of |00>, |01>, |10>, |11> under CNOT.(H x 1)."""
    r = SQRT2
    return (
        np.array([1, 0, 0, 1], dtype=complex) / r,
        np.array([0, 1, 1, 0], dtype=complex) / r,
        np.array([1, 0, 0, -1], dtype=complex) / r,
        np.array([0, 1, -1, 0], dtype=complex) / r,
    )


BELL_LABELS = ("Phi+", "Psi+", "Phi-", "Psi-")


def embed(gate, targets, qubits):
    """Lift a gate on ``targets`` to the full ``qubits``-qubit register."""
    gate = check_square(gate, "gate")
    targets = check_qubit_subset(targets, qubits)
    k = len(targets)
    if gate.shape[0] != 2**k:
        raise DimensionError(f"gate of dimension {gate.shape[0]} cannot act on {k} qubits")
    if targets == tuple(range(qubits)):
        return gate.copy()
    rest = [q for q in range(qubits) if q not in targets]
    order = list(targets) + rest
    full = np.kron(gate, np.eye(2 ** len(rest), dtype=complex))
    t = full.reshape((2,) * (2 * qubits))
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [qubits + i for i in inv])
    return t.reshape(2**qubits, 2**qubits)


def named_gate(name, n_targets):
    """Look up a catalog gate acting on ``n_targets`` qubits."""
    fixed = {"I": I2, "H": H, "X": X, "Y": Y, "Z": Z, "S": S, "T": T, "CNOT": CNOT, "CZ": CZ}
    name = name.upper()
    if name in fixed:
        g = fixed[name]
    elif name == "QFT":
        g = qft(2**n_targets)
    elif name == "PHASE_SHIFT":
        g = phase_shift_gate(2**n_targets)
    elif name == "U_PAPER":
        g = gate_U()
    else:
        raise KeyError(f"unknown gate {name!r}")
    if g.shape[0] != 2**n_targets:
        raise DimensionError(f"gate {name} acts on {int(np.log2(g.shape[0]))} qubits, got {n_targets} targets")
    return g


GATE_NAMES = ("I", "H", "X", "Y", "Z", "S", "T", "CNOT", "CZ", "QFT", "PHASE_SHIFT", "U_PAPER")


# ---------------------------------------------------------------------------
# projector sets


def _freeze(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProjectorSet:
    """Exhaustive set of mutually exclusive projectors, Schrodinger picture.

    ``projectors`` has shape ``(m, dim, dim)``. Construction validates
    idempotence, Hermiticity, exclusivity and completeness within 1e-10.
    """

    projectors: np.ndarray
    labels: tuple = ()
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        p = np.asarray(self.projectors, dtype=complex)
        if p.ndim != 3 or p.shape[1] != p.shape[2]:
            raise DimensionError(f"projectors must have shape (m, dim, dim), got {p.shape}")
        object.__setattr__(self, "projectors", _freeze(p))
        labels = tuple(self.labels) if self.labels else tuple(str(i) for i in range(p.shape[0]))
        if len(labels) != p.shape[0]:
            raise ValueError("one label per projector required")
        object.__setattr__(self, "labels", labels)
        if self.validate:
            self.check()

    def check(self, tol=OPERATOR_TOL):
        p = self.projectors
        eye = np.eye(self.dim)
        if np.max(np.abs(p.sum(axis=0) - eye)) > tol:
            raise InvalidProjectorSetError("projectors do not sum to identity")
        for a in range(self.m):
            if np.max(np.abs(p[a] - p[a].conj().T)) > tol:
                raise InvalidProjectorSetError(f"projector {a} is not Hermitian")
            for b in range(self.m):
                prod = p[a] @ p[b]
                target = p[a] if a == b else 0.0
                if np.max(np.abs(prod - target)) > tol:
                    raise InvalidProjectorSetError(f"P{a} P{b} != delta P{a}")
        return self

    @property
    def m(self):
        return self.projectors.shape[0]

    @property
    def dim(self):
        return self.projectors.shape[1]

    @property
    def ranks(self):
        return tuple(int(round(np.trace(p).real)) for p in self.projectors)

    @property
    def is_fine(self):
        return all(r == 1 for r in self.ranks)

    def vectors(self):
        """Canonical-phase basis vectors (columns) of a rank-1 set."""
        if not self.is_fine:
            raise InvalidProjectorSetError("basis vectors exist only for rank-1 sets")
        cols = []
        for p in self.projectors:
            j = int(np.argmax(np.abs(np.diag(p))))
            v = p[:, j] / np.sqrt(p[j, j].real)
            cols.append(canonical_phase(v))
        return np.column_stack(cols)

    @classmethod
    def from_basis(cls, vectors, labels=(), validate=True):
        """Rank-1 set from the columns of an orthonormal ``vectors`` matrix."""
        v = np.asarray(vectors, dtype=complex)
        projs = np.einsum("ia,ja->aij", v, v.conj())
        return cls(projs, labels, validate=validate)

    @classmethod
    def computational(cls, dim):
        q = n_qubits_for(dim) if dim & (dim - 1) == 0 else None
        labels = tuple(format(i, f"0{q}b") for i in range(dim)) if q else ()
        return cls.from_basis(np.eye(dim), labels)

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim, dtype=complex)[None], ("1",))

    def coarse_grain(self, partition):
        """Sum projectors over each group of ``partition`` (lists of outcome indices)."""
        groups = [tuple(int(i) for i in g) for g in partition]
        flat = sorted(i for g in groups for i in g)
        if flat != list(range(self.m)) or any(len(g) == 0 for g in groups):
            raise ValueError(f"partition {groups} does not cover outcomes 0..{self.m - 1} disjointly")
        projs = [self.projectors[list(g)].sum(axis=0) for g in groups]
        labels = ["+".join(self.labels[i] for i in g) for g in groups]
        return ProjectorSet(np.array(projs), tuple(labels))

    def conjugated(self, u):
        """``{u^dag P u}``: the set seen through the unitary ``u``."""
        projs = np.einsum("ji,ajk,kl->ail", u.conj(), self.projectors, u)
        return ProjectorSet(projs, self.labels, validate=False)

    def __eq__(self, other):
        return (
            isinstance(other, ProjectorSet)
            and self.projectors.shape == other.projectors.shape
            and np.allclose(self.projectors, other.projectors, atol=1e-12)
        )

    __hash__ = None


# ---------------------------------------------------------------------------
# local measurement bases


def bloch_pair(theta, phi):
    """Orthonormal qubit basis ``(|n>, |-n>)`` for Bloch direction ``(theta, phi)``."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    up = np.array([c, np.exp(1j * phi) * s], dtype=complex)
    down = np.array([-np.exp(-1j * phi) * s, c], dtype=complex)
    return canonical_basis(np.column_stack([up, down]))


def max_joint_block(qubits):
    return int(np.ceil(np.log2(qubits))) + 1 if qubits > 1 else 1


@dataclass(frozen=True, eq=False)
class LocalBasis:
    """Product measurement basis, optionally with small joint blocks.

    ``angles[q]`` is the Bloch direction ``(theta, phi)`` of qubit ``q``, or
    ``None`` when the qubit belongs to a joint block. ``blocks`` holds pairs
    ``(qubit_tuple, basis_matrix)`` with the basis vectors as columns.
    Outcomes are ordered lexicographically over factors sorted by their first
    qubit.
    """

    qubits: int
    angles: tuple
    blocks: tuple = ()
    name: str = ""

    def __post_init__(self):
        angles = tuple(None if a is None else (float(a[0]), float(a[1])) for a in self.angles)
        if len(angles) != self.qubits:
            raise ValueError(f"need one angle pair per qubit, got {len(angles)} for {self.qubits}")
        object.__setattr__(self, "angles", angles)
        blocks = []
        covered = set()
        for qs, mat in self.blocks:
            qs = check_qubit_subset(qs, self.qubits)
            mat = check_unitary(mat, name="joint block basis")
            if mat.shape[0] != 2 ** len(qs):
                raise DimensionError("joint block basis has the wrong dimension")
            if len(qs) > max_joint_block(self.qubits):
                raise ValueError(
                    f"joint block of {len(qs)} qubits exceeds the cap {max_joint_block(self.qubits)}"
                )
            covered.update(qs)
            blocks.append((qs, _freeze(mat)))
        object.__setattr__(self, "blocks", tuple(blocks))
        for q, a in enumerate(angles):
            if (a is None) != (q in covered):
                raise ValueError(f"qubit {q} must have angles exactly when it is outside every block")

    @property
    def dim(self):
        return 2**self.qubits

    @property
    def is_local(self):
        return not self.blocks

    @property
    def largest_block(self):
        return max([len(qs) for qs, _ in self.blocks], default=1)

    @classmethod
    def from_angles(cls, angles, name=""):
        return cls(len(angles), tuple(angles), (), name)

    @classmethod
    def computational(cls, qubits):
        return cls(qubits, ((0.0, 0.0),) * qubits, (), "computational")

    @classmethod
    def bell(cls, qubits=2, pair=(0, 1), rest=None):
        angles = []
        for q in range(qubits):
            if q in pair:
                angles.append(None)
            else:
                angles.append((0.0, 0.0) if rest is None else rest[q])
        mat = np.column_stack(bell_states())
        return cls(qubits, tuple(angles), ((tuple(pair), mat),), "bell")

    def factors(self):
        """``(qubits, basis)`` per factor, sorted by first qubit."""
        fs = [((q,), bloch_pair(*a)) for q, a in enumerate(self.angles) if a is not None]
        fs += [(qs, np.asarray(m)) for qs, m in self.blocks]
        return sorted(fs, key=lambda f: f[0][0])

    def vectors(self):
        """Full ``dim x dim`` matrix whose columns are the product basis vectors."""
        fs = self.factors()
        mat = np.ones((1, 1), dtype=complex)
        order = []
        for qs, m in fs:
            mat = np.kron(mat, m)
            order.extend(qs)
        q = self.qubits
        t = mat.reshape((2,) * q + (self.dim,))
        inv = np.argsort(order)
        t = t.transpose(list(inv) + [q])
        return canonical_basis(t.reshape(self.dim, self.dim))

    def projector_set(self):
        return ProjectorSet.from_basis(self.vectors(), self.outcome_labels())

    def outcome_labels(self):
        labels = [""]
        for qs, m in self.factors():
            k = m.shape[0]
            if len(qs) == 2 and self.name == "bell":
                names = BELL_LABELS
            else:
                names = [format(i, f"0{len(qs)}b") for i in range(k)]
            labels = [a + ("," if a else "") + b for a in labels for b in names]
        return tuple(labels)

    def describe(self):
        if self.name:
            return self.name
        parts = []
        for qs, m in self.factors():
            if len(qs) == 1:
                th, ph = self.angles[qs[0]]
                parts.append(f"q{qs[0]}(theta={th:.4f},phi={ph:.4f})")
            else:
                parts.append("joint" + str(qs))
        return " ".join(parts)


# ---------------------------------------------------------------------------
# circuits


@dataclass(frozen=True, eq=False)
class Circuit:
    """Initial state, ordered stage unitaries and the fixed final measurement.

    Stage ``k`` (``0 <= k <= n``) is the moment right after gate ``k``; stage 0
    holds the initial state. ``initial`` is a state vector or a density matrix.
    ``qubits`` may be ``None`` for a register whose dimension is not a power
    of two.
    """

    qubits: int
    initial: np.ndarray
    stages: tuple
    final: ProjectorSet = None
    stage_labels: tuple = ()
    source: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        init = np.asarray(self.initial, dtype=complex)
        dim = init.shape[0]
        if self.qubits is not None and dim != 2**self.qubits:
            raise DimensionError(f"initial state has dimension {dim}, expected {2**self.qubits}")
        if init.ndim == 1:
            init = check_state_vector(init, dim=dim)
        else:
            init = check_density_matrix(init, dim=dim)
        object.__setattr__(self, "initial", _freeze(init))
        stages = []
        for k, u in enumerate(self.stages):
            u = check_unitary(u, name=f"stage {k + 1} unitary")
            if u.shape[0] != dim:
                raise DimensionError(f"stage {k + 1} unitary has dimension {u.shape[0]}, expected {dim}")
            stages.append(_freeze(u))
        object.__setattr__(self, "stages", tuple(stages))
        final = self.final if self.final is not None else ProjectorSet.computational(dim)
        if final.dim != dim:
            raise DimensionError("final measurement dimension does not match the register")
        object.__setattr__(self, "final", final)
        labels = tuple(self.stage_labels) or tuple(f"U{k + 1}" for k in range(len(stages)))
        object.__setattr__(self, "stage_labels", labels)

    @property
    def dim(self):
        return self.initial.shape[0]

    @property
    def n_stages(self):
        return len(self.stages)

    @property
    def is_pure(self):
        return self.initial.ndim == 1

    def initial_density(self):
        return density(self.initial) if self.is_pure else np.array(self.initial)

    def unitary_between(self, a, b):
        """``U_b ... U_{a+1}``, the evolution from stage ``a`` to stage ``b``."""
        if not 0 <= a <= b <= self.n_stages:
            raise ValueError(f"invalid stage interval ({a}, {b})")
        u = np.eye(self.dim, dtype=complex)
        for k in range(a, b):
            u = self.stages[k] @ u
        return u

    def state_at(self, stage):
        u = self.unitary_between(0, stage)
        if self.is_pure:
            return u @ self.initial
        return u @ self.initial @ u.conj().T

    def final_distribution(self):
        rho = self.state_at(self.n_stages)
        if rho.ndim == 1:
            rho = density(rho)
        return np.clip(np.einsum("aij,ji->a", self.final.projectors, rho).real, 0.0, 1.0)

    def with_initial(self, initial):
        return Circuit(self.qubits, initial, self.stages, self.final, self.stage_labels)

    def with_stages(self, stages, labels=()):
        return Circuit(self.qubits, self.initial, tuple(stages), self.final, tuple(labels))
