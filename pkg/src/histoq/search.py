"""Grid search for local measurement bases that extend a family consistently.

Candidates are product bases over a Bloch-angle grid, plus exact catalog
points (computational, X, Y) and, when joint blocks are allowed, the Bell
basis on qubit pairs. Candidates are screened in batches with a vectorized
coherence computation; every survivor is re-checked through
:mod:`histoq.histories` before it is returned.
"""

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import n_qubits_for
from .histories import (
    LEVELS,
    ZERO_PROBABILITY,
    ConsistencyReport,
    HistoryFamily,
    branch_vectors,
    check,
    is_trivial_extension,
)
from .quantum import LocalBasis, bloch_pair, entanglement_entropy, max_joint_block

DEFAULT_GRID = np.pi / 8
DEFAULT_EPSILON = 1e-8
CATALOG_POINTS = ((0.0, 0.0), (np.pi / 2, 0.0), (np.pi / 2, np.pi / 2))
CHUNK = 1024


@dataclass
class SearchConfig:
    stage: int = 1
    level: str = "computing"
    epsilon: float = DEFAULT_EPSILON
    grid: float = DEFAULT_GRID
    joint_block_max: int = 1
    require_nontrivial: bool = False
    max_results: int = 50

    def __post_init__(self):
        if self.grid <= 0:
            raise ValueError("grid resolution must be positive")
        if self.level not in LEVELS:
            raise ValueError(f"level must be one of {LEVELS}")
        if self.joint_block_max < 1:
            raise ValueError("joint_block_max must be at least 1")
        if self.max_results < 1:
            raise ValueError("max_results must be at least 1")

    def validate_for(self, qubits):
        cap = max_joint_block(qubits)
        if self.joint_block_max > cap:
            raise ValueError(f"joint_block_max {self.joint_block_max} exceeds the cap {cap} for {qubits} qubits")


@dataclass
class SearchResult:
    stage: int
    basis: LocalBasis
    report: ConsistencyReport
    trivial: bool
    local: bool
    entanglement: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "stage": self.stage,
            "basis": self.basis.describe(),
            "angles": [list(a) if a is not None else None for a in self.basis.angles],
            "blocks": [list(qs) for qs, _ in self.basis.blocks],
            "local": self.local,
            "trivial": self.trivial,
            "report": self.report.to_dict(),
            "entanglement": self.entanglement,
        }


# ---------------------------------------------------------------------------
# candidates


def qubit_grid(grid):
    """Distinct qubit bases ``(theta, phi)`` on the grid; antipodal pairs appear once."""
    pts = set()
    n_theta = int(np.floor((np.pi / 2) / grid + 1e-9))
    thetas = [k * grid for k in range(n_theta + 1)]
    for th in thetas:
        if th == 0.0:
            pts.add((0.0, 0.0))
            continue
        span = np.pi if abs(th - np.pi / 2) < 1e-12 else 2 * np.pi
        n_phi = int(np.ceil(span / grid - 1e-9))
        for j in range(n_phi):
            pts.add((round(th, 12), round(j * grid, 12)))
    for p in CATALOG_POINTS:
        pts.add((round(p[0], 12), round(p[1], 12)))
    return sorted(pts)


def candidate_bases(config, qubits):
    """Deterministic stream: product bases (qubit 0 slowest), then joint-block bases."""
    config.validate_for(qubits)
    pts = qubit_grid(config.grid)
    for combo in itertools.product(pts, repeat=qubits):
        yield LocalBasis.from_angles(combo)
    if config.joint_block_max >= 2 and qubits >= 2:
        for pair in itertools.combinations(range(qubits), 2):
            others = [q for q in range(qubits) if q not in pair]
            for combo in itertools.product(CATALOG_POINTS, repeat=len(others)):
                rest = {q: a for q, a in zip(others, combo)}
                yield LocalBasis.bell(qubits, pair, rest)


def _product_vectors(pts, combos):
    """Batched Kronecker products of per-qubit bases, shape ``(C, dim, dim)``."""
    mats = np.array([bloch_pair(*p) for p in pts])
    out = mats[combos[:, 0]]
    for q in range(1, combos.shape[1]):
        nxt = mats[combos[:, q]]
        c, d = out.shape[0], out.shape[1]
        out = np.einsum("cij,ckl->cikjl", out, nxt).reshape(c, d * 2, d * 2)
    return out


# ---------------------------------------------------------------------------
# batched screening


class _Screen:
    """Precomputed pieces for inserting a basis at one stage of a family.

    Valid when no set of ``family`` lies strictly between ``stage`` and the
    final stage. For candidate basis ``b`` the branch amplitudes are
    ``Z[f, (i, k), (m, a)] = sqrt(w_i) <q_fk|V|b_a> <b_a|v_im>`` where
    ``q_fk`` spans the final projector ``f`` and ``v_im`` is the prefix branch
    ``m`` of eigenvector ``i``; then ``D_f = Z^T conj(Z)``.
    """

    BUDGET = 1 << 22  # complex entries per screened chunk

    def __init__(self, family, stage):
        self.family = family
        self.stage = stage
        prefix = [i for i, s in enumerate(family.stages) if s < stage]
        weights, vecs = family.support()
        self.weights = weights
        if prefix:
            v = branch_vectors(family, upto=len(prefix), vectors=vecs)
            last = family.stages[prefix[-1]]
        else:
            v = vecs.T[:, None, :]
            last = 0
        u = family.circuit.unitary_between(last, stage)
        self.v = v @ u.T  # (r, M, dim) at ``stage``
        r, m, dim = self.v.shape
        self.r, self.m = r, m
        self.vt = self.v.reshape(r * m, dim).T  # (dim, r*M)
        w = family.circuit.unitary_between(stage, family.circuit.n_stages)
        final = family.sets[-1]
        self.n_final = final.m
        kmax = max(final.ranks)
        q = np.zeros((final.m, kmax, dim), dtype=complex)
        for f, p in enumerate(final.projectors):
            lam, vec = np.linalg.eigh(p)
            cols = vec[:, lam > 0.5]
            q[f, : cols.shape[1]] = cols.T.conj()
        self.k = kmax
        self.rows = (q.reshape(-1, dim) @ w)  # (F*K, dim): <q_fk| V
        amp = np.einsum("px,rmx->prm", self.rows, self.v).reshape(final.m, kmax, r, m)
        self.base_probs = np.einsum("r,fkrm->mf", weights, np.abs(amp) ** 2)

    def chunk_size(self, level):
        ma = self.m * self.v.shape[2]
        per = self.n_final * (ma * ma if level != "computing" else self.r * self.k * ma)
        return int(max(1, min(CHUNK, self.BUDGET // max(per, 1))))

    def violations(self, bases, level):
        """Per-candidate violation at ``level`` and triviality flags."""
        C, dim = bases.shape[0], bases.shape[1]
        F, K, r, M = self.n_final, self.k, self.r, self.m
        amp = np.matmul(self.rows[None], bases).reshape(C, F, K, dim)  # <q_fk|V|b_a>
        c = np.matmul(np.conj(np.transpose(bases, (0, 2, 1))), self.vt).reshape(C, dim, r, M)  # <b_a|v_im>
        c = c * np.sqrt(self.weights)[None, None, :, None]
        z = amp[:, :, None, :, None, :] * np.transpose(c, (0, 2, 3, 1))[:, None, :, None, :, :]
        z = z.reshape(C, F, r * K, M * dim)
        diag = (np.abs(z) ** 2).sum(axis=2)  # (C, F, M*dim)
        if level == "computing":
            total = (np.abs(z.sum(axis=3)) ** 2).sum(axis=2)
            viol = np.abs(0.5 * (total - diag.sum(axis=2))).max(axis=1)
        else:
            d = np.matmul(np.transpose(z, (0, 1, 3, 2)), z.conj())
            vals = np.abs(d.real) if level == "weak" else np.abs(d)
            idx = np.arange(M * dim)
            vals[:, :, idx, idx] = 0.0
            viol = vals.max(axis=(1, 2, 3))
        probs = diag.reshape(C, F, M, dim)
        nonzero = (probs > ZERO_PROBABILITY).sum(axis=3)  # (C, F, M)
        live = (self.base_probs.T > ZERO_PROBABILITY)[None]
        trivial = np.all((nonzero <= 1) | ~live, axis=(1, 2))
        return viol, trivial


def _entanglement(circuit, stage):
    q = circuit.qubits
    if not circuit.is_pure or q is None or q < 2:
        return {}
    psi = circuit.state_at(stage)
    cut = list(range(q // 2))
    return {
        "cut": cut,
        "nats": entanglement_entropy(psi, cut, np.e),
        "bits": entanglement_entropy(psi, cut, 2),
    }


def insert_and_check(circuit, stage, basis, level="computing", epsilon=DEFAULT_EPSILON, family=None):
    """Insert ``basis`` at ``stage`` and run the consistency check at ``level``."""
    base = family if family is not None else HistoryFamily.from_circuit(circuit)
    if not 0 <= stage < circuit.n_stages:
        raise ValueError(f"stage {stage} is not an insertable stage (0..{circuit.n_stages - 1})")
    extended = base.inserted(stage, basis.projector_set())
    report = check(extended, level, epsilon)
    return SearchResult(
        stage,
        basis,
        report,
        is_trivial_extension(base, extended),
        basis.is_local,
        _entanglement(circuit, stage),
    )


def _thread_count(threads):
    if threads is None:
        threads = int(os.environ.get("HISTOQ_THREADS", 0)) or os.cpu_count() or 1
    return max(1, int(threads))


def _screen_candidates(screen, candidates, config, qubits, threads):
    """Violation and triviality for every candidate, in stream order."""
    pts = qubit_grid(config.grid)
    n_prod = len(pts) ** qubits
    level = "medium" if config.level == "strong" else config.level
    step = screen.chunk_size(level)
    chunks = [(s, min(s + step, n_prod)) for s in range(0, n_prod, step)]
    radix = np.array([len(pts) ** (qubits - 1 - q) for q in range(qubits)])

    def run(bounds):
        s, e = bounds
        idx = np.arange(s, e)
        combos = (idx[:, None] // radix[None, :]) % len(pts)
        return screen.violations(_product_vectors(pts, combos), level)

    with ThreadPoolExecutor(max_workers=_thread_count(threads)) as pool:
        parts = list(pool.map(run, chunks))
    viol = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0)
    triv = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, bool)
    extra = candidates[n_prod:]
    if extra:
        vecs = np.array([b.vectors() for b in extra])
        v2, t2 = screen.violations(vecs, level)
        viol, triv = np.concatenate([viol, v2]), np.concatenate([triv, t2])
    return viol, triv


class _LazyCandidates:
    """Indexable view of the candidate stream without materializing product bases."""

    def __init__(self, config, qubits):
        self.pts = qubit_grid(config.grid)
        self.qubits = qubits
        self.n_prod = len(self.pts) ** qubits
        self.joint = []
        if config.joint_block_max >= 2 and qubits >= 2:
            for pair in itertools.combinations(range(qubits), 2):
                others = [q for q in range(qubits) if q not in pair]
                for combo in itertools.product(CATALOG_POINTS, repeat=len(others)):
                    self.joint.append(LocalBasis.bell(qubits, pair, dict(zip(others, combo))))

    def __len__(self):
        return self.n_prod + len(self.joint)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < self.n_prod:
            digits = [(i // len(self.pts) ** (self.qubits - 1 - q)) % len(self.pts) for q in range(self.qubits)]
            return LocalBasis.from_angles([self.pts[d] for d in digits])
        return self.joint[i - self.n_prod]


def search_local_extensions(circuit, config, family=None, threads=1):
    """All candidates at ``config.stage`` that pass ``config.level`` within ``config.epsilon``.

    Results are sorted nontrivial first, then by violation, then by stream
    position, and truncated to ``config.max_results``. An empty list means no
    candidate on this grid passes.
    """
    qubits = circuit.qubits if circuit.qubits is not None else n_qubits_for(circuit.dim)
    config.validate_for(qubits)
    base = family if family is not None else HistoryFamily.from_circuit(circuit)
    stage = config.stage
    if not 0 <= stage < circuit.n_stages:
        raise ValueError(f"stage {stage} is not an insertable stage (0..{circuit.n_stages - 1})")
    if stage in base.stages:
        raise ValueError(f"stage {stage} already holds a set")
    candidates = _LazyCandidates(config, qubits)
    later = [s for s in base.stages[:-1] if s > stage]
    if later:
        viol, triv = _general_screen(circuit, base, stage, candidates, config)
    else:
        viol, triv = _screen_candidates(_Screen(base, stage), candidates, config, qubits, threads)
    # screening tolerance is loose; the exact check below decides
    hits = np.flatnonzero(viol <= config.epsilon * 10 + 1e-14)
    if config.require_nontrivial:
        hits = hits[~triv[hits]]
    order = sorted(hits, key=lambda i: (bool(triv[i]), float(viol[i]), int(i)))
    results = []
    for i in order:
        res = insert_and_check(circuit, stage, candidates[int(i)], config.level, config.epsilon, base)
        if not res.report.passed or (config.require_nontrivial and res.trivial):
            continue
        results.append(res)
        if len(results) >= config.max_results:
            break
    results.sort(key=lambda r: (r.trivial, r.report.max_violation))
    return results


def _general_screen(circuit, base, stage, candidates, config):
    viol = np.empty(len(candidates))
    triv = np.empty(len(candidates), dtype=bool)
    for i in range(len(candidates)):
        res = insert_and_check(circuit, stage, candidates[i], config.level, config.epsilon, base)
        viol[i], triv[i] = res.report.max_violation, res.trivial
    return viol, triv


@dataclass
class StageSummary:
    stage: int
    best: SearchResult = None
    n_found: int = 0
    entanglement: dict = field(default_factory=dict)

    @property
    def classical(self):
        return self.best is not None

    @property
    def nontrivial(self):
        return self.best is not None and not self.best.trivial

    @property
    def message(self):
        if self.best is None:
            return "no local extension at this grid/epsilon"
        kind = "trivial" if self.best.trivial else "nontrivial"
        return f"{self.best.basis.describe()} ({kind}, violation {self.best.report.max_violation:.3e})"

    def to_dict(self):
        return {
            "stage": self.stage,
            "found": self.n_found,
            "classical": self.classical,
            "nontrivial": self.nontrivial,
            "best": None if self.best is None else self.best.to_dict(),
            "entanglement": self.entanglement,
            "message": self.message,
        }


def classicality_profile(circuit, config, threads=1):
    """Best local extension of the one-event family at every insertable stage.

    Nontrivial extensions are preferred; a stage admitting only trivial ones
    (a deterministic local state) still counts as classical.
    """
    out = []
    for stage in range(circuit.n_stages):
        cfg = SearchConfig(
            stage=stage,
            level=config.level,
            epsilon=config.epsilon,
            grid=config.grid,
            joint_block_max=1,
            require_nontrivial=config.require_nontrivial,
            max_results=config.max_results,
        )
        found = search_local_extensions(circuit, cfg, threads=threads)
        out.append(StageSummary(stage, found[0] if found else None, len(found), _entanglement(circuit, stage)))
    return out


def complete_extension(circuit, config, stages=None, threads=1):
    """Greedy left-to-right insertion of a local basis at every stage before the final one.

    At each stage the best candidate keeping the whole family consistent at
    ``config.level`` is kept. Returns the extended family, or ``None`` when
    some stage admits no candidate.
    """
    family = HistoryFamily.from_circuit(circuit)
    for stage in range(circuit.n_stages) if stages is None else stages:
        cfg = SearchConfig(
            stage=stage,
            level=config.level,
            epsilon=config.epsilon,
            grid=config.grid,
            joint_block_max=1,
            require_nontrivial=False,
            max_results=1,
        )
        found = search_local_extensions(circuit, cfg, family=family, threads=threads)
        if not found:
            return None
        family = family.inserted(stage, found[0].basis.projector_set())
    return family
