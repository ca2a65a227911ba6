"""Dephasing channels and noise-robustness experiments.

The model throughout is dephasing in a local product basis, applied once at
a chosen stage. The damage is measured by the relative entropy (nats) of the
noisy final distribution against the noiseless one.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._validation import DimensionError, check_qubit_subset
from .histories import check_computing, HistoryFamily
from .quantum import Circuit, LocalBasis, density, embed

CLAMP = 1e-300
MIN_SAMPLES = 100
CHUNK = 4096


@dataclass(frozen=True, eq=False)
class DephasingChannel:
    """Dephasing of ``targets`` in ``basis``; ``strength=1`` removes all coherences.

    Off-diagonal elements in the channel basis are scaled by ``1 - strength``.
    ``targets=None`` means every qubit.
    """

    basis: LocalBasis
    strength: float = 1.0
    targets: tuple = None

    def __post_init__(self):
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError("strength must lie in [0, 1]")
        if self.targets is not None:
            t = check_qubit_subset(self.targets, self.basis.qubits)
            for qs, _ in self.basis.blocks:
                if set(qs) & set(t) and not set(qs) <= set(t):
                    raise ValueError("a joint block straddles the target boundary")
            object.__setattr__(self, "targets", t)

    def projectors(self):
        """Measurement projectors of the channel, shape ``(m, dim, dim)``."""
        basis = self.basis
        if self.targets is None:
            return basis.projector_set().projectors
        q = basis.qubits
        projs = np.eye(basis.dim, dtype=complex)[None]
        for qs, mat in basis.factors():
            if not set(qs) <= set(self.targets):
                continue
            local = np.einsum("ia,ja->aij", mat, mat.conj())
            full = np.array([embed(p, qs, q) for p in local])
            projs = np.einsum("aij,bjk->abik", projs, full).reshape(-1, basis.dim, basis.dim)
        return projs


def dephase(rho, channel):
    """Apply ``channel`` to a state vector or density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = density(rho)
    if rho.shape[0] != channel.basis.dim:
        raise DimensionError("state and channel dimensions differ")
    p = channel.projectors()
    measured = np.einsum("aij,jk,akl->il", p, rho, p)
    s = channel.strength
    return (1.0 - s) * rho + s * measured


def _check_pair(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape[-1] != q.shape[-1]:
        raise DimensionError(f"distribution lengths differ ({p.shape[-1]} vs {q.shape[-1]})")
    return p, q


def _kl(p, q):
    clamped = np.any((q < CLAMP) & (p > 0), axis=-1)
    qc = np.maximum(q, CLAMP)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0) / qc), 0.0)
    return terms.sum(axis=-1), clamped


def _chi2(p, q):
    clamped = np.any((q < CLAMP) & (p > 0), axis=-1)
    qc = np.maximum(q, CLAMP)
    terms = np.where((p > 0) | (q > 0), (p - q) ** 2 / qc, 0.0)
    return terms.sum(axis=-1), clamped


def kl_divergence(p, q, return_clamped=False):
    """``sum p_i ln(p_i / q_i)`` in nats; zero-probability terms of ``p`` drop out.

    ``q_i`` is clamped at ``1e-300``; with ``return_clamped`` the flag telling
    whether the clamp fired is returned as well.
    """
    p, q = _check_pair(p, q)
    val, clamped = _kl(p, q)
    val = float(max(val, 0.0)) if np.ndim(val) == 0 else np.maximum(val, 0.0)
    return (val, bool(clamped)) if return_clamped else val


def chi_squared(p, q, return_clamped=False):
    """``sum (p_i - q_i)^2 / q_i`` with the same clamp as :func:`kl_divergence`."""
    p, q = _check_pair(p, q)
    val, clamped = _chi2(p, q)
    val = float(val) if np.ndim(val) == 0 else val
    return (val, bool(clamped)) if return_clamped else val


# ---------------------------------------------------------------------------
# circuits with noise


def noisy_final_distribution(circuit, channels):
    """Final distribution with ``{stage: channel or [channels]}`` applied after those gates."""
    rho = circuit.initial_density()
    for k in range(circuit.n_stages + 1):
        if k > 0:
            u = circuit.stages[k - 1]
            rho = u @ rho @ u.conj().T
        chans = channels.get(k, [])
        for ch in chans if isinstance(chans, (list, tuple)) else [chans]:
            rho = dephase(rho, ch)
    return np.clip(np.einsum("aij,ji->a", circuit.final.projectors, rho).real, 0.0, 1.0)


def refocus_known_basis(circuit, stage, decoherence_basis, consistent_basis):
    """Circuit with a rotation ``R`` and its inverse inserted after gate ``stage``.

    ``R`` maps the consistent basis onto the decoherence basis, so complete
    dephasing between ``R`` and ``R^dag`` acts as the consistent measurement.
    Returns the new circuit and the stage at which the dephasing should act.
    """
    if not isinstance(decoherence_basis, LocalBasis) or not isinstance(consistent_basis, LocalBasis):
        raise TypeError("refocusing needs LocalBasis arguments")
    if decoherence_basis.qubits != consistent_basis.qubits or decoherence_basis.qubits != circuit.qubits:
        raise DimensionError("bases act on a different number of qubits than the circuit")
    blocks_d = sorted(qs for qs, _ in decoherence_basis.blocks)
    blocks_c = sorted(qs for qs, _ in consistent_basis.blocks)
    if blocks_d != blocks_c:
        raise ValueError("bases are defined on mismatched qubit groupings")
    if not 0 <= stage <= circuit.n_stages:
        raise ValueError(f"stage {stage} out of range")
    r = decoherence_basis.vectors() @ consistent_basis.vectors().conj().T
    stages = list(circuit.stages)
    labels = list(circuit.stage_labels)
    stages[stage:stage] = [r, r.conj().T]
    labels[stage:stage] = ["R", "R+"]
    new = Circuit(circuit.qubits, circuit.initial, tuple(stages), circuit.final, tuple(labels))
    return new, stage + 1


# ---------------------------------------------------------------------------
# robustness experiment


def random_bloch_angles(rng, shape):
    """Area-uniform Bloch-sphere points: ``cos(theta)`` and ``phi`` uniform."""
    theta = np.arccos(rng.uniform(-1.0, 1.0, size=shape))
    phi = rng.uniform(0.0, 2 * np.pi, size=shape)
    return theta, phi


def _bloch_batch(theta, phi):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    e = np.exp(1j * phi)
    out = np.empty(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0], out[..., 1, 0] = c, e * s
    out[..., 0, 1], out[..., 1, 1] = -np.conj(e) * s, c
    return out


def _product_batch(theta, phi):
    """``(S, q)`` angles to ``(S, dim, dim)`` product bases (qubit 0 most significant)."""
    mats = _bloch_batch(theta, phi)
    out = mats[:, 0]
    for q in range(1, theta.shape[1]):
        s, d = out.shape[0], out.shape[1]
        out = np.einsum("sij,skl->sikjl", out, mats[:, q]).reshape(s, 2 * d, 2 * d)
    return out


class _Experiment:
    def __init__(self, circuit, stage, consistent_basis, strength):
        self.rho = circuit.state_at(stage)
        if self.rho.ndim == 1:
            self.rho = density(self.rho)
        self.strength = strength
        proj = consistent_basis.projector_set().projectors
        self.rho_m = np.einsum("aij,jk,akl->il", proj, self.rho, proj)
        self.v = circuit.unitary_between(stage, circuit.n_stages)
        self.final = circuit.final.projectors
        self.p = circuit.final_distribution()

    def _born(self, rho):
        r = self.v @ rho @ self.v.conj().T
        return np.einsum("fij,ji->f", self.final, r).real

    def noisy(self, bases):
        """Final distributions without and with the prior measurement."""
        w = np.einsum("fij,jk->fik", self.final, self.v)
        # T[s, f, a] = <b_a|V^dag P_f V|b_a>
        t = np.einsum("sia,fij,sja->sfa", bases.conj(), np.einsum("ji,fjk->fik", self.v.conj(), w), bases).real
        out = []
        for rho in (self.rho, self.rho_m):
            pops = np.einsum("sia,ij,sja->sa", bases.conj(), rho, bases).real
            q = np.einsum("sfa,sa->sf", t, pops)
            q = (1.0 - self.strength) * self._born(rho)[None] + self.strength * q
            out.append(np.clip(q, 0.0, 1.0))
        return out

    def scores(self, bases):
        q0, qm = self.noisy(bases)
        p = self.p[None]
        h0, c0 = _kl(p, q0)
        hm, cm = _kl(p, qm)
        x0, _ = _chi2(p, q0)
        xm, _ = _chi2(p, qm)
        return np.maximum(h0, 0), np.maximum(hm, 0), x0, xm, bool(np.any(c0) or np.any(cm))


@dataclass
class NoiseReport:
    """Monte Carlo means of the damage without (``H0``) and with (``Hm``) the prior measurement."""

    H0: float
    Hm: float
    reduction: float
    samples: int
    rng_seed: int
    se_H0: float = 0.0
    se_Hm: float = 0.0
    reduction_se: float = 0.0
    reduction_ci: tuple = (0.0, 0.0)
    chi2_variant: dict = field(default_factory=dict)
    rank_correlation: float = float("nan")
    clamped: bool = False
    stage: int = 0
    strength: float = 1.0
    consistent_basis: str = ""
    model: str = "complete dephasing in an area-uniform random local product basis, applied once"

    def to_dict(self):
        return {
            "format": 1,
            "H0": self.H0,
            "Hm": self.Hm,
            "reduction": self.reduction,
            "reduction_se": self.reduction_se,
            "reduction_ci": list(self.reduction_ci),
            "se_H0": self.se_H0,
            "se_Hm": self.se_Hm,
            "samples": self.samples,
            "rng_seed": self.rng_seed,
            "chi2_variant": self.chi2_variant,
            "rank_correlation": self.rank_correlation,
            "clamped": self.clamped,
            "stage": self.stage,
            "strength": self.strength,
            "consistent_basis": self.consistent_basis,
            "model": self.model,
            "units": "nats",
        }


def _ratio_stats(h0, hm):
    """Reduction ``1 - mean(hm)/mean(h0)`` with a delta-method standard error."""
    n = len(h0)
    m0, mm = h0.mean(), hm.mean()
    if m0 <= 0:
        return 0.0, 0.0
    r = mm / m0
    d = hm - r * h0
    se = d.std(ddof=1) / (np.sqrt(n) * m0) if n > 1 else 0.0
    return float(1.0 - r), float(se)


def robustness_for_bases(circuit, stage, consistent_basis, bases, strength=1.0):
    """``(H0, Hm)`` per forced dephasing basis (columns of each ``bases[s]``)."""
    exp = _Experiment(circuit, stage, consistent_basis, strength)
    b = np.array([x.vectors() if isinstance(x, LocalBasis) else np.asarray(x, dtype=complex) for x in bases])
    h0, hm, *_ = exp.scores(b)
    return h0, hm


def run_robustness_experiment(
    circuit,
    consistent_stage,
    consistent_basis=None,
    samples=100_000,
    seed=0,
    strength=1.0,
    threads=1,
    epsilon=1e-10,
):
    """Average damage over area-uniform random local dephasing bases at ``consistent_stage``.

    Samples are drawn in fixed-size chunks, each from its own Philox stream
    spawned from ``seed``, so results do not depend on ``threads``.
    """
    if samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {samples}")
    if circuit.qubits is None:
        raise DimensionError("the robustness experiment needs a qubit register")
    if consistent_basis is None:
        consistent_basis = LocalBasis.computational(circuit.qubits)
    fam = HistoryFamily.from_circuit(circuit, {consistent_stage: consistent_basis.projector_set()})
    rep = check_computing(fam, epsilon)
    if not rep.passed:
        raise ValueError(
            f"consistent basis fails the computing check at stage {consistent_stage} "
            f"(violation {rep.max_violation:.3e})"
        )
    exp = _Experiment(circuit, consistent_stage, consistent_basis, strength)
    sizes = [min(CHUNK, samples - s) for s in range(0, samples, CHUNK)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    q = circuit.qubits

    def run(job):
        n, ss = job
        rng = np.random.Generator(np.random.Philox(ss))
        theta, phi = random_bloch_angles(rng, (n, q))
        return exp.scores(_product_batch(theta, phi))

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        parts = list(pool.map(run, zip(sizes, seeds)))
    h0, hm, x0, xm = (np.concatenate([p[i] for p in parts]) for i in range(4))
    clamped = any(p[4] for p in parts)
    red, se = _ratio_stats(h0, hm)
    xred, xse = _ratio_stats(x0, xm)
    n = len(h0)
    rho_s = stats.spearmanr(h0, x0).statistic if np.ptp(h0) > 0 else float("nan")
    return NoiseReport(
        H0=float(h0.mean()),
        Hm=float(hm.mean()),
        reduction=red,
        samples=n,
        rng_seed=int(seed),
        se_H0=float(h0.std(ddof=1) / np.sqrt(n)),
        se_Hm=float(hm.std(ddof=1) / np.sqrt(n)),
        reduction_se=se,
        reduction_ci=(red - 1.96 * se, red + 1.96 * se),
        chi2_variant={
            "H0": float(x0.mean()),
            "Hm": float(xm.mean()),
            "reduction": xred,
            "reduction_se": xse,
        },
        rank_correlation=float(rho_s),
        clamped=clamped,
        stage=int(consistent_stage),
        strength=float(strength),
        consistent_basis=consistent_basis.describe(),
    )
