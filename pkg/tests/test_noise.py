import numpy as np
import pytest

from conftest import random_density, random_state
from histoq import noise as nz
from histoq._validation import DimensionError
from histoq.quantum import Circuit, LocalBasis, density, ket

PLUS = np.array([1, 1]) / np.sqrt(2)


def _random_local(rng, qubits):
    theta = np.arccos(rng.uniform(-1, 1, qubits))
    phi = rng.uniform(0, 2 * np.pi, qubits)
    return LocalBasis.from_angles(list(zip(theta, phi)))


def test_dephase_examples():
    comp = LocalBasis.computational(1)
    rho = density(PLUS)
    np.testing.assert_allclose(nz.dephase(rho, nz.DephasingChannel(comp, 0.0)), rho)
    np.testing.assert_allclose(nz.dephase(rho, nz.DephasingChannel(comp, 1.0)), np.eye(2) / 2, atol=1e-15)
    half = nz.dephase(rho, nz.DephasingChannel(comp, 0.5))
    assert half[0, 1] == pytest.approx(0.25)


def test_dephase_trace_idempotent_and_measurement():
    rng = np.random.default_rng(1)
    for _ in range(30):
        b = _random_local(rng, 2)
        ch = nz.DephasingChannel(b, 1.0)
        rho = random_density(rng, 4, 3)
        once = nz.dephase(rho, ch)
        assert abs(np.trace(once) - 1) < 1e-12
        assert np.abs(nz.dephase(once, ch) - once).max() < 1e-12
        p = b.projector_set().projectors
        unread = sum(x @ rho @ x for x in p)
        assert np.abs(once - unread).max() < 1e-12
        assert np.linalg.eigvalsh(once).min() > -1e-12


def test_dephase_partial_targets():
    b = LocalBasis.computational(2)
    ch = nz.DephasingChannel(b, 1.0, targets=(0,))
    psi = np.kron(PLUS, PLUS)
    out = nz.dephase(psi, ch)
    expected = np.kron(np.eye(2) / 2, density(PLUS))
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_channel_validation():
    with pytest.raises(ValueError):
        nz.DephasingChannel(LocalBasis.computational(1), 1.5)
    with pytest.raises(ValueError):
        nz.DephasingChannel(LocalBasis.bell(2), 1.0, targets=(0,))


def test_kl_closed_forms():
    assert nz.kl_divergence([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert nz.kl_divergence([1, 0], [0.5, 0.5]) == pytest.approx(np.log(2))
    assert nz.chi_squared([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert nz.chi_squared([1, 0], [0.5, 0.5]) == pytest.approx(1.0)
    val, clamped = nz.kl_divergence([0.5, 0.5], [1.0, 0.0], return_clamped=True)
    assert clamped and np.isfinite(val)
    with pytest.raises(DimensionError):
        nz.kl_divergence([1.0], [0.5, 0.5])


def test_kl_nonnegative_random_pairs():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        assert nz.kl_divergence(p, q) > 1e-12 or np.allclose(p, q)
        assert abs(nz.kl_divergence(p, p)) <= 1e-12


def test_worked_consistent_dephasing_is_harmless(worked_circuit):
    ch = nz.DephasingChannel(LocalBasis.computational(2))
    noisy = nz.noisy_final_distribution(worked_circuit, {2: ch})
    assert nz.kl_divergence(worked_circuit.final_distribution(), noisy) < 1e-14


def test_refocus_identity_when_bases_equal(worked_circuit):
    comp = LocalBasis.computational(2)
    new, k = nz.refocus_known_basis(worked_circuit, 2, comp, comp)
    assert k == 3 and new.n_stages == worked_circuit.n_stages + 2
    np.testing.assert_allclose(new.stages[2], np.eye(4), atol=1e-15)


def test_refocus_preserves_noiseless_output(worked_circuit):
    rng = np.random.default_rng(3)
    new, _ = nz.refocus_known_basis(worked_circuit, 2, _random_local(rng, 2), LocalBasis.computational(2))
    np.testing.assert_allclose(new.final_distribution(), worked_circuit.final_distribution(), atol=1e-14)


def test_refocus_theorem_100_bases(worked_circuit):
    rng = np.random.default_rng(4)
    p = worked_circuit.final_distribution()
    worst = 0.0
    for _ in range(100):
        dec = _random_local(rng, 2)
        new, k = nz.refocus_known_basis(worked_circuit, 2, dec, LocalBasis.computational(2))
        noisy = nz.noisy_final_distribution(new, {k: nz.DephasingChannel(dec)})
        worst = max(worst, np.abs(noisy - p).max())
    assert worst < 1e-10


def test_refocus_mismatched_qubits(worked_circuit):
    with pytest.raises(ValueError):
        nz.refocus_known_basis(worked_circuit, 2, LocalBasis.bell(2), LocalBasis.computational(2))
    with pytest.raises(DimensionError):
        nz.refocus_known_basis(worked_circuit, 2, LocalBasis.computational(1), LocalBasis.computational(1))


def test_forced_consistent_sample(worked_circuit):
    comp = LocalBasis.computational(2)
    h0, hm = nz.robustness_for_bases(worked_circuit, 2, comp, [comp])
    assert abs(h0[0]) < 1e-14 and abs(hm[0]) < 1e-14


def test_hm_never_exceeds_h0_on_fixed_bases(worked_circuit):
    rng = np.random.default_rng(5)
    bases = [_random_local(rng, 2) for _ in range(200)]
    h0, hm = nz.robustness_for_bases(worked_circuit, 2, LocalBasis.computational(2), bases)
    assert hm.mean() <= h0.mean()
    assert (h0 >= 0).all() and (hm >= 0).all()


def test_experiment_small(worked_circuit):
    rep = nz.run_robustness_experiment(worked_circuit, 2, samples=4000, seed=7)
    assert rep.samples == 4000 and rep.rng_seed == 7
    assert rep.Hm <= rep.H0
    assert 0.1 < rep.reduction < 0.4
    d = rep.to_dict()
    assert d["format"] == 1 and d["rng_seed"] == 7 and d["units"] == "nats"
    assert rep.reduction_ci[0] < rep.reduction < rep.reduction_ci[1]


def test_experiment_thread_independent(worked_circuit):
    a = nz.run_robustness_experiment(worked_circuit, 2, samples=10_000, seed=3, threads=1)
    b = nz.run_robustness_experiment(worked_circuit, 2, samples=10_000, seed=3, threads=4)
    assert a.to_dict() == b.to_dict()


def test_experiment_doubled_samples(worked_circuit):
    a = nz.run_robustness_experiment(worked_circuit, 2, samples=8000, seed=11)
    b = nz.run_robustness_experiment(worked_circuit, 2, samples=16000, seed=12)
    assert abs(a.H0 - b.H0) <= 3 * np.hypot(a.se_H0, b.se_H0)
    assert abs(a.Hm - b.Hm) <= 3 * np.hypot(a.se_Hm, b.se_Hm)


def test_chi2_tracks_kl(worked_circuit):
    rep = nz.run_robustness_experiment(worked_circuit, 2, samples=4000, seed=1)
    assert rep.rank_correlation > 0.9
    assert rep.chi2_variant["Hm"] <= rep.chi2_variant["H0"]


def test_experiment_rejections(worked_circuit):
    with pytest.raises(ValueError):
        nz.run_robustness_experiment(worked_circuit, 2, samples=99)
    xx = LocalBasis.from_angles([(np.pi / 2, 0), (np.pi / 2, 0)])
    with pytest.raises(ValueError):
        nz.run_robustness_experiment(worked_circuit, 2, xx, samples=200)


def test_strength_zero_gives_no_damage(worked_circuit):
    rep = nz.run_robustness_experiment(worked_circuit, 2, samples=200, seed=0, strength=0.0)
    assert rep.H0 < 1e-14 and rep.Hm < 1e-14


def test_pure_product_state_stage():
    c = Circuit(1, random_state(np.random.default_rng(0), 2), (np.eye(2, dtype=complex),))
    ch = nz.DephasingChannel(LocalBasis.computational(1))
    assert nz.noisy_final_distribution(c, {0: ch}).sum() == pytest.approx(1.0)
    assert nz.noisy_final_distribution(Circuit(1, ket("0"), ()), {}).tolist() == [1.0, 0.0]
