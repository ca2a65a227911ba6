import numpy as np
import pytest

from conftest import random_basis_set, random_density, random_state, random_unitary
from histoq import histories as hs
from histoq._validation import GuardExceededError
from histoq.quantum import (
    CNOT,
    H,
    I2,
    Circuit,
    LocalBasis,
    ProjectorSet,
    S,
    T,
    Z,
    embed,
    ket,
    qft,
)

R2 = np.sqrt(2)


def test_family_validation(worked_circuit):
    comp = ProjectorSet.computational(4)
    with pytest.raises(ValueError):
        hs.HistoryFamily(worked_circuit, (comp, comp), (2, 2))
    with pytest.raises(ValueError):
        hs.HistoryFamily(worked_circuit, (comp,), (2,))
    with pytest.raises(ValueError):
        hs.HistoryFamily.from_circuit(worked_circuit, {3: comp})
    fam = hs.HistoryFamily.from_circuit(worked_circuit, {2: comp, 0: comp})
    assert fam.stages == (0, 2, 3) and fam.size == 64
    assert fam.flat_index(fam.multi_index(37)) == 37
    with pytest.raises(IndexError):
        fam.flat_index((0, 0, 4))


def test_size_guard():
    c = Circuit(3, ket("000"), tuple(np.eye(8) for _ in range(8)))
    ins = {k: ProjectorSet.computational(8) for k in range(8)}
    with pytest.raises(GuardExceededError):
        hs.HistoryFamily.from_circuit(c, ins)


def test_heisenberg_projector(worked_circuit):
    fam = hs.HistoryFamily.from_circuit(worked_circuit, {0: ProjectorSet.computational(4), 2: ProjectorSet.computational(4)})
    np.testing.assert_allclose(hs.heisenberg_projector(fam, 0, 1), np.diag([0, 1, 0, 0]))
    u = worked_circuit.unitary_between(0, 2)
    p = np.diag([0, 1, 0, 0]).astype(complex)
    np.testing.assert_allclose(hs.heisenberg_projector(fam, 1, 1), u.conj().T @ p @ u, atol=1e-14)


def test_history_operator_single_set():
    c = Circuit(1, ket("0"), (H,))
    fam = hs.HistoryFamily.from_circuit(c)
    np.testing.assert_allclose(hs.history_operator(fam, (1,)), H @ np.diag([0, 1]) @ H, atol=1e-15)
    ident = ProjectorSet.identity(2)
    fam = hs.HistoryFamily.from_circuit(Circuit(1, ket("0"), (I2,)), {0: ident}, final=ident)
    np.testing.assert_allclose(hs.history_operator(fam, (0, 0)), np.eye(2))


def test_worked_probabilities(worked_family):
    np.testing.assert_allclose(hs.marginal(worked_family, 1), [0.5, 3 / 16, 1 / 8, 3 / 16], atol=1e-14)
    np.testing.assert_allclose(hs.marginal(worked_family, 0), [0.5, 0.25, 0, 0.25], atol=1e-14)
    assert hs.probabilities(worked_family).sum() == pytest.approx(1.0, abs=1e-10)
    assert hs.probability(worked_family, (1, 3)) == pytest.approx(1 / 16)


def test_worked_verdicts(worked_family):
    rep = hs.check_all(worked_family, 1e-10)
    assert rep["weak"].passed and rep["computing"].passed
    assert not rep["medium"].passed and not rep["strong"].passed
    assert rep["medium"].max_violation == pytest.approx(1 / (8 * R2), abs=1e-12)
    assert rep["medium"].witnesses


def test_bell_family_real_parts_vanish(worked_circuit):
    fam = hs.HistoryFamily.from_circuit(
        worked_circuit, {1: LocalBasis.bell(2).projector_set(), 2: ProjectorSet.computational(4)}
    )
    d = hs.coherence_matrix(fam).matrix
    off = d - np.diag(np.diag(d))
    assert np.abs(off.real).max() < 1e-12


def test_one_event_family_is_diagonal(worked_circuit):
    fam = hs.HistoryFamily.from_circuit(worked_circuit)
    d = hs.coherence_matrix(fam).matrix
    np.testing.assert_allclose(d, np.diag(worked_circuit.final_distribution()), atol=1e-14)
    for level in hs.LEVELS:
        rep = hs.check(fam, level, 1e-10)
        assert rep.passed and rep.max_violation < 1e-14


def test_coherence_routes_agree_mixed():
    rng = np.random.default_rng(1)
    for _ in range(10):
        rho = random_density(rng, 4, 3)
        c = Circuit(2, rho, (random_unitary(rng, 4), random_unitary(rng, 4)))
        fam = hs.HistoryFamily.from_circuit(c, {1: random_basis_set(rng, 4)})
        a = hs.coherence_matrix(fam, "branch").matrix
        b = hs.coherence_matrix(fam, "operator").matrix
        assert np.abs(a - b).max() < 1e-12
        assert np.abs(a - a.conj().T).max() < 1e-12
        assert np.trace(a).real == pytest.approx(1.0, abs=1e-10)


def test_eigenbasis_then_arbitrary_basis_coherence():
    rng = np.random.default_rng(2)
    rho = random_density(rng, 4, 4)
    fam = hs.build_diosi_family(rho)
    # replace the second set by an arbitrary rank-1 basis and drop the gate
    phi = random_unitary(rng, 4)
    lam, psi = hs.aligned_eigensystem(rho)
    circ = Circuit(2, rho, (np.eye(4),), ProjectorSet.from_basis(phi))
    fam = hs.HistoryFamily.from_circuit(circ, {0: ProjectorSet.from_basis(psi)})
    d = hs.coherence_matrix(fam).matrix
    expected = np.zeros((16, 16))
    for i in range(4):
        for j in range(4):
            k = i * 4 + j
            expected[k, k] = lam[i] * abs(np.vdot(phi[:, j], psi[:, i])) ** 2
    assert np.abs(d - expected).max() < 1e-12
    assert hs.check_medium(fam, 1e-10).passed


def test_weak_bound_family():
    fam = hs.build_weak_bound_family(6, initial_index=3)
    assert hs.check_weak(fam, 1e-10).passed
    assert not hs.check_medium(fam, 1e-10).passed
    assert hs.count_nonzero_histories(fam) <= 12
    fam4 = hs.build_weak_bound_family(4)
    assert hs.check_weak(fam4, 1e-10).passed
    assert hs.check_medium(fam4, 1e-6).max_violation > 1e-6
    with pytest.raises(ValueError):
        hs.build_weak_bound_family(5)


@pytest.mark.parametrize("rank,dim", [(1, 2), (1, 8), (2, 4), (4, 4)])
def test_diosi_counts(rank, dim):
    rng = np.random.default_rng(rank * 10 + dim)
    rho = random_density(rng, dim, rank)
    fam = hs.build_diosi_family(rho)
    assert hs.count_nonzero_histories(fam) == rank * dim
    assert hs.check_medium(fam, 1e-10).passed


def test_diosi_special_states():
    assert hs.count_nonzero_histories(hs.build_diosi_family(np.eye(4) / 4)) == 16
    psi = random_state(np.random.default_rng(0), 8)
    assert hs.count_nonzero_histories(hs.build_diosi_family(np.outer(psi, psi.conj()))) == 8


def test_random_rank_one_sets_fail_medium():
    rng = np.random.default_rng(3)
    fails = 0
    for _ in range(100):
        c = Circuit(2, random_state(rng, 4), (random_unitary(rng, 4), random_unitary(rng, 4)))
        fam = hs.HistoryFamily.from_circuit(c, {1: random_basis_set(rng, 4)})
        fails += hs.check_medium(fam, 1e-6).max_violation > 1e-6
    assert fails >= 99


def test_strong_pure_matches_medium():
    rng = np.random.default_rng(5)
    for _ in range(30):
        c = Circuit(1, random_state(rng, 2), (random_unitary(rng, 2),))
        ins = {0: ProjectorSet.computational(2) if rng.random() < 0.5 else random_basis_set(rng, 2)}
        fam = hs.HistoryFamily.from_circuit(c, ins)
        assert hs.check_strong(fam, 1e-10).passed == hs.check_medium(fam, 1e-10).passed


def test_strong_eigen_then_fourier_pure():
    psi = random_state(np.random.default_rng(6), 4)
    fam = hs.build_diosi_family(np.outer(psi, psi.conj()))
    assert hs.check_weak(fam).passed and hs.check_medium(fam).passed
    # brute force: record projectors onto the normalized branches C_a^dag psi
    rep = hs.check_strong(fam, 1e-10)
    assert rep.passed


def test_strong_rank_guard():
    rho = random_density(np.random.default_rng(7), 8, 8)
    fam = hs.build_diosi_family(rho)
    with pytest.raises(ValueError, match="rank"):
        hs.check_strong(fam)
    assert hs.check_all(fam)["strong"] is None


def test_coarse_grain_preserves_consistency():
    rng = np.random.default_rng(8)
    done = 0
    while done < 30:
        rho = random_density(rng, 4, int(rng.integers(1, 5)))
        fam = hs.build_diosi_family(rho)
        part = [[0, 1], [2, 3]] if rng.random() < 0.5 else [[0, 3], [1], [2]]
        idx = int(rng.integers(fam.n_sets))
        coarse = fam.with_set(idx, hs.coarse_grain(fam.sets[idx], part))
        for level in ("medium", "weak", "computing"):
            if hs.check(fam, level).passed:
                assert hs.check(coarse, level).passed
        done += 1


def test_fine_grain_worked_coarse(worked_circuit):
    comp = ProjectorSet.computational(4)
    fam = hs.HistoryFamily.from_circuit(worked_circuit, {1: LocalBasis.bell(2).projector_set()})
    coarse = fam.with_set(0, hs.coarse_grain(fam.sets[0], [[0, 1], [2, 3]]))
    fine = hs.fine_grain(coarse)
    assert all(s.is_fine for s in fine.sets)
    assert hs.check_medium(fine, 1e-10).passed
    for c, f in zip(coarse.sets, fine.sets):
        groups = hs.refinement_groups(c, f)
        for k, g in enumerate(groups):
            np.testing.assert_allclose(f.projectors[g].sum(axis=0), c.projectors[k], atol=1e-10)
    assert fine.sets[-1].m == comp.m


def test_fine_grain_already_fine():
    psi = random_state(np.random.default_rng(11), 4)
    fam = hs.build_diosi_family(np.outer(psi, psi.conj()))
    fine = hs.fine_grain(fam)
    for a, b in zip(fam.sets, fine.sets):
        np.testing.assert_allclose(a.projectors.sum(axis=0), b.projectors.sum(axis=0), atol=1e-12)


def test_trivial_extensions(worked_circuit):
    base = hs.HistoryFamily.from_circuit(worked_circuit)
    bell = base.inserted(1, LocalBasis.bell(2).projector_set())
    comp = base.inserted(2, ProjectorSet.computational(4))
    assert hs.is_trivial_extension(base, bell)
    assert not hs.is_trivial_extension(base, comp)
    # eigenbasis of the evolved pure state
    psi = worked_circuit.state_at(2)
    u = np.linalg.qr(np.column_stack([psi, np.eye(4)[:, :3]]))[0]
    eig = base.inserted(2, ProjectorSet.from_basis(u))
    assert hs.is_trivial_extension(base, eig)


def test_pseudopure_family(worked_family):
    rep = hs.check_pseudopure_family(worked_family, 0.3)
    assert rep.passed
    assert rep.details["decomposition_error"] < 1e-12
    assert rep.details["identity_computing_sum"] < 1e-12
    pure = hs.check_pseudopure_family(worked_family, 1.0)
    assert pure.passed == hs.check_computing(worked_family).passed


def test_pseudopure_identity_two_event():
    rng = np.random.default_rng(12)
    c = Circuit(2, random_state(rng, 4), (random_unitary(rng, 4),))
    fam = hs.HistoryFamily.from_circuit(c, {0: random_basis_set(rng, 4)})
    rep = hs.check_pseudopure_family(fam, 0.0)
    assert rep.passed and rep.details["identity_offdiagonal"] < 1e-12


def test_repeated_set_under_diagonal_gates():
    """A consistent rank-1 set repeated across gates diagonal in its basis stays consistent."""
    rng = np.random.default_rng(13)
    diag_gates = [embed(S, (0,), 2), embed(T, (1,), 2), embed(Z, (0,), 2), np.diag([1, 1, 1, -1]).astype(complex)]
    for _ in range(20):
        psi = random_state(rng, 4)
        gates = [diag_gates[i] for i in rng.integers(0, 4, size=3)] + [random_unitary(rng, 4)]
        c = Circuit(2, psi, tuple(gates))
        comp = ProjectorSet.computational(4)
        one = hs.HistoryFamily.from_circuit(c, {0: comp})
        if not hs.check_computing(one).passed:
            continue
        rep = hs.HistoryFamily.from_circuit(c, {k: comp for k in range(4)})
        assert hs.check_computing(rep, 1e-10).passed


def test_computing_sums_formula(worked_family):
    sums = hs.computing_sums(worked_family)
    assert np.abs(sums).max() < 1e-12


def test_check_unknown_level(worked_family):
    with pytest.raises(ValueError):
        hs.check(worked_family, "sideways")


def test_report_roundtrip(worked_family):
    d = hs.check_medium(worked_family).to_dict()
    assert d["level"] == "medium" and d["passed"] is False
    assert isinstance(d["witnesses"], list)


def test_general_dimension_family():
    fam = hs.build_weak_bound_family(6)
    assert fam.circuit.qubits is None and fam.dim == 6
    c = Circuit(None, ket("0") if False else np.eye(3)[0].astype(complex), (qft(3),))
    assert hs.check_all(hs.HistoryFamily.from_circuit(c))["medium"].passed
