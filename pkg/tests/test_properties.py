"""Property tests over randomly generated families."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import random_family
from histoq import classical as cl
from histoq import graph as gg
from histoq import histories as hs
from histoq import io
from histoq.noise import kl_divergence

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(min_value=0, max_value=2**32 - 1)


@SETTINGS
@given(seeds)
def test_coherence_hermitian_and_normalized(seed):
    fam = random_family(np.random.default_rng(seed))
    d = hs.coherence_matrix(fam).matrix
    assert np.abs(d - d.conj().T).max() < 1e-12
    assert abs(np.trace(d).real - 1.0) < 1e-10
    assert np.linalg.eigvalsh(d).min() > -1e-10
    assert abs(d.sum() - 1.0) < 1e-10


@SETTINGS
@given(seeds)
def test_coherence_routes_agree(seed):
    fam = random_family(np.random.default_rng(seed))
    a = hs.coherence_matrix(fam, "branch").matrix
    b = hs.coherence_matrix(fam, "operator").matrix
    assert np.abs(a - b).max() < 1e-12


@SETTINGS
@given(seeds)
def test_level_hierarchy(seed):
    fam = random_family(np.random.default_rng(seed))
    rep = hs.check_all(fam, 1e-10)
    if rep["medium"].passed:
        assert rep["weak"].passed
    if rep["weak"].passed:
        assert rep["computing"].passed
    if rep["strong"] is not None and rep["strong"].passed:
        assert rep["medium"].passed


@SETTINGS
@given(seeds)
def test_final_marginal_is_born(seed):
    fam = random_family(np.random.default_rng(seed))
    rep = hs.check_computing(fam, 1e-10)
    marg = hs.marginal(fam, fam.n_sets - 1)
    rho = fam.circuit.state_at(fam.circuit.n_stages)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    born = np.einsum("aij,ji->a", fam.sets[-1].projectors, rho).real
    if rep.passed:
        assert np.abs(marg - born).max() < 1e-9


@SETTINGS
@given(seeds)
def test_graph_matches_algebra_rank_one_pure(seed):
    fam = random_family(np.random.default_rng(seed), rank_one=True, pure=True)
    g = gg.graph_from_family(fam)
    assert gg.check_weak_via_loops(g, 1e-10).passed == hs.check_weak(fam, 1e-10).passed
    assert gg.check_medium_via_paths(g).passed == hs.check_medium(fam, 1e-10).passed


@SETTINGS
@given(seeds)
def test_chain_matches_quantum_when_consistent(seed):
    fam = random_family(np.random.default_rng(seed), rank_one=True)
    if hs.check_computing(fam, 1e-12).passed:
        assert cl.verify_sum_rule(fam.circuit, fam, 1e-10).passed


@SETTINGS
@given(seeds)
def test_family_serialization_roundtrip(seed):
    fam = random_family(np.random.default_rng(seed))
    back = io.parse_family(io.serialize_family(fam, dense=True))
    assert np.abs(hs.coherence_matrix(fam).matrix - hs.coherence_matrix(back).matrix).max() < 1e-12


@SETTINGS
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8), st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8))
def test_kl_nonnegative(p, q):
    n = min(len(p), len(q))
    p = np.array(p[:n]) / sum(p[:n])
    q = np.array(q[:n]) / sum(q[:n])
    assert kl_divergence(p, q) >= 0.0
