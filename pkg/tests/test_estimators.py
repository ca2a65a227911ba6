import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from histoq.estimators import (
    ConsistencyAnalyzer,
    LocalExtensionSearch,
    RobustnessEstimator,
    StochasticSimulator,
)


def test_params_roundtrip():
    est = LocalExtensionSearch(stage=2, grid=np.pi / 4)
    params = est.get_params()
    assert params["stage"] == 2 and params["grid"] == np.pi / 4
    est.set_params(level="medium")
    assert clone(est).level == "medium"


def test_analyzer(worked_family, worked_circuit):
    an = ConsistencyAnalyzer(epsilon=1e-10)
    with pytest.raises(NotFittedError):
        an.verdicts_
    an.fit(worked_family)
    assert an.verdicts_ == {"weak": True, "medium": False, "computing": True, "strong": False}
    np.testing.assert_allclose(an.probabilities_.sum(), 1.0)
    assert an.predict([worked_family, worked_circuit], "medium") == [False, True]
    assert an.transform(worked_family).shape == (16, 16)
    with pytest.raises(TypeError):
        an.fit("nope")


def test_search_estimator(worked_circuit):
    est = LocalExtensionSearch(stage=2, grid=np.pi / 4, require_nontrivial=True).fit(worked_circuit)
    bases = est.predict()
    assert bases and np.allclose(np.abs(bases[0].vectors()), np.eye(4))


def test_simulator(worked_family):
    sim = StochasticSimulator().fit(worked_family)
    np.testing.assert_allclose(sim.predict(), [0.5, 3 / 16, 1 / 8, 3 / 16], atol=1e-12)
    np.testing.assert_allclose(sim.predict([1, 0, 0, 0]), [1, 0, 0, 0], atol=1e-12)
    assert sim.sum_rule_.passed


def test_robustness_estimator(worked_circuit):
    est = RobustnessEstimator(samples=2000, seed=1).fit(worked_circuit)
    assert est.score() == est.report_.reduction
    assert est.report_.rng_seed == 1
