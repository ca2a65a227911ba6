"""Estimator-style wrappers over the functional core.

Each class stores its configuration in ``__init__`` (so ``get_params`` and
``set_params`` work as usual), learns from a circuit or family in ``fit``
and exposes results through trailing-underscore attributes.
"""

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import classical, histories, noise, search
from .histories import HistoryFamily
from .quantum import Circuit, LocalBasis


def _as_family(x):
    if isinstance(x, HistoryFamily):
        return x
    if isinstance(x, Circuit):
        return HistoryFamily.from_circuit(x)
    raise TypeError(f"expected a HistoryFamily or Circuit, got {type(x).__name__}")


def _as_circuit(x):
    if isinstance(x, Circuit):
        return x
    if isinstance(x, HistoryFamily):
        return x.circuit
    raise TypeError(f"expected a Circuit or HistoryFamily, got {type(x).__name__}")


class ConsistencyAnalyzer(BaseEstimator):
    """Coherence matrix and consistency verdicts of a family.

    Parameters
    ----------
    epsilon : float
        Tolerance on the violating terms.
    method : {"branch", "operator"}
        How the coherence matrix is computed.
    """

    def __init__(self, epsilon=histories.DEFAULT_EPSILON, method="branch"):
        self.epsilon = epsilon
        self.method = method

    def fit(self, X, y=None):
        fam = _as_family(X)
        self.family_ = fam
        self.coherence_ = histories.coherence_matrix(fam, self.method)
        self.probabilities_ = self.coherence_.probabilities()
        self.reports_ = histories.check_all(fam, self.epsilon)
        return self

    def transform(self, X):
        """Coherence matrix of ``X`` as a dense array."""
        check_is_fitted(self, "coherence_")
        return histories.coherence_matrix(_as_family(X), self.method).matrix

    def predict(self, X, level="computing"):
        """Verdict at ``level`` for each family in ``X``."""
        check_is_fitted(self, "reports_")
        return [histories.check(_as_family(x), level, self.epsilon).passed for x in X]

    @property
    def verdicts_(self):
        check_is_fitted(self, "reports_")
        return {k: (None if r is None else r.passed) for k, r in self.reports_.items()}


class LocalExtensionSearch(BaseEstimator):
    """Grid search for consistently insertable local bases at one stage."""

    def __init__(
        self,
        stage=1,
        level="computing",
        epsilon=search.DEFAULT_EPSILON,
        grid=search.DEFAULT_GRID,
        joint_block_max=1,
        require_nontrivial=False,
        max_results=50,
        threads=1,
    ):
        self.stage = stage
        self.level = level
        self.epsilon = epsilon
        self.grid = grid
        self.joint_block_max = joint_block_max
        self.require_nontrivial = require_nontrivial
        self.max_results = max_results
        self.threads = threads

    def _config(self):
        return search.SearchConfig(
            stage=self.stage,
            level=self.level,
            epsilon=self.epsilon,
            grid=self.grid,
            joint_block_max=self.joint_block_max,
            require_nontrivial=self.require_nontrivial,
            max_results=self.max_results,
        )

    def fit(self, X, y=None):
        family = X if isinstance(X, HistoryFamily) else None
        self.results_ = search.search_local_extensions(_as_circuit(X), self._config(), family, self.threads)
        return self

    def predict(self, X=None):
        """Bases found by the last ``fit``, best first."""
        check_is_fitted(self, "results_")
        return [r.basis for r in self.results_]


class StochasticSimulator(BaseEstimator):
    """Compile a consistent rank-1 family into a stochastic chain."""

    def __init__(self, epsilon=histories.DEFAULT_EPSILON, require_consistent=True):
        self.epsilon = epsilon
        self.require_consistent = require_consistent

    def fit(self, X, y=None):
        fam = _as_family(X)
        self.chain_ = classical.compile_chain(fam, self.epsilon, self.require_consistent)
        self.sum_rule_ = classical.verify_sum_rule(fam.circuit, fam)
        return self

    def predict(self, X=None):
        """Final distribution of the chain (``X`` replaces the initial distribution)."""
        check_is_fitted(self, "chain_")
        chain = self.chain_
        if X is not None:
            init = classical.Distribution(X, chain.initial.labels)
            chain = classical.TransitionChain(init, chain.matrices, chain.stages)
        return classical.run_chain(chain).probabilities


class RobustnessEstimator(BaseEstimator):
    """Monte Carlo damage of random local dephasing with and without a prior consistent measurement."""

    def __init__(self, stage=2, basis=None, samples=100_000, seed=0, strength=1.0, threads=1):
        self.stage = stage
        self.basis = basis
        self.samples = samples
        self.seed = seed
        self.strength = strength
        self.threads = threads

    def fit(self, X, y=None):
        circ = _as_circuit(X)
        basis = self.basis if self.basis is not None else LocalBasis.computational(circ.qubits)
        self.report_ = noise.run_robustness_experiment(
            circ, self.stage, basis, self.samples, self.seed, self.strength, self.threads
        )
        return self

    def score(self, X=None, y=None):
        """The estimated reduction of the damage."""
        check_is_fitted(self, "report_")
        return self.report_.reduction
