"""Consistent-histories analysis of small quantum circuits."""

from .classical import (
    Distribution,
    TransitionChain,
    TransitionMatrix,
    compile_chain,
    run_chain,
    transition_matrix,
    verify_sum_rule,
)
from .estimators import ConsistencyAnalyzer, LocalExtensionSearch, RobustnessEstimator, StochasticSimulator
from .graph import GreenGraph, build_graph, export_dot, graph_from_family, loop_product
from .histories import (
    ConsistencyReport,
    HistoryFamily,
    check,
    check_all,
    coherence_matrix,
    count_nonzero_histories,
)
from .io import dumps, load_circuit, load_family, parse_circuit, parse_family, serialize_report
from .noise import DephasingChannel, NoiseReport, dephase, kl_divergence, run_robustness_experiment
from .quantum import Circuit, LocalBasis, ProjectorSet
from .search import SearchConfig, SearchResult, classicality_profile, search_local_extensions

__version__ = "0.1.0"
