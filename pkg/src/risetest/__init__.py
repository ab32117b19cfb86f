"""Rank-in-similarity-graph-edge (RISE) two-sample tests."""

__version__ = "0.1.0"

from .errors import (DegenerateCovarianceError, InfeasibleMatchingError, RiseError,
                     ValidationError)
from .geometry import (DistanceMatrix, ObservationSet, distance_matrix, read_distance_csv,
                       read_observations, validate_distance_matrix)
from .graphseq import GraphSequence, build_graph, kmdp_layers, kmst_layers, knn_layers, resolve_k
from .inference import (MomentSummary, SampleSplit, TestResult, condition_diagnostics,
                        degeneracy_check, permutation_moments, permutation_pvalue, rank_sums,
                        rise_test)
from .rankweights import (RankMatrix, binary_weight, graph_depth_rank, graph_induced_rank,
                          kernel_weight, overall_rank, rank_matrix, symmetrize)
from .simbench import (MethodConfig, PowerReport, SimSetting, estimate_power, power_vs_k_sweep,
                       sample_setting)

__all__ = [
    "RiseError", "ValidationError", "DegenerateCovarianceError", "InfeasibleMatchingError",
    "ObservationSet", "DistanceMatrix", "distance_matrix", "validate_distance_matrix",
    "read_observations", "read_distance_csv",
    "GraphSequence", "knn_layers", "kmst_layers", "kmdp_layers", "build_graph", "resolve_k",
    "RankMatrix", "graph_induced_rank", "overall_rank", "graph_depth_rank", "binary_weight",
    "kernel_weight", "symmetrize", "rank_matrix",
    "SampleSplit", "MomentSummary", "TestResult", "rank_sums", "permutation_moments",
    "degeneracy_check", "rise_test", "permutation_pvalue", "condition_diagnostics",
    "SimSetting", "MethodConfig", "PowerReport", "sample_setting", "estimate_power",
    "power_vs_k_sweep",
]
