"""Robust elastic principal graphs.

Principal trees grown by the "add a node to a node" / "bisect an edge"
grammar and fitted by splitting minimization of an elastic energy whose
data term can be trimmed at a robustness radius.
"""
__version__ = "0.1.0"

from .energy import (
    DataError, Dataset, Embedding, EnergyReport, approx_energy, graph_energy, robust_approx_energy,
    total_energy,
)
from .grammar import AddNodeToNode, BisectEdge, GrowthConfig, apply_add_node, apply_bisect_edge, enumerate_candidates, grow
from .graph import Edge, ElasticGraph, GraphError, Star, degree, new_graph, rebuild_stars
from .optimizer import (
    FitTrace, OptimizerConfig, Partition, SingularSystemError, build_partition, fit, solve_positions,
)
from .pipeline import EpochSpec, LocalNeighborhood, PrincipalSegment, hybrid_preset, initialize, run_epochs

__all__ = [
    "AddNodeToNode", "BisectEdge", "DataError", "Dataset", "Edge", "ElasticGraph", "Embedding",
    "EnergyReport", "EpochSpec", "FitTrace", "GraphError", "GrowthConfig", "LocalNeighborhood",
    "OptimizerConfig", "Partition", "PrincipalSegment", "SingularSystemError", "Star",
    "apply_add_node", "apply_bisect_edge", "approx_energy", "build_partition", "degree",
    "enumerate_candidates", "fit", "graph_energy", "grow", "hybrid_preset", "initialize", "new_graph",
    "rebuild_stars", "robust_approx_energy", "run_epochs", "solve_positions", "total_energy",
]
