"""Edge embeddings on the weighted line graph, with node centers and radii."""

from .embedder import (ConstraintViolationWarning, EmbeddingState, PenaltySchedule, TrainConfig,
                       TrainingDiverged, TrainResult, init_state, total_loss, train)
from .evaluate import (EvalReport, classify_edges, cluster_edges, cluster_nodes_on_centers,
                       correlate_radii, derive_edge_labels, kmeans, project_2d,
                       unsupervised_accuracy)
from .graph import (Graph, GraphFormatError, betweenness_centrality, closeness_centrality,
                    degree, load_edge_list, load_node_labels)
from .linegraph import LineGraph, build_line_graph, line_node_of
from .walks import WalkConfig, WalkCorpus, context_pairs, generate_walks

__version__ = "0.1.0"

__all__ = [
    "ConstraintViolationWarning", "EmbeddingState", "EvalReport", "Graph", "GraphFormatError",
    "LineGraph", "PenaltySchedule", "TrainConfig", "TrainResult", "TrainingDiverged",
    "WalkConfig", "WalkCorpus", "betweenness_centrality", "build_line_graph", "classify_edges",
    "closeness_centrality", "cluster_edges", "cluster_nodes_on_centers", "context_pairs",
    "correlate_radii", "degree", "derive_edge_labels", "generate_walks", "init_state", "kmeans",
    "line_node_of", "load_edge_list", "load_node_labels", "project_2d", "total_loss", "train",
    "unsupervised_accuracy",
]
