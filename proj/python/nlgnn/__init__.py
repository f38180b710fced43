"""Non-local graph neural network engine.

Thin Python surface over the C++ core: graph ingestion and generation,
homophily metrics, stratified splits, model training and the scaling
benchmark.
"""

from nlgnn._core import (
    EngineError,
    Graph,
    Split,
    categorize,
    evaluate_mean,
    generate_synthetic,
    graph_from_arrays,
    homophily,
    load_graph,
    reconnected_homophily,
    scaling_experiment,
    split_nodes,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "EngineError",
    "Graph",
    "Split",
    "categorize",
    "evaluate_mean",
    "generate_synthetic",
    "graph_from_arrays",
    "homophily",
    "load_graph",
    "reconnected_homophily",
    "scaling_experiment",
    "split_nodes",
    "train",
]
