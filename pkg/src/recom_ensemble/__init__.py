"""Ensemble redistricting analysis with the ReCom Markov chain."""

__version__ = "0.1.0"

from .graph import (
    DualGraph,
    ElectionTallies,
    GraphDataError,
    NodeRecord,
    load_graph,
    merge_nodes,
    validate_graph,
    zero_fill,
)
from .partition import Assignment, county_splits, is_contiguous, population_deviation
from .recom import ChainConfig, InfeasibleError, make_rng, recom_step, run_chain, seed_plan

__all__ = [
    "Assignment",
    "ChainConfig",
    "DualGraph",
    "ElectionTallies",
    "GraphDataError",
    "InfeasibleError",
    "NodeRecord",
    "county_splits",
    "is_contiguous",
    "load_graph",
    "make_rng",
    "merge_nodes",
    "population_deviation",
    "recom_step",
    "run_chain",
    "seed_plan",
    "validate_graph",
    "zero_fill",
]
