"""Incremental refinement of discrete Bayesian network structure.

Prime a network with an expert's variable ordering and per-arc prior
beliefs, stream fully observed examples through it, search the space of
high-posterior parent sets per variable with an any-time beam search, and
interrogate the result: arc posteriors, a best single network, or sampled
smoothed networks that average over the surviving alternatives.
"""

from .domain import (
    ArcPriorMatrix,
    ConcreteNetwork,
    ConfigurationError,
    CountTable,
    DomainSchema,
    Example,
    ExampleError,
    PriorConfig,
    VariableSpec,
)
from .engine import (
    CombinedNetwork,
    SearchParams,
    SearchReport,
    best_network,
    init,
    network_stats,
    observe,
    observe_batch,
    refine,
    rethreshold,
    sync_node,
)
from .lattice import ExpansionFlag, LatticeNode, NodeStatus, ParentLattice
from .query import (
    ArcPosteriorMatrix,
    SmoothedNetwork,
    all_arc_posteriors,
    arc_posterior,
    loglik_dataset,
    sample_smoothed,
)
from .sampling import forward_sample

__all__ = [
    "ArcPosteriorMatrix",
    "ArcPriorMatrix",
    "CombinedNetwork",
    "ConcreteNetwork",
    "ConfigurationError",
    "CountTable",
    "DomainSchema",
    "Example",
    "ExampleError",
    "ExpansionFlag",
    "LatticeNode",
    "NodeStatus",
    "ParentLattice",
    "PriorConfig",
    "SearchParams",
    "SearchReport",
    "SmoothedNetwork",
    "VariableSpec",
    "all_arc_posteriors",
    "arc_posterior",
    "best_network",
    "forward_sample",
    "init",
    "loglik_dataset",
    "network_stats",
    "observe",
    "observe_batch",
    "refine",
    "rethreshold",
    "sample_smoothed",
    "sync_node",
]
