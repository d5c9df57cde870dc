"""Probability and variance propagation in tree belief networks.

The conditional probabilities stored in a network are treated as uncertain
quantities (Dirichlet, finite-support, or known exactly).  This package
propagates both the probabilities and the variance that the stored
uncertainty induces in every inferred probability, ships brute-force oracles
for validating the engine, and checks the prior-variance upper bound that
holds on binary beta trees.
"""

__version__ = "0.1.0"

from . import errors
from .bounds import (
    BetaParams,
    BoundEntry,
    BoundReport,
    beta_mean_upper_bound,
    beta_moments,
    chain_child_variance,
    check_moment_condition,
    check_variance_bound,
    search_bound_extensions,
)
from .model import (
    Dirichlet,
    DiscreteSupport,
    MomentSet,
    NetworkSpec,
    NodeSpec,
    PointMass,
    ValidatedNetwork,
    check_evidence,
    moments_of,
    validate_network,
)
from .netfile import load_network, network_to_json, parse_network, save_network
from .oracle import (
    MODES,
    OracleEntry,
    OracleReport,
    enumerate_uncertainty,
    exact_inference,
    mc_uncertainty,
    point_tables,
)
from .propagation import (
    ChildMessage,
    MessageState,
    NodeReport,
    ParentMessage,
    combine_children,
    child_to_parent,
    init_state,
    parent_to_child,
    posterior_report,
    propagate,
    query_node,
    unit_child_message,
)

__all__ = [
    "__version__",
    "errors",
    "BetaParams",
    "BoundEntry",
    "BoundReport",
    "beta_mean_upper_bound",
    "beta_moments",
    "chain_child_variance",
    "check_moment_condition",
    "check_variance_bound",
    "search_bound_extensions",
    "Dirichlet",
    "DiscreteSupport",
    "MomentSet",
    "NetworkSpec",
    "NodeSpec",
    "PointMass",
    "ValidatedNetwork",
    "check_evidence",
    "moments_of",
    "validate_network",
    "load_network",
    "network_to_json",
    "parse_network",
    "save_network",
    "MODES",
    "OracleEntry",
    "OracleReport",
    "enumerate_uncertainty",
    "exact_inference",
    "mc_uncertainty",
    "point_tables",
    "ChildMessage",
    "MessageState",
    "NodeReport",
    "ParentMessage",
    "combine_children",
    "child_to_parent",
    "init_state",
    "parent_to_child",
    "posterior_report",
    "propagate",
    "query_node",
    "unit_child_message",
]
