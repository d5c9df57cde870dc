import numpy as np
import pytest

from treebelief import (
    Dirichlet,
    DiscreteSupport,
    NetworkSpec,
    NodeSpec,
    PointMass,
    validate_network,
)


def two_node_mixed_spec() -> NetworkSpec:
    """Root with a two-point uncertain prior, child with known columns.

    The child's first alternative has prior mean 0.48, second moment 0.25 and
    variance 0.0196 -- the standing worked example throughout the tests.
    """
    return NetworkSpec(
        (
            NodeSpec(
                "A",
                ("a1", "a2"),
                None,
                (
                    DiscreteSupport(
                        np.array([[0.2, 0.8], [0.6, 0.4]]), np.array([0.5, 0.5])
                    ),
                ),
            ),
            NodeSpec(
                "B",
                ("b1", "b2"),
                "A",
                (PointMass(np.array([0.9, 0.1])), PointMass(np.array([0.2, 0.8]))),
            ),
        )
    )


def uniform_chain_spec() -> NetworkSpec:
    """Two binary nodes, every distribution the uniform beta."""
    flat = lambda: Dirichlet(np.array([1.0, 1.0]))
    return NetworkSpec(
        (
            NodeSpec("A", ("a1", "a2"), None, (flat(),)),
            NodeSpec("B", ("b1", "b2"), "A", (flat(), flat())),
        )
    )


def impossible_evidence_spec() -> NetworkSpec:
    """Deterministic tables under which B=b2 has probability zero."""
    return NetworkSpec(
        (
            NodeSpec("A", ("a1", "a2"), None, (PointMass(np.array([1.0, 0.0])),)),
            NodeSpec(
                "B",
                ("b1", "b2"),
                "A",
                (PointMass(np.array([1.0, 0.0])), PointMass(np.array([0.0, 1.0]))),
            ),
        )
    )


@pytest.fixture
def two_node_mixed():
    return validate_network(two_node_mixed_spec())


@pytest.fixture
def uniform_chain():
    return validate_network(uniform_chain_spec())
