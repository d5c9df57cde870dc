"""Tree belief networks with second-order uncertainty on their stored probabilities.

A network is a rooted tree of categorical nodes.  Every node stores one
probability row per parent alternative (a single row for the root), and each
row is *uncertain*: instead of a fixed probability vector it carries a
distribution over probability vectors.  The propagation engine never looks at
those distributions directly; it consumes only their first moments ``E(p_i)``
and second moments ``E(p_i p_j)``, packaged here as :class:`MomentSet`.

All types are immutable after construction and all operations are pure
functions, so they are safe to share between threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np

from .errors import (
    BadDistribution,
    CycleDetected,
    DimensionMismatch,
    InvalidNetwork,
    MultipleRoots,
    UnknownAlternative,
    UnknownNode,
)

#: Absolute tolerance on probability-vector and weight sums.
PROB_TOL = 1e-9


def _prob_vector(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise BadDistribution(f"{what}: expected a non-empty 1-d probability vector")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise BadDistribution(f"{what}: entries must be finite and >= 0")
    if abs(float(arr.sum()) - 1.0) > PROB_TOL:
        raise BadDistribution(f"{what}: entries sum to {arr.sum()!r}, not 1")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Dirichlet:
    """Dirichlet-distributed probability vector, conventional ``alpha > 0``."""

    alpha: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.alpha, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise BadDistribution("dirichlet: alpha must be a non-empty vector")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
            raise BadDistribution("dirichlet: every alpha entry must be > 0")
        arr.flags.writeable = False
        object.__setattr__(self, "alpha", arr)

    @property
    def dim(self) -> int:
        return self.alpha.size


@dataclass(frozen=True, eq=False)
class DiscreteSupport:
    """Finitely supported distribution over probability vectors.

    ``points`` holds one probability vector per row; ``weights`` are positive
    and sum to 1.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise BadDistribution("discrete support: points must be a (m, k) array")
        for row in range(pts.shape[0]):
            _prob_vector(pts[row], f"discrete support point {row}")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise BadDistribution("discrete support: one weight per point required")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise BadDistribution("discrete support: weights must be finite and > 0")
        if abs(float(w.sum()) - 1.0) > PROB_TOL:
            raise BadDistribution(f"discrete support: weights sum to {w.sum()!r}, not 1")
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class PointMass:
    """A known probability vector (no second-order uncertainty)."""

    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _prob_vector(self.p, "point mass"))

    @property
    def dim(self) -> int:
        return self.p.size


UncertainDistribution = Union[Dirichlet, DiscreteSupport, PointMass]


@dataclass(frozen=True, eq=False)
class MomentSet:
    """First and second moments of one uncertain probability vector.

    ``mean[i] = E(p_i)`` and ``second[i, j] = E(p_i p_j)``.  Because the
    underlying random vector always sums to 1, every row of ``second`` must
    sum back to the corresponding mean, and the diagonal is squeezed between
    ``mean**2`` and ``mean``.
    """

    mean: np.ndarray
    second: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        second = np.asarray(self.second, dtype=float)
        k = mean.size
        if mean.ndim != 1 or second.shape != (k, k):
            raise BadDistribution("moment set: mean (k,) and second (k, k) required")
        if np.any(mean < -PROB_TOL) or abs(float(mean.sum()) - 1.0) > PROB_TOL:
            raise BadDistribution("moment set: mean is not a probability vector")
        if np.any(second < -PROB_TOL):
            raise BadDistribution("moment set: second moments must be >= 0")
        if np.max(np.abs(second - second.T)) > PROB_TOL:
            raise BadDistribution("moment set: second-moment matrix must be symmetric")
        if np.max(np.abs(second.sum(axis=1) - mean)) > PROB_TOL:
            raise BadDistribution("moment set: row sums of second moments must equal the mean")
        diag = np.diag(second)
        if np.any(diag > mean + PROB_TOL) or np.any(diag < mean**2 - PROB_TOL):
            raise BadDistribution("moment set: diagonal must lie between mean**2 and mean")
        mean.flags.writeable = False
        second.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "second", second)

    @property
    def dim(self) -> int:
        return self.mean.size

    def variance(self) -> np.ndarray:
        return np.diag(self.second) - self.mean**2


def moments_of(dist: UncertainDistribution) -> MomentSet:
    """Extract the moments the propagation engine needs from a distribution.

    For ``Dirichlet(alpha)`` with ``a0 = sum(alpha)``::

        E(p_i)     = alpha_i / a0
        E(p_i^2)   = alpha_i (alpha_i + 1) / (a0 (a0 + 1))
        E(p_i p_j) = alpha_i alpha_j / (a0 (a0 + 1))        (i != j)

    Discrete supports take weighted sums over their points; a point mass has
    ``second = outer(p, p)`` and zero variance.
    """
    if isinstance(dist, Dirichlet):
        a = dist.alpha
        a0 = float(a.sum())
        mean = a / a0
        second = np.outer(a, a) / (a0 * (a0 + 1.0))
        np.fill_diagonal(second, a * (a + 1.0) / (a0 * (a0 + 1.0)))
        return MomentSet(mean, second)
    if isinstance(dist, DiscreteSupport):
        pts, w = dist.points, dist.weights
        mean = w @ pts
        second = pts.T @ (w[:, None] * pts)
        return MomentSet(mean, second)
    if isinstance(dist, PointMass):
        return MomentSet(dist.p, np.outer(dist.p, dist.p))
    raise BadDistribution(f"unsupported distribution type {type(dist).__name__}")


@dataclass(frozen=True)
class NodeSpec:
    id: str
    alternatives: tuple
    parent: Optional[str]
    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "alternatives", tuple(self.alternatives))
        object.__setattr__(self, "rows", tuple(self.rows))


@dataclass(frozen=True)
class NetworkSpec:
    nodes: tuple

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))


class ValidatedNode:
    """One node with resolved adjacency and precomputed row moments."""

    __slots__ = ("id", "alternatives", "parent", "children", "rows", "row_moments")

    def __init__(self, spec: NodeSpec, children, row_moments):
        self.id = spec.id
        self.alternatives = spec.alternatives
        self.parent = spec.parent
        self.children = tuple(children)
        self.rows = spec.rows
        self.row_moments = tuple(row_moments)

    @property
    def dim(self) -> int:
        return len(self.alternatives)

    def mean_rows(self) -> np.ndarray:
        """Stacked row means, shape (n_rows, dim)."""
        return np.stack([m.mean for m in self.row_moments])


class ValidatedNetwork:
    """A structurally checked network with parent/child adjacency resolved.

    ``order`` lists node ids with every parent before its children.
    """

    __slots__ = ("nodes", "order", "root")

    def __init__(self, nodes: Mapping[str, ValidatedNode], order, root: str):
        self.nodes = dict(nodes)
        self.order = tuple(order)
        self.root = root

    def node(self, node_id: str) -> ValidatedNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"node {node_id!r} is not part of the network") from None

    def alt_index(self, node_id: str, label: str) -> int:
        node = self.node(node_id)
        try:
            return node.alternatives.index(label)
        except ValueError:
            raise UnknownAlternative(
                f"node {node_id!r} has no alternative {label!r}"
            ) from None

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)


def validate_network(spec: NetworkSpec) -> ValidatedNetwork:
    """Check every structural invariant of ``spec`` and resolve adjacency.

    Raises :class:`CycleDetected`, :class:`MultipleRoots`,
    :class:`DimensionMismatch` or :class:`BadDistribution`, always naming the
    offending node.
    """
    if not spec.nodes:
        raise InvalidNetwork("network has no nodes")

    by_id = {}
    for ns in spec.nodes:
        if not isinstance(ns.id, str) or not ns.id:
            raise InvalidNetwork(f"node id {ns.id!r} must be a non-empty string")
        if ns.id in by_id:
            raise InvalidNetwork(f"duplicate node id {ns.id!r}")
        by_id[ns.id] = ns

    roots = [ns.id for ns in spec.nodes if ns.parent is None]
    if len(roots) > 1:
        raise MultipleRoots(f"nodes {roots[0]!r} and {roots[1]!r} both claim no parent")
    if not roots:
        raise CycleDetected("no root: every node names a parent")
    root = roots[0]

    children = {ns.id: [] for ns in spec.nodes}
    for ns in spec.nodes:
        if ns.parent is None:
            continue
        if ns.parent not in by_id:
            raise UnknownNode(f"node {ns.id!r}: parent {ns.parent!r} is not defined")
        if ns.parent == ns.id:
            raise CycleDetected(f"node {ns.id!r} is its own parent")
        children[ns.parent].append(ns.id)

    # Every parent chain must reach the root without revisiting a node.
    settled = {root}
    for ns in spec.nodes:
        chain, cur = [], ns.id
        while cur not in settled:
            if cur in chain:
                raise CycleDetected(f"node {cur!r} is part of a parent cycle")
            chain.append(cur)
            cur = by_id[cur].parent
        settled.update(chain)

    validated = {}
    for ns in spec.nodes:
        k = len(ns.alternatives)
        if k < 2:
            raise InvalidNetwork(f"node {ns.id!r}: at least two alternatives required")
        if len(set(ns.alternatives)) != k:
            raise InvalidNetwork(f"node {ns.id!r}: alternative labels must be unique")
        expected_rows = 1 if ns.parent is None else len(by_id[ns.parent].alternatives)
        if len(ns.rows) != expected_rows:
            raise DimensionMismatch(
                f"node {ns.id!r}: {len(ns.rows)} rows, expected {expected_rows}"
            )
        row_moments = []
        for j, dist in enumerate(ns.rows):
            if not isinstance(dist, (Dirichlet, DiscreteSupport, PointMass)):
                raise BadDistribution(
                    f"node {ns.id!r}, row {j}: unsupported distribution "
                    f"{type(dist).__name__}"
                )
            if dist.dim != k:
                raise DimensionMismatch(
                    f"node {ns.id!r}, row {j}: distribution dimension {dist.dim} "
                    f"!= {k} alternatives"
                )
            row_moments.append(moments_of(dist))
        validated[ns.id] = ValidatedNode(ns, children[ns.id], row_moments)

    order = []
    stack = [root]
    while stack:
        cur = stack.pop()
        order.append(cur)
        stack.extend(reversed(children[cur]))
    return ValidatedNetwork(validated, order, root)


def check_evidence(net: ValidatedNetwork, evidence: Mapping[str, int]) -> None:
    """Raise unless every evidence entry names a known node and alternative."""
    for node_id, idx in evidence.items():
        node = net.node(node_id)
        if not isinstance(idx, (int, np.integer)) or not 0 <= idx < node.dim:
            raise UnknownAlternative(
                f"node {node_id!r}: alternative index {idx!r} out of range"
            )
