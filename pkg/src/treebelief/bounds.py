"""Beta-moment identities and prior-variance bound checks for binary beta trees.

The candidate bound checked here: a node's prior variance should not exceed
the largest variance among its own stored conditional entries.  This module
exposes the closed forms and inequalities around that bound as callable
checks, a whole-network checker that compares propagated prior variances
against it, and an exploratory probe of where the bound holds and breaks.

The bound does not always hold.  A parent's variance reaches its child scaled
by the squared separation of the child's row means (see
:func:`chain_child_variance`), so a high-variance parent feeding a child
whose rows are confident but far apart produces child variances well above
every row variance.  :func:`search_bound_extensions` finds such cases
routinely; :func:`check_variance_bound` reports honestly either way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import DomainError, PreconditionViolated
from .model import Dirichlet, MomentSet, ValidatedNetwork
from .propagation import posterior_report, propagate

#: Numerical slack for the inequality checks.
BOUND_TOL = 1e-12


@dataclass(frozen=True)
class BetaParams:
    """Beta density exponents: density proportional to ``p**a * (1-p)**b``.

    Conventional shape parameters are ``a + 1`` and ``b + 1``; both exponents
    must exceed -1.
    """

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > -1.0 and self.b > -1.0):
            raise DomainError(f"beta exponents must exceed -1, got a={self.a}, b={self.b}")

    def to_dirichlet(self) -> Dirichlet:
        return Dirichlet(np.array([self.a + 1.0, self.b + 1.0]))


def beta_moments(params: BetaParams) -> Tuple[float, float, float]:
    """Mean, second moment and cross moment ``E(p (1-p))`` of a beta variable.

    ::

        E        = (a + 1) / (a + b + 2)
        E(p^2)   = (a + 2) / (a + b + 3) * E
        E(p(1-p)) = (b + 1) / (a + b + 3) * E
    """
    a, b = params.a, params.b
    mean = (a + 1.0) / (a + b + 2.0)
    second = (a + 2.0) / (a + b + 3.0) * mean
    cross = (b + 1.0) / (a + b + 3.0) * mean
    return mean, second, cross


def check_moment_condition(moments: MomentSet) -> bool:
    """True when the binary moments satisfy ``E(p^2) <= (E + E^2) / 2``.

    Every beta-distributed probability with exponents summing to at least
    zero satisfies this, and the property is preserved from a parent's prior
    moments to its child's, so holding at the root buys it at every node.
    """
    if moments.dim != 2:
        raise PreconditionViolated("the moment condition is defined for binary vectors")
    mean = float(moments.mean[0])
    second = float(moments.second[0, 0])
    return second <= (mean + mean * mean) / 2.0 + BOUND_TOL


def beta_mean_upper_bound(variance: float) -> float:
    """Largest mean a beta-distributed probability can have at this variance.

    Solves ``E**2 - E + 3V <= 0`` for the admissible mean:
    ``(1 + sqrt(1 - 12 V)) / 2``.  Beta variances never exceed 1/12.
    """
    if variance < 0.0 or variance > 1.0 / 12.0 + BOUND_TOL:
        raise DomainError(f"beta variances lie in [0, 1/12], got {variance}")
    return (1.0 + math.sqrt(max(0.0, 1.0 - 12.0 * variance))) / 2.0


def chain_child_variance(
    e: float, v: float, e1: float, v1: float, e2: float, v2: float
) -> float:
    """Closed-form prior variance of a binary child's first alternative.

    ``e, v`` are the mean and variance of the binary parent's first
    alternative; ``e1, v1`` and ``e2, v2`` are means and variances of the
    child's first alternative conditional on each parent alternative.  This
    must match the propagation engine's prior variance on the corresponding
    two-node network.
    """
    if not (0.0 <= e <= 1.0 and 0.0 <= e1 <= 1.0 and 0.0 <= e2 <= 1.0):
        raise DomainError("means must lie in [0, 1]")
    if v < 0.0 or v1 < 0.0 or v2 < 0.0:
        raise DomainError("variances must be >= 0")
    return v * (v1 + v2 + (e1 - e2) ** 2) + v2 * (1.0 - e) ** 2 + v1 * e**2


@dataclass(frozen=True)
class BoundEntry:
    node: str
    variance: float
    bound: float
    slack: float
    passed: bool


@dataclass(frozen=True)
class BoundReport:
    entries: Tuple[BoundEntry, ...]
    passed: bool

    def entry(self, node_id: str) -> BoundEntry:
        for e in self.entries:
            if e.node == node_id:
                return e
        raise KeyError(node_id)


def _require_binary_beta(net: ValidatedNetwork) -> None:
    for node_id in net.order:
        node = net.nodes[node_id]
        if node.dim != 2:
            raise PreconditionViolated(f"node {node_id!r} is not binary")
        for dist in node.rows:
            if not isinstance(dist, Dirichlet) or dist.dim != 2:
                raise PreconditionViolated(
                    f"node {node_id!r} stores a non-beta distribution"
                )


def check_variance_bound(net: ValidatedNetwork) -> BoundReport:
    """Check every non-root node's prior variance against its row variances.

    Requires a binary tree whose rows are all two-dimensional Dirichlet
    (beta) distributions.  For each non-root node the bound is the maximum
    over parent alternatives of the variance of the stored conditional entry;
    by the binary symmetry of variances only the first alternative is
    reported.  ``passed`` tolerates slack down to ``-BOUND_TOL``.  The bound
    can genuinely fail (see the module docstring); the report says so rather
    than erroring.
    """
    _require_binary_beta(net)
    reports = posterior_report(propagate(net, {}))
    entries: List[BoundEntry] = []
    for node_id in net.order:
        node = net.nodes[node_id]
        if node.parent is None:
            continue
        variance = float(reports[node_id].variance[0])
        bound = max(
            float(m.second[0, 0] - m.mean[0] ** 2) for m in node.row_moments
        )
        slack = bound - variance
        entries.append(BoundEntry(node_id, variance, bound, slack, slack >= -BOUND_TOL))
    return BoundReport(tuple(entries), all(e.passed for e in entries))


def search_bound_extensions(
    seed: int = 0,
    trials: int = 200,
    rng: Optional[np.random.Generator] = None,
) -> Dict[str, list]:
    """Randomized probe of where the row-variance bound holds and breaks.

    Searches (a) three-alternative Dirichlet chains, checking the bound
    analog per alternative, (b) binary beta trees with an instantiated leaf,
    checking ancestor posterior variances against the same per-node bound,
    and (c) the bound's own domain, binary beta trees with no evidence.
    Findings are returned for logging; nothing here is asserted.
    """
    from .generate import random_beta_tree  # local import to avoid a cycle
    from .model import NetworkSpec, NodeSpec, validate_network

    rng = rng if rng is not None else np.random.default_rng(seed)
    findings: Dict[str, list] = {
        "multi_alternative": [],
        "upward_from_evidence": [],
        "binary_prior": [],
    }

    def rnd_dirichlet(k: int) -> Dirichlet:
        return Dirichlet(np.exp(rng.uniform(np.log(0.5), np.log(50.0), size=k)))

    for trial in range(trials):
        # (a) chain of 3-alternative nodes with random Dirichlet rows
        labels = ("x1", "x2", "x3")
        spec = NetworkSpec(
            (
                NodeSpec("r", labels, None, (rnd_dirichlet(3),)),
                NodeSpec("c", labels, "r", tuple(rnd_dirichlet(3) for _ in range(3))),
            )
        )
        net = validate_network(spec)
        rep = posterior_report(propagate(net, {}))["c"]
        node = net.nodes["c"]
        for alt in range(3):
            bound = max(
                float(m.second[alt, alt] - m.mean[alt] ** 2) for m in node.row_moments
            )
            excess = float(rep.variance[alt]) - bound
            if excess > BOUND_TOL:
                findings["multi_alternative"].append(
                    {"trial": trial, "alternative": alt, "excess": excess}
                )

        # (b) posterior variances above an instantiated leaf in a beta tree
        tree = validate_network(random_beta_tree(rng, max_depth=3))
        leaves = [n for n in tree.order if not tree.nodes[n].children]
        leaf = leaves[int(rng.integers(len(leaves)))]
        if leaf == tree.root:
            continue
        reports = posterior_report(propagate(tree, {leaf: int(rng.integers(2))}))
        for node_id in tree.order:
            node = tree.nodes[node_id]
            if node.parent is None or node_id == leaf:
                continue
            bound = max(
                float(m.second[0, 0] - m.mean[0] ** 2) for m in node.row_moments
            )
            excess = float(reports[node_id].variance[0]) - bound
            if excess > BOUND_TOL:
                findings["upward_from_evidence"].append(
                    {"trial": trial, "node": node_id, "excess": excess}
                )

        # (c) the bound's own domain: binary beta tree, empty evidence
        report = check_variance_bound(tree)
        for entry in report.entries:
            if not entry.passed:
                findings["binary_prior"].append(
                    {"trial": trial, "node": entry.node, "excess": -entry.slack}
                )
    return findings
