"""Message passing that carries second moments alongside probabilities.

Inference runs as a two-phase sweep over the tree.  The upward (collect)
phase sends each node's parent a :class:`ChildMessage`: the expected
likelihood of the evidence in that subtree per receiving alternative,
together with the full matrix of second moments of those likelihoods.  The
downward (distribute) phase sends each node a :class:`ParentMessage`: the
node's distribution conditioned on all evidence *not* below it, again with
second moments.  A query combines both at a node and normalizes by the mean
evidence probability.

Two structural facts make the recurrences exact products and sums:

* distinct conditional rows have independent uncertainty, so a cross moment
  ``E(p(g_k|f_i) p(g_r|f_j))`` factors into a product of means whenever
  ``i != j``, and is read off the row's second-moment matrix when ``i == j``;
* sibling subtrees hang on disjoint uncertainty, so messages from several
  children combine by elementwise products of means and of second-moment
  matrices.

Instantiated nodes terminate both flows: their upward message is built from
their own conditional row moments only, and their children receive the
observed row's moments directly.  Normalizing denominators are always sums of
*mean* values; as a consequence posterior second moments are approximations
(exact for means and for all prior queries) and a reported variance can fall
a hair below zero, which :func:`query_node` clamps and flags.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, InconsistentEvidence, NegativeVariance
from .model import MomentSet, ValidatedNetwork, check_evidence

#: Reported variances below this are a hard error instead of a clamp.
VARIANCE_FLOOR = -1e-9


def _check_likelihood(mean: np.ndarray, second: np.ndarray) -> None:
    k = mean.size
    if mean.ndim != 1 or second.shape != (k, k):
        raise DimensionMismatch("message: mean (k,) and second (k, k) required")
    tol = 1e-9
    if np.any(mean < -tol) or np.any(mean > 1.0 + tol):
        raise ValueError("child message: means must lie in [0, 1]")
    if np.any(second < -tol) or np.any(second > 1.0 + tol):
        raise ValueError("child message: second moments must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class ChildMessage:
    """Expected subtree-evidence likelihoods and their second moments.

    ``mean[i]`` is the probability of the evidence in one child's subtree
    given alternative ``i`` of the receiving node; ``second[i, j]`` is the
    expectation of the product of those (random) likelihoods.  There is no
    sum-to-one constraint.
    """

    mean: np.ndarray
    second: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        second = np.asarray(self.second, dtype=float)
        _check_likelihood(mean, second)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "second", second)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True, eq=False)
class ParentMessage:
    """A node's distribution given all evidence not below it, with moments.

    Means form a probability vector.  With evidence elsewhere in the tree the
    second moments are approximate quantities and may leave [0, 1]; only in
    the no-evidence case do they satisfy every :class:`MomentSet` invariant.
    """

    mean: np.ndarray
    second: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        second = np.asarray(self.second, dtype=float)
        k = mean.size
        if mean.ndim != 1 or second.shape != (k, k):
            raise DimensionMismatch("message: mean (k,) and second (k, k) required")
        if np.any(mean < -1e-9) or abs(float(mean.sum()) - 1.0) > 1e-9:
            raise ValueError("parent message: means must form a probability vector")
        if np.any(second < -1e-9):
            raise ValueError("parent message: second moments must be >= 0")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "second", second)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class NodeReport:
    """Inferred probabilities for one node with second moments and variances."""

    node: str
    mean: np.ndarray
    second: np.ndarray
    variance: np.ndarray
    clamped: bool = False


@dataclass
class MessageState:
    """All messages of one propagation run over an immutable network.

    A state is confined to one query thread; distinct queries on the same
    network may run concurrently with separate states.
    """

    net: ValidatedNetwork
    evidence: Dict[str, int]
    combined: Dict[str, ChildMessage] = field(default_factory=dict)
    upward: Dict[str, ChildMessage] = field(default_factory=dict)
    parent: Dict[str, ParentMessage] = field(default_factory=dict)


def unit_child_message(dim: int) -> ChildMessage:
    """The identity for child-message combination (vacuous evidence)."""
    return ChildMessage(np.ones(dim), np.ones((dim, dim)))


def init_state(net: ValidatedNetwork, evidence: Optional[Mapping[str, int]] = None) -> MessageState:
    """Fresh state: unit child slots everywhere, root conditioned on nothing.

    The root's parent message is exactly the moment set of its single stored
    row, so a query on an evidence-free state reproduces prior moments.
    """
    state = MessageState(net, dict(evidence or {}))
    for node_id in net.order:
        state.combined[node_id] = unit_child_message(net.nodes[node_id].dim)
    root_moments = net.nodes[net.root].row_moments[0]
    state.parent[net.root] = ParentMessage(root_moments.mean, root_moments.second)
    return state


def combine_children(messages: Sequence[ChildMessage], dim: Optional[int] = None) -> ChildMessage:
    """Combine messages from any number of children into one.

    Sibling subtrees carry independent uncertainty, so means multiply
    elementwise and second-moment matrices multiply entry by entry (Hadamard
    product).  The empty combination is the unit message, for which ``dim``
    must be supplied.
    """
    if not messages:
        if dim is None:
            raise DimensionMismatch("empty combination needs an explicit dimension")
        return unit_child_message(dim)
    k = messages[0].dim
    if dim is not None and dim != k:
        raise DimensionMismatch(f"expected dimension {dim}, got {k}")
    mean = messages[0].mean.copy()
    second = messages[0].second.copy()
    for msg in messages[1:]:
        if msg.dim != k:
            raise DimensionMismatch("cannot combine messages of different dimensions")
        mean *= msg.mean
        second *= msg.second
    return ChildMessage(mean, second)


def _stack_rows(cpt_moments: Sequence[MomentSet]):
    mean_rows = np.stack([m.mean for m in cpt_moments])      # (n_rows, k)
    second_rows = np.stack([m.second for m in cpt_moments])  # (n_rows, k, k)
    return mean_rows, second_rows


def child_to_parent(
    child: str,
    child_combined: ChildMessage,
    evidence: Mapping[str, int],
    cpt_moments: Sequence[MomentSet],
) -> ChildMessage:
    """Turn a child's combined evidence into the message its parent needs.

    Uninstantiated child with combined message ``(lam, Lam)`` and row moments
    ``C[i, k] = E(p(g_k | f_i))``::

        mean[i]      = sum_k lam[k] C[i, k]
        second[i, j] = sum_{k, r} Lam[k, r] * Phi(k, i, r, j)

    where ``Phi`` is the row-``i`` second moment ``E(p(g_k|f_i) p(g_r|f_i))``
    on the diagonal ``i == j`` and the product ``C[i, k] C[j, r]`` otherwise
    (distinct rows are independent).  An instantiated child contributes its
    observed column directly: means and squared moments from the rows, cross
    terms as products of means.  Subtree evidence below an instantiated child
    never enters its upward message.
    """
    mean_rows, second_rows = _stack_rows(cpt_moments)
    if child in evidence:
        c = evidence[child]
        mean = mean_rows[:, c]
        second = np.outer(mean, mean)
        np.fill_diagonal(second, second_rows[:, c, c])
        return ChildMessage(mean, second)
    lam, lam2 = child_combined.mean, child_combined.second
    if lam.size != mean_rows.shape[1]:
        raise DimensionMismatch(
            f"message for child {child!r} has dimension {lam.size}, "
            f"rows expect {mean_rows.shape[1]}"
        )
    mean = mean_rows @ lam
    second = mean_rows @ lam2 @ mean_rows.T
    np.fill_diagonal(second, np.einsum("kr,ikr->i", lam2, second_rows))
    return ChildMessage(mean, second)


def parent_to_child(
    parent: str,
    target_child: str,
    parent_msg: Optional[ParentMessage],
    other_children_combined: Optional[ChildMessage],
    evidence: Mapping[str, int],
    child_cpt_moments: Sequence[MomentSet],
) -> ParentMessage:
    """Compute the message a child receives from its parent.

    If the parent is instantiated the child simply receives the moment set of
    its observed conditional row and the remaining arguments are ignored.

    Otherwise the parent's own message ``(q, T)`` is first conditioned on the
    evidence reaching the parent through its *other* children ``(mx, Sx)``::

        D          = sum_m mx[m] q[m]
        q'[j]      = mx[j] q[j] / D
        T'[j, k]   = Sx[j, k] T[j, k] / D**2

    and then pushed through the child's conditional rows with the same
    row-independence structure as :func:`child_to_parent`::

        mean[i]      = sum_j C[j, i] q'[j]
        second[i, l] = sum_{j != k} T'[j, k] C[j, i] C[k, l]
                       + sum_j T'[j, j] M_j[i, l]

    where ``M_j`` is row ``j``'s second-moment matrix.  The denominator uses
    means only; ``D == 0`` means the evidence is impossible on average.
    """
    mean_rows, second_rows = _stack_rows(child_cpt_moments)
    if parent in evidence:
        c = evidence[parent]
        return ParentMessage(mean_rows[c], second_rows[c])
    if parent_msg is None or other_children_combined is None:
        raise ValueError(
            f"uninstantiated parent {parent!r} needs its own message and the "
            "combined message of its other children"
        )
    q, t = parent_msg.mean, parent_msg.second
    mx, sx = other_children_combined.mean, other_children_combined.second
    if not (q.size == mx.size == mean_rows.shape[0]):
        raise DimensionMismatch(
            f"messages into {target_child!r} disagree with the row count of its table"
        )
    denom = float(mx @ q)
    if denom == 0.0:
        raise InconsistentEvidence(
            f"evidence reaching {target_child!r} through {parent!r} has zero "
            "mean probability"
        )
    q2 = mx * q / denom
    t2 = sx * t / (denom * denom)
    out_mean = q2 @ mean_rows
    diag = np.diag(t2)
    out_second = (
        mean_rows.T @ t2 @ mean_rows
        + np.einsum("j,jab->ab", diag, second_rows)
        - mean_rows.T @ (diag[:, None] * mean_rows)
    )
    return ParentMessage(out_mean, out_second)


def propagate(net: ValidatedNetwork, evidence: Mapping[str, int]) -> MessageState:
    """Run a full collect/distribute sweep and return the resulting state.

    Upward pass in reverse topological order: every node combines its
    children's messages and sends its parent a child message (instantiated
    nodes send their observed-column message and ignore their subtrees).
    Downward pass in topological order: every uninstantiated non-root node
    receives a parent message; children of instantiated nodes receive the
    observed row's moments.  Each call recomputes from scratch, so repeated
    calls with the same arguments are identical.
    """
    check_evidence(net, evidence)
    state = init_state(net, evidence)

    for node_id in reversed(net.order):
        node = net.nodes[node_id]
        if node_id in evidence:
            if node.parent is not None:
                state.upward[node_id] = child_to_parent(
                    node_id, state.combined[node_id], evidence, node.row_moments
                )
            continue
        combined = combine_children(
            [state.upward[c] for c in node.children], dim=node.dim
        )
        state.combined[node_id] = combined
        if node.parent is not None:
            state.upward[node_id] = child_to_parent(
                node_id, combined, evidence, node.row_moments
            )

    for node_id in net.order:
        node = net.nodes[node_id]
        if node.parent is None or node_id in evidence:
            continue
        parent = net.nodes[node.parent]
        if node.parent in evidence:
            state.parent[node_id] = parent_to_child(
                parent.id, node_id, None, None, evidence, node.row_moments
            )
        else:
            siblings = [state.upward[c] for c in parent.children if c != node_id]
            state.parent[node_id] = parent_to_child(
                parent.id,
                node_id,
                state.parent[parent.id],
                combine_children(siblings, dim=parent.dim),
                evidence,
                node.row_moments,
            )
    return state


def query_node(node_id: str, state: MessageState) -> NodeReport:
    """Read one node's inferred probabilities, second moments and variances.

    With combined child message ``(m, S)`` and parent message ``(q, T)``::

        D           = sum_j m[j] q[j]
        mean[i]     = m[i] q[i] / D
        second[i]   = S[i, i] T[i, i] / D**2
        variance[i] = second[i] - mean[i]**2

    Means are exact; second moments inherit the mean-denominator
    approximation.  Variances are clamped at zero (and the report flagged)
    when rounding pushes them slightly negative; anything below
    ``VARIANCE_FLOOR`` raises :class:`NegativeVariance`.  An instantiated
    node reports probability one at its observed alternative with zero
    variance.
    """
    node = state.net.node(node_id)
    k = node.dim
    if node_id in state.evidence:
        mean = np.zeros(k)
        mean[state.evidence[node_id]] = 1.0
        return NodeReport(node_id, mean, mean.copy(), np.zeros(k))
    m = state.combined[node_id].mean
    s_diag = np.diag(state.combined[node_id].second)
    pm = state.parent[node_id]
    denom = float(m @ pm.mean)
    if denom == 0.0:
        raise InconsistentEvidence(
            f"evidence has zero mean probability at node {node_id!r}"
        )
    mean = m * pm.mean / denom
    second = s_diag * np.diag(pm.second) / (denom * denom)
    variance = second - mean**2
    low = float(variance.min())
    if low < VARIANCE_FLOOR:
        raise NegativeVariance(f"node {node_id!r}: variance {low} below {VARIANCE_FLOOR}")
    clamped = low < 0.0
    return NodeReport(node_id, mean, second, np.maximum(variance, 0.0), clamped)


def posterior_report(
    state: MessageState, nodes: Optional[Sequence[str]] = None
) -> Dict[str, NodeReport]:
    """Query several nodes (all of them by default) from one propagated state."""
    ids = list(nodes) if nodes is not None else list(state.net.order)
    return {node_id: query_node(node_id, state) for node_id in ids}
