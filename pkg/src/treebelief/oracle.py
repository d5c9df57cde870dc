"""Brute-force reference computations for validating the propagation engine.

Two oracles are provided.  :func:`enumerate_uncertainty` iterates the exact
Cartesian product of finitely supported uncertainty (discrete supports and
point masses) and is exact up to floating-point rounding.
:func:`mc_uncertainty` replaces the product with seeded Monte Carlo draws and
also handles Dirichlet rows.

Three modes fix what is being averaged over:

``prior``
    Moments of every node's marginal probability under the prior uncertainty
    distribution.  Requires empty evidence.

``approx-posterior``
    The quantity the propagation engine computes when nodes are instantiated:
    prior-weighted moments of the evidence-and-value joint, normalized by the
    (squared, for second moments) mean evidence probability.  Instantiated
    nodes cut the tree, so each uninstantiated node is evaluated on its
    "evidence island" -- the connected uninstantiated region around it plus
    the instantiated nodes on its rim.  Evidence beyond the rim never enters,
    mirroring the engine's treatment of instantiated nodes as dead ends.

``exact-posterior``
    True posterior moments: realizations are reweighted by the full-network
    evidence probability and the averaged value is the exact conditional
    probability under each fixed realization.  The gap between this mode and
    ``approx-posterior`` measures the quality of the engine's approximation.

Evaluation is single-threaded with a fixed accumulation order, so results are
bit-reproducible for identical arguments.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import CapExceeded, InconsistentEvidence, PreconditionViolated
from .model import (
    Dirichlet,
    DiscreteSupport,
    PointMass,
    ValidatedNetwork,
    check_evidence,
)

MODES = ("prior", "approx-posterior", "exact-posterior")

#: Default ceiling on exhaustively enumerated uncertainty combinations.
DEFAULT_CAP = 10_000_000

_CHUNK_CELLS = 2_000_000  # working-set bound in (realization, config) cells


@dataclass
class OracleEntry:
    """Per-alternative moments for one node, with standard errors when sampled."""

    mean: np.ndarray
    second: np.ndarray
    variance: np.ndarray
    se_mean: Optional[np.ndarray] = None
    se_second: Optional[np.ndarray] = None
    se_variance: Optional[np.ndarray] = None


@dataclass
class OracleReport:
    mode: str
    entries: Dict[str, OracleEntry]
    size: int
    effective_sample_size: Optional[float] = None
    degenerate_weights: bool = False


def _indicator_entry(dim: int, observed: int, with_se: bool) -> OracleEntry:
    mean = np.zeros(dim)
    mean[observed] = 1.0
    zeros = np.zeros(dim)
    se = zeros.copy() if with_se else None
    return OracleEntry(mean, mean.copy(), zeros, se, se, se)


# ---------------------------------------------------------------------------
# Fixed-table exact inference
# ---------------------------------------------------------------------------

def exact_inference(
    net: ValidatedNetwork,
    tables: Mapping[str, np.ndarray],
    evidence: Mapping[str, int],
    cap: int = 1 << 22,
) -> Tuple[Dict[str, np.ndarray], float]:
    """Posterior marginals under one concrete realization of every table.

    ``tables[node]`` has shape (n_rows, dim).  The full joint is enumerated
    configuration by configuration, so this is exponential in the node count
    and guarded by ``cap``.  Returns per-node marginals and the evidence
    probability; raises :class:`InconsistentEvidence` when the latter is 0.
    """
    check_evidence(net, evidence)
    order = list(net.order)
    dims = [net.nodes[n].dim for n in order]
    n_cfg = int(np.prod(dims))
    if n_cfg > cap:
        raise CapExceeded(f"{n_cfg} joint configurations exceed the cap {cap}")
    idx = {n: i for i, n in enumerate(order)}
    acc = {n: np.zeros(net.nodes[n].dim) for n in order}
    total = 0.0
    for cfg in itertools.product(*(range(d) for d in dims)):
        consistent = all(cfg[idx[n]] == v for n, v in evidence.items())
        if not consistent:
            continue
        p = 1.0
        for i, node_id in enumerate(order):
            parent = net.nodes[node_id].parent
            row = 0 if parent is None else cfg[idx[parent]]
            p *= tables[node_id][row, cfg[i]]
        total += p
        for i, node_id in enumerate(order):
            acc[node_id][cfg[i]] += p
    if total == 0.0:
        raise InconsistentEvidence("the evidence has probability zero under these tables")
    return {n: acc[n] / total for n in order}, total


def point_tables(net: ValidatedNetwork) -> Dict[str, np.ndarray]:
    """Extract concrete tables from a network whose rows are all point masses."""
    tables = {}
    for node_id in net.order:
        node = net.nodes[node_id]
        if not all(isinstance(d, PointMass) for d in node.rows):
            raise PreconditionViolated(f"node {node_id!r} is not a point-mass node")
        tables[node_id] = np.stack([d.p for d in node.rows])
    return tables


# ---------------------------------------------------------------------------
# Evidence islands
# ---------------------------------------------------------------------------

@dataclass
class _Island:
    members: List[str]               # uninstantiated nodes, parents first
    top: str
    top_row: int                     # conditional row the top node hangs on
    boundary: List[Tuple[str, int]]  # instantiated children on the rim


def _islands(net: ValidatedNetwork, evidence: Mapping[str, int]) -> List[_Island]:
    """Connected uninstantiated regions, each with its instantiated rim."""
    islands: Dict[str, _Island] = {}
    home: Dict[str, _Island] = {}
    for node_id in net.order:
        node = net.nodes[node_id]
        if node_id in evidence:
            if node.parent is not None and node.parent not in evidence:
                home[node.parent].boundary.append((node_id, evidence[node_id]))
            continue
        if node.parent is not None and node.parent not in evidence:
            island = home[node.parent]
        else:
            top_row = 0 if node.parent is None else evidence[node.parent]
            island = _Island([], node_id, top_row, [])
            islands[node_id] = island
        island.members.append(node_id)
        home[node_id] = island
    return list(islands.values())


def _island_sums(
    net: ValidatedNetwork,
    island: _Island,
    tabs: Mapping[str, np.ndarray],
) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """Per-realization island joints, summed out per node value.

    ``tabs[node]`` has shape (R, n_rows, dim): R realizations of that node's
    table.  Returns ``values[node]`` of shape (R, dim) -- the probability of
    the island's rim evidence *and* node == value -- plus the (R,) total.
    """
    members = island.members
    pos = {m: i for i, m in enumerate(members)}
    dims = [net.nodes[m].dim for m in members]
    cfgs = np.array(list(itertools.product(*(range(d) for d in dims))), dtype=np.intp)
    joint = None
    for i, member in enumerate(members):
        node = net.nodes[member]
        states = cfgs[:, i]
        if member == island.top:
            factor = tabs[member][:, island.top_row, :][:, states]
        else:
            factor = tabs[member][:, cfgs[:, pos[node.parent]], states]
        joint = factor if joint is None else joint * factor
    for child_id, observed in island.boundary:
        parent_states = cfgs[:, pos[net.nodes[child_id].parent]]
        joint = joint * tabs[child_id][:, parent_states, observed]
    values = {}
    for i, member in enumerate(members):
        cols = np.empty((joint.shape[0], dims[i]))
        for v in range(dims[i]):
            cols[:, v] = joint[:, cfgs[:, i] == v].sum(axis=1)
        values[member] = cols
    return values, joint.sum(axis=1)


def _full_sums(
    net: ValidatedNetwork,
    tabs: Mapping[str, np.ndarray],
    evidence: Mapping[str, int],
) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """Whole-network evidence joints per realization, summed per node value."""
    free = [n for n in net.order if n not in evidence]
    pos = {m: i for i, m in enumerate(free)}
    dims = [net.nodes[m].dim for m in free]
    if free:
        cfgs = np.array(list(itertools.product(*(range(d) for d in dims))), dtype=np.intp)
        n_cfg = cfgs.shape[0]
    else:
        cfgs = np.zeros((1, 0), dtype=np.intp)
        n_cfg = 1

    def states_of(node_id: str) -> np.ndarray:
        if node_id in evidence:
            return np.full(n_cfg, evidence[node_id], dtype=np.intp)
        return cfgs[:, pos[node_id]]

    joint = None
    for node_id in net.order:
        node = net.nodes[node_id]
        rows = np.zeros(n_cfg, dtype=np.intp) if node.parent is None else states_of(node.parent)
        factor = tabs[node_id][:, rows, states_of(node_id)]
        joint = factor if joint is None else joint * factor
    values = {}
    for member in free:
        dim = net.nodes[member].dim
        cols = np.empty((joint.shape[0], dim))
        for v in range(dim):
            cols[:, v] = joint[:, cfgs[:, pos[member]] == v].sum(axis=1)
        values[member] = cols
    return values, joint.sum(axis=1)


def _config_count(net: ValidatedNetwork, members: Sequence[str]) -> int:
    count = 1
    for m in members:
        count *= net.nodes[m].dim
    return count


# ---------------------------------------------------------------------------
# Exhaustive enumeration
# ---------------------------------------------------------------------------

def _support_of(dist) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(dist, PointMass):
        return dist.p[None, :], np.ones(1)
    if isinstance(dist, DiscreteSupport):
        return dist.points, dist.weights
    raise PreconditionViolated(
        "exhaustive enumeration requires discrete-support or point-mass rows"
    )


def _grid_chunks(
    net: ValidatedNetwork,
    row_ids: Sequence[Tuple[str, int]],
    chunk: int,
) -> Iterator[Tuple[Dict[str, np.ndarray], np.ndarray]]:
    """Yield (tables, weights) chunks covering the support product of row_ids.

    Rows not listed are frozen at their mean vector; such rows must be ones
    the downstream sum never reads, or genuinely certain.
    """
    supports = [_support_of(net.nodes[n].rows[r]) for n, r in row_ids]
    sizes = [len(w) for _, w in supports]
    count = int(np.prod(sizes)) if sizes else 1
    for lo in range(0, count, chunk):
        hi = min(count, lo + chunk)
        flat = np.arange(lo, hi)
        choices = np.unravel_index(flat, sizes) if sizes else ()
        weights = np.ones(hi - lo)
        tabs: Dict[str, np.ndarray] = {}
        for node_id in net.order:
            node = net.nodes[node_id]
            tabs[node_id] = np.broadcast_to(
                node.mean_rows(), (hi - lo, len(node.rows), node.dim)
            ).copy()
        for j, (node_id, row) in enumerate(row_ids):
            pts, w = supports[j]
            tabs[node_id][:, row, :] = pts[choices[j]]
            weights *= w[choices[j]]
        yield tabs, weights


def _uncertain_rows(
    net: ValidatedNetwork, row_ids: Sequence[Tuple[str, int]]
) -> List[Tuple[str, int]]:
    return [
        (n, r) for n, r in row_ids if len(_support_of(net.nodes[n].rows[r])[1]) > 1
    ]


def _combination_count(net: ValidatedNetwork, row_ids: Sequence[Tuple[str, int]]) -> int:
    count = 1
    for n, r in row_ids:
        count *= len(_support_of(net.nodes[n].rows[r])[1])
    return count


def enumerate_uncertainty(
    net: ValidatedNetwork,
    evidence: Mapping[str, int],
    mode: str = "prior",
    cap: int = DEFAULT_CAP,
) -> OracleReport:
    """Exact moments by iterating every combination of uncertainty supports.

    Requires every row to be a discrete support or point mass.  See the
    module docstring for what each mode averages.  Raises
    :class:`CapExceeded` when a support product exceeds ``cap`` and
    :class:`InconsistentEvidence` when every combination assigns the evidence
    probability zero.
    """
    if mode not in MODES:
        raise PreconditionViolated(f"unknown oracle mode {mode!r}")
    check_evidence(net, evidence)
    if mode == "prior" and evidence:
        raise PreconditionViolated("prior mode requires empty evidence")
    for node_id in net.order:
        for dist in net.nodes[node_id].rows:
            _support_of(dist)

    entries: Dict[str, OracleEntry] = {}
    for node_id, observed in evidence.items():
        entries[node_id] = _indicator_entry(net.nodes[node_id].dim, observed, False)

    if mode == "exact-posterior":
        row_ids = _uncertain_rows(
            net,
            [
                (node_id, row)
                for node_id in net.order
                for row in range(len(net.nodes[node_id].rows))
            ],
        )
        count = _combination_count(net, row_ids)
        if count > cap:
            raise CapExceeded(f"{count} uncertainty combinations exceed the cap {cap}")
        free = [n for n in net.order if n not in evidence]
        chunk = max(1, _CHUNK_CELLS // max(1, _config_count(net, free)))
        norm = 0.0
        sq_norm = 0.0
        acc1 = {n: np.zeros(net.nodes[n].dim) for n in free}
        acc2 = {n: np.zeros(net.nodes[n].dim) for n in free}
        for tabs, weights in _grid_chunks(net, row_ids, chunk):
            values, p_evidence = _full_sums(net, tabs, evidence)
            posterior_w = weights * p_evidence
            norm += float(posterior_w.sum())
            sq_norm += float((posterior_w**2).sum())
            safe = np.where(p_evidence > 0.0, p_evidence, 1.0)
            for node_id in free:
                cond = values[node_id] / safe[:, None]
                acc1[node_id] += posterior_w @ cond
                acc2[node_id] += posterior_w @ cond**2
        if norm == 0.0:
            raise InconsistentEvidence("every combination gives the evidence probability 0")
        for node_id in free:
            mean = acc1[node_id] / norm
            second = acc2[node_id] / norm
            entries[node_id] = OracleEntry(mean, second, np.maximum(second - mean**2, 0.0))
        ess = norm * norm / sq_norm
        return OracleReport(mode, entries, count, ess, ess < 10.0)

    total_count = 0
    for island in _islands(net, evidence):
        row_ids = [(island.top, island.top_row)]
        row_ids += [
            (m, row)
            for m in island.members
            if m != island.top
            for row in range(len(net.nodes[m].rows))
        ]
        row_ids += [
            (z, row) for z, _ in island.boundary for row in range(len(net.nodes[z].rows))
        ]
        row_ids = _uncertain_rows(net, row_ids)
        count = _combination_count(net, row_ids)
        if count > cap:
            raise CapExceeded(f"{count} uncertainty combinations exceed the cap {cap}")
        total_count += count
        chunk = max(1, _CHUNK_CELLS // _config_count(net, island.members))
        z_bar = 0.0
        acc1 = {m: np.zeros(net.nodes[m].dim) for m in island.members}
        acc2 = {m: np.zeros(net.nodes[m].dim) for m in island.members}
        for tabs, weights in _grid_chunks(net, row_ids, chunk):
            values, island_total = _island_sums(net, island, tabs)
            z_bar += float(weights @ island_total)
            for m in island.members:
                acc1[m] += weights @ values[m]
                acc2[m] += weights @ values[m] ** 2
        if z_bar == 0.0:
            raise InconsistentEvidence("every combination gives the evidence probability 0")
        for m in island.members:
            mean = acc1[m] / z_bar
            second = acc2[m] / (z_bar * z_bar)
            entries[m] = OracleEntry(mean, second, np.maximum(second - mean**2, 0.0))
    return OracleReport(mode, entries, total_count)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def _sample_tables(net: ValidatedNetwork, n: int, seed: int) -> Dict[str, np.ndarray]:
    """Draw n realizations of every table from per-row seeded streams.

    Each (node, row) pair gets its own generator keyed by
    ``(seed, node index, row index)``, and all n draws for that row come from
    it in one vectorized pass, so results are bit-reproducible for a fixed
    ``(n, seed)`` and independent of traversal order.  Dirichlet rows are
    normalized gamma variates; discrete supports sample their points by
    weight.
    """
    tabs = {}
    for node_index, node_id in enumerate(net.order):
        node = net.nodes[node_id]
        tab = np.empty((n, len(node.rows), node.dim))
        for row, dist in enumerate(node.rows):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=(seed, node_index, row))
            )
            if isinstance(dist, Dirichlet):
                gammas = rng.gamma(shape=dist.alpha, size=(n, dist.dim))
                tab[:, row, :] = gammas / gammas.sum(axis=1, keepdims=True)
            elif isinstance(dist, DiscreteSupport):
                choice = rng.choice(len(dist.weights), size=n, p=dist.weights)
                tab[:, row, :] = dist.points[choice]
            else:
                tab[:, row, :] = dist.p
        tabs[node_id] = tab
    return tabs


def _chunked_sums(net, tabs, n, members, compute):
    """Run a per-realization sum in chunks bounded by the working-set limit."""
    n_cfg = _config_count(net, members)
    chunk = max(1, _CHUNK_CELLS // max(1, n_cfg))
    values = {m: np.empty((n, net.nodes[m].dim)) for m in members}
    total = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        sub = {k: v[lo:hi] for k, v in tabs.items()}
        vals, tot = compute(sub)
        for m in members:
            values[m][lo:hi] = vals[m]
        total[lo:hi] = tot
    return values, total


def _se_of(columns: Sequence[np.ndarray], grad: np.ndarray, n: int) -> float:
    """Delta-method standard error for a smooth function of sample means."""
    stacked = np.stack(columns, axis=1)
    cov = np.atleast_2d(np.cov(stacked, rowvar=False, ddof=1))
    return float(np.sqrt(max(0.0, grad @ cov @ grad / n)))


def _ratio_entry(r: np.ndarray, z: np.ndarray) -> OracleEntry:
    """Moments of the form E[r]/E[z] and E[r^2]/E[z]^2 from paired samples."""
    n, dim = r.shape
    s1 = r.mean(axis=0)
    s2 = (r**2).mean(axis=0)
    s3 = float(z.mean())
    mean = s1 / s3
    second = s2 / (s3 * s3)
    variance = np.maximum(second - mean**2, 0.0)
    se_mean = np.empty(dim)
    se_second = np.empty(dim)
    se_variance = np.empty(dim)
    for v in range(dim):
        cols = [r[:, v], r[:, v] ** 2, z]
        se_mean[v] = _se_of(cols, np.array([1 / s3, 0.0, -s1[v] / s3**2]), n)
        se_second[v] = _se_of(cols, np.array([0.0, 1 / s3**2, -2 * s2[v] / s3**3]), n)
        se_variance[v] = _se_of(
            cols,
            np.array(
                [-2 * s1[v] / s3**2, 1 / s3**2, -2 * (s2[v] - s1[v] ** 2) / s3**3]
            ),
            n,
        )
    return OracleEntry(mean, second, variance, se_mean, se_second, se_variance)


def _weighted_entry(values: np.ndarray, weights: np.ndarray) -> OracleEntry:
    """Self-normalized weighted moments of per-sample values."""
    n, dim = values.shape
    w0 = float(weights.mean())
    mean = np.empty(dim)
    second = np.empty(dim)
    se_mean = np.empty(dim)
    se_second = np.empty(dim)
    se_variance = np.empty(dim)
    for v in range(dim):
        wv = weights * values[:, v]
        wv2 = weights * values[:, v] ** 2
        w1 = float(wv.mean())
        w2 = float(wv2.mean())
        mean[v] = w1 / w0
        second[v] = w2 / w0
        cols = [wv, wv2, weights]
        se_mean[v] = _se_of(cols, np.array([1 / w0, 0.0, -w1 / w0**2]), n)
        se_second[v] = _se_of(cols, np.array([0.0, 1 / w0, -w2 / w0**2]), n)
        se_variance[v] = _se_of(
            cols,
            np.array([-2 * w1 / w0**2, 1 / w0, -w2 / w0**2 + 2 * w1**2 / w0**3]),
            n,
        )
    variance = np.maximum(second - mean**2, 0.0)
    return OracleEntry(mean, second, variance, se_mean, se_second, se_variance)


def mc_uncertainty(
    net: ValidatedNetwork,
    evidence: Mapping[str, int],
    mode: str = "prior",
    n: int = 10_000,
    seed: int = 0,
) -> OracleReport:
    """Monte Carlo version of :func:`enumerate_uncertainty`.

    Handles Dirichlet rows as well; the report carries delta-method standard
    errors for every mean, second moment and variance.  In exact-posterior
    mode the realizations are importance-weighted by the evidence
    probability, with the prior as proposal; an effective sample size below
    10 is flagged as degenerate, not fatal.
    """
    if mode not in MODES:
        raise PreconditionViolated(f"unknown oracle mode {mode!r}")
    if n < 2:
        raise PreconditionViolated("at least two samples required")
    if seed < 0:
        raise PreconditionViolated("seed must be a non-negative integer")
    check_evidence(net, evidence)
    if mode == "prior" and evidence:
        raise PreconditionViolated("prior mode requires empty evidence")

    tabs = _sample_tables(net, n, seed)
    entries: Dict[str, OracleEntry] = {}
    for node_id, observed in evidence.items():
        entries[node_id] = _indicator_entry(net.nodes[node_id].dim, observed, True)

    if mode == "exact-posterior":
        free = [m for m in net.order if m not in evidence]
        values, p_evidence = _chunked_sums(
            net, tabs, n, free, lambda sub: _full_sums(net, sub, evidence)
        )
        norm = float(p_evidence.sum())
        if norm == 0.0:
            raise InconsistentEvidence("every sample gives the evidence probability 0")
        ess = norm * norm / float((p_evidence**2).sum())
        safe = np.where(p_evidence > 0.0, p_evidence, 1.0)
        for node_id in free:
            entries[node_id] = _weighted_entry(values[node_id] / safe[:, None], p_evidence)
        return OracleReport(mode, entries, n, ess, ess < 10.0)

    for island in _islands(net, evidence):
        values, island_total = _chunked_sums(
            net, tabs, n, island.members, lambda sub: _island_sums(net, island, sub)
        )
        if float(island_total.sum()) == 0.0:
            raise InconsistentEvidence("every sample gives the evidence probability 0")
        for m in island.members:
            entries[m] = _ratio_entry(values[m], island_total)
    return OracleReport(mode, entries, n)
