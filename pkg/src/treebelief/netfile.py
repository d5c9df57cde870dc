"""JSON interchange formats for networks and reports.

A network file is a JSON document::

    {"nodes": [
        {"id": "A",
         "alternatives": ["a1", "a2"],
         "parent": null,
         "cpt": [{"given": null, "dist": {"type": "dirichlet", "alpha": [1, 1]}}]},
        {"id": "B",
         "alternatives": ["b1", "b2"],
         "parent": "A",
         "cpt": [{"given": "a1", "dist": {"type": "point", "p": [0.9, 0.1]}},
                 {"given": "a2", "dist": {"type": "point", "p": [0.2, 0.8]}}]}
    ]}

Distribution objects are one of::

    {"type": "dirichlet", "alpha": [number, ...]}
    {"type": "discrete", "points": [{"p": [number, ...], "w": number}, ...]}
    {"type": "point", "p": [number, ...]}

Conditional rows must appear in the parent's alternative order; their
``given`` labels are checked against it.  Report serialization keeps the full
float precision (shortest round-trip repr, at least 15 significant digits).
"""
from __future__ import annotations

import json
from typing import Any, Dict, List, Optional

import numpy as np

from .errors import BadDistribution, ParseError
from .model import (
    Dirichlet,
    DiscreteSupport,
    NetworkSpec,
    NodeSpec,
    PointMass,
    UncertainDistribution,
)


def _expect(condition: bool, message: str) -> None:
    if not condition:
        raise ParseError(message)


def parse_distribution(obj: Any, where: str) -> UncertainDistribution:
    _expect(isinstance(obj, dict), f"{where}: distribution must be an object")
    kind = obj.get("type")
    try:
        if kind == "dirichlet":
            _expect(isinstance(obj.get("alpha"), list), f"{where}: dirichlet needs an alpha list")
            return Dirichlet(np.asarray(obj["alpha"], dtype=float))
        if kind == "discrete":
            points = obj.get("points")
            _expect(isinstance(points, list) and points, f"{where}: discrete needs points")
            vectors, weights = [], []
            for entry in points:
                _expect(
                    isinstance(entry, dict) and "p" in entry and "w" in entry,
                    f"{where}: discrete point needs 'p' and 'w'",
                )
                vectors.append(entry["p"])
                weights.append(entry["w"])
            return DiscreteSupport(np.asarray(vectors, dtype=float), np.asarray(weights, dtype=float))
        if kind == "point":
            _expect(isinstance(obj.get("p"), list), f"{where}: point needs a p list")
            return PointMass(np.asarray(obj["p"], dtype=float))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: malformed numbers ({exc})") from exc
    except BadDistribution as exc:
        raise BadDistribution(f"{where}: {exc}") from exc
    raise ParseError(f"{where}: unknown distribution type {kind!r}")


def parse_network(doc: Any) -> NetworkSpec:
    _expect(isinstance(doc, dict), "top level must be an object")
    nodes_doc = doc.get("nodes")
    _expect(isinstance(nodes_doc, list) and nodes_doc, "top-level 'nodes' list required")

    alternatives_of: Dict[str, List[str]] = {}
    for entry in nodes_doc:
        _expect(isinstance(entry, dict), "each node must be an object")
        _expect(isinstance(entry.get("id"), str), "node 'id' must be a string")
        alts = entry.get("alternatives")
        _expect(
            isinstance(alts, list) and all(isinstance(a, str) for a in alts),
            f"node {entry.get('id')!r}: 'alternatives' must be a list of strings",
        )
        alternatives_of[entry["id"]] = alts

    nodes = []
    for entry in nodes_doc:
        node_id = entry["id"]
        parent = entry.get("parent")
        _expect(
            parent is None or isinstance(parent, str),
            f"node {node_id!r}: 'parent' must be a string or null",
        )
        cpt = entry.get("cpt")
        _expect(isinstance(cpt, list) and cpt, f"node {node_id!r}: 'cpt' rows required")
        expected_given: List[Optional[str]]
        if parent is None:
            expected_given = [None]
        elif parent in alternatives_of:
            expected_given = list(alternatives_of[parent])
        else:
            expected_given = [row.get("given") for row in cpt if isinstance(row, dict)]
        rows = []
        for j, row in enumerate(cpt):
            _expect(isinstance(row, dict), f"node {node_id!r}: cpt row {j} must be an object")
            if j < len(expected_given) and row.get("given") != expected_given[j]:
                raise ParseError(
                    f"node {node_id!r}: cpt row {j} is for {row.get('given')!r}, "
                    f"expected {expected_given[j]!r}"
                )
            rows.append(parse_distribution(row.get("dist"), f"node {node_id!r}, row {j}"))
        nodes.append(NodeSpec(node_id, tuple(alternatives_of[node_id]), parent, tuple(rows)))
    return NetworkSpec(tuple(nodes))


def load_network(path: str) -> NetworkSpec:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    return parse_network(doc)


def distribution_to_json(dist: UncertainDistribution) -> Dict[str, Any]:
    if isinstance(dist, Dirichlet):
        return {"type": "dirichlet", "alpha": dist.alpha.tolist()}
    if isinstance(dist, DiscreteSupport):
        return {
            "type": "discrete",
            "points": [
                {"p": p.tolist(), "w": float(w)}
                for p, w in zip(dist.points, dist.weights)
            ],
        }
    if isinstance(dist, PointMass):
        return {"type": "point", "p": dist.p.tolist()}
    raise BadDistribution(f"unsupported distribution type {type(dist).__name__}")


def network_to_json(spec: NetworkSpec) -> Dict[str, Any]:
    by_id = {ns.id: ns for ns in spec.nodes}
    doc = []
    for ns in spec.nodes:
        if ns.parent is None or ns.parent not in by_id:
            given: List[Optional[str]] = [None] * len(ns.rows)
        else:
            given = list(by_id[ns.parent].alternatives)
        doc.append(
            {
                "id": ns.id,
                "alternatives": list(ns.alternatives),
                "parent": ns.parent,
                "cpt": [
                    {"given": g, "dist": distribution_to_json(d)}
                    for g, d in zip(given, ns.rows)
                ],
            }
        )
    return {"nodes": doc}


def save_network(spec: NetworkSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(network_to_json(spec), handle, indent=2)
        handle.write("\n")
