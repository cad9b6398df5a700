"""JSON formats for structures, diagrams, coordinate systems and multisections.

Parsing is strict: unknown keys raise :class:`ParseError`.
"""
from __future__ import annotations

import json

import numpy as np

from .kuranishi import (CoordinateChange, FiniteGroupAction, KuranishiChart,
                        KuranishiStructure, MatrixField, StronglyContinuousMap)
from .smoothmap import ParseError, Region, SmoothMap, parse_map
from .reports import jsonable


def check_keys(d, allowed, what):
    if not isinstance(d, dict):
        raise ParseError("%s must be a JSON object" % what)
    extra = set(d) - set(allowed)
    if extra:
        raise ParseError("unknown %s keys %s" % (what, sorted(extra)))


def _map_json(m):
    return m.strings()


def group_from_json(d, dim, rank):
    check_keys(d, {"table", "v_matrices", "e_matrices", "v_shifts"}, "group")
    vm = [np.array(m, dtype=float).reshape(dim, dim) for m in d["v_matrices"]]
    em = [np.array(m, dtype=float).reshape(rank, rank) for m in d["e_matrices"]]
    return FiniteGroupAction(d["table"], vm, em, d.get("v_shifts"))


def chart_to_json(c):
    d = {"name": c.name, "ambient_dim": c.dim, "region": c.region.to_json(), "rank": c.rank,
         "group": c.group.to_json(), "section": _map_json(c.section),
         "orientation": list(c.orientation)}
    if c.base_point is not None:
        d["base_point"] = [float(v) for v in c.base_point]
    return d


def chart_from_json(d):
    check_keys(d, {"name", "ambient_dim", "region", "rank", "group", "section", "base_point",
                   "orientation"}, "chart")
    n = int(d["ambient_dim"])
    sec = d.get("section", [])
    rank = int(d.get("rank", len(sec)))
    region = Region.from_json(d["region"], n)
    group = group_from_json(d["group"], n, rank) if "group" in d else FiniteGroupAction.trivial(n, rank)
    return KuranishiChart(d["name"], region, rank, group, parse_map(sec, n) if sec else SmoothMap(n, []),
                          d.get("base_point"), d.get("orientation", (1, 1)))


def structure_to_json(st):
    chs = []
    for (p, q), cc in sorted(st.changes.items()):
        chs.append({"from": q, "to": p, "domain_region": cc.domain.to_json(),
                    "phi": _map_json(cc.phi), "phi_hat": cc.phi_hat.strings(),
                    "phi_hat_shape": [cc.phi_hat.rows, cc.phi_hat.cols],
                    "group_hom": list(cc.group_hom)})
    return {"virtual_dimension": st.virtual_dimension,
            "charts": [chart_to_json(c) for c in st.charts.values()],
            "coordinate_changes": chs}


def structure_from_json(d):
    check_keys(d, {"virtual_dimension", "charts", "coordinate_changes"}, "structure")
    charts = [chart_from_json(c) for c in d["charts"]]
    by = {c.name: c for c in charts}
    changes = []
    for cd in d.get("coordinate_changes", []):
        check_keys(cd, {"from", "to", "domain_region", "phi", "phi_hat", "phi_hat_shape", "group_hom"},
                   "coordinate change")
        q, p = by[cd["from"]], by[cd["to"]]
        dom = Region.from_json(cd["domain_region"], q.dim)
        rows, cols = cd.get("phi_hat_shape", [p.rank, q.rank])
        ph = MatrixField.from_strings(cd.get("phi_hat", []), q.dim, rows, cols)
        changes.append(CoordinateChange(q.name, p.name, dom, parse_map(cd["phi"], q.dim), ph,
                                        cd.get("group_hom", [0] * q.group.order)))
    return KuranishiStructure(charts, changes, d["virtual_dimension"])


def map_from_json(d, structure):
    """Strongly continuous map: ``{"maps": {chart: [expr, ...]}}``."""
    check_keys(d, {"maps"}, "map")
    return StronglyContinuousMap({k: parse_map(v, structure.chart(k).dim) for k, v in d["maps"].items()})


def dumps(obj):
    return json.dumps(jsonable(obj), indent=2, sort_keys=True)


def load(path):
    with open(path) as f:
        return json.load(f)


def save(path, obj):
    with open(path, "w") as f:
        f.write(dumps(obj) + "\n")
