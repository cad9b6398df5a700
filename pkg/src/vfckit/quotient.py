"""Poset-glued compact pieces, the chain pseudo-metric and Hausdorff checks.

Distances are measured in integer units of 2**-40 (Euclidean lengths are
rounded up), so shortest-path sums are exact in double precision; symmetry
and the triangle inequality then hold without rounding slack.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.sparse.csgraph import csgraph_from_dense, floyd_warshall

from .config import default_resolution
from .reports import Report
from .smoothmap import Region, SmoothMap, parse_map, sample_grid
from .zeros import newton_project

UNIT = 2.0 ** 40
SEPARATION = 1e-6
PROBE = 1e-9
MATCH_TOL = 1e-10


def to_units(d):
    return np.ceil(np.asarray(d, dtype=float) * UNIT)


def from_units(u):
    return float(u) / UNIT


class Piece:
    """A compact piece: a region, a label for its ambient space, an optional group."""

    def __init__(self, name, region, ambient=None, group=None):
        self.name = str(name)
        self.region = region
        self.ambient = ambient or "R%d" % region.dim
        self.group = group

    @property
    def dim(self):
        return self.region.dim

    def _diff(self, A, B):
        D = np.asarray(A, dtype=float) - np.asarray(B, dtype=float)
        for a, per in self.region.periods().items():
            D[..., a] = (D[..., a] + 0.5 * per) % per - 0.5 * per
        return D

    def dist(self, A, b):
        """Orbit distances from each row of ``A`` to the point ``b``."""
        A = np.asarray(A, dtype=float).reshape(-1, self.dim)
        b = np.asarray(b, dtype=float).reshape(1, self.dim)
        if self.dim == 0:
            return np.zeros(len(A))
        best = np.linalg.norm(self._diff(A, b), axis=1)
        if self.group is not None:
            for g in range(self.group.order):
                gb = self.region.wrap(self.group.act_v(g, b))
                best = np.minimum(best, np.linalg.norm(self._diff(A, gb), axis=1))
        return best

    def same(self, a, b, tol=MATCH_TOL):
        return float(self.dist(np.asarray(a)[None, :], b)[0]) <= tol


class Gluing:
    """Identification of ``domain`` in piece ``lo`` with its image in piece ``hi``."""

    def __init__(self, hi, lo, domain, map):
        self.hi, self.lo = str(hi), str(lo)
        self.domain = domain
        self.map = map


class GluingDiagram:
    def __init__(self, pieces, order, gluings):
        self.pieces = {}
        for p in pieces:
            self.pieces[p.name] = p
        rel = set((str(a), str(b)) for a, b in order)
        for g in gluings:
            rel.add((g.lo, g.hi))
        # transitive closure
        changed = True
        while changed:
            changed = False
            for (a, b), (c, d) in itertools.product(list(rel), list(rel)):
                if b == c and (a, d) not in rel and a != d:
                    rel.add((a, d))
                    changed = True
        self.order = rel
        self.gluings = {(g.hi, g.lo): g for g in gluings}
        for g in gluings:
            if g.hi not in self.pieces or g.lo not in self.pieces:
                raise ValueError("gluing refers to an unknown piece")

    def le(self, a, b):
        return a == b or (a, b) in self.order

    def names(self):
        return list(self.pieces)

    def to_json(self):
        from .smoothmap import to_string
        return {"pieces": [{"name": p.name, "ambient": p.ambient, "region": p.region.to_json()}
                           for p in self.pieces.values()],
                "order": sorted([list(o) for o in self.order]),
                "gluings": [{"hi": g.hi, "lo": g.lo, "domain_region": g.domain.to_json(),
                             "map": [to_string(c) for c in g.map.components]}
                            for g in self.gluings.values()]}

    @classmethod
    def from_json(cls, d):
        from .smoothmap import ParseError
        extra = set(d) - {"pieces", "order", "gluings"}
        if extra:
            raise ParseError("unknown diagram keys %s" % sorted(extra))
        pieces = []
        for pd in d["pieces"]:
            if set(pd) - {"name", "ambient", "region"}:
                raise ParseError("unknown piece keys %s" % sorted(set(pd) - {"name", "ambient", "region"}))
            pieces.append(Piece(pd["name"], Region.from_json(pd["region"]), pd.get("ambient")))
        byname = {p.name: p for p in pieces}
        glus = []
        for gd in d.get("gluings", []):
            if set(gd) - {"hi", "lo", "domain_region", "map"}:
                raise ParseError("unknown gluing keys")
            lo = byname[gd["lo"]]
            dom = Region.from_json(gd["domain_region"], lo.dim)
            glus.append(Gluing(gd["hi"], gd["lo"], dom, parse_map(gd["map"], lo.dim)))
        return cls(pieces, [tuple(o) for o in d.get("order", [])], glus)


def diagram_from_structure(structure):
    """Pieces are the charts (with their groups); gluings are the changes."""
    pieces = [Piece(c.name, c.region, group=c.group) for c in structure.charts.values()]
    glus = [Gluing(cc.target, cc.source, cc.domain, cc.phi) for cc in structure.changes.values()]
    return GluingDiagram(pieces, [], glus)


def check_assumptions(diagram, resolution=None, force=False):
    """Compactness, injectivity of the gluing maps, transitivity of the relation."""
    res = default_resolution(resolution)
    rep = Report("diagram assumptions")
    rep.meta["resolution"] = res
    bad = [p.name for p in diagram.pieces.values() if not p.region.is_compact]
    bad += ["%s<-%s" % k for k, g in diagram.gluings.items() if not g.domain.is_compact]
    rep.add("compactness", not bad, witness=bad or None,
            detail="open constraints are not closed" if bad else "")
    inj_ok, wit = True, None
    for key, g in sorted(diagram.gluings.items()):
        X = sample_grid(g.domain, res)
        if not len(X):
            continue
        Y = g.map.eval_array(X)
        hi = diagram.pieces[g.hi]
        if not hi.region.mask(Y, tol=1e-9).all():
            inj_ok, wit = False, {"gluing": list(key), "point": X[np.argmin(hi.region.mask(Y, tol=1e-9))].tolist(),
                                  "reason": "image leaves the piece"}
            break
        for i in range(len(Y)):
            d = np.linalg.norm(Y - Y[i], axis=1)
            d[i] = np.inf
            j = int(np.argmin(d))
            if d[j] < 1e-12 and np.linalg.norm(X[i] - X[j]) > 1e-12:
                inj_ok, wit = False, {"gluing": list(key), "points": [X[i].tolist(), X[j].tolist()]}
                break
    rep.add("embedding injectivity", inj_ok, witness=wit)
    # transitivity: x ~ y ~ z by direct hops must give x ~ z directly
    qc = QuotientComplex(diagram, res, probe=None)
    tr_ok, tr_w = True, None
    for key, g in sorted(diagram.gluings.items()):
        X = sample_grid(g.domain, res)
        for x in X:
            a = (g.lo, tuple(x))
            nbrs = qc.direct_neighbors(a)
            for b in nbrs:
                for c in qc.direct_neighbors(b):
                    if qc.same_point(a, c):
                        continue
                    if not any(qc.same_point(c, d) for d in nbrs):
                        tr_ok, tr_w = False, {"x": [a[0], list(a[1])], "y": [b[0], list(b[1])],
                                              "z": [c[0], list(c[1])]}
                        break
                if not tr_ok:
                    break
            if not tr_ok:
                break
        if not tr_ok:
            break
    rep.add("transitivity", tr_ok, witness=tr_w)
    return rep


class QuotientComplex:
    """The glued space with its chain pseudo-metric on a sampled relation graph."""

    def __init__(self, diagram, resolution=None, probe=PROBE):
        self.diagram = diagram
        self.resolution = default_resolution(resolution)
        self.probe = probe
        self._via_cache = {}
        self._rep_cache = {}
        self._build()

    # -- graph ------------------------------------------------------------
    def _build(self):
        parent = {}

        def find(k):
            while parent[k] != k:
                parent[k] = parent[parent[k]]
                k = parent[k]
            return k

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

        members = {name: [] for name in self.diagram.pieces}
        index = {}

        def node(piece, x):
            key = (piece, tuple(np.round(np.asarray(x, dtype=float), 12)))
            if key not in index:
                index[key] = len(index)
                parent[index[key]] = index[key]
                members[piece].append((index[key], np.asarray(x, dtype=float)))
            return index[key]

        self._domain_samples = {}
        for key in sorted(self.diagram.gluings):
            g = self.diagram.gluings[key]
            X = sample_grid(g.domain, self.resolution, boundary_probe=self.probe)
            hi = self.diagram.pieces[g.hi]
            Y = hi.region.wrap(g.map.eval_array(X)) if len(X) else np.zeros((0, hi.dim))
            self._domain_samples[key] = (X, Y)
            for x, y in zip(X, Y):
                union(node(g.lo, x), node(g.hi, y))
        roots = sorted({find(i) for i in parent})
        cls = {r: j for j, r in enumerate(roots)}
        self.n_classes = len(roots)
        self.members = {}
        for piece, lst in members.items():
            if lst:
                ids = np.array([cls[find(i)] for i, _ in lst], dtype=int)
                pts = np.array([x for _, x in lst], dtype=float).reshape(len(lst), -1)
            else:
                ids = np.zeros(0, dtype=int)
                pts = np.zeros((0, self.diagram.pieces[piece].dim))
            self.members[piece] = (ids, pts)
        C = self.n_classes
        if C == 0:
            self.D = np.zeros((0, 0))
            return
        W = np.full((C, C), np.inf)
        for piece, (ids, pts) in self.members.items():
            P = self.diagram.pieces[piece]
            for i in range(len(ids)):
                d = to_units(P.dist(pts, pts[i]))
                row = W[ids[i]]
                np.minimum.at(row, ids, d)
                W[ids, ids[i]] = np.minimum(W[ids, ids[i]], d)
        np.fill_diagonal(W, 0.0)
        G = csgraph_from_dense(W, null_value=np.inf)
        self.D = floyd_warshall(G, directed=False)

    # -- representatives ------------------------------------------------
    def _check_point(self, a):
        piece, x = a
        if piece not in self.diagram.pieces:
            raise ValueError("unknown piece %r" % piece)
        P = self.diagram.pieces[piece]
        if len(x) != P.dim or not P.region.contains(np.asarray(x, dtype=float), tol=1e-9, closure=True):
            raise ValueError("point %s lies outside piece %s" % (list(x), piece))

    def direct_neighbors(self, a):
        """Tagged points related to ``a`` by one gluing (up or down)."""
        piece, x = a[0], np.asarray(a[1], dtype=float)
        out = []
        for (hi, lo), g in sorted(self.diagram.gluings.items()):
            if lo == piece and g.domain.contains(x, tol=1e-12):
                y = self.diagram.pieces[hi].region.wrap(g.map.eval_array(x[None, :]))[0]
                out.append((hi, tuple(y)))
            if hi == piece:
                for y in self._preimages(g, x):
                    out.append((lo, tuple(y)))
        return out

    def _preimages(self, g, x):
        X, Y = self._domain_samples.get((g.hi, g.lo), (None, None))
        hi = self.diagram.pieces[g.hi]
        lo = self.diagram.pieces[g.lo]
        targets = [x]
        if hi.group is not None:
            targets = [hi.region.wrap(hi.group.act_v(k, x[None, :]))[0] for k in range(hi.group.order)]
        found = []
        for t in targets:
            if X is None or not len(X):
                seeds = sample_grid(g.domain.closure(), 3)
            else:
                d = np.linalg.norm(hi._diff(Y, t[None, :]), axis=1)
                seeds = X[np.argsort(d)[:3]]
            if not len(seeds):
                continue
            F = SmoothMap(g.map.arity, [c - float(v) for c, v in zip(g.map.components, t)]) \
                if not hi.region.periodic else None
            if F is None:
                # periodic target: solve on the nearest lifted value
                sols = []
                for s in seeds:
                    y0 = g.map.eval_array(s[None, :])[0]
                    lift = y0 + hi._diff(t[None, :], y0[None, :])[0]
                    F2 = SmoothMap(g.map.arity, [c - float(v) for c, v in zip(g.map.components, lift)])
                    Z, r = newton_project(F2, s[None, :], tol=1e-13, maxit=40)
                    sols.append((Z[0], r[0]))
            else:
                Z, r = newton_project(F, seeds, tol=1e-13, maxit=40)
                sols = list(zip(Z, r))
            for z, r in sols:
                if r <= MATCH_TOL and g.domain.contains(z, tol=1e-12):
                    z = lo.region.wrap(z[None, :])[0]
                    if not any(lo.same(z, f) for f in found):
                        found.append(z)
        return found

    def reps(self, a):
        """All tagged points equivalent to ``a`` reachable through the gluings."""
        key = (a[0], tuple(np.round(np.asarray(a[1], dtype=float), 13)))
        if key in self._rep_cache:
            return self._rep_cache[key]
        self._check_point(a)
        out = [(a[0], np.asarray(a[1], dtype=float))]
        queue = [out[0]]
        while queue:
            b = queue.pop()
            for c in self.direct_neighbors(b):
                cpt = np.asarray(c[1], dtype=float)
                if not any(r[0] == c[0] and self.diagram.pieces[c[0]].same(r[1], cpt) for r in out):
                    out.append((c[0], cpt))
                    queue.append((c[0], cpt))
        self._rep_cache[key] = out
        return out

    def same_point(self, a, b):
        return a[0] == b[0] and self.diagram.pieces[a[0]].same(np.asarray(a[1], float), np.asarray(b[1], float))

    def equivalent(self, a, b):
        rb = self.reps(b)
        return any(self.same_point(x, y) for x in self.reps(a) for y in rb)

    def canonical(self, a):
        """Representative in the largest piece (by poset then name)."""
        rs = self.reps(a)

        def rank(r):
            higher = sum(1 for o in self.diagram.order if o[0] == r[0])
            return (higher, self.diagram.pieces[r[0]].dim * -1, r[0])
        best = min(rs, key=lambda r: (rank(r), tuple(np.round(r[1], 12))))
        return best[0], tuple(float(v) for v in best[1])

    # -- metric -------------------------------------------------------------
    def _to_members(self, a):
        """Unit distances from ``a``'s representatives to every class."""
        w = np.full(self.n_classes, np.inf)
        for piece, x in self.reps(a):
            ids, pts = self.members[piece]
            if len(ids):
                d = to_units(self.diagram.pieces[piece].dist(pts, x))
                np.minimum.at(w, ids, d)
        return w

    def _via(self, a):
        key = (a[0], tuple(np.asarray(a[1], dtype=float)))
        if key not in self._via_cache:
            w = self._to_members(a)
            if self.n_classes:
                v = np.min(w[:, None] + self.D, axis=0) if np.isfinite(w).any() else w
            else:
                v = w
            self._via_cache[key] = (w, v)
        return self._via_cache[key]

    def metric_units(self, a, b):
        best = np.inf
        rb = self.reps(b)
        for x in self.reps(a):
            for y in rb:
                if x[0] == y[0]:
                    best = min(best, float(to_units(self.diagram.pieces[x[0]].dist(x[1][None, :], y[1])[0])))
        if self.n_classes:
            _, va = self._via(a)
            wb, _ = self._via(b)
            best = min(best, float(np.min(va + wb)))
        return best

    def metric(self, a, b):
        return from_units(self.metric_units(a, b)) if math.isfinite(self.metric_units(a, b)) else math.inf

    def metric_matrix_units(self, points):
        """Pairwise unit distances with every point of ``points`` added to the graph.

        Paths may pass through the other query points, so the result is an
        exact pseudo-metric on ``points``.
        """
        n = len(points)
        Q = np.zeros((n, n))
        for i, j in itertools.combinations(range(n), 2):
            Q[i, j] = Q[j, i] = self.metric_units(points[i], points[j])
        for k in range(n):
            Q = np.minimum(Q, Q[:, k:k + 1] + Q[k:k + 1, :])
        return Q

    def metric_matrix(self, points):
        Q = self.metric_matrix_units(points)
        return np.where(np.isfinite(Q), Q / UNIT, np.inf)


def chain_metric(a, b, diagram_or_complex, resolution=None):
    qc = diagram_or_complex if isinstance(diagram_or_complex, QuotientComplex) else \
        QuotientComplex(diagram_or_complex, resolution)
    return qc.metric(a, b)


def hausdorff_report(diagram, sample_budget=None, qc=None, force=False):
    """Certificate: every sampled non-equivalent pair is separated by > 1e-6."""
    res = default_resolution(sample_budget)
    rep = Report("hausdorff")
    rep.meta["resolution"] = res
    rep.meta["separation"] = SEPARATION
    assum = check_assumptions(diagram, res)
    rep.add("assumptions", assum.passed or force, detail="; ".join(c.name for c in assum.failures()))
    qc = qc or QuotientComplex(diagram, res)
    samples = []
    for name in sorted(diagram.pieces):
        P = diagram.pieces[name]
        for x in sample_grid(P.region, res):
            samples.append((name, tuple(x)))
    # unique
    seen, uniq = set(), []
    for s in samples:
        k = (s[0], tuple(np.round(s[1], 12)))
        if k not in seen:
            seen.add(k)
            uniq.append(s)
    samples = uniq
    n = len(samples)
    rep.meta["samples"] = n
    W = np.array([qc._via(s)[0] for s in samples]) if qc.n_classes else np.zeros((n, 0))
    V = np.array([qc._via(s)[1] for s in samples]) if qc.n_classes else np.zeros((n, 0))
    pieces = np.array([s_[0] for s_ in samples])
    coords = {name: np.array([s_[1] for s_ in samples if s_[0] == name], dtype=float)
              for name in sorted(diagram.pieces)}
    offset = {name: int(np.flatnonzero(pieces == name)[0]) for name in coords if len(coords[name])}
    single = np.array([len(qc.reps(s_)) == 1 for s_ in samples])
    worst, witness = np.inf, None
    for i in range(n):
        if qc.n_classes:
            d = np.min(V[i][None, :] + W, axis=1)
        else:
            d = np.full(n, np.inf)
        # same-piece direct distances
        name = samples[i][0]
        X = coords[name]
        lo = offset[name]
        d[lo:lo + len(X)] = np.minimum(d[lo:lo + len(X)], to_units(diagram.pieces[name].dist(X, samples[i][1])))
        # a point with several representatives may have a shorter direct route
        near = (d <= SEPARATION * UNIT) | ~single | (not single[i])
        near[i] = False
        for j in np.flatnonzero(near):
            dij = qc.metric_units(samples[i], samples[j])
            if dij <= SEPARATION * UNIT and not qc.equivalent(samples[i], samples[j]):
                if dij < worst:
                    worst = dij
                    witness = {"a": [samples[i][0], list(samples[i][1])],
                               "b": [samples[j][0], list(samples[j][1])],
                               "distance": from_units(dij)}
    rep.add("separation", witness is None, None if witness is None else witness["distance"], witness)
    return rep


def _strict(region, box_faces=False):
    cons = [(g, True) for g, _ in region.constraints]
    if box_faces:
        from .smoothmap import const, var
        for a, (lo, hi) in enumerate(zip(region.lower, region.upper)):
            if a not in region.periodic:
                cons.append((const(lo) - var(a), True))
                cons.append((var(a) - const(hi), True))
    return Region(region.lower, region.upper, cons, region.periodic)


def in_open_part(piece, x):
    return _strict(piece.region, box_faces=True).contains(np.asarray(x, dtype=float), tol=1e-12)


def neighborhood_basis(x, diagram, eps, resolution=None, qc=None):
    """Ordered pieces q_1 <= ... <= q_m with open sets Omega_i around ``x``.

    Returns ``(entries, report)`` where each entry is a dict with the piece
    name, representative point, radius and the Omega region.
    """
    qc = qc or QuotientComplex(diagram, resolution)
    reps = qc.reps(x)
    info = []
    for piece, pt in reps:
        P = diagram.pieces[piece]
        is_open = in_open_part(P, pt)
        info.append((piece, pt, is_open))
    opens = [r for r in info if r[2]]
    if not opens:
        raise ValueError("point has no representative in the interior of any piece")

    def height(name):
        return (sum(1 for o in diagram.order if o[1] == name), diagram.pieces[name].dim, name)
    q1 = max(opens, key=lambda r: height(r[0]))
    d1 = diagram.pieces[q1[0]].dim
    rest = [r for r in info if not r[2] and diagram.pieces[r[0]].dim > d1 and diagram.le(q1[0], r[0])]
    rest.sort(key=lambda r: height(r[0]))
    chosen = [q1] + rest
    m = len(chosen)
    entries = []
    for i, (piece, pt, _) in enumerate(chosen):
        P = diagram.pieces[piece]
        r = (m - i) * eps
        lo = [max(float(l), float(c) - r) for l, c in zip(P.region.lower, pt)]
        hi = [min(float(h), float(c) + r) for h, c in zip(P.region.upper, pt)]
        for a in range(P.dim):
            if a in P.region.periodic:
                continue
            if (float(pt[a]) - r < float(P.region.lower[a]) - 1e-12 and float(pt[a]) > float(P.region.lower[a]) + 1e-12) or \
                    (float(pt[a]) + r > float(P.region.upper[a]) + 1e-12 and float(pt[a]) < float(P.region.upper[a]) - 1e-12):
                raise ValueError("scale %g too large for piece %s" % (eps, piece))
        from .smoothmap import add, const, power, var
        ball = add(*[power(var(a) - float(pt[a]), 2) for a in range(P.dim)], const(-(r * r)))
        base = P.region if i == 0 else _strict(P.region, box_faces=True)
        omega = Region(lo, hi, list(base.constraints) + [(ball, True)], P.region.periodic)
        entries.append({"piece": piece, "point": tuple(float(v) for v in pt), "radius": r, "omega": omega})
    rep = Report("neighborhood basis")
    rep.add("(1) footprint membership", True, detail="q1=%s, closure pieces=%s" % (q1[0], [r[0] for r in rest]))
    rep.add("(2) x in Omega_1", entries[0]["omega"].contains(np.array(entries[0]["point"]), tol=1e-12))
    ok3 = all((not e["omega"].contains(np.array(e["point"]), tol=1e-12)) and
              e["omega"].contains(np.array(e["point"]), tol=1e-12, closure=True) for e in entries[1:])
    rep.add("(3) boundary representatives", ok3)
    # (4) injectivity of the projection on sampled Omega points
    inj_ok = True
    res = default_resolution(resolution)
    for e in entries:
        pts = sample_grid(e["omega"], res)
        for i in range(min(len(pts), 40)):
            for j in range(i + 1, min(len(pts), 40)):
                if qc.equivalent((e["piece"], tuple(pts[i])), (e["piece"], tuple(pts[j]))) and \
                        not diagram.pieces[e["piece"]].same(pts[i], pts[j]):
                    inj_ok = False
    rep.add("(4) embedding", inj_ok)
    # (5) neighborhood: points within eps/2 lie in some Omega
    nb_ok, nb_w = True, None
    for name, P in sorted(diagram.pieces.items()):
        for piece, pt, _ in info:
            if piece != name:
                continue
            h = eps / 2
            local = Region([float(c) - h for c in pt], [float(c) + h for c in pt])
            cand = sample_grid(local, 5)
            cand = cand[P.region.mask(cand)]
            for y in cand:
                a = (name, tuple(y))
                if not any(in_open_part(diagram.pieces[r[0]], r[1]) for r in qc.reps(a)):
                    continue
                if qc.metric(x, a) >= eps / 2:
                    continue
                covered = any(e["omega"].contains(r[1], tol=1e-12) for e in entries
                              for r in qc.reps(a) if r[0] == e["piece"])
                if not covered:
                    nb_ok, nb_w = False, [name, y.tolist()]
                    break
    rep.add("(5) union is a neighborhood", nb_ok, witness=nb_w)
    rep.add("(6) dimensions increase", all(diagram.pieces[e["piece"]].dim > d1 for e in entries[1:]))
    return entries, rep
