"""Good coordinate systems: data, condition checker, shrinking, construction.

Every chart of a system is a restriction of a chart of a source Kuranishi
structure (same coordinates, group and section) to a smaller region.  Charts
are indexed by positive integers sorted by dimension; a pair ``p > q`` is
related exactly when a coordinate change ``q -> p`` is present.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from .config import MAX_AMBIENT_DIM, MAX_CHARTS, default_resolution
from .kuranishi import (CoordinateChange, KuranishiStructure, check_cocycle,
                        check_tangent_condition, CocycleError, validate_chart,
                        validate_coordinate_change)
from .quotient import QuotientComplex, diagram_from_structure, hausdorff_report
from .reports import Report
from .smoothmap import Region, add, const, parse_expr, sample_grid, to_fraction
from .zeros import newton_project, sample_zero_set

MATCH = 1e-9


class CoveringLostError(ValueError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class GCSBuildError(ValueError):
    def __init__(self, stage, msg, witness=None):
        super().__init__("%s: %s" % (stage, msg))
        self.stage = stage
        self.witness = witness


class GoodCoordinateSystem:
    """Charts ``{index: KuranishiChart}``, changes ``{(p, q): CoordinateChange}``."""

    def __init__(self, structure, charts, origin, changes):
        self.structure = structure
        self.charts = dict(sorted(charts.items()))
        self.origin = dict(origin)
        self.changes = dict(changes)
        self.virtual_dimension = structure.virtual_dimension
        for (p, q) in self.changes:
            if not p > q:
                raise ValueError("change %s <- %s must go from a smaller to a larger index" % (p, q))

    @property
    def indices(self):
        return sorted(self.charts)

    def le(self, q, p):
        return q == p or (p, q) in self.changes

    def chart(self, p):
        return self.charts[p]

    def as_structure(self):
        """The charts and changes as a plain Kuranishi structure named by index."""
        charts = [c.with_region(c.region, name=str(p)) for p, c in self.charts.items()]
        ch = [CoordinateChange(str(q), str(p), cc.domain, cc.phi, cc.phi_hat, cc.group_hom)
              for (p, q), cc in self.changes.items()]
        return KuranishiStructure(charts, ch, self.virtual_dimension)

    def triples(self):
        return [(p, q, r) for p, q, r in itertools.permutations(self.indices, 3)
                if p > q > r and (p, q) in self.changes and (q, r) in self.changes
                and (p, r) in self.changes]

    def to_json(self):
        from .io import structure_to_json
        return {"structure": structure_to_json(self.structure),
                "charts": [{"index": p, "origin": self.origin[p], "region": c.region.to_json()}
                           for p, c in self.charts.items()],
                "changes": [{"target": p, "source": q, "domain_region": cc.domain.to_json()}
                            for (p, q), cc in sorted(self.changes.items())]}

    @classmethod
    def from_json(cls, d):
        from .io import structure_from_json, check_keys
        check_keys(d, {"structure", "charts", "changes"}, "gcs")
        st = structure_from_json(d["structure"])
        charts, origin, changes = {}, {}, {}
        for cd in d["charts"]:
            check_keys(cd, {"index", "origin", "region"}, "gcs chart")
            base = st.chart(cd["origin"])
            p = int(cd["index"])
            charts[p] = base.with_region(Region.from_json(cd["region"], base.dim), name=str(p))
            origin[p] = cd["origin"]
        for cd in d.get("changes", []):
            check_keys(cd, {"target", "source", "domain_region"}, "gcs change")
            p, q = int(cd["target"]), int(cd["source"])
            sc = st.change(origin[p], origin[q])
            dom = Region.from_json(cd["domain_region"], charts[q].dim)
            changes[(p, q)] = CoordinateChange(str(q), str(p), dom, sc.phi, sc.phi_hat, sc.group_hom)
        return cls(st, charts, origin, changes)


# ---------------------------------------------------------------------------
# footprints in X


class _Footprints:
    """Zero samples of the source structure and membership in chart footprints."""

    def __init__(self, gcs, resolution):
        self.gcs = gcs
        self.res = resolution
        self.qc = QuotientComplex(diagram_from_structure(gcs.structure), resolution, probe=None)
        self.samples = []
        for name in sorted(gcs.structure.charts):
            ch = gcs.structure.chart(name)
            for z in sample_zero_set(ch.section, ch.region, resolution):
                self.samples.append((name, tuple(z)))
        self._by_origin = {}
        for p, o in gcs.origin.items():
            self._by_origin.setdefault(o, []).append(p)

    def lift(self, a, p):
        """Representatives of the class ``a`` lying in the region of chart ``p``."""
        o = self.gcs.origin[p]
        U = self.gcs.charts[p].region
        return [r[1] for r in self.qc.reps(a) if r[0] == o and U.contains(r[1], tol=1e-12)]

    def member(self, a, p):
        return bool(self.lift(a, p))

    def chart_zeros(self, p):
        ch = self.gcs.charts[p]
        return [(self.gcs.origin[p], tuple(z)) for z in sample_zero_set(ch.section, ch.region, self.res)]


def _preimage(cc, y, seeds_region, resolution):
    """Points x of the change domain with phi(x) = y (Newton from grid seeds)."""
    box_only = Region(seeds_region.lower, seeds_region.upper, (), seeds_region.periodic)
    X = sample_grid(box_only, max(3, min(resolution, 9)))
    if not len(X):
        return []
    Y = cc.phi.eval_array(X)
    seeds = X[np.argsort(np.linalg.norm(Y - y, axis=1))[:3]]
    from .smoothmap import SmoothMap
    F = SmoothMap(cc.phi.arity, [c - float(v) for c, v in zip(cc.phi.components, y)])
    Z, r = newton_project(F, seeds, tol=1e-13, maxit=40)
    out = []
    for z, rr in zip(Z, r):
        if rr <= 1e-10 and not any(np.linalg.norm(z - o) < 1e-9 for o in out):
            out.append(z)
    return out


# ---------------------------------------------------------------------------
# checker


def check_gcs(gcs, resolution=None):
    res = default_resolution(resolution)
    rep = Report("good coordinate system")
    rep.meta["resolution"] = res
    rep.meta["indices"] = gcs.indices
    st = gcs.as_structure()
    ok, bad = True, []
    for p, ch in gcs.charts.items():
        r = validate_chart(ch, res, gcs.virtual_dimension)
        if not r.passed:
            ok = False
            bad.append("%s: %s" % (p, [c.name for c in r.failures()]))
    rep.add("(1)-(4) orbifold charts and sections", ok, witness=bad or None)
    ok, bad = True, []
    for (p, q), cc in sorted(gcs.changes.items()):
        try:
            r = validate_coordinate_change(st.change(str(p), str(q)), st.charts, res)
        except ValueError as err:
            ok = False
            bad.append("%s<-%s: %s" % (p, q, err))
            continue
        if not r.passed:
            ok = False
            bad.append("%s<-%s: %s" % (p, q, [c.name for c in r.failures()]))
    rep.add("(5) coordinate changes", ok, witness=bad or None)
    fp = _Footprints(gcs, res)
    # (5a) footprint identity
    ok, wit = True, None
    for (p, q), cc in sorted(gcs.changes.items()):
        for a in fp.chart_zeros(q):
            in_dom = cc.domain.contains(np.array(a[1]), tol=1e-12)
            if in_dom != fp.member(a, p):
                ok, wit = False, {"pair": [p, q], "zero": list(a[1]), "in_domain": in_dom}
                break
        if not ok:
            break
    rep.add("(5a) footprint of the domain", ok, witness=wit)
    # (5c) tangent condition
    ok, worst, wit = True, None, None
    for (p, q) in sorted(gcs.changes):
        try:
            r = check_tangent_condition(st, (str(p), str(q)), res)
        except ValueError as err:
            ok, wit = False, str(err)
            break
        c = r.checks[0]
        if c.residual is not None:
            worst = c.residual if worst is None else min(worst, c.residual)
        if not c.passed:
            ok, wit = False, {"pair": [p, q], "point": c.witness}
    rep.add("(5c) tangent condition", ok, worst, wit)
    # (6) cocycle
    ok, wit = True, None
    for t in gcs.triples():
        try:
            check_cocycle(st, tuple(str(v) for v in t), res)
        except CocycleError as err:
            ok, wit = False, {"triple": list(t), "residual": err.residual, "point": err.witness}
    rep.add("(6) cocycle", ok, witness=wit)
    # (7) covering
    unc = [a for a in fp.samples if not any(fp.member(a, p) for p in gcs.indices)]
    rep.add("(7) covering", not unc, witness=None if not unc else [unc[0][0], list(unc[0][1])],
            detail="%d sampled points of X" % len(fp.samples))
    # (8) comparability
    ok, wit = True, None
    for p, q in itertools.combinations(gcs.indices, 2):
        if gcs.le(p, q) or gcs.le(q, p):
            continue
        for a in fp.chart_zeros(p):
            if fp.member(a, q):
                ok, wit = False, {"pair": [p, q], "zero": list(a[1])}
                break
    rep.add("(8) comparability", ok, witness=wit)
    rep.extend(check_joyce(gcs, res))
    rep.extend(check_plusalpha(gcs, fp, res))
    rep.extend(check_plusalpha2(gcs, res))
    rep.extend(check_proper(gcs, res))
    return rep


def check_joyce(gcs, res):
    """Pointwise form: phi_pr(x) = phi_pq(y) forces x into the q-domain with phi_qr(x) = y."""
    rep = Report("joyce")
    ok, wit, tested = True, None, 0
    for p, q, r in gcs.triples():
        c_pr, c_pq, c_qr = gcs.changes[(p, r)], gcs.changes[(p, q)], gcs.changes[(q, r)]
        P = gcs.charts[p]
        for x in sample_grid(c_pr.domain, res):
            y_img = c_pr.phi.eval_array(x[None, :])[0]
            for g in range(P.group.order):
                target = P.act(g, y_img[None, :])[0]
                for y in _preimage(c_pq, target, c_pq.domain, res):
                    if not c_pq.domain.contains(y, tol=1e-12):
                        continue
                    tested += 1
                    x_in = c_qr.domain.contains(x, tol=1e-12) and \
                        c_pq.domain.contains(c_qr.phi.eval_array(x[None, :])[0], tol=1e-12)
                    if not x_in:
                        ok, wit = False, {"triple": [p, q, r], "x": x.tolist(), "y": y.tolist()}
                        break
                    fx = gcs.charts[q].region.wrap(c_qr.phi.eval_array(x[None, :]))[0]
                    same = any(np.linalg.norm(gcs.charts[q].diff(gcs.charts[q].act(k, fx[None, :]), y[None, :])) < MATCH
                               for k in range(gcs.charts[q].group.order))
                    if not same:
                        ok, wit = False, {"triple": [p, q, r], "x": x.tolist(), "y": y.tolist()}
                        break
                if not ok:
                    break
            if not ok:
                break
    rep.add("Joyce", ok, witness=wit, detail="%d coincidences tested" % tested)
    return rep


def check_plusalpha(gcs, fp, res):
    rep = Report("plusalpha")
    ok, wit = True, None
    for q in gcs.indices:
        above = [p for p in gcs.indices if (p, q) in gcs.changes]
        X = sample_grid(gcs.charts[q].region, res)
        for k in range(2, len(above) + 1):
            for group in itertools.combinations(above, k):
                inside = np.ones(len(X), bool)
                for p in group:
                    inside &= gcs.changes[(p, q)].domain.mask(X)
                if not inside.any():
                    continue
                # the footprints must meet as well
                zs = fp.chart_zeros(q)
                if not any(all(gcs.changes[(p, q)].domain.contains(np.array(z[1]), tol=1e-12) for p in group)
                           for z in zs):
                    ok, wit = False, {"q": q, "targets": list(group)}
        # linear-ordering consequence
        chain = [q] + above
        for a, b in itertools.combinations(chain, 2):
            if not (gcs.le(a, b) or gcs.le(b, a)):
                dom_a = gcs.changes.get((a, q))
                dom_b = gcs.changes.get((b, q))
                if dom_a is not None and dom_b is not None and (dom_a.domain.mask(X) & dom_b.domain.mask(X)).any():
                    ok, wit = False, {"q": q, "incomparable": [a, b]}
    # second half: images in a common target
    for p in gcs.indices:
        below = [q for q in gcs.indices if (p, q) in gcs.changes]
        for q1, q2 in itertools.combinations(below, 2):
            c1, c2 = gcs.changes[(p, q1)], gcs.changes[(p, q2)]
            meet = False
            for x in sample_grid(c1.domain, res):
                y = c1.phi.eval_array(x[None, :])[0]
                if any(c2.domain.contains(z, tol=1e-12) for z in _preimage(c2, y, c2.domain, res)):
                    meet = True
                    break
            if meet and not (gcs.le(q1, q2) or gcs.le(q2, q1)):
                ok, wit = False, {"p": p, "sources": [q1, q2]}
    rep.add("plusalpha", ok, witness=wit)
    return rep


def check_plusalpha2(gcs, res):
    rep = Report("plusalpha2")
    ok, wit = True, None
    for p, q, r in gcs.triples():
        c_pr, c_pq, c_qr = gcs.changes[(p, r)], gcs.changes[(p, q)], gcs.changes[(q, r)]
        for x in sample_grid(c_qr.domain, res):
            y = gcs.charts[q].region.wrap(c_qr.phi.eval_array(x[None, :]))[0]
            lhs = c_pq.domain.contains(y, tol=1e-12)
            rhs = c_pr.domain.contains(x, tol=1e-12)
            if lhs != rhs:
                ok, wit = False, {"triple": [p, q, r], "x": x.tolist(), "pulled_back": lhs, "in_pr": rhs}
                break
    rep.add("plusalpha2", ok, witness=wit)
    return rep


def check_proper(gcs, res):
    """Closure points of a domain that stay in U_q and map into U_p must lie in the domain."""
    rep = Report("proper")
    ok, wit = True, None
    for (p, q), cc in sorted(gcs.changes.items()):
        P, Q = gcs.charts[p], gcs.charts[q]

        def classify(X):
            X = X[Q.region.mask(X)] if len(X) else X
            if not len(X):
                return X, np.zeros(0, bool), np.zeros(0, bool)
            return X, cc.domain.mask(X), P.region.mask(P.region.wrap(cc.phi.eval_array(X)))

        X, inside, lands = classify(sample_grid(cc.domain.closure(), res))
        # the image leaves U_p from inside the domain, or a limit point was left out
        for case in range(2):
            bad = inside & ~lands if case == 0 else ~inside & lands
            if not bad.any():
                continue
            good = inside & lands if case == 0 else inside
            if not good.any():
                # a coarse grid can miss the good side; look again on a finer one
                X, inside, lands = classify(sample_grid(cc.domain.closure(), 4 * res))
                bad = inside & ~lands if case == 0 else ~inside & lands
                good = inside & lands if case == 0 else inside
            ok = False
            wit = _escape_sequence(X, good, bad, classify, p, q)
            break
        if not ok:
            break
    rep.add("proper", ok, witness=wit)
    return rep


def _escape_sequence(X, good, bad, classify, p, q, steps=6):
    """Points on the good side converging to where the good side ends."""
    b = X[bad][0]
    if not good.any():
        return {"pair": [p, q], "limit": b.tolist(), "sequence": [b.tolist()]}
    g = X[good][np.argmin(np.linalg.norm(X[good] - b, axis=1))]
    in_domain = bool(classify(b[None, :])[1].any())
    seq = []
    for _ in range(40):
        m = (g + b) / 2
        Xm, ins, lands = classify(m[None, :])
        if len(Xm) and ins[0] and (lands[0] or not in_domain):
            g = m
            seq.append(m.tolist())
        else:
            b = m
    return {"pair": [p, q], "limit": ((g + b) / 2).tolist(), "sequence": seq[-steps:] or [g.tolist()]}


# ---------------------------------------------------------------------------
# shrinking


def _schedule_for(schedule, p, gcs):
    if isinstance(schedule, dict):
        entry = schedule.get(p, schedule.get(str(p), schedule.get(gcs.origin.get(p), 0)))
    else:
        entry = schedule
    if isinstance(entry, dict):
        extra = entry.get("extra", [])
        return to_fraction(entry.get("margin", 0)), extra, to_fraction(entry.get("box", 0))
    return to_fraction(entry), [], Fraction(0)


def normalize_domain(domain, source_region, target_region, phi):
    """U_pq cap U_q cap phi^-1(U_p)."""
    d = domain.intersect(source_region)
    pulled = target_region.pullback(phi, d.lower, d.upper, d.periodic)
    return d.intersect(pulled)


def shrink(gcs, schedule, resolution=None, report=None):
    """Shrink charts by the margin schedule and recompute the domains.

    ``schedule`` is a number (tighten every constraint) or a dict mapping an
    index to a number or to ``{"margin", "extra", "box"}``.
    """
    res = default_resolution(resolution)
    rep = report if report is not None else Report("shrink")
    new_charts = {}
    rel_ok = True
    for p, ch in gcs.charts.items():
        m, extra, boxm = _schedule_for(schedule, p, gcs)
        if m < 0 or boxm < 0:
            raise ValueError("margins must be nonnegative")
        R = ch.region.tightened(m) if m else ch.region
        if boxm:
            R = R.shrunk_box(boxm)
        if extra:
            R = R.with_constraints([(parse_expr(e, ch.dim), bool(o)) if isinstance(e, str) else (e, bool(o))
                                    for e, o in extra])
        if any(o for _, o in ch.region.constraints) and m == 0 and R != ch.region:
            rel_ok = False
        new_charts[p] = ch.with_region(R)
    rep.add("relative compactness", rel_ok,
            detail="open constraints must be tightened by a positive margin")
    new_changes = {}
    for (p, q), cc in gcs.changes.items():
        dom = normalize_domain(cc.domain, new_charts[q].region, new_charts[p].region, cc.phi)
        new_changes[(p, q)] = cc.with_domain(dom)
    out = GoodCoordinateSystem(gcs.structure, new_charts, gcs.origin, new_changes)
    fp_new = _Footprints(out, res)
    unc = [a for a in fp_new.samples if not any(fp_new.member(a, p) for p in out.indices)]
    if unc:
        raise CoveringLostError("shrinking lost the covering of X at %s" % (list(unc[0][1]),),
                                witness=[unc[0][0], list(unc[0][1])])
    # intersection pattern of footprints
    fp_old = _Footprints(gcs, res)
    # both systems are probed on the same, finer zero samples
    probe = [(n, tuple(z)) for n in sorted(gcs.structure.charts)
             for z in sample_zero_set(gcs.structure.chart(n).section, gcs.structure.chart(n).region, 4 * res)]
    pat_ok, wit = True, None
    for p, q in itertools.combinations(out.indices, 2):
        def meets(fp):
            return any(fp.member(a, p) and fp.member(a, q) for a in probe)
        if meets(fp_old) != meets(fp_new):
            pat_ok, wit = False, [p, q]
    rep.add("intersection pattern", pat_ok, witness=wit)
    return out


# ---------------------------------------------------------------------------
# construction


class PureNeighborhood:
    """Equal-dimension charts glued by open embeddings, with a Hausdorff certificate."""

    def __init__(self, dimension, charts, changes, certificate):
        self.dimension = dimension
        self.charts = charts
        self.changes = changes
        self.certificate = certificate

    @property
    def pieces(self):
        return list(self.charts)


def _zero_cover(structure, names, res):
    pts = []
    for n in names:
        ch = structure.chart(n)
        for z in sample_zero_set(ch.section, ch.region, res):
            pts.append((n, tuple(z)))
    return pts


def build_pure_neighborhood(structure, dimension, names=None, resolution=None):
    """Glue the charts of one dimension; shrink sources until Hausdorff."""
    res = default_resolution(resolution)
    names = sorted(names if names is not None else
                   [n for n, c in structure.charts.items() if c.dim == dimension])
    for n in names:
        if structure.chart(n).dim != dimension:
            raise GCSBuildError("pure", "chart %s has dimension %d, expected %d"
                                % (n, structure.chart(n).dim, dimension))
    charts = {n: structure.chart(n) for n in names}
    changes = {k: cc for k, cc in structure.changes.items() if k[0] in charts and k[1] in charts}
    sub = KuranishiStructure(list(charts.values()), list(changes.values()), structure.virtual_dimension)
    cert = hausdorff_report(diagram_from_structure(sub), min(res, 9), force=True)
    if cert["separation"].passed or not changes:
        return PureNeighborhood(dimension, charts, changes, cert)
    zeros = _zero_cover(sub, names, res)
    qc0 = QuotientComplex(diagram_from_structure(sub), min(res, 9), probe=None)
    diam = max(float(h - l) for c in charts.values() for l, h in zip(c.region.lower, c.region.upper))
    for k in range(1, 12):
        r = to_fraction(diam) / 2 ** (k + 1)
        new = dict(charts)
        for (p, q), cc in changes.items():
            extra = [(add(g, const(r)), True) for g, o in cc.domain.constraints
                     if o and (g, o) not in charts[q].region.constraints]
            if extra:
                new[q] = new[q].with_region(new[q].region.with_constraints(extra))
        new_changes = {key: cc.with_domain(normalize_domain(cc.domain, new[key[1]].region,
                                                            new[key[0]].region, cc.phi))
                       for key, cc in changes.items()}
        # covering of the compact part
        covered = all(any(r_[0] in new and new[r_[0]].region.contains(r_[1], tol=1e-12)
                          for r_ in qc0.reps(a)) for a in zeros)
        if not covered:
            continue
        sub2 = KuranishiStructure(list(new.values()), list(new_changes.values()), structure.virtual_dimension)
        cert = hausdorff_report(diagram_from_structure(sub2), min(res, 9), force=True)
        if cert["separation"].passed:
            cert.meta["shrink_radius"] = float(r)
            return PureNeighborhood(dimension, new, new_changes, cert)
    raise GCSBuildError("pure", "no shrink radius produced a Hausdorff gluing",
                        cert["separation"].witness)


def build_gcs(structure, resolution=None, check=True):
    """Good coordinate system on the charts of ``structure``, ordered by dimension."""
    res = default_resolution(resolution)
    if len(structure.charts) > MAX_CHARTS:
        raise GCSBuildError("input", "at most %d charts are supported" % MAX_CHARTS)
    if any(c.dim > MAX_AMBIENT_DIM for c in structure.charts.values()):
        raise GCSBuildError("input", "ambient dimension above %d" % MAX_AMBIENT_DIM)
    dims = sorted({c.dim for c in structure.charts.values()}, reverse=True)
    pure = {}
    for d in dims:
        pure[d] = build_pure_neighborhood(structure, d, resolution=res)
    ordered = sorted(((c.dim, n) for d in pure for n, c in pure[d].charts.items()))
    index = {n: i + 1 for i, (_, n) in enumerate(ordered)}
    charts = {index[n]: pure[d].charts[n].with_region(pure[d].charts[n].region, name=str(index[n]))
              for d, n in ordered}
    origin = {index[n]: n for _, n in ordered}
    changes = {}
    for (tn, sn), cc in sorted(structure.changes.items()):
        p, q = index[tn], index[sn]
        if p < q:
            raise GCSBuildError("mixed", "change %s -> %s goes down in the index order" % (sn, tn))
        if p == q:
            continue
        dom = normalize_domain(cc.domain, charts[q].region, charts[p].region, cc.phi)
        changes[(p, q)] = CoordinateChange(str(q), str(p), dom, cc.phi, cc.phi_hat, cc.group_hom)
    gcs = GoodCoordinateSystem(structure, charts, origin, changes)
    # footprint overlaps without a coordinate change abort with the pair
    fp = _Footprints(gcs, res)
    for p, q in itertools.combinations(gcs.indices, 2):
        if gcs.le(p, q) or gcs.le(q, p):
            continue
        for a in fp.chart_zeros(p):
            if fp.member(a, q):
                raise GCSBuildError("mixed", "footprints of %s and %s meet without a coordinate change"
                                    % (origin[p], origin[q]), witness=list(a[1]))
    if not check:
        return gcs
    rep = check_gcs(gcs, res)
    if rep.passed:
        return gcs
    for k in range(1, 8):
        r = Fraction(1, 2 ** k)
        try:
            cand = shrink(gcs, r, res)
        except CoveringLostError:
            continue
        if check_gcs(cand, res).passed:
            return cand
    f = rep.failures()[0]
    raise GCSBuildError("shrink", "no margin in the schedule passes %s" % f.name, f.witness)


def compatibility_report(gcs, resolution=None):
    """Each chart is a restriction of its origin and changes agree with the structure's."""
    res = default_resolution(resolution)
    rep = Report("compatibility with the structure")
    ok = True
    for p, ch in gcs.charts.items():
        base = gcs.structure.chart(gcs.origin[p])
        X = sample_grid(ch.region, res)
        ok &= bool(base.region.mask(X, tol=1e-9).all()) if len(X) else True
    rep.add("(1) charts embed in the structure", ok)
    worst = 0.0
    for (p, q), cc in gcs.changes.items():
        sc = gcs.structure.change(gcs.origin[p], gcs.origin[q])
        X = sample_grid(cc.domain, res)
        if len(X):
            worst = max(worst, float(np.max(np.abs(sc.phi.eval_array(X) - cc.phi.eval_array(X)))))
            ok_dom = sc.domain.mask(X, tol=1e-9).all()
            if not ok_dom:
                worst = max(worst, 1.0)
    rep.add("(2) changes agree", worst <= 1e-10, worst)
    rep.add("(3) sections agree", all(ch.section == gcs.structure.chart(gcs.origin[p]).section
                                      for p, ch in gcs.charts.items()))
    rep.add("(4) groups agree", all(ch.group is gcs.structure.chart(gcs.origin[p]).group
                                    for p, ch in gcs.charts.items()))
    return rep
