"""Locally free circle actions on charts and the quotient by slices.

A circle acts on a chart by ``theta . x = exp(theta A) x + theta tau`` where
``A`` is skew and ``tau`` translates periodic angle axes, and on the fiber by
``exp(theta B)``.  The quotient chart is an affine slice through a chosen
point, orthogonal to the orbit; its group is the part of Gamma x S^1 that
fixes that point.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, null_space
from scipy.optimize import minimize_scalar

from .config import default_resolution
from .kuranishi import (CoordinateChange, FiniteGroupAction, KuranishiChart,
                        KuranishiStructure, MatrixField, validate_structure)
from .reports import Report
from .smoothmap import (ParseError, SmoothMap, add, compose, const, linear_map,
                        mul, sample_grid, to_fraction)

GENERATOR_FLOOR = 1e-8
COMMUTE_TOL = 1e-10
INVARIANCE_TOL = 1e-9
ANGLES = 16


class LocallyFreeError(ValueError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class SliceError(ValueError):
    pass


@dataclass
class CircleAction:
    v_generator: np.ndarray
    e_generator: np.ndarray
    periodic_axes: tuple = ()
    period: float = None
    slice_point: tuple = None

    def __post_init__(self):
        self.v_generator = np.atleast_2d(np.array(self.v_generator, dtype=float))
        n = self.v_generator.shape[0]
        e = np.array(self.e_generator, dtype=float)
        k = int(round(np.sqrt(e.size)))
        self.e_generator = e.reshape(k, k)
        self.periodic_axes = tuple(int(a) for a in self.periodic_axes)
        if len(self.periodic_axes) > 1:
            raise ValueError("at most one periodic axis may carry the circle translation")
        self.translation = np.zeros(n)
        for a in self.periodic_axes:
            self.translation[a] = 1.0
            if np.any(self.v_generator[a] != 0) or np.any(self.v_generator[:, a] != 0):
                raise ValueError("the rotation generator must not touch the translated axis")

    @property
    def is_translation(self):
        return not np.any(self.v_generator)

    def resolve_period(self, chart):
        if self.period is not None:
            return float(self.period)
        if self.periodic_axes:
            return chart.periods[self.periodic_axes[0]]
        return 2 * np.pi

    def flow(self, theta, X):
        X = np.asarray(X, dtype=float)
        return X @ expm(theta * self.v_generator).T + theta * self.translation

    def fiber(self, theta):
        if self.e_generator.size == 0:
            return self.e_generator
        return expm(theta * self.e_generator)

    def field(self, X):
        return np.asarray(X, dtype=float) @ self.v_generator.T + self.translation

    def to_json(self):
        d = {"v_generator": self.v_generator.tolist(), "e_generator": self.e_generator.tolist(),
             "periodic_axes": list(self.periodic_axes)}
        if self.period is not None:
            d["period"] = self.period
        if self.slice_point is not None:
            d["slice_point"] = list(self.slice_point)
        return d

    @classmethod
    def from_json(cls, d, rank):
        from .io import check_keys
        check_keys(d, {"v_generator", "e_generator", "periodic_axes", "period", "slice_point"}, "circle")
        e = np.array(d.get("e_generator", np.zeros((rank, rank))), dtype=float).reshape(rank, rank)
        return cls(d["v_generator"], e, d.get("periodic_axes", ()), d.get("period"), d.get("slice_point"))


@dataclass
class S1Chart:
    chart: KuranishiChart
    action: CircleAction

    @property
    def name(self):
        return self.chart.name

    @property
    def period(self):
        return self.action.resolve_period(self.chart)

    def move(self, theta, X):
        return self.chart.region.wrap(self.action.flow(theta, X))

    def center(self):
        if self.action.slice_point is not None:
            return np.array(self.action.slice_point, dtype=float)
        if self.chart.base_point is not None:
            return np.array(self.chart.base_point, dtype=float)
        R = self.chart.region
        X = sample_grid(R, 5)
        if not len(X):
            raise SliceError("chart %s has no sample point for a slice" % self.name)
        return X[len(X) // 2]


@dataclass
class S1Structure:
    structure: KuranishiStructure
    actions: dict

    def chart(self, name):
        return S1Chart(self.structure.chart(name), self.actions[name])

    def charts(self):
        return [self.chart(n) for n in self.structure.names()]

    def to_json(self):
        from .io import structure_to_json
        d = structure_to_json(self.structure)
        for c in d["charts"]:
            c["circle"] = self.actions[c["name"]].to_json()
        return d

    @classmethod
    def from_json(cls, d):
        from .io import structure_from_json
        d = dict(d)
        plain, actions = [], {}
        for c in d.get("charts", []):
            c = dict(c)
            if "circle" not in c:
                raise ParseError("chart %s has no circle action" % c.get("name"))
            circ = c.pop("circle")
            rank = int(c.get("rank", len(c.get("section", []))))
            actions[c["name"]] = CircleAction.from_json(circ, rank)
            plain.append(c)
        d["charts"] = plain
        return cls(structure_from_json(d), actions)


# ---------------------------------------------------------------------------
# validation


def _angles(period, k=ANGLES):
    return period * (np.arange(1, k + 1) / (k + 1))


def check_locally_free(s1chart, resolution=None):
    """Nonvanishing orbit field, orthogonality, period, commutation, equivariance."""
    res = default_resolution(resolution)
    ch, act = s1chart.chart, s1chart.action
    rep = Report("circle action on chart %s" % ch.name)
    X = sample_grid(ch.region, res)
    P = s1chart.period
    A, Be = act.v_generator, act.e_generator
    skew = max(float(np.max(np.abs(A + A.T), initial=0)), float(np.max(np.abs(Be + Be.T), initial=0)))
    rep.add("skew generators", skew <= COMMUTE_TOL, skew)
    per = float(np.max(np.abs(expm(P * A) - np.eye(len(A))), initial=0))
    if Be.size:
        per = max(per, float(np.max(np.abs(expm(P * Be) - np.eye(len(Be))))))
    rep.add("closes after one period", per <= 1e-9, per, detail="period %g" % P)
    if len(X):
        norms = np.linalg.norm(act.field(X), axis=1)
        k = int(np.argmin(norms))
        rep.add("orbit field nonvanishing", norms[k] >= GENERATOR_FLOOR, float(norms[k]),
                None if norms[k] >= GENERATOR_FLOOR else X[k].tolist())
    else:
        rep.add("orbit field nonvanishing", True, None, detail="empty region")
    G = ch.group
    worst = 0.0
    for g in range(G.order):
        M, E = G.v_matrices[g], G.e_matrices[g]
        worst = max(worst, float(np.max(np.abs(M @ A - A @ M), initial=0)),
                    float(np.max(np.abs(M @ act.translation - act.translation), initial=0)))
        if Be.size:
            worst = max(worst, float(np.max(np.abs(E @ Be - Be @ E))))
    rep.add("commutes with the finite group", worst <= COMMUTE_TOL, worst)
    worst, wit = 0.0, None
    if len(X) and ch.rank:
        S = ch.section.eval_array(X)
        for th in _angles(P):
            gap = np.abs(ch.section.eval_array(s1chart.move(th, X)) - S @ act.fiber(th).T)
            k = np.unravel_index(np.argmax(gap), gap.shape)
            if gap[k] > worst:
                worst, wit = float(gap[k]), {"angle": float(th), "point": X[k[0]].tolist()}
    rep.add("section equivariant", worst <= INVARIANCE_TOL, worst, None if worst <= INVARIANCE_TOL else wit)
    inside = 0.0
    if len(X):
        for th in _angles(P, 4):
            Y = s1chart.move(th, X)
            inside = max(inside, float(np.mean(~ch.region.mask(Y, tol=1e-9))))
    rep.add("region invariant", inside == 0.0, inside)
    free = all(len(ch.isotropy(x)) == 1 for x in X)
    rep.meta["finite group acts freely"] = free
    return rep


def isotropy_angles(s1chart, x, tol=1e-9, samples=2048):
    """Pairs ``(g, theta)`` with ``g . (theta . x) = x``, ``theta`` in ``[0, period)``."""
    ch = s1chart.chart
    x = np.asarray(x, dtype=float)
    P = s1chart.period
    grid = np.linspace(0.0, P, samples, endpoint=False)
    out = []
    for g in range(ch.group.order):

        def gap(th):
            y = ch.act(g, s1chart.move(th, x[None, :]))
            return float(np.linalg.norm(ch.diff(y, x[None, :])))

        vals = np.array([gap(t) for t in grid])
        h = P / samples
        for i in np.flatnonzero(vals <= 2 * h * (1 + np.linalg.norm(s1chart.action.field(x))) + 1e-12):
            r = minimize_scalar(gap, bounds=(grid[i] - h, grid[i] + h), method="bounded",
                                options={"xatol": 1e-13})
            if r.fun <= tol:
                th = float(np.mod(r.x, P))
                if th > P - 1e-9:
                    th = 0.0
                if abs(th) < 1e-9:
                    th = 0.0
                if not any(gg == g and min(abs(th - t), P - abs(th - t)) < 1e-7 for gg, t in out):
                    out.append((g, th))
    return sorted(out, key=lambda p: (p[1], p[0]))


def minimal_isotropy_angle(s1chart, x):
    """Smallest positive angle whose rotation maps ``x`` into its finite-group orbit."""
    pos = [th for _, th in isotropy_angles(s1chart, x) if th > 1e-9]
    return min(pos) if pos else s1chart.period


def change_equivariance(s1, cc, resolution=None):
    """Sampled gaps of ``phi(theta x) = theta phi(x)`` and the fiber analogue."""
    res = default_resolution(resolution)
    Q, P = s1.chart(cc.source), s1.chart(cc.target)
    X = sample_grid(cc.domain, res)
    worst = 0.0
    if not len(X):
        return worst
    for th in _angles(Q.period, 8):
        Y = cc.phi.eval_array(Q.move(th, X))
        Z = P.move(th, cc.phi.eval_array(X))
        worst = max(worst, float(np.max(np.abs(P.chart.diff(Y, Z)))))
        if cc.phi_hat.rows * cc.phi_hat.cols:
            L = cc.phi_hat.value_array(Q.move(th, X)) @ Q.action.fiber(th)
            R = P.action.fiber(th) @ cc.phi_hat.value_array(X)
            worst = max(worst, float(np.max(np.abs(L - R))))
    return worst


# ---------------------------------------------------------------------------
# slices and the quotient structure


@dataclass
class Slice:
    """Affine slice ``w -> origin + basis w`` with its stabilizer data."""
    chart: S1Chart
    origin: np.ndarray
    normal: np.ndarray
    basis: np.ndarray
    stabilizer: list = field(default_factory=list)

    def embedding(self):
        return linear_map(_rat(self.basis), _rat(self.origin))

    def projection(self):
        """``x -> basis^T (x - origin)``; the orbit coordinate drops out for translations."""
        return linear_map(_rat(self.basis.T), _rat(-self.basis.T @ self.origin))


def _rat(M):
    M = np.asarray(M, dtype=float)
    clean = np.where(np.abs(M - np.round(M)) < 1e-14, np.round(M), M)
    if clean.ndim == 1:
        return [to_fraction(float(v)) for v in clean]
    return [[to_fraction(float(v)) for v in row] for row in clean]


def build_slice(s1chart):
    ch = s1chart.chart
    o = s1chart.center()
    xi = s1chart.action.field(o)
    nrm = np.linalg.norm(xi)
    if nrm < GENERATOR_FLOOR:
        raise LocallyFreeError("orbit field vanishes at the slice point", o.tolist())
    n = xi / nrm
    B = null_space(n[None, :])
    # prefer coordinate axes when the orbit runs along one
    if np.count_nonzero(np.abs(n) > 1e-14) == 1:
        a = int(np.flatnonzero(np.abs(n) > 1e-14)[0])
        B = np.eye(ch.dim)[:, [j for j in range(ch.dim) if j != a]]
    sl = Slice(s1chart, o, n, B)
    sl.stabilizer = _stabilizer(sl)
    return sl


def _stabilizer(sl):
    """Elements ``(g, theta)`` of Gamma x S^1 fixing the slice point, with slice matrices."""
    S = sl.chart
    ch = S.chart
    o = sl.origin
    out = []
    for g, th in isotropy_angles(S, o):
        def f(W):
            Y = ch.act(g, S.move(th, o + np.atleast_2d(W) @ sl.basis.T))
            return ch.diff(Y, o[None, :])
        k = sl.basis.shape[1]
        D = f(np.eye(k))
        if np.max(np.abs(D @ sl.normal), initial=0) > 1e-9:
            raise SliceError("stabilizer element (%d, %g) does not preserve the slice" % (g, th))
        M = (D @ sl.basis).T
        E = ch.group.e_matrices[g] @ S.action.fiber(th) if ch.rank else np.zeros((0, 0))
        out.append((g, th, np.round(M, 12), np.round(E, 12)))
    return out


def _stabilizer_group(sl):
    S = sl.chart
    P = S.period
    ch = S.chart
    el = sl.stabilizer
    n = len(el)

    def find(g, th):
        for k, (gg, t, _, _) in enumerate(el):
            d = abs(t - th) % P
            if gg == g and min(d, P - d) < 1e-7:
                return k
        raise SliceError("stabilizer is not closed under multiplication")

    table = [[find(ch.group.mul(el[a][0], el[b][0]), (el[a][1] + el[b][1]) % P) for b in range(n)]
             for a in range(n)]
    return FiniteGroupAction(table, [e[2] for e in el], [e[3] for e in el])


def _slice_region(sl):
    ch = sl.chart.chart
    R = ch.region
    corners = np.array(list(itertools.product(*[(float(l), float(h)) for l, h in zip(R.lower, R.upper)])))
    W = (corners - sl.origin) @ sl.basis
    lo, hi = W.min(axis=0), W.max(axis=0)
    emb = sl.embedding()
    Rg = R.pullback(emb, _rat(lo), _rat(hi))
    # keep the part where orbits cross the slice in the direction of the normal
    A = sl.chart.action
    cross = compose(SmoothMap(ch.dim, [add(*[mul(const(-to_fraction(float(v))), c) for v, c in
                                             zip(sl.normal @ A.v_generator, _vars(ch.dim))],
                                           const(-to_fraction(float(sl.normal @ A.translation))))]), emb)
    g = cross.components[0]
    if g.kind != "const":
        Rg = Rg.with_constraints([(g, True)])
    elif float(g.value) >= 0:
        raise SliceError("orbits never cross the slice")
    return Rg


def _vars(n):
    from .smoothmap import var
    return [var(i) for i in range(n)]


@dataclass
class Quotient:
    structure: KuranishiStructure
    slices: dict
    corrections: dict
    report: Report


def quotient_structure(s1, resolution=None):
    """Kuranishi structure on the slices; virtual dimension drops by one."""
    res = default_resolution(resolution)
    rep = Report("circle quotient")
    charts, slices = [], {}
    for S in s1.charts():
        r = check_locally_free(S, res)
        rep.extend(r, prefix="%s: " % S.name)
        if not r.passed:
            f = r.failures()[0]
            raise LocallyFreeError("chart %s: %s" % (S.name, f.name), f.witness)
        sl = build_slice(S)
        slices[S.name] = sl
        G = _stabilizer_group(sl)
        emb = sl.embedding()
        sec = compose(S.chart.section, emb) if S.chart.rank else SmoothMap(sl.basis.shape[1], [])
        bp = None if S.chart.base_point is None else tuple(
            sl.basis.T @ S.chart.diff(np.array(S.chart.base_point, dtype=float), sl.origin))
        charts.append(KuranishiChart(S.name, _slice_region(sl), S.chart.rank, G, sec, bp,
                                     S.chart.orientation))
    by = {c.name: c for c in charts}
    changes, corrections = [], {}
    for (p, q), cc in sorted(s1.structure.changes.items()):
        gap = change_equivariance(s1, cc, res)
        rep.add("change %s<-%s equivariant" % (p, q), gap <= INVARIANCE_TOL, gap)
        Sp, Sq = slices[p], slices[q]
        if not (Sp.chart.action.is_translation and Sq.chart.action.is_translation):
            raise SliceError("correction maps have a closed form only for translation actions")
        ph = compose(cc.phi, Sq.embedding())
        # angle that brings phi(w) back to the slice of p
        nt = float(Sp.normal @ Sp.chart.action.translation)
        corr = add(*[mul(const(-to_fraction(float(v)) / to_fraction(nt)), c) for v, c in zip(Sp.normal, ph.components)],
                   const(to_fraction(float(Sp.normal @ Sp.origin)) / to_fraction(nt)))
        corrections[(p, q)] = SmoothMap(Sq.basis.shape[1], [corr])
        phibar = compose(Sp.projection(), ph)
        if cc.phi_hat.rows * cc.phi_hat.cols:
            Be = Sp.chart.action.e_generator
            if Be.size and np.any(Be):
                if corr.kind != "const":
                    raise SliceError("fiber correction is not polynomial for a non-constant angle")
                M = expm(float(corr.value) * Be)
                hat = MatrixField(cc.phi_hat.rows, cc.phi_hat.cols,
                                  SmoothMap(cc.phi_hat.arity, [add(*[mul(const(to_fraction(float(M[i, k]))),
                                                               cc.phi_hat.entries.components[k * cc.phi_hat.cols + j])
                                                           for k in range(cc.phi_hat.rows)])
                                                       for i in range(cc.phi_hat.rows)
                                                       for j in range(cc.phi_hat.cols)]))
                hat = hat.compose(Sq.embedding())
            else:
                hat = cc.phi_hat.compose(Sq.embedding())
        else:
            hat = MatrixField(cc.phi_hat.rows, cc.phi_hat.cols, SmoothMap(ph.arity, []))
        qch = by[q]
        lo = [float(v) for v in qch.region.lower]
        hi = [float(v) for v in qch.region.upper]
        dom = cc.domain.pullback(Sq.embedding(), _rat(lo), _rat(hi)).intersect(qch.region)
        hom = _stabilizer_hom(by[p], qch, phibar, dom, res)
        changes.append(CoordinateChange(q, p, dom, phibar, hat, hom))
    out = KuranishiStructure(charts, changes, s1.structure.virtual_dimension - 1)
    vr = validate_structure(out, res)
    rep.extend(vr, prefix="quotient: ")
    return Quotient(out, slices, corrections, rep)


def _stabilizer_hom(P, Q, phibar, dom, res):
    X = sample_grid(dom, max(3, res // 2))
    hom = []
    for g in range(Q.group.order):
        if not len(X):
            hom.append(0 if g == Q.group.identity else g)
            continue
        L = phibar.eval_array(Q.act(g, X))
        for h in range(P.group.order):
            if np.max(np.abs(L - P.act(h, phibar.eval_array(X)))) <= 1e-9:
                hom.append(h)
                break
        else:
            raise SliceError("no stabilizer element of %s matches element %d of %s" % (P.name, g, Q.name))
    return hom


# ---------------------------------------------------------------------------
# equivariant perturbation


@dataclass
class EquivariantPerturbation:
    quotient: Quotient
    gcs: object
    system: object
    pulled: dict
    zeros: dict
    orbit_classes: list
    report: Report

    @property
    def empty(self):
        return all(len(z) == 0 for zs in self.zeros.values() for z in zs)


def pull_back(ms, sl):
    """Branches on the total chart, constant along orbits."""
    from .multisection import Multisection
    S = sl.chart
    if not S.action.is_translation:
        raise SliceError("pull-back along orbits is implemented for translation actions")
    proj = sl.projection()
    R = S.chart.region
    lo = [float(v) for v in R.lower]
    hi = [float(v) for v in R.upper]
    region = R.intersect(ms.chart.region.pullback(proj, _rat(lo), _rat(hi), R.periodic))
    chart = S.chart.with_region(region)
    if chart.rank == 0:
        return Multisection(chart, [SmoothMap(chart.dim, []) for _ in ms.branches], ms.multiplicity)
    return Multisection(chart, [compose(b, proj) for b in ms.branches], ms.multiplicity)


def invariance_residual(ms, S, resolution=None):
    """Gap between branch multisets at ``theta x`` and the rotated multisets at ``x``."""
    from .multisection import _matched_gap
    X = sample_grid(ms.chart.region, default_resolution(resolution))
    if not len(X) or ms.chart.rank == 0:
        return 0.0
    V = ms.values(X)
    worst = 0.0
    for th in _angles(S.period):
        W = ms.values(S.move(th, X))
        F = S.action.fiber(th)
        for k in range(len(X)):
            worst = max(worst, _matched_gap(W[k], V[k] @ F.T))
    return worst


def equivariant_perturb(s1, plan, resolution=None, seed_resolution=None):
    """Perturb on the quotient, pull back along orbits, and locate zeros upstairs."""
    from .goodcoords import build_gcs
    from .multisection import _covered_below, branch_zeros, perturb
    res = default_resolution(resolution)
    q = quotient_structure(s1, res)
    gcs = build_gcs(q.structure, res)
    system = perturb(gcs, plan)
    rep = Report("equivariant perturbation")
    pulled, zeros = {}, {}
    worst = 0.0
    for p, ms in sorted(system.sections.items()):
        name = gcs.origin[p]
        sl = q.slices[name]
        up = pull_back(ms, sl)
        pulled[p] = up
        worst = max(worst, invariance_residual(up, sl.chart, res))
        zeros[p] = branch_zeros(up, default_resolution(seed_resolution or 2 * res), up.chart.vdim)
    rep.add("circle invariance", worst <= INVARIANCE_TOL, worst)
    classes = []
    for p, ms in sorted(system.sections.items()):
        sl = q.slices[gcs.origin[p]]
        for i, Z in enumerate(branch_zeros(ms, res, q.structure.virtual_dimension)):
            for z in Z:
                if _covered_below(gcs, p, np.asarray(z), res) is not None:
                    continue
                classes.append({"chart": p, "branch": i, "slice_point": np.asarray(z).tolist(),
                                "orbit_through": (sl.origin + sl.basis @ np.asarray(z)).tolist()})
    vd = q.structure.virtual_dimension
    n = sum(len(z) for zs in zeros.values() for z in zs)
    rep.meta["quotient virtual dimension"] = vd
    rep.meta["zeros located"] = n
    if vd < 0:
        rep.add("empty zero set", n == 0, n)
    return EquivariantPerturbation(q, gcs, system, pulled, zeros, classes, rep)
