"""Multisections, the inductive transversal perturbation and weighted zero counts.

Branches are explicit expression maps.  On a chart ``p`` each branch is built
from the unperturbed section by blending, in index order, the transported
branches of every lower chart (supported near the affine image of the change)
over a Gamma-orbit of a small random constant.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from .config import default_resolution
from .kuranishi import _orth_complement
from .reports import Report
from .smoothmap import (SmoothMap, add, compose, const, diff, eval_map, has_transcendental,
                        mul, neg, tanh, var, parse_map, sample_grid)
from .zeros import NEWTON_TOL, find_zeros, min_singular, newton_project, sample_zero_set, trace_curves

DEDUP_TOL = 10 * NEWTON_TOL
COMPAT_TOL = 1e-9
NORMAL_TOL = 1e-8
DET_FLOOR = 1e-10


class TransversalityError(RuntimeError):
    def __init__(self, msg, worst=None, witness=None):
        super().__init__(msg)
        self.worst = worst
        self.witness = witness


class IncompatibleCoverError(ValueError):
    pass


class Multisection:
    """Branches ``V -> E`` of one chart, stored explicitly (hence liftable)."""

    def __init__(self, chart, branches, multiplicity=1):
        self.chart = chart
        self.branches = list(branches)
        self.multiplicity = int(multiplicity)
        for b in self.branches:
            if b.arity != chart.dim or b.coarity != chart.rank:
                raise ValueError("branch shape does not match chart %s" % chart.name)

    @property
    def n(self):
        return len(self.branches)

    def values(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if self.chart.rank == 0:
            return np.zeros((len(X), self.n, 0))
        return np.stack([b.eval_array(X) for b in self.branches], axis=1)

    def to_json(self):
        return {"chart": self.chart.name, "multiplicity": self.multiplicity,
                "branches": [b.strings() for b in self.branches]}

    @classmethod
    def from_json(cls, d, chart):
        from .io import check_keys
        check_keys(d, {"chart", "multiplicity", "branches"}, "multisection")
        return cls(chart, [parse_map(b, chart.dim) if b else SmoothMap(chart.dim, []) for b in d["branches"]],
                   d.get("multiplicity", 1))


def refine(ms, m):
    """Repeat every branch ``m`` times."""
    m = int(m)
    if m < 1:
        raise ValueError("refinement factor must be positive")
    return Multisection(ms.chart, [b for b in ms.branches for _ in range(m)], ms.multiplicity * m)


def _matched_gap(A, B):
    """Largest entry gap under the best matching of two equal-size branch lists."""
    if A.shape[0] == 0:
        return 0.0
    if A.shape[1] == 0:
        return 0.0
    C = np.max(np.abs(A[:, None, :] - B[None, :, :]), axis=2)
    r, c = linear_sum_assignment(C)
    return float(C[r, c].max())


def _exact_ok(ms):
    return all(not has_transcendental(e) for b in ms.branches for e in b.components)


def equivalence_check(a, b, resolution=None, with_witness=False):
    """Multisets of the lcm-refinements agree at every grid point."""
    if a.chart.name != b.chart.name or a.chart.dim != b.chart.dim or a.chart.rank != b.chart.rank:
        raise IncompatibleCoverError("multisections live on different charts")
    L = a.n * b.n // math.gcd(a.n, b.n)
    ra, rb = refine(a, L // a.n), refine(b, L // b.n)
    X = sample_grid(a.chart.region, default_resolution(resolution))
    exact = _exact_ok(a) and _exact_ok(b)
    witness = None
    for x in X:
        if exact:
            pt = [Fraction(v) for v in x]
            va = sorted(tuple(eval_map(br, pt)) for br in ra.branches)
            vb = sorted(tuple(eval_map(br, pt)) for br in rb.branches)
            if va != vb:
                witness = x.tolist()
                break
        else:
            gap = _matched_gap(ra.values(x)[0], rb.values(x)[0])
            if gap > 1e-12:
                witness = x.tolist()
                break
    ok = witness is None
    return (ok, witness) if with_witness else ok


def equivariance_residual(ms, resolution=None):
    """max over gamma and grid of the gap between {gamma s_i(gamma^-1 x)} and {s_i(x)}."""
    ch = ms.chart
    X = sample_grid(ch.region, default_resolution(resolution))
    if not len(X) or ch.rank == 0:
        return 0.0
    G = ch.group
    V = ms.values(X)
    worst = 0.0
    for g in range(G.order):
        gi = G.inverse(g)
        W = ms.values(ch.act(gi, X)) @ G.e_matrices[g].T
        for k in range(len(X)):
            worst = max(worst, _matched_gap(V[k], W[k]))
    return worst


# ---------------------------------------------------------------------------
# perturbation


@dataclass
class PerturbationPlan:
    eps: float
    seed: int = 0
    sigma_min: float = 1e-6
    radius: float = 0.25
    radii: dict = field(default_factory=dict)
    width: float = 15.0
    retries: int = 25
    resolution: int | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def radius_for(self, p, q):
        return float(self.radii.get((p, q), self.radii.get("%s,%s" % (p, q), self.radius)))

    def to_json(self):
        return {"eps": self.eps, "seed": self.seed, "sigma_min": self.sigma_min, "radius": self.radius,
                "width": self.width, "retries": self.retries}


def _affine_parts(phi):
    """(A, b) if every component of ``phi`` is affine, else None."""
    n = phi.arity
    A = np.zeros((phi.coarity, n))
    for i, c in enumerate(phi.components):
        for j in range(n):
            d = diff(c, j)
            if d.kind != "const":
                return None
            A[i, j] = float(d.value)
    b = phi.eval_array(np.zeros((1, n)))[0] if n else phi.eval_array(np.zeros((1, 0)))[0]
    return A, b


def _float_linear(M, offset, arity):
    comps = []
    for row, bi in zip(M, offset):
        terms = [mul(const(float(a)), var(j)) for j, a in enumerate(row) if a != 0]
        comps.append(add(*terms, const(float(bi))))
    return SmoothMap(arity, comps)


def _sub(f, g):
    return SmoothMap(f.arity, [add(a, neg(b)) for a, b in zip(f.components, g.components)])


def _transported(P, Q, cc, src_branch, gamma=None):
    """Branch on chart P obtained by moving a Q-branch along the affine change."""
    aff = _affine_parts(cc.phi)
    if aff is None:
        raise ValueError("perturbation needs affine coordinate changes (%s -> %s)" % (cc.source, cc.target))
    A, b = aff
    n = P.dim
    Apinv = np.linalg.pinv(A) if A.size else np.zeros((Q.dim, n))
    proj = _float_linear(Apinv, -Apinv @ b, n)                     # y -> source coordinates
    foot = _float_linear(A @ Apinv, b - A @ Apinv @ b, n)          # y -> nearest image point
    pert = compose(_sub(src_branch, Q.section), proj) if Q.rank else None
    ph = cc.phi_hat.compose(proj) if Q.rank else None
    comps = []
    for a in range(P.rank):
        extra = []
        if Q.rank:
            for k in range(Q.rank):
                extra.append(mul(ph.entries.components[a * Q.rank + k], pert.components[k]))
        comps.append(add(P.section.components[a], *extra))
    T = SmoothMap(n, comps)
    r2 = add(*[mul(add(var(i), neg(foot.components[i])), add(var(i), neg(foot.components[i])))
               for i in range(n)]) if n else const(0)
    if gamma is not None and gamma != P.group.identity:
        G = P.group
        gi = G.inverse(gamma)
        back = _float_linear(G.v_matrices[gi], G.v_shifts[gi], n)
        Tg = compose(T, back)
        E = G.e_matrices[gamma]
        T = SmoothMap(n, [add(*[mul(const(float(E[a, k])), Tg.components[k]) for k in range(P.rank)
                                if E[a, k] != 0]) for a in range(P.rank)])
        r2 = compose(SmoothMap(n, [r2]), back).components[0]
    return T, r2


def _cutoff(r2, R, width):
    w = R * R / width
    return mul(const(0.5), add(const(1), neg(tanh(mul(const(1.0 / w), add(r2, const(-R * R)))))))


def _blend(chi, T, S):
    one_minus = add(const(1), neg(chi))
    return SmoothMap(S.arity, [add(mul(chi, t), mul(one_minus, s)) for t, s in zip(T.components, S.components)])


def _image_translates(P, cc):
    """Group elements whose translates of the affine image are pairwise distinct."""
    aff = _affine_parts(cc.phi)
    A, b = aff
    G = P.group
    reps, seen = [], []
    basis = np.linalg.qr(A)[0] if A.size else np.zeros((P.dim, 0))
    for g in range(G.order):
        Ag = G.v_matrices[g] @ basis
        bg = G.v_matrices[g] @ b + G.v_shifts[g]
        dup = False
        for (B2, c2) in seen:
            # same affine subspace: spans agree and offsets differ by the span
            if B2.shape[1] == Ag.shape[1]:
                proj = B2 @ np.linalg.pinv(B2) if B2.size else np.zeros((P.dim, P.dim))
                if np.allclose(proj @ Ag, Ag, atol=1e-12) and np.allclose(proj @ (bg - c2), bg - c2, atol=1e-12):
                    dup = True
                    break
        if not dup:
            seen.append((Ag, bg))
            reps.append(g)
    return reps


class MultisectionSystem:
    """Perturbed multisections for every chart of a good coordinate system."""

    def __init__(self, gcs, sections, plan, attempt=0, constants=None):
        self.gcs = gcs
        self.sections = dict(sections)
        self.plan = plan
        self.attempt = attempt
        self.constants = constants or {}

    def __getitem__(self, p):
        return self.sections[p]

    def to_json(self):
        return {"plan": self.plan.to_json(), "attempt": self.attempt,
                "sections": {str(p): ms.to_json() for p, ms in sorted(self.sections.items())}}

    @classmethod
    def from_json(cls, d, gcs):
        from .io import check_keys
        check_keys(d, {"plan", "attempt", "sections"}, "multisection system")
        pd = dict(d["plan"])
        plan = PerturbationPlan(**{k: pd[k] for k in ("eps", "seed", "sigma_min", "radius", "width", "retries")
                                   if k in pd})
        secs = {int(p): Multisection.from_json(v, gcs.charts[int(p)]) for p, v in d["sections"].items()}
        return cls(gcs, secs, plan, d.get("attempt", 0))


def _draw_constant(rng, rank, amplitude):
    if rank == 0:
        return np.zeros(0)
    v = rng.normal(size=rank)
    v /= max(np.linalg.norm(v), 1e-300)
    return v * amplitude * rng.uniform(0.2, 1.0)


def _build_system(gcs, plan, attempt):
    rng = np.random.default_rng([int(plan.seed), int(attempt)])
    sections, consts = {}, {}
    for p in gcs.indices:
        P = gcs.charts[p]
        G = P.group
        c = _draw_constant(rng, P.rank, plan.eps / 2)
        consts[p] = c
        interior = []
        for g in range(G.order):
            gc = G.e_matrices[g] @ c if P.rank else c
            interior.append(SmoothMap(P.dim, [add(s, const(float(v))) for s, v in zip(P.section.components, gc)]))
        sources = sorted(q for (pp, q) in gcs.changes if pp == p)
        terms = []
        for q in sources:
            cc = gcs.changes[(p, q)]
            Q = gcs.charts[q]
            if Q.dim == P.dim:
                raise ValueError("perturbation supports only changes that raise the dimension")
            R = plan.radius_for(p, q)
            per_gamma = []
            for g in _image_translates(P, cc):
                per_branch = []
                for br in sections[q].branches:
                    T, r2 = _transported(P, Q, cc, br, g)
                    per_branch.append((T, _cutoff(r2, R, plan.width)))
                per_gamma.append(per_branch)
            terms.append(per_gamma)
        branches = []
        for idx in itertools.product(*[range(sections[q].n) for q in sources]):
            for S0 in interior:
                S = S0
                for t, i in zip(terms, idx):
                    for per_branch in t:
                        T, chi = per_branch[i]
                        S = _blend(chi, T, S) if P.rank else S
                branches.append(S)
        sections[p] = Multisection(P, branches)
    return sections, consts


def branch_zeros(ms, resolution, vdim):
    """Located zeros (vdim 0 or negative) or zero-set samples (vdim >= 1), per branch."""
    out = []
    R = ms.chart.region
    for i, b in enumerate(ms.branches):
        if ms.chart.rank == 0:
            Z = sample_grid(R, resolution) if vdim >= 1 else sample_grid(R, resolution)
        elif vdim <= 0:
            Z = find_zeros(b, R, resolution, dedup_tol=1e-9)
        else:
            Z = sample_zero_set(b, R, resolution)
        out.append(Z)
    return out


def transversality_report(system, resolution=None):
    res = default_resolution(system.plan.resolution if resolution is None else resolution)
    rep = Report("transversality")
    worst, wit = np.inf, None
    vd = system.gcs.virtual_dimension
    count = 0
    for p, ms in sorted(system.sections.items()):
        if ms.chart.rank == 0:
            continue
        for i, Z in enumerate(branch_zeros(ms, res, vd)):
            if not len(Z):
                continue
            count += len(Z)
            s = min_singular(ms.branches[i].jacobian_array(Z))
            k = int(np.argmin(s))
            if s[k] < worst:
                worst, wit = float(s[k]), {"chart": p, "branch": i, "point": Z[k].tolist()}
    rep.meta["zeros"] = count
    rep.add("smallest singular value", worst >= system.plan.sigma_min,
            None if wit is None else worst, wit)
    return rep


def perturb(gcs, plan):
    """Compatible transversal multisections within ``eps`` of the sections."""
    worst, wit = None, None
    for attempt in range(plan.retries):
        sections, consts = _build_system(gcs, plan, attempt)
        system = MultisectionSystem(gcs, sections, plan, attempt, consts)
        rep = transversality_report(system)
        if rep.passed:
            return system
        c = rep.checks[0]
        if worst is None or (c.residual is not None and c.residual > worst):
            worst, wit = c.residual, c.witness
    raise TransversalityError("transversality not reached after %d attempts (best smallest singular value %s)"
                              % (plan.retries, worst), worst, wit)


# ---------------------------------------------------------------------------
# property verifiers


def _pair_grid(cc, budget):
    dim = max(cc.domain.dim, 1)
    res = max(3, int(round(budget ** (1.0 / dim))))
    return sample_grid(cc.domain, res)


def compatibility_residual(system, budget=1000):
    """max over U_pq samples of the matched gap between s_p(phi x) and phi_hat s_q(x)."""
    worst, wit = 0.0, None
    for (p, q), cc in sorted(system.gcs.changes.items()):
        P, Q = system.gcs.charts[p], system.gcs.charts[q]
        if P.rank == 0:
            continue
        X = _pair_grid(cc, budget)
        if not len(X):
            continue
        mp, mq = system.sections[p], system.sections[q]
        L = mp.n * mq.n // math.gcd(mp.n, mq.n)
        Vp = mp.values(P.region.wrap(cc.phi.eval_array(X)))
        Vq = mq.values(X)
        PH = cc.phi_hat.value_array(X)
        Wq = np.einsum("nij,nbj->nbi", PH, Vq) if Q.rank else np.zeros((len(X), mq.n, P.rank))
        Ap = np.repeat(Vp, L // mp.n, axis=1)
        Aq = np.repeat(Wq, L // mq.n, axis=1)
        for k in range(len(X)):
            g = _matched_gap(Ap[k], Aq[k])
            if g > worst:
                worst, wit = g, {"pair": [p, q], "point": X[k].tolist()}
    return worst, wit


def c0_distance(system, resolution=None):
    res = default_resolution(resolution)
    worst = 0.0
    for p, ms in system.sections.items():
        if ms.chart.rank == 0:
            continue
        X = sample_grid(ms.chart.region, res)
        if not len(X):
            continue
        S = ms.chart.section.eval_array(X)
        V = ms.values(X)
        worst = max(worst, float(np.max(np.linalg.norm(V - S[:, None, :], axis=2))))
    return worst


def normal_derivative_residual(system, resolution=None):
    """Normal part of every branch differential on the image equals that of s_p."""
    res = default_resolution(resolution)
    worst, wit = 0.0, None
    vd = system.gcs.virtual_dimension
    for (p, q), cc in sorted(system.gcs.changes.items()):
        P, Q = system.gcs.charts[p], system.gcs.charts[q]
        if P.dim == Q.dim or P.rank == 0:
            continue
        zs = []
        for Z in branch_zeros(system.sections[q], res, vd):
            if len(Z):
                zs.append(Z[cc.domain.mask(Z)])
        zs = np.vstack(zs) if zs else np.zeros((0, Q.dim))
        if not len(zs):
            zs = sample_grid(cc.domain, res)
        for z in zs:
            y = cc.phi.eval_array(z)[0]
            N = _orth_complement(cc.phi.jacobian_array(z)[0])
            ph = cc.phi_hat.value_array(z)[0]
            C = _orth_complement(ph)
            ref = C.T @ P.section.jacobian_array(y)[0] @ N
            for i, b in enumerate(system.sections[p].branches):
                got = C.T @ b.jacobian_array(y)[0] @ N
                g = float(np.max(np.abs(got - ref), initial=0))
                if g > worst:
                    worst, wit = g, {"pair": [p, q], "branch": i, "point": z.tolist()}
    return worst, wit


def property_report(system, resolution=None, budget=1000):
    """The four properties: compatibility, transversality, normal derivative, C0 bound."""
    rep = Report("multisection properties")
    rep.meta["eps"] = system.plan.eps
    rep.meta["seed"] = system.plan.seed
    rep.meta["attempt"] = system.attempt
    r, w = compatibility_residual(system, budget)
    rep.add("(1) compatibility", r <= COMPAT_TOL, r, w if r > COMPAT_TOL else None)
    rep.extend(transversality_report(system, resolution), prefix="(2) ")
    r, w = normal_derivative_residual(system, resolution)
    rep.add("(3) normal derivative", r <= NORMAL_TOL, r, w if r > NORMAL_TOL else None)
    d = c0_distance(system, resolution)
    rep.add("(4) C0 distance", d <= system.plan.eps, d)
    eq = max((equivariance_residual(ms, resolution) for ms in system.sections.values()), default=0.0)
    rep.add("equivariance", eq <= 1e-10, eq)
    return rep


# ---------------------------------------------------------------------------
# zero sets and chains


@dataclass
class WeightedPoint:
    chart: int
    branch: int
    point: tuple
    weight: Fraction
    sign: int


@dataclass
class WeightedSegment:
    chart: int
    branch: int
    points: np.ndarray
    weight: Fraction
    sign: int
    closed: bool
    end_tags: tuple


@dataclass
class ZeroComplex:
    dimension: int
    delta: float
    points: list = field(default_factory=list)
    segments: list = field(default_factory=list)
    certificate: Report | None = None
    closure: Report | None = None

    @property
    def empty(self):
        return not self.points and not self.segments


class CompactnessError(RuntimeError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


def _covered_below(gcs, p, y, res):
    """A representative of chart-p point ``y`` inside a lower chart's domain."""
    from .goodcoords import _preimage
    P = gcs.charts[p]
    for (pp, q), cc in sorted(gcs.changes.items()):
        if pp != p:
            continue
        for g in range(P.group.order):
            target = P.act(g, np.asarray(y, float)[None, :])[0]
            for z in _preimage(cc, target, cc.domain, res):
                if cc.domain.contains(z, tol=1e-12):
                    return q, z
    return None


def _images_above(gcs, p, y):
    out = [(p, np.asarray(y, float))]
    for (r, q), cc in sorted(gcs.changes.items()):
        if q == p and cc.domain.contains(np.asarray(y, float), tol=1e-12):
            out.append((r, gcs.charts[r].region.wrap(cc.phi.eval_array(np.asarray(y, float)[None, :]))[0]))
    return out


def distance_to_X(gcs, p, y):
    """Chain length to the zero set of the unperturbed sections (one in-chart leg)."""
    best = math.inf
    for r, w in _images_above(gcs, p, y):
        ch = gcs.charts[r]
        if ch.rank == 0:
            return 0.0
        Z, res = newton_project(ch.section, w[None, :], tol=1e-13)
        if res[0] <= 1e-10 and ch.region.contains(ch.region.wrap(Z)[0], tol=1e-9, closure=True):
            best = min(best, float(np.linalg.norm(ch.diff(Z, w[None, :]))))
    return best


def _sign(ms, i, z):
    ch = ms.chart
    J = ms.branches[i].jacobian_array(np.asarray(z, float)[None, :])[0] if ch.rank else np.zeros((0, 0))
    d = np.linalg.det(J) if J.size else 1.0
    if abs(d) < DET_FLOOR:
        raise ValueError("sign indeterminate at %s (|det| = %.3g)" % (list(z), abs(d)))
    o = ch.orientation[0] * ch.orientation[1]
    return int(np.sign(d)) * o


DELTA_START = 0.05


def choose_delta(system, resolution=None, start=DELTA_START):
    """Smallest ``start * 2**k`` with no located zero at distance in [0.9 delta, 2 delta).

    Zeros that follow X under the perturbation then sit well inside the
    restriction, while zeros with no nearby point of X stay outside it.
    """
    gcs = system.gcs
    res = default_resolution(resolution)
    dist = []
    if gcs.virtual_dimension == 0:
        for p, ms in sorted(system.sections.items()):
            for Z in branch_zeros(ms, res, 0):
                dist += [distance_to_X(gcs, p, z) for z in Z if _covered_below(gcs, p, z, res) is None]
    delta = float(start)
    while any(0.9 * delta <= d < 2 * delta for d in dist):
        delta *= 2
    return delta


def zero_complex(system, delta=None, resolution=None, certify=True):
    gcs = system.gcs
    vd = gcs.virtual_dimension
    res = default_resolution(resolution)
    if vd >= 2:
        raise ValueError("zero sets are supported only in virtual dimension 0 or 1")
    if delta is None:
        delta = choose_delta(system, res)
    zc = ZeroComplex(max(vd, 0), float(delta))
    closure = Report("closure")
    if vd < 0:
        for p, ms in sorted(system.sections.items()):
            for i, Z in enumerate(branch_zeros(ms, res, vd)):
                if len(Z):
                    closure.add("no zeros below dimension 0", False, witness={"chart": p, "branch": i,
                                                                             "point": Z[0].tolist()})
        if not closure.checks:
            closure.add("no zeros below dimension 0", True)
    elif vd == 0:
        for p, ms in sorted(system.sections.items()):
            G = ms.chart.group
            for i, Z in enumerate(branch_zeros(ms, res, vd)):
                for z in Z:
                    if _covered_below(gcs, p, z, res) is not None:
                        continue
                    if distance_to_X(gcs, p, z) > delta:
                        continue
                    zc.points.append(WeightedPoint(p, i, tuple(float(v) for v in z),
                                                   Fraction(1, ms.n * G.order), _sign(ms, i, z)))
        closure.add("zeros away from the delta frontier",
                    all(distance_to_X(gcs, w.chart, w.point) < 0.9 * delta for w in zc.points))
    else:
        for p, ms in sorted(system.sections.items()):
            G = ms.chart.group
            for i, b in enumerate(ms.branches):
                if ms.chart.rank == 0:
                    continue
                for pl in trace_curves(b, ms.chart.region, res):
                    for seg, tags in _split_uncovered(gcs, p, pl, res, b):
                        zc.segments.append(WeightedSegment(p, i, seg, Fraction(1, ms.n * G.order),
                                                           ms.chart.orientation[0] * ms.chart.orientation[1],
                                                           pl.closed and len(seg) == len(pl.points), tags))
            if ms.chart.rank == 0:
                if ms.chart.dim != 1:
                    raise ValueError("a chart without obstruction must be one-dimensional here")
                for pl in _interval_runs(ms.chart.region, 8 * res):
                    for seg, tags in _split_uncovered(gcs, p, pl, res):
                        zc.segments.append(WeightedSegment(p, 0, seg, Fraction(1, ms.n * G.order),
                                                           ms.chart.orientation[0], False, tags))
        bad = [s for s in zc.segments for t in s.end_tags if t == "frontier"]
        closure.add("segment ends continue or lie on the outer boundary", not bad,
                    witness=None if not bad else {"chart": bad[0].chart, "end": bad[0].points[-1].tolist()})
        for s in zc.segments:
            keep = np.array([distance_to_X(gcs, s.chart, y) <= delta for y in s.points])
            if not keep.all():
                closure.add("segment within delta", False, witness={"chart": s.chart})
                break
    zc.closure = closure
    if certify:
        from .quotient import diagram_from_structure, hausdorff_report
        zc.certificate = hausdorff_report(diagram_from_structure(gcs.as_structure()), min(res, 5), force=True)
    return zc


def _bisect(a, b, inside, project, iters=50):
    """Boundary point between ``a`` (inside) and ``b`` (outside)."""
    for _ in range(iters):
        m = project(0.5 * (a + b))
        if inside(m):
            a = m
        else:
            b = m
        if np.linalg.norm(b - a) < 1e-12:
            break
    return a


def _split_uncovered(gcs, p, pl, res, F=None):
    """Pieces of a polyline not represented in a lower chart, with end tags.

    Ends next to a covered stretch are moved onto the coverage boundary.
    """
    pts = pl.points
    n = len(pts)

    def covered(y):
        return _covered_below(gcs, p, y, res) is not None

    def project(y):
        if F is None:
            return y
        Z, _ = newton_project(F, y[None, :], tol=1e-13, maxit=30)
        return Z[0]

    cov = np.array([covered(y) for y in pts])
    R = gcs.charts[p].region
    lo = np.array([float(v) for v in R.lower])
    hi = np.array([float(v) for v in R.upper])
    out = []
    i = 0
    while i < n:
        if cov[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and not cov[j + 1]:
            j += 1
        seg = [pts[k] for k in range(i, j + 1)]
        tags = []
        for side, k, nb in ((0, i, i - 1), (1, j, j + 1)):
            if 0 <= nb < n:
                edge = _bisect(pts[k], pts[nb], lambda y: not covered(y), project)
                if side == 0:
                    seg.insert(0, edge)
                else:
                    seg.append(edge)
                tags.append("continued")
            elif pl.closed:
                tags.append("closed")
            else:
                y = pts[k]
                on_box = np.any((np.abs(y - lo) < 1e-8) | (np.abs(y - hi) < 1e-8))
                if on_box:
                    tags.append("boundary")
                elif any(gcs.charts[r].region.contains(w, tol=1e-9) for r, w in _images_above(gcs, p, y)[1:]):
                    tags.append("continued")
                else:
                    tags.append("frontier")
        seg = np.array(seg)
        if len(seg) >= 2 and np.linalg.norm(seg[-1] - seg[0]) > 1e-9 or (pl.closed and i == 0 and j == n - 1):
            out.append((seg, tuple(tags)))
        i = j + 1
    return out


def _interval_runs(region, n):
    """Polylines covering a one-dimensional region, ends refined onto its frontier."""
    from .zeros import Polyline
    xs = np.linspace(float(region.lower[0]), float(region.upper[0]), n)[:, None]
    m = region.mask(xs)
    out = []
    i = 0
    while i < len(xs):
        if not m[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(xs) and m[j + 1]:
            j += 1
        run = [xs[k] for k in range(i, j + 1)]
        if i > 0:
            run.insert(0, _bisect(xs[i], xs[i - 1], region.contains, lambda y: y))
        if j < len(xs) - 1:
            run.append(_bisect(xs[j], xs[j + 1], region.contains, lambda y: y))
        out.append(Polyline(np.array(run), False))
        i = j + 1
    return out


@dataclass
class ChainEntry:
    chart: int
    branch: int
    point: tuple
    sign: int
    weight: Fraction
    image: tuple


@dataclass
class VirtualChain:
    dimension: int
    target_dim: int
    entries: list = field(default_factory=list)
    segments: list = field(default_factory=list)

    @property
    def total_weight(self):
        return sum((e.sign * e.weight for e in self.entries), Fraction(0))

    def boundary(self):
        """Signed weighted endpoints of the 1-chain, merged by image."""
        acc = {}
        for s in self.segments:
            if s["closed"]:
                continue
            for img, w in ((s["end"], s["weight"]), (s["start"], -s["weight"])):
                key = tuple(np.round(np.asarray(img, float), 9))
                acc[key] = acc.get(key, Fraction(0)) + w
        return {k: v for k, v in acc.items() if v != 0}

    def csv_rows(self):
        rows = []
        for e in self.entries:
            rows.append([e.chart, e.branch, *e.point, e.sign, str(e.weight), *e.image])
        return rows


def _chart_map(f, p):
    for key in (str(p), p):
        if key in f.maps:
            return f.maps[key]
    return None


def virtual_chain(zc, f, system=None):
    """Push the weighted zero set forward along the chart maps ``f``."""
    vc = VirtualChain(zc.dimension, f.target_dim)
    for w in zc.points:
        fm = _chart_map(f, w.chart)
        if fm is None:
            raise ValueError("map has no component on chart %s" % w.chart)
        img = tuple(float(v) for v in fm.eval_array(np.array(w.point)[None, :])[0]) if fm.coarity else ()
        vc.entries.append(ChainEntry(w.chart, w.branch, w.point, w.sign, w.weight, img))
    for s in zc.segments:
        fm = _chart_map(f, s.chart)
        if fm is None:
            raise ValueError("map has no component on chart %s" % s.chart)
        img = fm.eval_array(s.points) if fm.coarity else np.zeros((len(s.points), 0))
        vc.segments.append({"chart": s.chart, "branch": s.branch, "weight": s.sign * s.weight,
                            "closed": s.closed, "start": img[0], "end": img[-1], "tags": s.end_tags})
    return vc


def check_cycle(vc, tol=1e-12):
    """Endpoint weights cancel (merged by image); outer-boundary ends are exempt."""
    rep = Report("cycle")
    acc = {}
    for s in vc.segments:
        if s["closed"]:
            continue
        for img, w, tag in ((s["end"], s["weight"], s["tags"][1]), (s["start"], -s["weight"], s["tags"][0])):
            if tag == "boundary":
                continue
            key = tuple(np.round(np.asarray(img, float), 6))
            acc[key] = acc.get(key, Fraction(0)) + w
    left = {k: v for k, v in acc.items() if abs(float(v)) > tol}
    rep.add("boundary cancels", not left, witness=None if not left else
            {"image": list(next(iter(left))), "weight": next(iter(left.values()))})
    return rep


def count(gcs, plan, delta=None, f=None, resolution=None):
    """Convenience: perturb, restrict, and push forward to a point."""
    from .kuranishi import StronglyContinuousMap
    system = perturb(gcs, plan)
    zc = zero_complex(system, delta, resolution, certify=False)
    f = f or StronglyContinuousMap({str(p): SmoothMap(c.dim, []) for p, c in gcs.charts.items()})
    return virtual_chain(zc, f, system), system, zc
