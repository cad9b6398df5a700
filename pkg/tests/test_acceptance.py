"""End-to-end acceptance criteria, one test per criterion.

Each test records a single pass/fail line (with its runtime against the
budget); ``conftest.py`` prints them at the end of the run, and running this
file as a script prints them directly.
"""
import csv
import itertools
import math
import time
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from vfckit import fixtures as fx
from vfckit.cli import main
from vfckit.gluing import (bvp_oracle, glue, grid_bijection, logistic_problem, rho_grid, sup_distance,
                           t_decay_experiment)
from vfckit.goodcoords import build_gcs, check_gcs, shrink
from vfckit.multisection import (PerturbationPlan, c0_distance, compatibility_residual, count,
                                 normal_derivative_residual, perturb, transversality_report, zero_complex)
from vfckit.quotient import QuotientComplex, hausdorff_report
from vfckit.s1 import equivariant_perturb, minimal_isotropy_angle, quotient_structure

EPS = (1e-1, 1e-2, 1e-3)
SEEDS = range(10)
RESULTS = {}


class Criterion:
    def __init__(self, number, title, budget):
        self.number, self.title, self.budget = number, title, budget
        self.notes = []
        self.failures = []

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def check(self, ok, what):
        if not ok:
            self.failures.append(what)

    def note(self, text):
        self.notes.append(text)

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        if exc is not None:
            self.failures.append("%s: %s" % (exc_type.__name__, exc))
        self.check(elapsed < self.budget, "runtime %.1f s over budget" % elapsed)
        status = "PASS" if not self.failures else "FAIL"
        detail = "; ".join(self.failures or self.notes)
        RESULTS[self.number] = "criterion %d %s: %s [%.1f s / %g s] %s" % (
            self.number, status, self.title, elapsed, self.budget, detail)
        print(RESULTS[self.number])
        return False

    def verdict(self):
        assert not self.failures, RESULTS[self.number]


def _read_chain(path):
    rows = list(csv.reader(open(path)))
    body = [r for r in rows[1:] if r[0] != "total"]
    total = Fraction(rows[-1][4])
    points = [np.array([float(v) for v in r[2].split()]) for r in body]
    return total, points, [Fraction(r[4]) for r in body]


def _hand_count_z2(system):
    # branches are x -/+ c; each has one zero at +/- c with orientation sign
    # +1, weighted by 1/(branches * group order)
    ms = system.sections[1]
    X = np.array([[0.0, 0.0], [0.3, -0.2], [-0.5, 0.7]])
    V = ms.values(X)
    order = ms.chart.group.order
    total, zeros = Fraction(0), []
    for b in range(ms.n):
        shift = V[:, b, :] - X
        assert np.allclose(shift, shift[0], atol=1e-14)
        zeros.append(-shift[0])
        total += Fraction(1, ms.n * order)
    return total, zeros


def test_criterion_1_orbifold_count(tmp_path):
    with Criterion(1, "orbifold count on the Z2 chart is 1/2", 5) as c:
        gcs = build_gcs(fx.z2_chart_structure())
        for eps, seed in itertools.product(EPS, SEEDS):
            out = tmp_path / "chain.csv"
            code = main(["count", "fixture:z2-chart", "--eps", repr(eps), "--seed", str(seed),
                         "-o", str(out), "--quiet"])
            c.check(code == 0, "exit %d" % code)
            total, points, weights = _read_chain(out)
            c.check(total == Fraction(1, 2), "total %s at eps=%g seed=%d" % (total, eps, seed))
            hand, zeros = _hand_count_z2(perturb(gcs, PerturbationPlan(eps, seed)))
            c.check(hand == total, "hand count %s" % hand)
            c.check(len(points) == len(zeros) and all(min(np.max(np.abs(p - z)) for z in zeros) <= 1e-12
                                                      for p in points), "zero locations differ")
            c.check(weights == [Fraction(1, 4)] * 2, "weights %s" % weights)
        c.note("30 runs through the CLI, hand enumeration agrees")
    c.verdict()


def _oracle_roots(branch, lo, hi, n=4001):
    f = lambda t: float(branch.eval_array(np.array([[t]]))[0, 0])
    ts = np.linspace(lo, hi, n)
    vals = branch.eval_array(ts[:, None])[:, 0]
    roots = []
    for a, b, fa, fb in zip(ts, ts[1:], vals, vals[1:]):
        if fa == 0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(f, a, b, xtol=1e-15))
    return roots


def test_criterion_2_degree_invariance():
    with Criterion(2, "x^2 signed count is 0", 2) as c:
        gcs = build_gcs(fx.square_structure())
        region = gcs.chart(1).region
        for eps, seed in itertools.product(EPS, SEEDS):
            vc, _, _ = count(gcs, PerturbationPlan(eps, seed))
            c.check(vc.total_weight == 0, "total %s at eps=%g seed=%d" % (vc.total_weight, eps, seed))
            # with a wide restriction the two zeros are kept and cancel
            vc, system, zc = count(gcs, PerturbationPlan(eps, seed), delta=0.5)
            c.check(vc.total_weight == 0, "wide total %s" % vc.total_weight)
            branch = system.sections[1].branches[0]
            roots = _oracle_roots(branch, float(region.lower[0]), float(region.upper[0]))
            signs = [int(np.sign(branch.jacobian_array(np.array([[r]]))[0, 0, 0])) for r in roots]
            got = sorted((p.point[0], p.sign) for p in zc.points)
            c.check(len(got) == len(roots) and sum(signs) == 0, "oracle roots %s" % roots)
            c.check(all(abs(g[0] - r) <= 1e-9 and g[1] == s for g, r, s in zip(got, sorted(roots), signs)),
                    "located %s vs oracle %s" % (got, roots))
        c.note("30 (eps, seed) pairs, zeros match bracketed roots")
    c.verdict()


def test_criterion_3_multisection_properties():
    with Criterion(3, "multisection properties (1)-(4) on 2- and 3-chart fixtures", 60) as c:
        worst = {"compat": 0.0, "normal": 0.0, "sigma": math.inf}
        for name in ("two-chart-z2", "three-chart"):
            gcs = build_gcs(fx.STRUCTURES[name]())
            for eps, seed in itertools.product(EPS, range(3)):
                s = perturb(gcs, PerturbationPlan(eps, seed))
                r, _ = compatibility_residual(s, budget=1000)
                c.check(r <= 1e-9, "%s compatibility %.3g" % (name, r))
                tr = transversality_report(s)
                c.check(tr.passed, "%s transversality: %s" % (name, tr.summary()))
                for chk in tr.checks:
                    if chk.residual is not None:
                        worst["sigma"] = min(worst["sigma"], float(chk.residual))
                nd = normal_derivative_residual(s)[0]
                c.check(nd <= 1e-8, "%s normal derivative %.3g" % (name, nd))
                d = c0_distance(s)
                c.check(d <= eps, "%s C0 %.3g > eps %g" % (name, d, eps))
                worst["compat"] = max(worst["compat"], r)
                worst["normal"] = max(worst["normal"], nd)
        c.note("compat %.1e, normal %.1e, min sigma %.3g" % (worst["compat"], worst["normal"], worst["sigma"]))
    c.verdict()


def test_criterion_4_good_coordinate_system():
    with Criterion(4, "three-chart good coordinate system and its zero set", 60) as c:
        gcs = build_gcs(fx.three_chart_structure())
        rep = check_gcs(gcs)
        c.check(rep.passed, rep.summary())
        names = {ch.name for ch in rep.checks}
        for cond in ("Joyce", "plusalpha", "plusalpha2", "proper"):
            c.check(cond in names, "%s not checked" % cond)
        small = shrink(gcs, fx.three_chart_shrink_schedule())
        c.check(check_gcs(small).passed, "shrunk system fails")
        axis = np.linspace(-3, 3, 601)
        # route 1: zeros of the unperturbed sections on the shrunk charts
        on_axis = np.zeros(len(axis), dtype=bool)
        for p in small.indices:
            ch = small.chart(p)
            pts = np.zeros((len(axis), ch.dim))
            pts[:, 0] = axis
            inside = ch.region.mask(pts)
            if ch.rank:
                inside &= np.max(np.abs(ch.section.eval_array(pts)), axis=1) <= 1e-9
            on_axis |= inside
        c.check(on_axis.all(), "axis points outside every chart zero set: %s" % axis[~on_axis][:3])
        # route 2: the located zero set of a perturbed system on the shrunk charts
        zc = zero_complex(perturb(small, PerturbationPlan(1e-2, 0)), 0.05)
        off = max((float(np.max(np.abs(np.atleast_2d(seg.points)[:, 1:]), initial=0)) for seg in zc.segments),
                  default=0.0)
        c.check(off <= 1e-9, "zero set leaves the axis by %.3g" % off)
        spans = [(float(np.min(np.atleast_2d(seg.points)[:, 0])), float(np.max(np.atleast_2d(seg.points)[:, 0])))
                 for seg in zc.segments]
        covered = np.array([any(a - 1e-9 <= t <= b + 1e-9 for a, b in spans) for t in axis])
        c.check(covered.all(), "axis not covered: %s" % axis[~covered][:3])
        c.check(spans and min(a for a, _ in spans) >= -3 - 1e-9 and max(b for _, b in spans) <= 3 + 1e-9,
                "zero set leaves [-3, 3]")
        c.note("%d checks pass; zero segments %s" % (len(rep.checks), spans))
    c.verdict()


def _random_tagged(rng):
    piece = str(rng.integers(1, 4))
    if piece == "1":
        return piece, (rng.uniform(-3, 3),)
    y = rng.uniform(-3, 3)
    x = rng.uniform(0.0 if piece == "3" else max(-3.0, -y * y), 3)
    return piece, ((x, y) if piece == "2" else (x, y, rng.uniform(-3, 3)))


def test_criterion_5_quotient_topology():
    with Criterion(5, "quotient Hausdorff certificate and chain pseudo-metric", 30) as c:
        diagram = fx.three_subset_diagram()
        qc = QuotientComplex(diagram)
        rep = hausdorff_report(diagram, qc=qc)
        c.check(rep.passed, rep.summary())
        bad = hausdorff_report(fx.doubled_point_diagram(), force=True)
        sep = bad["separation"]
        c.check(not sep.passed, "doubled point not flagged")
        w = sep.witness or {}
        c.check(w.get("distance", 1) <= 1e-6, "witness distance %s" % w.get("distance"))
        rng = np.random.default_rng(20240101)
        pool = [_random_tagged(rng) for _ in range(2000)]
        violations = 0
        for _ in range(10 ** 4):
            tri = [pool[k] for k in rng.choice(len(pool), 3)]
            D = qc.metric_matrix_units(tri)
            ok = np.all(np.diag(D) == 0) and np.array_equal(D, D.T)
            ok = ok and all(D[i, k] <= D[i, j] + D[j, k] for i, j, k in itertools.permutations(range(3)))
            violations += not ok
        c.check(violations == 0, "%d triples violate the axioms" % violations)
        pt = lambda q: "%s:%s" % (q[0], ",".join("%g" % float(v) for v in q[1]))
        c.note("witness at %s, %s, distance %.1e; 10^4 triples exact" % (pt(w["a"]), pt(w["b"]), w["distance"]))
    c.verdict()


def test_criterion_6_gluing_convergence():
    with Criterion(6, "gluing convergence and T-decay on T in [4, 12]", 120) as c:
        problem = logistic_problem()
        Ts = list(range(4, 13))
        rep = t_decay_experiment(problem, ([0.3], [0.3]), Ts)
        mus = [r["mu_fit"] for r in rep.rows]
        c.check(all(m <= 0.5 for m in mus), "mu %s" % mus)
        rf, df = rep.residual_fit, rep.dT_fit
        c.check(rf["slope"] <= -problem.delta and rf["r2"] >= 0.98, "pregluing fit %s" % rf)
        c.check(df["slope"] <= -problem.delta and df["r2"] >= 0.98, "dT fit %s" % df)
        e0 = [r["e0"] for r in rep.rows]
        spread = max(e0) - min(e0)
        c.check(spread <= 1e-12, "e0 spread %.3g" % spread)
        c.note("max mu %.1e, residual slope %.2f (R2 %.4f), dT slope %.2f (R2 %.4f), e0 spread %.1e" % (
            max(mus), rf["slope"], rf["r2"], df["slope"], df["r2"], spread))
    c.verdict()


def test_criterion_7_oracle_and_bijection():
    with Criterion(7, "glue agrees with the BVP oracle; 5x5 grid bijection", 180) as c:
        problem = logistic_problem()
        worst = 0.0
        for T in (4.0, 6.0, 8.0):
            for rho in ((0.15, 0.45), (0.3, 0.3), (0.45, 0.15)):
                st = glue(problem, ([rho[0]], [rho[1]]), T, min_steps=2)
                d = sup_distance(st.core_values(), bvp_oracle(problem, T, rho).core_values())
                worst = max(worst, d)
        c.check(worst <= 1e-6, "oracle distance %.3g" % worst)
        bij = grid_bijection(problem, 4.0, rho_grid())
        c.check(bij.injective, "not injective (ratio %.3g)" % bij.min_ratio)
        c.check(bij.surjective, "not surjective (worst %.3g)" % bij.worst_match)
        c.note("oracle %.1e, bijection match %.1e, separation ratio %.3g" % (worst, bij.worst_match, bij.min_ratio))
    c.verdict()


def test_criterion_8_circle_machinery():
    with Criterion(8, "Seifert quotient D2/Z2 and empty perturbed zero set", 30) as c:
        s1 = fx.seifert_circle()
        q = quotient_structure(s1)
        ch = q.structure.chart("1")
        c.check(q.report.passed, q.report.summary())
        c.check(ch.dim == 2 and ch.group.order == 2, "quotient chart dim %d, group order %d"
                % (ch.dim, ch.group.order))
        drop = s1.structure.virtual_dimension - q.structure.virtual_dimension
        c.check(drop == 1 and q.structure.virtual_dimension == -1, "vdim drop %d" % drop)
        for seed in SEEDS:
            ep = equivariant_perturb(s1, PerturbationPlan(1e-2, seed))
            c.check(ep.empty, "zeros for seed %d" % seed)
        S = s1.chart("1")
        angle = minimal_isotropy_angle(S, [0, 0, 0])
        c.check(abs(angle - 0.5 * S.period) <= 1e-9, "isotropy %.6g of period %g" % (angle, S.period))
        c.note("isotropy %.3g of period %g, vdim %d -> %d" % (angle, S.period, s1.structure.virtual_dimension,
                                                            q.structure.virtual_dimension))
    c.verdict()


if __name__ == "__main__":
    import tempfile
    from pathlib import Path
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                pass
