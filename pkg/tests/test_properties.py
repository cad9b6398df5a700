import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from vfckit import fixtures as fx
from vfckit.gluing import WeightedNorm, initial_state, logistic_problem, step
from vfckit.goodcoords import build_gcs, shrink
from vfckit.multisection import (Multisection, PerturbationPlan, c0_distance, compatibility_residual, count,
                                 equivalence_check, perturb, refine)
from vfckit.quotient import QuotientComplex
from vfckit.s1 import equivariant_perturb, invariance_residual
from vfckit.smoothmap import (SmoothMap, apply_fn, compose, const, eval_map, identity_map, mul, parse_map,
                              power, sample_grid, var)

SLOW = settings(max_examples=5, deadline=None, suppress_health_check=[HealthCheck.too_slow])
MEDIUM = settings(max_examples=25, deadline=None)

small_q = st.fractions(min_value=-2, max_value=2, max_denominator=8)


# ---------------------------------------------------------------------------
# expressions

def _leaf():
    return st.one_of(st.integers(0, 1).map(var), small_q.map(const))


def _tree(children):
    return st.one_of(
        st.tuples(children, children).map(lambda t: t[0] + t[1]),
        st.tuples(children, children).map(lambda t: mul(*t)),
        st.tuples(children, st.integers(0, 3)).map(lambda t: power(*t)),
        st.tuples(st.sampled_from(["sin", "cos", "tanh"]), children).map(lambda t: apply_fn(*t)),
    )


exprs = st.recursive(_leaf(), _tree, max_leaves=6)


@st.composite
def rooted(draw, kind):
    a, b = draw(exprs), draw(exprs)
    if kind == "var":
        return var(draw(st.integers(0, 1)))
    if kind == "const":
        return const(draw(small_q))
    if kind == "add":
        return a + b
    if kind == "mul":
        return mul(a, b)
    if kind == "pow":
        return power(a, draw(st.integers(0, 4)))
    # keep exp arguments bounded so differences stay well conditioned
    return apply_fn(kind, apply_fn("tanh", a) if kind == "exp" else a)


points = st.tuples(st.floats(-1, 1), st.floats(-1, 1)).map(np.array)


@pytest.mark.parametrize("kind", ["var", "const", "add", "mul", "pow", "sin", "cos", "exp", "tanh"])
@settings(max_examples=100, deadline=None)
@given(data=st.data())
def test_jacobian_matches_central_differences(kind, data):
    f = SmoothMap(2, [data.draw(rooted(kind))])
    x = data.draw(points)
    J = f.jacobian_array(x[None, :])[0]
    h = 1e-5
    fd = np.column_stack([(f.eval_array((x + h * e)[None, :])[0] - f.eval_array((x - h * e)[None, :])[0]) / (2 * h)
                          for e in np.eye(2)])
    assert np.max(np.abs(J - fd)) <= 1e-6 * max(1.0, np.max(np.abs(J)))


poly = st.recursive(_leaf(), lambda c: st.one_of(st.tuples(c, c).map(lambda t: t[0] + t[1]),
                                                 st.tuples(c, c).map(lambda t: mul(*t))), max_leaves=4)
poly_maps = st.tuples(poly, poly).map(lambda t: SmoothMap(2, list(t)))
rational_points = st.tuples(small_q, small_q)


@settings(max_examples=100, deadline=None)
@given(poly_maps, poly_maps, poly_maps, rational_points)
def test_compose_is_associative_and_unital(f, g, h, x):
    left = compose(compose(f, g), h)
    right = compose(f, compose(g, h))
    assert eval_map(left, x) == eval_map(right, x)
    assert eval_map(compose(identity_map(2), f), x) == eval_map(f, x)
    assert eval_map(compose(f, identity_map(2)), x) == eval_map(f, x)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.sampled_from(["square", "three-chart", "z2-chart"]))
def test_sample_grid_is_deterministic(res, name):
    for ch in fx.STRUCTURES[name]().charts.values():
        assert np.array_equal(sample_grid(ch.region, res), sample_grid(ch.region, res))


# ---------------------------------------------------------------------------
# chain pseudo-metric

@pytest.fixture(scope="module")
def three_subset_qc():
    return QuotientComplex(fx.three_subset_diagram())


@st.composite
def tagged(draw):
    piece = draw(st.sampled_from(["1", "2", "3"]))
    c = st.floats(-3, 3, allow_nan=False)
    if piece == "1":
        return piece, (draw(c),)
    y = draw(c)
    lo = 0.0 if piece == "3" else max(-3.0, -y * y)
    x = draw(st.floats(lo, 3))
    return piece, (x, y) if piece == "2" else (x, y, draw(c))


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(tagged(), tagged(), tagged())
def test_chain_metric_is_a_pseudo_metric(three_subset_qc, a, b, c):
    qc = three_subset_qc
    assert qc.metric_units(a, a) == 0
    assert qc.metric_units(a, b) == qc.metric_units(b, a)
    D = qc.metric_matrix_units([a, b, c])
    assert np.all(np.diag(D) == 0) and np.array_equal(D, D.T)
    for i, j, k in itertools.permutations(range(3)):
        assert D[i, k] <= D[i, j] + D[j, k]


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(tagged(), tagged())
def test_zero_distance_means_equivalent(three_subset_qc, a, b):
    qc = three_subset_qc
    assert (qc.metric_units(a, b) == 0) == qc.equivalent(a, b)


# ---------------------------------------------------------------------------
# good coordinate systems and multisections

@pytest.fixture(scope="module")
def three_chart():
    return build_gcs(fx.three_chart_structure())


@SLOW
@given(st.fractions(0, Fraction(1, 4), max_denominator=16), st.fractions(0, Fraction(1, 4), max_denominator=16))
def test_shrinks_add_up(three_chart, a, b):
    twice = shrink(shrink(three_chart, a), b)
    once = shrink(three_chart, a + b)
    for p in three_chart.indices:
        X = sample_grid(three_chart.chart(p).region, 7)
        assert np.array_equal(twice.chart(p).region.mask(X), once.chart(p).region.mask(X))


@MEDIUM
@given(st.lists(st.tuples(small_q, small_q), min_size=1, max_size=3), st.integers(1, 5), st.randoms())
def test_refinement_is_equivalent(offsets, k, rnd):
    ch = fx.z2_chart_structure().chart("1")
    ms = Multisection(ch, [parse_map(["x0 + %s" % a, "x1 + %s" % b], 2) for a, b in offsets])
    r = refine(ms, k)
    shuffled = list(r.branches)
    rnd.shuffle(shuffled)
    assert equivalence_check(ms, Multisection(ch, shuffled))


@pytest.fixture(scope="module")
def z2_gcs():
    return build_gcs(fx.z2_chart_structure())


@MEDIUM
@given(st.integers(0, 2 ** 31), st.sampled_from([1e-1, 1e-2, 1e-3]))
def test_z2_count_does_not_depend_on_choices(z2_gcs, seed, eps):
    vc, _, _ = count(z2_gcs, PerturbationPlan(eps, seed))
    assert vc.total_weight == Fraction(1, 2)


@pytest.fixture(scope="module")
def two_chart_gcs():
    return build_gcs(fx.two_chart_z2_structure())


@SLOW
@given(st.integers(0, 2 ** 31), st.sampled_from([1e-1, 1e-2, 1e-3]))
def test_perturbation_is_compatible_and_close(two_chart_gcs, seed, eps):
    s = perturb(two_chart_gcs, PerturbationPlan(eps, seed))
    assert compatibility_residual(s, budget=1000)[0] <= 1e-9
    assert c0_distance(s) <= eps


# ---------------------------------------------------------------------------
# circle actions

@SLOW
@given(st.integers(0, 2 ** 31))
def test_pulled_back_branches_are_invariant(seed):
    ep = equivariant_perturb(fx.sheared_circle(), PerturbationPlan(1e-2, seed))
    for p, ms in ep.pulled.items():
        assert invariance_residual(ms, ep.quotient.slices[ep.gcs.origin[p]].chart) <= 1e-9


# ---------------------------------------------------------------------------
# gluing

@settings(max_examples=10, deadline=None)
@given(st.floats(1.5, 3.0), st.floats(0.1, 0.4), st.floats(0.1, 0.4))
def test_alternating_method_contracts(T, r1, r2):
    st_ = initial_state(logistic_problem(), ([r1], [r2]), T)
    while st_.kappa < 4 and st_.history[-1] > 1e-280:
        step(st_)
    h = st_.history
    assume(len(h) > 2)
    assert st_.mu < 1
    for k in range(1, len(h)):
        assert h[k] <= h[1] * st_.mu ** (k - 1) * 1.1


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0, 12.0), st.floats(0.01, 0.5), st.lists(st.floats(-100, 100), min_size=1, max_size=20))
def test_weights_are_at_least_one(T, delta, xs):
    g = WeightedNorm(T, delta, 3).weight(np.array(xs))
    assert np.all(g >= 1)
    assert np.all(g <= np.exp(5 * T * delta) * (1 + 1e-12))
