from fractions import Fraction

import numpy as np
import pytest

from vfckit import fixtures as fx
from vfckit.goodcoords import build_gcs
from vfckit.kuranishi import StronglyContinuousMap
from vfckit.multisection import (IncompatibleCoverError, Multisection, PerturbationPlan, c0_distance,
                                 check_cycle, choose_delta, compatibility_residual, count, equivalence_check,
                                 equivariance_residual, normal_derivative_residual, perturb,
                                 property_report, refine, virtual_chain, zero_complex)
from vfckit.smoothmap import parse_map


@pytest.fixture(scope="module")
def z2_gcs():
    return build_gcs(fx.z2_chart_structure())


@pytest.fixture(scope="module")
def three_chart_gcs():
    return build_gcs(fx.three_chart_structure())


def _two_branch():
    ch = fx.identity_structure().chart("1")
    return Multisection(ch, [parse_map(["x0 - 1/4"], 1), parse_map(["x0 + 1/2"], 1)])


def test_refine_by_one_is_identity():
    ms = _two_branch()
    r = refine(ms, 1)
    assert [b.strings() for b in r.branches] == [b.strings() for b in ms.branches]


def test_refine_repeats_every_branch():
    ms = _two_branch()
    r = refine(ms, 3)
    assert r.n == 6
    got = sorted(tuple(b.strings()) for b in r.branches)
    want = sorted(tuple(b.strings()) for b in ms.branches for _ in range(3))
    assert got == want


def test_refine_rejects_zero():
    with pytest.raises(ValueError):
        refine(_two_branch(), 0)


def test_refinement_is_equivalent():
    ms = _two_branch()
    assert equivalence_check(ms, refine(ms, 3))
    assert equivalence_check(ms, refine(ms, 5))


def test_branch_order_does_not_matter():
    ms = _two_branch()
    assert equivalence_check(ms, Multisection(ms.chart, ms.branches[::-1]))


def test_offset_branch_is_detected():
    ms = _two_branch()
    moved = Multisection(ms.chart, [ms.branches[0], parse_map(["x0 + 1/2 + 1/1000"], 1)])
    ok, wit = equivalence_check(ms, moved, with_witness=True)
    assert not ok and wit is not None


def test_offset_transcendental_branch_is_detected():
    ch = fx.identity_structure().chart("1")
    a = Multisection(ch, [parse_map(["sin(x0)"], 1)])
    b = Multisection(ch, [parse_map(["sin(x0) + 1/1000"], 1)])
    assert equivalence_check(a, refine(a, 2))
    assert not equivalence_check(a, b)


def test_different_charts_are_incompatible():
    a = _two_branch()
    other = fx.square_structure().chart("1").with_region(a.chart.region, name="other")
    with pytest.raises(IncompatibleCoverError):
        equivalence_check(a, Multisection(other, a.branches))


def test_transversal_section_keeps_one_branch():
    g = build_gcs(fx.identity_structure())
    s = perturb(g, PerturbationPlan(1e-2, 4))
    assert s[1].n == 1
    assert c0_distance(s) <= 1e-2


def test_z2_perturbation_is_a_symmetric_pair(z2_gcs):
    eps = 1e-2
    s = perturb(z2_gcs, PerturbationPlan(eps, 7))
    ms = s[1]
    assert ms.n == 2
    X = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    V = ms.values(X)
    # branches are x - c and x + c for one constant vector c
    c = V[:, 0, :] - X
    assert np.allclose(c, c[0], atol=1e-14)
    assert np.allclose(V[:, 1, :] - X, -c[0], atol=1e-14)
    assert np.linalg.norm(c[0]) <= eps
    assert equivariance_residual(ms) <= 1e-12


def test_z2_zero_set_and_weights(z2_gcs):
    s = perturb(z2_gcs, PerturbationPlan(1e-2, 7))
    zc = zero_complex(s, 0.05)
    assert len(zc.points) == 2
    a, b = (np.array(p.point) for p in zc.points)
    assert np.allclose(a, -b, atol=1e-12)
    assert [p.weight for p in zc.points] == [Fraction(1, 4)] * 2
    assert zc.certificate.passed


def test_z2_count_to_a_point_is_one_half(z2_gcs):
    vc, _, _ = count(z2_gcs, PerturbationPlan(1e-2, 7))
    assert vc.total_weight == Fraction(1, 2)


def test_two_chart_compatibility_on_thousand_points():
    g = build_gcs(fx.two_chart_z2_structure())
    s = perturb(g, PerturbationPlan(1e-2, 3))
    worst, _ = compatibility_residual(s, budget=1000)
    assert worst <= 1e-9
    rep = property_report(s)
    assert rep.passed, rep.summary()


def test_property_report_on_three_charts(three_chart_gcs):
    s = perturb(three_chart_gcs, PerturbationPlan(1e-2, 1))
    rep = property_report(s)
    assert rep.passed, rep.summary()
    assert normal_derivative_residual(s)[0] <= 1e-8


def test_three_chart_zero_set_is_the_axis(three_chart_gcs):
    s = perturb(three_chart_gcs, PerturbationPlan(1e-2, 1))
    zc = zero_complex(s, 0.05)
    assert zc.dimension == 1 and not zc.points
    assert len(zc.segments) == 1
    seg = zc.segments[0]
    assert seg.chart == 1
    assert seg.points[0][0] == pytest.approx(-3) and seg.points[-1][0] == pytest.approx(3)
    vc = virtual_chain(zc, fx.point_map(three_chart_gcs.as_structure()), s)
    assert check_cycle(vc).passed


@pytest.mark.parametrize("seed", [4, 5])
def test_square_zeros_cancel(seed):
    g = build_gcs(fx.square_structure())
    vc, _, zc = count(g, PerturbationPlan(1e-2, seed), delta=0.5)
    assert sorted(p.sign for p in zc.points) == [-1, 1]
    xs = sorted(p.point[0] for p in zc.points)
    assert xs[0] == pytest.approx(-xs[1], abs=1e-12)
    assert vc.total_weight == 0


def test_square_count_is_zero_for_every_seed():
    g = build_gcs(fx.square_structure())
    for eps in (1e-1, 1e-2, 1e-3):
        for seed in range(5):
            assert count(g, PerturbationPlan(eps, seed), delta=0.5)[0].total_weight == 0


def test_nonzero_constant_has_empty_complex():
    g = build_gcs(fx.constant_structure())
    vc, _, zc = count(g, PerturbationPlan(1e-2, 0))
    assert zc.empty
    assert vc.total_weight == 0 and not vc.entries


def test_counts_do_not_depend_on_choices():
    want = {"z2-chart": Fraction(1, 2), "identity": Fraction(1), "square": Fraction(0),
            "constant": Fraction(0), "two-chart-z2": Fraction(1, 2)}
    for name, total in want.items():
        g = build_gcs(fx.STRUCTURES[name]())
        for eps in (1e-1, 1e-2, 1e-3):
            for seed in range(10):
                vc, _, _ = count(g, PerturbationPlan(eps, seed))
                assert vc.total_weight == total, (name, eps, seed)


def test_chain_images_follow_the_map(z2_gcs):
    s = perturb(z2_gcs, PerturbationPlan(1e-2, 7))
    zc = zero_complex(s, 0.05)
    f = StronglyContinuousMap({"1": parse_map(["x0 + x1"], 2)})
    vc = virtual_chain(zc, f, s)
    for e in vc.entries:
        assert e.image[0] == pytest.approx(e.point[0] + e.point[1])


def test_nonpositive_eps_rejected():
    with pytest.raises(ValueError):
        PerturbationPlan(0.0)


def test_multisection_json_round_trip(z2_gcs):
    ms = perturb(z2_gcs, PerturbationPlan(1e-2, 7))[1]
    back = Multisection.from_json(ms.to_json(), ms.chart)
    assert equivalence_check(ms, back)


def test_restriction_radius_grows_past_large_perturbations(z2_gcs):
    # eps = 0.1 moves the zeros to about 0.049, next to the 0.05 frontier
    s = perturb(z2_gcs, PerturbationPlan(1e-1, 4))
    assert choose_delta(s) == 0.1
    zc = zero_complex(s, certify=False)
    assert zc.delta == 0.1 and zc.closure.passed
    assert not zero_complex(s, 0.05, certify=False).closure.passed


def test_restriction_radius_stays_small_for_small_eps(z2_gcs):
    assert choose_delta(perturb(z2_gcs, PerturbationPlan(1e-3, 4))) == 0.05
