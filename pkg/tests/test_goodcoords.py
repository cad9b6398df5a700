from fractions import Fraction

import numpy as np
import pytest

from vfckit import fixtures as fx
from vfckit.goodcoords import (CoveringLostError, GCSBuildError, GoodCoordinateSystem, build_gcs,
                               build_pure_neighborhood, check_gcs, check_proper, compatibility_report,
                               shrink)
from vfckit.kuranishi import (CoordinateChange, FiniteGroupAction, KuranishiChart, KuranishiStructure,
                              MatrixField)
from vfckit.reports import Report
from vfckit.smoothmap import Region, parse_map, sample_grid

C = fx.SHRINK_CONSTANT


@pytest.fixture(scope="module")
def three_chart():
    return build_gcs(fx.three_chart_structure())


@pytest.fixture(scope="module")
def three_chart_shrunk(three_chart):
    return shrink(three_chart, fx.three_chart_shrink_schedule())


def test_poset_follows_dimension(three_chart):
    g = three_chart
    assert g.indices == [1, 2, 3]
    assert [g.chart(p).dim for p in g.indices] == [1, 2, 3]
    assert sorted(g.changes) == [(2, 1), (3, 1), (3, 2)]
    assert compatibility_report(g).passed


def test_shrunk_three_chart_system_passes(three_chart_shrunk):
    rep = check_gcs(three_chart_shrunk)
    assert rep.passed, rep.summary()


def _inside(region, pts):
    return region.mask(np.asarray(pts, dtype=float))


def test_shrunk_regions_match_closed_form(three_chart_shrunk):
    c = float(C)
    g = three_chart_shrunk
    rng = np.random.default_rng(3)
    for p, rule in ((1, lambda v: v[0] < 2 * c),
                    (2, lambda v: v[0] > -v[1] ** 2 + c),
                    (3, lambda v: v[0] > c)):
        pts = rng.uniform(-3, 3, (400, p))
        # stay clear of the boundary, where sampling tolerance decides
        if p == 1:
            pts = pts[np.abs(pts[:, 0] - 2 * c) > 1e-6]
        elif p == 2:
            pts = pts[np.abs(pts[:, 0] + pts[:, 1] ** 2 - c) > 1e-6]
        else:
            pts = pts[np.abs(pts[:, 0] - c) > 1e-6]
        want = np.array([rule(v) for v in pts])
        assert np.array_equal(_inside(g.chart(p).region, pts), want), p


def test_single_chart_system_passes():
    g = build_gcs(fx.identity_structure())
    assert g.indices == [1] and not g.changes
    assert check_gcs(g).passed


def test_zero_margin_is_identity(three_chart):
    g = shrink(three_chart, 0)
    for p in three_chart.indices:
        assert g.chart(p).region == three_chart.chart(p).region
    for key, cc in three_chart.changes.items():
        X = sample_grid(cc.domain.closure(), 9)
        assert np.array_equal(cc.domain.mask(X), g.changes[key].domain.mask(X))


def test_excessive_margin_loses_covering():
    g = build_gcs(fx.square_structure())
    with pytest.raises(CoveringLostError) as err:
        shrink(g, {1: {"box": 1}})
    assert err.value.witness[0] == "1"
    assert abs(err.value.witness[1][0]) < 1e-3


def test_cutting_the_axis_chart_loses_covering(three_chart):
    with pytest.raises(CoveringLostError):
        shrink(three_chart, {1: {"margin": 0, "extra": [("x0", True)]}, 2: 2, 3: 2})


def test_negative_margin_rejected(three_chart):
    with pytest.raises(ValueError):
        shrink(three_chart, -1)


def test_shrink_keeps_intersection_pattern(three_chart):
    rep = Report("shrink")
    shrink(three_chart, {1: {"margin": 0, "extra": [("x0 - 1/2", True)]}, 2: Fraction(1, 4), 3: Fraction(1, 4)},
           report=rep)
    assert rep.passed, rep.summary()


def test_separating_two_footprints_is_reported(three_chart):
    rep = Report("shrink")
    shrink(three_chart, {1: {"margin": 0, "extra": [("x0 - 1/4", True)]}, 2: Fraction(1, 8), 3: Fraction(1, 4)},
           report=rep)
    assert not rep["intersection pattern"].passed
    assert rep["intersection pattern"].witness == [1, 3]


def test_shrinks_add_up_on_footprints(three_chart):
    a, b = Fraction(1, 8), Fraction(1, 16)
    twice = shrink(shrink(three_chart, a), b)
    once = shrink(three_chart, a + b)
    for p in three_chart.indices:
        X = sample_grid(three_chart.chart(p).region, 9)
        assert np.array_equal(twice.chart(p).region.mask(X), once.chart(p).region.mask(X))


def test_enlarged_domain_is_not_proper(three_chart_shrunk):
    s = three_chart_shrunk
    cc = s.changes[(2, 1)]
    big = GoodCoordinateSystem(s.structure, s.charts, s.origin,
                               {**s.changes, (2, 1): cc.with_domain(Region([-3], [3]))})
    rep = check_proper(big, 9)
    w = rep["proper"].witness
    assert not rep.passed
    assert w["pair"] == [2, 1]
    # the sequence stays where the image lands and runs into x = c
    assert w["limit"][0] == pytest.approx(float(C), abs=1e-8)
    seq = np.array(w["sequence"])[:, 0]
    assert np.all(seq > float(C)) and np.all(np.diff(seq) < 0)


def test_json_round_trip(three_chart_shrunk):
    g = GoodCoordinateSystem.from_json(three_chart_shrunk.to_json())
    assert g.indices == three_chart_shrunk.indices
    assert check_gcs(g).passed


def test_z2_two_chart_structure():
    g = build_gcs(fx.two_chart_z2_structure())
    assert g.indices == [1, 2]
    assert len(g.chart(1).group.table) == 2
    assert check_gcs(g).passed


def test_every_fixture_structure_gets_a_system():
    for name, make in fx.STRUCTURES.items():
        g = build_gcs(make())
        assert check_gcs(g).passed, name
        assert compatibility_report(g).passed, name


def _odd_section_pair():
    z2 = FiniteGroupAction([[0, 1], [1, 0]], [[[1]], [[-1]]], [[[1]], [[-1]]])
    s = "x0^3 - 1/4*x0"
    a = KuranishiChart("a", Region([-1], [1]), 1, z2, parse_map([s], 1), base_point=(0,))
    b = KuranishiChart("b", Region([0], [3], [("-x0", True)]), 1, FiniteGroupAction.trivial(1, 1),
                       parse_map([s], 1), base_point=(0.5,))
    cc = CoordinateChange("b", "a", Region([0], [1], [("-x0", True)]), parse_map(["x0"], 1),
                          MatrixField.constant([[1]], 1), [0])
    return KuranishiStructure([a, b], [cc], 0)


def test_pure_neighborhood_of_one_chart_is_the_chart():
    st = fx.square_structure()
    pn = build_pure_neighborhood(st, 1)
    assert pn.charts["1"] is st.chart("1")


def test_orbifold_interval_gluing_is_certified():
    pn = build_pure_neighborhood(_odd_section_pair(), 1)
    assert pn.pieces == ["a", "b"]
    assert pn.certificate["separation"].passed


def test_doubled_point_seed_is_shrunk_apart():
    one = KuranishiChart("a", Region([0], [1]), 1, FiniteGroupAction.trivial(1, 1), parse_map(["x0 - 1/2"], 1))
    two = one.with_region(one.region, name="b")
    cc = CoordinateChange("a", "b", Region([0], [1], [("x0 - 1", True)]), parse_map(["x0"], 1),
                          MatrixField.constant([[1]], 1), [0])
    pn = build_pure_neighborhood(KuranishiStructure([one, two], [cc], 0), 1)
    assert pn.certificate.passed
    assert pn.certificate.meta["shrink_radius"] > 0
    assert not pn.charts["a"].region.contains(np.array([1.0]))


def test_pure_neighborhood_rejects_wrong_dimension():
    with pytest.raises(GCSBuildError) as err:
        build_pure_neighborhood(fx.three_chart_structure(), 1, names=["1", "2"])
    assert err.value.stage == "pure"
