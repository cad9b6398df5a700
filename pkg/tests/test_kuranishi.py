import numpy as np
import pytest

from vfckit import fixtures as fx
from vfckit.kuranishi import (CocycleError, CoordinateChange, FiniteGroupAction, GroupTableError,
                              KuranishiChart, KuranishiStructure, MatrixField, StronglyContinuousMap,
                              check_cocycle, check_tangent_condition, identity_change, validate_chart,
                              validate_coordinate_change, validate_orbifold_embedding, validate_structure)
from vfckit.smoothmap import Region, SmoothMap, parse_map

Z2 = [[0, 1], [1, 0]]


def _empty(n):
    return SmoothMap(n, [])


def _interval_chart(name, group=None):
    g = group or FiniteGroupAction.trivial(1, 0)
    return KuranishiChart(name, Region([-1], [1]), 0, g, _empty(1))


def _no_fiber(n):
    return MatrixField(0, 0, _empty(n))


def test_z2_identity_chart_passes():
    rep = validate_chart(fx.z2_chart_structure().chart("1"))
    assert rep.passed, rep.summary()


def test_parity_mismatch_fails_equivariance():
    g = FiniteGroupAction(Z2, [[[1]], [[-1]]], [[[1]], [[1]]])
    ch = KuranishiChart("odd", Region([-1], [1]), 1, g, parse_map(["x0"], 1))
    rep = validate_chart(ch)
    assert not rep["equivariance"].passed
    assert rep["equivariance"].residual == pytest.approx(2.0)


def test_half_space_chart_passes():
    rep = validate_chart(fx.three_chart_structure().chart("3"), virtual_dimension=1)
    assert rep.passed, rep.summary()


def test_bad_group_table_raises():
    g = FiniteGroupAction([[0, 1], [0, 1]], [np.eye(1)] * 2, [np.eye(1)] * 2)
    ch = KuranishiChart("bad", Region([-1], [1]), 1, g, parse_map(["x0"], 1))
    with pytest.raises(GroupTableError):
        validate_chart(ch)


def test_non_orthogonal_action_raises():
    g = FiniteGroupAction(Z2, [[[1]], [[2]]], [[[1]], [[1]]])
    ch = KuranishiChart("bad", Region([-1], [1]), 1, g, parse_map(["x0"], 1))
    with pytest.raises(ValueError):
        validate_chart(ch)


def test_axis_into_plane_change_passes():
    st = fx.three_chart_structure()
    rep = validate_coordinate_change(st.change("2", "1"), st.charts)
    assert rep.passed, rep.summary()


def test_identity_change_passes():
    st = fx.z2_chart_structure()
    ch = st.chart("1")
    rep = validate_coordinate_change(identity_change(ch), st.charts)
    assert rep.passed, rep.summary()


def test_offset_bundle_map_fails_item_four():
    st = fx.three_chart_structure()
    cc = st.change("3", "2")
    bad = CoordinateChange("2", "3", cc.domain, parse_map(["x0", "x1", "1/2"], 2), cc.phi_hat, [0])
    rep = validate_coordinate_change(bad, st.charts)
    c = rep["(4) bundle embedding intertwines sections"]
    assert not c.passed
    assert c.residual == pytest.approx(0.5)


def test_domain_outside_source_raises():
    st = fx.three_chart_structure()
    cc = st.change("2", "1")
    bad = CoordinateChange("1", "2", Region([-5], [5]), cc.phi, cc.phi_hat, [0])
    with pytest.raises(ValueError):
        validate_coordinate_change(bad, st.charts)


def test_nested_inclusions_have_trivial_cocycle():
    got = check_cocycle(fx.three_chart_structure(), ("3", "2", "1"))
    assert [g["gamma"] for g in got] == [0]


def _antipodal_triple(twist="-x0"):
    g3 = FiniteGroupAction(Z2, [[[1]], [[-1]]], [np.zeros((0, 0))] * 2)
    c1, c2, c3 = _interval_chart("1"), _interval_chart("2"), _interval_chart("3", g3)
    half = Region([-0.5], [0.5])
    ch = [CoordinateChange("1", "2", half, parse_map(["x0"], 1), _no_fiber(1), [0]),
          CoordinateChange("2", "3", Region([-1], [1]), parse_map(["x0"], 1), _no_fiber(1), [0]),
          CoordinateChange("1", "3", half, parse_map([twist], 1), _no_fiber(1), [0])]
    return KuranishiStructure([c1, c2, c3], ch, 1)


def test_antipodal_cocycle_found_by_search():
    got = check_cocycle(_antipodal_triple(), ("3", "2", "1"))
    assert [g["gamma"] for g in got] == [1]


def test_translated_change_breaks_cocycle():
    with pytest.raises(CocycleError) as err:
        check_cocycle(_antipodal_triple("x0 + 1/2"), ("3", "2", "1"))
    assert err.value.residual == pytest.approx(0.5, abs=1e-9) or err.value.residual >= 0.5


def test_tangent_condition_on_half_space():
    rep = check_tangent_condition(fx.three_chart_structure(), ("3", "2"))
    assert rep.passed, rep.summary()


def test_tangent_condition_equal_dimension_is_vacuous():
    st = fx.z2_chart_structure()
    ch = st.chart("1")
    st2 = KuranishiStructure([ch, ch.with_region(ch.region, name="2")],
                             [CoordinateChange("1", "2", ch.region, parse_map(["x0", "x1"], 2),
                                               MatrixField.constant(np.eye(2), 2), [0, 1])], 0)
    rep = check_tangent_condition(st2, ("2", "1"))
    assert rep.passed


def test_tangent_condition_fails_for_flat_normal_section():
    st = fx.three_chart_structure()
    c3 = st.chart("3")
    flat = KuranishiChart("3", c3.region, 2, c3.group, parse_map(["x1", "0"], 3))
    st2 = KuranishiStructure([st.chart("1"), st.chart("2"), flat], list(st.changes.values()), 1)
    rep = check_tangent_condition(st2, ("3", "2"))
    assert not rep.passed


def test_tangent_condition_dimension_mismatch():
    st = fx.three_chart_structure()
    c3 = st.chart("3")
    wrong = KuranishiChart("3", c3.region, 1, FiniteGroupAction.trivial(3, 1), parse_map(["x1"], 3))
    cc = st.change("3", "2")
    bad = CoordinateChange("2", "3", cc.domain, cc.phi, MatrixField.constant([[1]], 2), [0])
    st2 = KuranishiStructure([st.chart("2"), wrong], [bad], 1)
    with pytest.raises(ValueError):
        check_tangent_condition(st2, ("3", "2"))


def test_all_fixture_structures_validate():
    for name, make in fx.STRUCTURES.items():
        rep = validate_structure(make())
        assert rep.passed, (name, rep.summary())


def test_virtual_dimension_mismatch_is_reported():
    st = fx.three_chart_structure()
    c1 = st.chart("1")
    wrong = KuranishiChart("1", c1.region, 1, FiniteGroupAction.trivial(1, 1), parse_map(["x0"], 1))
    rep = validate_structure(KuranishiStructure([wrong, st.chart("2")], [], 1))
    assert not rep["constant virtual dimension"].passed


def _z2_plane():
    g = FiniteGroupAction(Z2, [np.eye(2), -np.eye(2)], [np.zeros((0, 0))] * 2)
    return KuranishiChart("P", Region([-1, -1], [1, 1]), 0, g, _empty(2))


def _z2_line():
    g = FiniteGroupAction(Z2, [[[1]], [[-1]]], [np.zeros((0, 0))] * 2)
    return KuranishiChart("L", Region([-1], [1]), 0, g, _empty(1))


def test_identity_orbifold_embedding():
    P = _z2_plane()
    rep = validate_orbifold_embedding([(0, 0, parse_map(["x0", "x1"], 2), [0, 1])], [P], [P])
    assert rep.passed, rep.summary()


def test_point_into_cone_point_is_not_an_embedding():
    pt = KuranishiChart("pt", Region([], []), 0, FiniteGroupAction.trivial(0, 0), _empty(0))
    rep = validate_orbifold_embedding([(0, 0, parse_map(["0", "0"], 0), [0])], [pt], [_z2_plane()])
    assert not rep["(4) isotropy isomorphism"].passed


def test_linear_equivariant_inclusion_is_an_embedding():
    rep = validate_orbifold_embedding([(0, 0, parse_map(["x0", "0"], 1), [0, 1])], [_z2_line()], [_z2_plane()])
    assert rep.passed, rep.summary()


def test_strongly_continuous_map_checks_compatibility():
    st = fx.three_chart_structure()
    good = StronglyContinuousMap({"1": parse_map(["x0"], 1), "2": parse_map(["x0"], 2),
                                  "3": parse_map(["x0"], 3)})
    assert good.validate(st).passed
    bad = StronglyContinuousMap({"1": parse_map(["x0"], 1), "2": parse_map(["x0 + x1"], 2),
                                 "3": parse_map(["x0 + 1"], 3)})
    assert not bad.validate(st).passed
