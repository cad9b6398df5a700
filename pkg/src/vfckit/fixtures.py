"""Small worked examples used by the tests, the demos and ``vfc fixture``."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .kuranishi import (CoordinateChange, FiniteGroupAction, KuranishiChart,
                        KuranishiStructure, MatrixField)
from .quotient import Gluing, GluingDiagram, Piece
from .smoothmap import Region, SmoothMap, parse_map

Z2_TABLE = [[0, 1], [1, 0]]
SHRINK_CONSTANT = Fraction(1, 4)


def _empty(arity):
    return SmoothMap(arity, [])


def _phi_hat(rows, cols, arity, matrix=None):
    if rows * cols == 0:
        return MatrixField(rows, cols, _empty(arity))
    return MatrixField.constant(matrix, arity)


# ---------------------------------------------------------------------------
# quotient-space diagrams


def three_subset_diagram(size=3):
    """Compact x-axis, half-plane-like and half-space pieces glued by inclusion."""
    a = size
    k1 = Piece("1", Region([-a], [a]), "R3")
    k2 = Piece("2", Region([-a, -a], [a, a], [("-x1^2 - x0", False)]), "R3")
    k3 = Piece("3", Region([-a, -a, -a], [a, a, a], [("-x0", False)]), "R3")
    g21 = Gluing("2", "1", Region([-a], [a], [("-x0", False)]), parse_map(["x0", "0"], 1))
    g31 = Gluing("3", "1", Region([-a], [a], [("-x0", False)]), parse_map(["x0", "0", "0"], 1))
    g32 = Gluing("3", "2", Region([-a, -a], [a, a], [("-x1^2 - x0", False), ("-x0", False)]),
                 parse_map(["x0", "x1", "0"], 2))
    return GluingDiagram([k1, k2, k3], [("1", "2"), ("2", "3")], [g21, g31, g32])


def doubled_point_diagram():
    """Two unit intervals glued along the half-open [0, 1): 1 is doubled."""
    k1 = Piece("1", Region([0], [1]))
    k2 = Piece("2", Region([0], [1]))
    dom = Region([0], [1], [("x0 - 1", True)])
    return GluingDiagram([k1, k2], [("1", "2")], [Gluing("2", "1", dom, parse_map(["x0"], 1))])


def nested_intervals_diagram():
    """A segment glued into a square along its bottom edge."""
    k1 = Piece("1", Region([0], [2]))
    k2 = Piece("2", Region([0, 0], [2, 2]))
    return GluingDiagram([k1, k2], [("1", "2")],
                         [Gluing("2", "1", Region([0], [2]), parse_map(["x0", "0"], 1))])


def two_intervals_diagram():
    k1 = Piece("1", Region([0], [2]))
    k2 = Piece("2", Region([1], [4]))
    return GluingDiagram([k1, k2], [("1", "2")],
                         [Gluing("2", "1", Region([1], [2]), parse_map(["x0"], 1))])


def single_piece_diagram(dim=2):
    return GluingDiagram([Piece("1", Region([-1] * dim, [1] * dim))], [], [])


# ---------------------------------------------------------------------------
# Kuranishi structures


def three_chart_structure(size=3):
    """x-axis, the plane {x > -y^2} and the half-space {x > 0}; X is the x-axis."""
    a = size
    c1 = KuranishiChart("1", Region([-a], [a]), 0, FiniteGroupAction.trivial(1, 0), _empty(1),
                        base_point=(-2,))
    c2 = KuranishiChart("2", Region([-a, -a], [a, a], [("-x1^2 - x0", True)]), 1,
                        FiniteGroupAction.trivial(2, 1), parse_map(["x1"], 2), base_point=(1, 0))
    c3 = KuranishiChart("3", Region([-a, -a, -a], [a, a, a], [("-x0", True)]), 2,
                        FiniteGroupAction.trivial(3, 2), parse_map(["x1", "x2"], 3), base_point=(2, 0, 0))
    u21 = Region([-a], [a], [("-x0", True)])
    u32 = Region([-a, -a], [a, a], [("-x1^2 - x0", True), ("-x0", True)])
    u31 = Region([-a], [a], [("-x0", True)])
    ch = [CoordinateChange("1", "2", u21, parse_map(["x0", "0"], 1), _phi_hat(1, 0, 1), [0]),
          CoordinateChange("2", "3", u32, parse_map(["x0", "x1", "0"], 2),
                           _phi_hat(2, 1, 2, [[1], [0]]), [0]),
          CoordinateChange("1", "3", u31, parse_map(["x0", "0", "0"], 1), _phi_hat(2, 0, 1), [0])]
    return KuranishiStructure([c1, c2, c3], ch, 1)


def three_chart_shrink_schedule(c=SHRINK_CONSTANT):
    """Per-chart margins: chart 1 is cut at x < 2c, the others tightened by c."""
    return {"1": {"margin": 0, "extra": [("x0 - %s" % (2 * c), True)]},
            "2": {"margin": c}, "3": {"margin": c}}


def z2_group(v_matrices, e_matrices, v_shifts=None):
    return FiniteGroupAction(Z2_TABLE, v_matrices, e_matrices, v_shifts)


def z2_chart_structure(size=1):
    """V = square with the antipodal map, E = R^2 with the sign action, s = id."""
    a = size
    g = z2_group([np.eye(2), -np.eye(2)], [np.eye(2), -np.eye(2)])
    ch = KuranishiChart("1", Region([-a, -a], [a, a]), 2, g, parse_map(["x0", "x1"], 2), base_point=(0, 0))
    return KuranishiStructure([ch], [], 0)


def square_structure():
    """s(x) = x^2 on [-1, 1]; vdim 0, degree zero."""
    ch = KuranishiChart("1", Region([-1], [1]), 1, FiniteGroupAction.trivial(1, 1),
                        parse_map(["x0^2"], 1), base_point=(0,))
    return KuranishiStructure([ch], [], 0)


def identity_structure():
    ch = KuranishiChart("1", Region([-1], [1]), 1, FiniteGroupAction.trivial(1, 1),
                        parse_map(["x0"], 1), base_point=(0,))
    return KuranishiStructure([ch], [], 0)


def constant_structure():
    ch = KuranishiChart("1", Region([-1], [1]), 1, FiniteGroupAction.trivial(1, 1),
                        parse_map(["1"], 1))
    return KuranishiStructure([ch], [], 0)


def two_chart_z2_structure():
    """Interval with x -> -x inside the square with (x, y) -> (-x, y)."""
    g1 = z2_group([[[1]], [[-1]]], [[[1]], [[-1]]])
    g2 = z2_group([np.eye(2), np.diag([-1, 1])], [np.eye(2), np.diag([-1, 1])])
    c1 = KuranishiChart("1", Region([-1], [1]), 1, g1, parse_map(["x0"], 1), base_point=(0,))
    c2 = KuranishiChart("2", Region([-1, -1], [1, 1]), 2, g2, parse_map(["x0", "x1"], 2),
                        base_point=(0, 0))
    cc = CoordinateChange("1", "2", Region([-1], [1]), parse_map(["x0", "0"], 1),
                          _phi_hat(2, 1, 1, [[1], [0]]), [0, 1])
    return KuranishiStructure([c1, c2], [cc], 0)


def seifert_structure(offset=0):
    """S^1 x D^2 (t periodic of period 1) with (t, z) -> (t + 1/2, -z).

    A nonzero ``offset`` in the invariant fiber direction empties the zero set.
    """
    region = Region([0, -1, -1], [1, 1, 1], [("x1^2 + x2^2 - 1", False)], periodic=[0])
    g = z2_group([np.eye(3), np.diag([1, -1, -1])], [np.eye(3), np.diag([-1, -1, 1])],
                 v_shifts=[[0, 0, 0], [0.5, 0, 0]])
    ch = KuranishiChart("1", region, 3, g, parse_map(["x1", "x2", str(Fraction(offset))], 3),
                        base_point=None if offset else (0, 0, 0))
    return KuranishiStructure([ch], [], 0)


def seifert_circle(offset=0):
    """The Seifert chart with the circle turning the angle coordinate."""
    from .s1 import CircleAction, S1Structure
    st = seifert_structure(offset)
    act = CircleAction(np.zeros((3, 3)), np.zeros((3, 3)), periodic_axes=[0], slice_point=(0, 0, 0))
    return S1Structure(st, {"1": act})


def rotation_circle(hole=True):
    """Rotations of the plane on an annulus (or on the full square when ``hole`` is false)."""
    from .s1 import CircleAction, S1Structure
    cons = [("x0^2 + x1^2 - 1", False)]
    if hole:
        cons.append(("1/4 - x0^2 - x1^2", False))
    r = float(np.sqrt(0.5))
    ch = KuranishiChart("1", Region([-1, -1], [1, 1], cons), 1, FiniteGroupAction.trivial(2, 1),
                        parse_map(["x0^2 + x1^2 - 1/2"], 2), base_point=(r, 0) if hole else None)
    act = CircleAction([[0, -1], [1, 0]], [[0]], slice_point=(r, 0))
    return S1Structure(KuranishiStructure([ch], [], 1), {"1": act})


def sheared_circle():
    """Two charts on circle bundles whose change twists the angle by x/8."""
    from .s1 import CircleAction, S1Structure
    c1 = KuranishiChart("1", Region([0, -1], [1, 1], periodic=[0]), 1, FiniteGroupAction.trivial(2, 1),
                        parse_map(["x1"], 2), base_point=(0, 0))
    c2 = KuranishiChart("2", Region([0, -1, -1], [1, 1, 1], periodic=[0]), 2, FiniteGroupAction.trivial(3, 2),
                        parse_map(["x1", "x2"], 3), base_point=(0, 0, 0))
    cc = CoordinateChange("1", "2", Region([0, -1], [1, 1], periodic=[0]),
                          parse_map(["x0 + 1/8*x1", "x1", "0"], 2), _phi_hat(2, 1, 2, [[1], [0]]), [0])
    acts = {"1": CircleAction(np.zeros((2, 2)), [[0]], periodic_axes=[0]),
            "2": CircleAction(np.zeros((3, 3)), np.zeros((2, 2)), periodic_axes=[0])}
    return S1Structure(KuranishiStructure([c1, c2], [cc], 1), acts)


def point_map(structure):
    from .kuranishi import StronglyContinuousMap
    return StronglyContinuousMap.to_point(structure)


STRUCTURES = {
    "three-chart": three_chart_structure,
    "z2-chart": z2_chart_structure,
    "square": square_structure,
    "identity": identity_structure,
    "constant": constant_structure,
    "two-chart-z2": two_chart_z2_structure,
    "seifert": seifert_structure,
}

CIRCLE_STRUCTURES = {
    "seifert": seifert_circle,
    "seifert-empty": lambda: seifert_circle(1),
    "rotation-annulus": rotation_circle,
    "rotation-disk": lambda: rotation_circle(False),
    "sheared": sheared_circle,
}

DIAGRAMS = {
    "three-subset": three_subset_diagram,
    "doubled-point": doubled_point_diagram,
    "nested-intervals": nested_intervals_diagram,
    "two-intervals": two_intervals_diagram,
    "single-piece": single_piece_diagram,
}
