from fractions import Fraction

import numpy as np
import pytest

from vfckit.smoothmap import (ParseError, Region, compose, eval_map, identity_map, jacobian,
                              parse_map, sample_grid)


def test_identity_evaluates_exactly():
    assert eval_map(identity_map(2), [3, -2]) == (3, -2)


def test_projection_section_vanishes_on_axis():
    assert eval_map(parse_map(["x1"], 2), [5, 0]) == (0,)


def test_polynomial_value_is_rational():
    v = eval_map(parse_map(["x0^2 - 1"], 1), [2])
    assert v == (Fraction(3),)
    assert isinstance(v[0], Fraction)


def test_transcendental_falls_back_to_float():
    v = eval_map(parse_map(["exp(x0)"], 1), [1])
    assert isinstance(v[0], float) and abs(v[0] - np.e) < 1e-15


def test_arity_mismatch_raises():
    with pytest.raises(ValueError):
        eval_map(identity_map(2), [1])


def test_jacobian_of_square():
    assert np.array_equal(np.array(jacobian(parse_map(["x0^2"], 1), [3]), dtype=float), [[6]])


def test_jacobian_of_coordinate_projection():
    J = np.array(jacobian(parse_map(["x1", "x2"], 3), [0.1, 0.2, 0.3]), dtype=float)
    assert np.array_equal(J, [[0, 1, 0], [0, 0, 1]])


def test_jacobian_against_central_differences():
    f = parse_map(["x0^3 - 2*x0*x1^2 + sin(x1)", "exp(x0)*tanh(x1) + cos(x0*x1)"], 2)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.uniform(-1, 1, 2)
        J = f.jacobian_array(x[None, :])[0]
        h = 1e-5
        fd = np.column_stack([(f.eval_array((x + h * e)[None, :])[0] - f.eval_array((x - h * e)[None, :])[0])
                              / (2 * h) for e in np.eye(2)])
        assert np.max(np.abs(J - fd)) <= 1e-6 * max(1.0, np.max(np.abs(J)))


def test_compose_with_identity_is_unchanged():
    g = parse_map(["x0*x1", "x0 + 3"], 2)
    h = compose(identity_map(2), g)
    for x in ([1, 2], [Fraction(1, 3), -4]):
        assert eval_map(h, x) == eval_map(g, x)


def test_compose_square_after_shift():
    h = compose(parse_map(["x0^2"], 1), parse_map(["x0 + 1"], 1))
    assert eval_map(h, [1]) == (4,)


def test_compose_arity_mismatch():
    with pytest.raises(ValueError):
        compose(parse_map(["x0"], 1), parse_map(["x0", "x1"], 2))


def test_grid_on_unit_interval():
    assert sample_grid(Region([0], [1]), 3).tolist() == [[0.0], [0.5], [1.0]]


def test_grid_on_disc_drops_corners():
    R = Region([-1, -1], [1, 1], [("x0^2 + x1^2 - 1", False)])
    pts = sample_grid(R, 3)
    assert len(pts) == 5
    assert not any(abs(p[0]) == 1 and abs(p[1]) == 1 for p in pts)


def test_grid_on_empty_region():
    R = Region([0, 0], [1, 1], [("1", False)])
    assert len(sample_grid(R, 3)) == 0


def test_grid_is_deterministic():
    R = Region([-1, 0], [1, 2], [("x0^2 - x1", False)])
    assert np.array_equal(sample_grid(R, 7), sample_grid(R, 7))


def test_division_is_not_in_the_grammar():
    with pytest.raises(ParseError):
        parse_map(["x0/8"], 1)
    assert eval_map(parse_map(["1/8*x0"], 1), [2]) == (Fraction(1, 4),)


def test_open_constraint_excludes_boundary():
    R = Region([-1], [1], [("x0", True)])
    assert R.contains(np.array([-0.5]))
    assert not R.contains(np.array([0.0]))
    assert R.contains(np.array([0.0]), closure=True)
