import json

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from vfckit.gluing import (GluedMesh, GluingDivergence, ModelProblem, PROBLEMS, WeightedNorm, bvp_oracle,
                           cut_left, cut_right, fit_log, glue, initial_state, interval_residual,
                           linear_problem, logistic_problem, parameter_derivatives, preglue,
                           rest_manifold_problem, restricted_norms, solve_half_line, step, sup_distance,
                           t_decay_experiment)
from vfckit.smoothmap import parse_map

RHO = ([0.3], [0.3])


def _run(problem, T, steps=6, rho=RHO):
    st = initial_state(problem, rho, T)
    while st.kappa < steps and st.history[-1] > 1e-280:
        step(st)
    return st


def test_cutoffs_are_complementary_bumps():
    x = np.linspace(-3, 3, 61)
    left, right = cut_left(x, 0.0), cut_right(x, 0.0)
    assert np.all(left[x <= -1] == 1) and np.all(left[x >= 1] == 0)
    assert np.all(right[x >= 1] == 1) and np.all(right[x <= -1] == 0)
    assert np.all(np.diff(left) <= 0)


def test_weights_peak_at_the_neck_center():
    T, delta = 4.0, 0.1
    w = WeightedNorm(T, delta, 3)
    x = np.linspace(-5 * T - 2, 5 * T + 2, 401)
    g = w.weight(x)
    assert np.all(g >= 1)
    assert g.max() == pytest.approx(np.exp(5 * T * delta))
    assert w.weight(np.array([0.0]))[0] == pytest.approx(np.exp(5 * T * delta))
    assert np.all(g[np.abs(x) >= 5 * T] == 1)


def test_linear_half_line_is_the_exponential():
    h = solve_half_line(linear_problem(), [0.3], 1)
    exact = 0.3 * np.exp(-(h.s + 2))
    assert np.max(np.abs(h.U[:, 0] - exact)) <= 1e-5
    assert h.residual <= 1e-10


def test_logistic_half_line_decays_at_rate_one():
    h = solve_half_line(logistic_problem(), [0.3], 1)
    assert h.residual <= 1e-10
    assert h.decay_slope == pytest.approx(-1.0, rel=0.02)
    assert h.decay_slope <= -0.9 * logistic_problem().decay_rate


def test_rest_manifold_datum_matches_ode_limit():
    # x' = y^2, y' = -y from (x0, y0): x tends to x0 + y0^2 / 2
    problem = rest_manifold_problem()
    h = solve_half_line(problem, [0.28, 0.3], 1)
    sol = solve_ivp(lambda t, u: [u[1] ** 2, -u[1]], (0, 60), [0.28, 0.3], rtol=1e-12, atol=1e-14)
    assert sol.y[0, -1] == pytest.approx(0.325, abs=1e-10)
    assert h.asymptotic[0] == pytest.approx(sol.y[0, -1], abs=1e-5)
    assert abs(h.asymptotic[1]) < 1e-12


def test_rest_manifold_evaluation_has_full_rank():
    problem = rest_manifold_problem()
    base = solve_half_line(problem, [0.28, 0.3], 1).asymptotic[0]
    e = 1e-5
    J = [(solve_half_line(problem, r, 1).asymptotic[0] - base) / e for r in ([0.28 + e, 0.3], [0.28, 0.3 + e])]
    assert J[0] == pytest.approx(1.0, abs=1e-3)
    assert J[1] == pytest.approx(0.3, abs=1e-3)


def test_pregluing_at_large_T_is_concatenation():
    problem = logistic_problem()
    mesh = GluedMesh(problem, 20.0)
    h1 = solve_half_line(problem, [0.3], 1, mesh=mesh)
    h2 = solve_half_line(problem, [0.3], 2, mesh=mesh)
    U = preglue(h1, h2, mesh)
    x = mesh.x
    left, right = x < -mesh.T - 1, x > mesh.T + 1
    assert np.array_equal(U[left], h1.on_glued()[left])
    assert np.array_equal(U[right], h2.on_glued()[right])
    assert np.max(np.abs(U[~left & ~right])) < 1e-14


def test_pregluing_residual_decays_and_obstruction_is_fixed():
    problem = logistic_problem()
    Ts = [4, 6, 8, 10, 12]
    states = [initial_state(problem, RHO, T) for T in Ts]
    fit = fit_log(Ts, [s.history[0] for s in states])
    assert fit["slope"] <= -problem.delta and fit["r2"] >= 0.98
    e6 = states[1].coeff_history[0]
    e10 = states[3].coeff_history[0]
    assert np.max(np.abs(e6 - e10)) <= 1e-12


def test_one_step_solves_the_unobstructed_linear_problem():
    problem = linear_problem(obstructed=False)
    for T in (2.0, 3.0):
        st = initial_state(problem, RHO, T)
        assert st.history[0] > 1e-8
        step(st)
        assert st.history[1] <= 1e-12


def test_errors_contract_geometrically():
    st = _run(logistic_problem(), 1.5, steps=4)
    h = st.history
    assert st.mu <= 0.5
    for k in range(1, len(h)):
        assert h[k] <= h[1] * st.mu ** (k - 1) * 1.1


def test_obstruction_updates_shrink_with_the_error():
    st = _run(logistic_problem(), 1.5, steps=4)
    c = np.array([v[0] for v in st.coeff_history])
    jumps = np.abs(np.diff(c))
    assert jumps[0] > 0
    # each update is the projection of the error left after that step
    for k, j in enumerate(jumps):
        assert j <= 10 * st.history[k + 1]
    assert jumps[1] <= jumps[0] * 1e-3


def test_residual_splits_into_obstruction_and_small_error():
    st = _run(logistic_problem(), 1.5, steps=4)
    R = interval_residual(st.problem.field, st.mesh.x, st.U)
    assert np.max(np.abs(R - st.residual)) <= 1e-14
    assert st.error_norm() <= 1e-10
    assert np.max(np.abs(st.residual - st.obstruction_profile())) <= 1e-10


def test_glue_converges_quickly_at_T8():
    st = glue(logistic_problem(), RHO, 8, tol=1e-10, min_steps=2)
    assert st.kappa <= 25
    assert st.history[-1] <= 1e-10


def test_glue_reports_unreachable_tolerance():
    with pytest.raises(GluingDivergence) as err:
        glue(logistic_problem(), RHO, 1.5, tol=0.0, max_steps=3)
    assert len(err.value.history) >= 1


def test_T_derivative_matches_finite_difference():
    problem = logistic_problem()
    T, h = 1.5, 1e-4
    st = _run(problem, T)
    dT, _, _ = parameter_derivatives(st)
    m = st.mesh
    mask = m.ext1 | m.ext2
    fd = (_run(problem, T + h).U[mask] - _run(problem, T - h).U[mask]) / (2 * h)
    assert np.max(np.abs(fd - dT[mask])) <= 1e-4 * np.max(np.abs(dT[mask]))
    assert np.max(np.abs(dT[mask])) > 1e-8


def test_rho_derivative_matches_finite_difference():
    problem = logistic_problem()
    st = _run(problem, 1.5)
    _, _, drho = parameter_derivatives(st)
    e = 1e-6
    up = _run(problem, 1.5, rho=([0.3 + e], [0.3]))
    dn = _run(problem, 1.5, rho=([0.3 - e], [0.3]))
    mask = st.mesh.ext1 | st.mesh.ext2
    assert np.max(np.abs((up.U[mask] - dn.U[mask]) / (2 * e) - drho[0][mask])) <= 1e-6


def test_decay_experiment_on_logistic():
    rep = t_decay_experiment(logistic_problem(), RHO, [4, 6, 8, 10, 12])
    assert rep.dT_fit["slope"] <= -0.1 and rep.dT_fit["r2"] >= 0.98
    assert rep.residual_fit["slope"] <= -0.1 and rep.residual_fit["r2"] >= 0.98
    # the rho-derivative stays bounded
    assert rep.drho_fit["slope"] >= -1e-6
    assert not rep.flagged
    header = rep.csv().splitlines()[0].split(",")
    assert header[:4] == ["T", "residual0", "mu_fit", "dT_norm"]


def test_linear_T_derivative_rate():
    # the neck has length 10T, so e^{-lambda * 10T} gives slope -10 lambda
    rep = t_decay_experiment(linear_problem(), RHO, [4, 5, 6, 7, 8])
    assert rep.dT_fit["slope"] == pytest.approx(-10.0, rel=0.02)


def test_oracle_agrees_with_glue():
    problem = logistic_problem()
    for T in (4.0, 8.0):
        st = glue(problem, RHO, T, min_steps=2)
        orc = bvp_oracle(problem, T, (0.3, 0.3))
        assert sup_distance(st.core_values(), orc.core_values()) <= 1e-6
        assert orc.interior_slope <= -0.9 * problem.decay_rate


def test_restricted_norm_sees_both_cores():
    st = _run(logistic_problem(), 4.0, steps=1)
    ones = np.ones_like(st.U)
    assert restricted_norms(st, ones) > 0


def test_problem_json_round_trip():
    for name, make in PROBLEMS.items():
        p = make()
        back = ModelProblem.from_json(json.loads(json.dumps(p.to_json())))
        assert back.to_json() == p.to_json(), name


def test_non_hyperbolic_rest_point_is_rejected():
    with pytest.raises(ValueError):
        ModelProblem(parse_map(["x0^2"], 1), [0.0])
