"""Adaptive Runge-Kutta solver against analytic solutions and scipy."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from opdyn.odeint import (
    SolverConfig,
    StepFailure,
    backward_sweep,
    integrate,
    solve_grid,
)


def _cfg(**kw):
    defaults = dict(rtol=1e-8, atol=1e-10)
    defaults.update(kw)
    return SolverConfig(**defaults)


def test_exponential_decay():
    # [DERIVED] y' = -y, y(0)=1 => y(t) = e^{-t}.
    sol = integrate(lambda t, y: -y, np.array([1.0]), 0.0, 3.0, _cfg())
    for t in (0.5, 1.7, 3.0):
        assert abs(sol(t)[0] - np.exp(-t)) < 1e-7


def test_rotation_period_return():
    # [DERIVED] harmonic rotation returns to the start after one period,
    # within 100x the requested relative tolerance.
    rtol = 1e-8
    cfg = _cfg(rtol=rtol, atol=1e-12)

    def f(t, y):
        return np.array([-y[1], y[0]])

    y0 = np.array([1.0, 0.0])
    sol = integrate(f, y0, 0.0, 2.0 * np.pi, cfg)
    assert np.linalg.norm(sol(2.0 * np.pi) - y0) < 100 * rtol


def test_error_decreases_with_tolerance():
    # [DERIVED] tightening rtol over 3 decades monotonically reduces the
    # end-point error of a stiff-ish nonlinear problem.
    def f(t, y):
        return np.array([np.sin(t) * y[0] - 0.5 * y[0] ** 3])

    ref = solve_ivp(f, (0.0, 4.0), [1.0], rtol=1e-12, atol=1e-14).y[0, -1]
    errors = []
    for rtol in (1e-4, 1e-6, 1e-8, 1e-10):
        sol = integrate(f, np.array([1.0]), 0.0, 4.0,
                        _cfg(rtol=rtol, atol=rtol * 1e-2))
        errors.append(abs(sol(4.0)[0] - ref))
    assert errors == sorted(errors, reverse=True)
    assert errors[-1] < 1e-9


def test_dense_output_matches_scipy_order():
    # [DERIVED] quartic dense output is accurate to solver tolerance
    # between steps, not just at step ends.
    def f(t, y):
        return np.array([y[1], -np.sin(y[0])])

    y0 = np.array([1.2, 0.0])
    cfg = _cfg(rtol=1e-9, atol=1e-11)
    sol = integrate(f, y0, 0.0, 6.0, cfg)
    ref = solve_ivp(f, (0.0, 6.0), y0, rtol=1e-12, atol=1e-13,
                    dense_output=True)
    for t in np.linspace(0.1, 5.9, 17):
        assert np.linalg.norm(sol(t) - ref.sol(t)) < 1e-7


def test_dense_solution_rejects_out_of_range():
    sol = integrate(lambda t, y: -y, np.array([1.0]), 0.0, 1.0, _cfg())
    with pytest.raises(ValueError):
        sol(1.5)


def test_solve_grid_hits_grid_exactly():
    grid = np.linspace(0.0, 2.0, 9)
    ys = solve_grid(lambda t, y: -y, np.array([1.0]), grid, _cfg())
    assert ys.shape == (9, 1)
    assert np.allclose(ys[:, 0], np.exp(-grid), atol=1e-8)


def test_solve_grid_record_tags_grid_points():
    grid = np.linspace(0.0, 1.0, 5)
    record = []
    solve_grid(lambda t, y: -y, np.array([1.0]), grid, _cfg(), record=record)
    tagged = [gi for *_, gi in record if gi is not None]
    # [TRIVIAL] every interior grid point is the endpoint of some step.
    assert tagged == [1, 2, 3, 4]


def test_step_failure_on_blowup():
    # [DERIVED] finite-time blowup y' = y^2 from y(0)=1 diverges at t=1.
    with pytest.raises(StepFailure):
        integrate(lambda t, y: y**2, np.array([1.0]), 0.0, 2.0,
                  _cfg(max_steps=2000))


def test_max_steps_guard():
    with pytest.raises(StepFailure):
        integrate(lambda t, y: -y, np.array([1.0]), 0.0, 1e6,
                  _cfg(max_steps=10))


def test_backward_sweep_matches_finite_differences():
    # [DERIVED] discrete adjoint of a linear system equals the finite
    # difference of the loss with respect to the initial state.
    A = np.array([[0.0, 1.0], [-2.0, -0.1]])

    def f(t, y):
        return y @ A.T

    def f_with_cache(t, y):
        return f(t, y), y

    def f_vjp(cache, g):
        # returns (state cotangent, nothing to accumulate)
        return g @ A

    grid = np.linspace(0.0, 2.0, 6)
    y0 = np.array([[1.0, 0.5]])
    cfg = _cfg(rtol=1e-10, atol=1e-12)
    record = []
    ys = solve_grid(f, y0, grid, cfg, record=record)
    w = np.array([[0.3, -0.7]])
    cotangents = {len(grid) - 1: w}
    y0_bar = backward_sweep(f_with_cache, f_vjp, record, cotangents, y0.shape)

    eps = 1e-6
    for j in range(2):
        yp, ym = y0.copy(), y0.copy()
        yp[0, j] += eps
        ym[0, j] -= eps
        lp = float(np.sum(solve_grid(f, yp, grid, cfg)[-1] * w))
        lm = float(np.sum(solve_grid(f, ym, grid, cfg)[-1] * w))
        fd = (lp - lm) / (2 * eps)
        assert abs(fd - y0_bar[0, j]) < 1e-6
