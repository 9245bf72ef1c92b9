"""Adaptive embedded Runge-Kutta stepper: accuracy, events, dense output."""

import math

import numpy as np
import pytest

from amyprion import rk


def test_exponential_decay_accuracy():
    sol = rk.solve(lambda t, y: -y, 0.0, [1.0], 5.0, rtol=1e-10, atol=1e-12)
    assert abs(sol.y[-1, 0] - math.exp(-5.0)) < 1e-9
    assert sol.rejected < sol.accepted


def test_backward_integration():
    sol = rk.solve(lambda t, y: -y, 2.0, [math.exp(-2.0)], 0.0, rtol=1e-10, atol=1e-12)
    assert abs(sol.y[-1, 0] - 1.0) < 1e-9
    assert sol.t[-1] == 0.0


def test_two_component_rotation():
    fun = lambda t, y: np.array([-y[1], y[0]])  # noqa: E731
    sol = rk.solve(fun, 0.0, [1.0, 0.0], 2 * math.pi, rtol=1e-10, atol=1e-12)
    # local tolerance 1e-10 accumulates over ~200 steps
    assert abs(sol.y[-1, 0] - 1.0) < 1e-7
    assert abs(sol.y[-1, 1]) < 1e-7


def test_tolerance_controls_error():
    exact = math.exp(-4.0)
    errs = []
    for tol in (1e-5, 1e-8):
        sol = rk.solve(lambda t, y: -y, 0.0, [1.0], 4.0, rtol=tol, atol=1e-14)
        errs.append(abs(sol.y[-1, 0] - exact))
    assert errs[1] < errs[0]


def test_terminal_time_exact():
    sol = rk.solve(lambda t, y: np.sin(t) * y, 0.0, [1.0], 0.7, rtol=1e-8)
    assert sol.t[-1] == 0.7


def test_zero_span_returns_initial():
    sol = rk.solve(lambda t, y: -y, 1.0, [3.0], 1.0)
    assert len(sol.t) == 1
    assert sol.y[0, 0] == 3.0


def test_dense_output_matches_solution():
    sol = rk.solve(lambda t, y: -y, 0.0, [1.0], 3.0, rtol=1e-10, atol=1e-12)
    for s in (0.3, 1.1, 2.9):
        assert abs(sol(s)[0] - math.exp(-s)) < 1e-8


def test_sample_shape():
    fun = lambda t, y: np.array([-y[1], y[0]])  # noqa: E731
    sol = rk.solve(fun, 0.0, [1.0, 0.0], 1.0)
    out = sol.sample([0.1, 0.5, 0.9])
    assert out.shape == (3, 2)


def test_event_located_accurately():
    # y' = -y from 1: crosses 0.5 at t = ln 2
    sol = rk.solve(
        lambda t, y: -y, 0.0, [1.0], 3.0,
        rtol=1e-10, atol=1e-12, event=lambda t, y: y[0] - 0.5,
    )
    assert sol.event_time is not None
    assert abs(sol.event_time - math.log(2.0)) < 1e-9
    assert sol.t[-1] == sol.event_time


def test_event_ignored_when_no_crossing():
    sol = rk.solve(
        lambda t, y: -y, 0.0, [1.0], 1.0,
        event=lambda t, y: y[0] + 0.5,
    )
    assert sol.event_time is None
    assert sol.t[-1] == 1.0


def test_accept_hook_can_clamp():
    # force the state to stay above 0.2: hook returns a fresh array on change
    def accept(t, y):
        if y[0] < 0.2:
            z = y.copy()
            z[0] = 0.2
            return z
        return y

    sol = rk.solve(lambda t, y: -y, 0.0, [1.0], 10.0, accept=accept)
    assert np.all(sol.y[:, 0] >= 0.2 - 1e-12)
    assert abs(sol.y[-1, 0] - 0.2) < 1e-8


def test_step_underflow_raises():
    # derivative blows up approaching t=1; controller must give up
    def fun(t, y):
        return np.array([1.0 / (1.0 - t)])

    with pytest.raises(rk.StepUnderflowError):
        rk.solve(fun, 0.0, [0.0], 1.0, rtol=1e-10, atol=1e-12)


def test_max_step_respected():
    sol = rk.solve(lambda t, y: -0.01 * y, 0.0, [1.0], 10.0, max_step=0.5)
    assert np.max(np.diff(sol.t)) <= 0.5 + 1e-12


def test_fixed_step_fifth_order():
    # halving h should shrink the error by about 2^5
    exact = math.exp(-3.0)
    errs = []
    for n in (24, 48, 96):
        sol = rk.solve_fixed(lambda t, y: -y, 0.0, [1.0], 3.0, n)
        errs.append(abs(sol.y[-1, 0] - exact))
    r1 = errs[0] / errs[1]
    r2 = errs[1] / errs[2]
    assert r1 > 2**4
    assert r2 > 2**4


def test_min_step_override():
    def fun(t, y):
        return np.array([1.0 / (1.0 - t)])

    # a looser floor lets the solver die earlier with the same error class
    with pytest.raises(rk.StepUnderflowError):
        rk.solve(fun, 0.0, [0.0], 1.0, min_step=1e-6)


def test_rejection_keeps_stored_derivative_intact():
    # regression: the FSAL derivative must not alias the stage workspace,
    # or a rejected trial corrupts the retry's first stage.  An irrational
    # fixed point leaves a roundoff-size residual that the controller
    # inflates h over until trials start rejecting; the numerical solution
    # must still hold the constant.
    def fun(t, y):
        u, p = y
        return np.array([1.0 - u - u * p, 2.0 - p - u * p])

    y_star = [math.sqrt(2) - 1.0, math.sqrt(2)]  # exact up to rounding
    sol = rk.solve(fun, 0.0, y_star, 500.0, rtol=1e-9, atol=1e-10)
    assert sol.rejected >= 1
    assert np.max(np.abs(sol.y - sol.y[0])) < 1e-6
