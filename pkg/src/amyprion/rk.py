"""Adaptive embedded Runge-Kutta stepping shared by the ODE and PDE modules.

Implements the Dormand-Prince 5(4) pair with FSAL reuse, proportional step
control, cubic Hermite sampling between accepted points, an optional accept
hook (used for nonnegativity clamping), and an optional scalar event used to
detect characteristic curves crossing the critical size. A fixed-step driver
with the same stages backs the convergence-order tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["SolverError", "StepUnderflowError", "OdeSolution", "solve", "solve_fixed"]


class SolverError(RuntimeError):
    """Base class for integrator failures."""


class StepUnderflowError(SolverError):
    """Step size collapsed below the hard floor; the problem is too stiff
    or the right-hand side is not smooth at the current point."""


# Dormand-Prince 5(4) tableau. B holds the 5th-order weights, E the
# difference between the 5th- and 4th-order weights (error estimator).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

_ORDER = 5
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_SAFETY = 0.9


def _hermite(t0, y0, f0, t1, y1, f1, s):
    """Cubic Hermite value at s on the step [t0, t1]."""
    h = t1 - t0
    if h == 0.0:
        return y0.copy()
    x = (s - t0) / h
    h00 = (1 + 2 * x) * (1 - x) ** 2
    h10 = x * (1 - x) ** 2
    h01 = x * x * (3 - 2 * x)
    h11 = x * x * (x - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


@dataclass
class OdeSolution:
    """Accepted mesh of an adaptive (or fixed) integration.

    ``t``/``y``/``f`` hold the accepted times, states, and derivatives;
    ``event_time`` is set when the scalar event fired and the integration
    was truncated there.
    """

    t: np.ndarray
    y: np.ndarray
    f: np.ndarray
    accepted: int
    rejected: int
    max_error: float
    min_step: float
    event_time: float | None = None

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    @property
    def y_end(self) -> np.ndarray:
        return self.y[-1]

    def _locate(self, s: float) -> int:
        t = self.t
        forward = t[-1] >= t[0]
        lo, hi = (t[0], t[-1]) if forward else (t[-1], t[0])
        if not (lo - 1e-12 <= s <= hi + 1e-12):
            raise ValueError(f"sample time {s} outside solution span [{lo}, {hi}]")
        if forward:
            i = int(np.searchsorted(t, s, side="right")) - 1
        else:
            i = len(t) - 1 - int(np.searchsorted(t[::-1], s, side="left"))
        return min(max(i, 0), len(t) - 2)

    def __call__(self, s: float) -> np.ndarray:
        """Cubic Hermite interpolant at a single time s."""
        if len(self.t) == 1:
            return self.y[0].copy()
        i = self._locate(s)
        return _hermite(self.t[i], self.y[i], self.f[i], self.t[i + 1], self.y[i + 1], self.f[i + 1], s)

    def sample(self, times) -> np.ndarray:
        """Interpolated states at each requested time, shape (len(times), dim)."""
        return np.array([self(s) for s in np.atleast_1d(times)])


def _initial_step(fun, t0, y0, f0, direction, rtol, atol, span):
    """Hairer-style starting step estimate, capped at the integration span."""
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, 0.5 * span)  # keep the probe inside the integration window
    y1 = y0 + h0 * direction * f0
    f1 = fun(t0 + h0 * direction, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / _ORDER)
    return min(100 * h0, h1, span)


def solve(
    fun,
    t0: float,
    y0,
    t_end: float,
    *,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    max_step: float = math.inf,
    first_step: float | None = None,
    accept=None,
    event=None,
    min_step: float = 1e-12,
    breakpoints=None,
) -> OdeSolution:
    """Integrate y' = fun(t, y) from t0 to t_end (either direction).

    Parameters
    ----------
    accept : callable, optional
        ``accept(t, y) -> y`` applied to every accepted state; may raise to
        abort, may return a modified state (e.g. clamped to nonnegative).
    event : callable, optional
        Scalar ``event(t, y)``; when its sign drops from positive to
        nonpositive within a step, the crossing time is located on the
        Hermite interpolant and the solution is truncated there
        (``event_time`` records it).
    min_step : float
        Hard floor; controller-driven steps below it raise
        :class:`StepUnderflowError`.
    breakpoints : array_like, optional
        Times where the right-hand side loses smoothness (e.g. kinks of an
        interpolated coefficient). Steps are capped so they land exactly on
        each breakpoint, keeping the error estimate valid on every step.
    """
    y0 = np.asarray(y0, dtype=float)
    span = abs(t_end - t0)
    f0 = np.asarray(fun(t0, y0), dtype=float)

    ts = [t0]
    ys = [y0.copy()]
    fs = [f0.copy()]
    if span == 0.0:
        return OdeSolution(np.array(ts), np.array(ys), np.array(fs), 0, 0, 0.0, math.inf)

    direction = 1.0 if t_end >= t0 else -1.0
    if first_step is None:
        h = _initial_step(fun, t0, y0, f0, direction, rtol, atol, span)
    else:
        h = min(abs(first_step), span)
    h = min(h, max_step)

    t, y, f = t0, y0, f0
    g_prev = event(t, y) if event is not None else None
    accepted = rejected = 0
    max_error = 0.0
    smallest = math.inf
    K = np.empty((7, len(y0)))

    bp = None
    bi = 0
    if breakpoints is not None:
        arr = np.asarray(breakpoints, dtype=float)
        if direction > 0:
            arr = np.sort(arr[(arr > t0) & (arr < t_end)])
        else:
            arr = -np.sort(-arr[(arr < t0) & (arr > t_end)])
        if len(arr):
            bp = arr

    while (t_end - t) * direction > 0:
        # the step lands exactly on the nearer of t_end / next breakpoint
        t_cap, cap = t_end, abs(t_end - t)
        if bp is not None:
            slop = 1e-12 * max(1.0, abs(t))
            while bi < len(bp) and (bp[bi] - t) * direction <= slop:
                bi += 1
            if bi < len(bp) and abs(bp[bi] - t) < cap:
                t_cap, cap = bp[bi], abs(bp[bi] - t)
        capped = h >= cap
        if capped:
            h_step = cap
            h_signed = t_cap - t
        else:
            if h < min_step:
                raise StepUnderflowError(
                    f"step size {h:.3e} fell below {min_step:.1e} at t = {t:.6g}"
                )
            h_step = h
            h_signed = h * direction

        K[0] = f
        for i in range(1, 7):
            yi = y + h_signed * (K[:i].T @ _A[i])
            K[i] = fun(t + _C[i] * h_signed, yi)
        y_new = y + h_signed * (K.T @ _B)  # K[6] already holds fun(t+h, y_new)
        f_new = K[6].copy()  # detach from the workspace: K is reused on retry

        err_vec = h_signed * (K.T @ _E)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))

        if err <= 1.0:
            t_new = t_cap if capped else t + h_signed
            smallest = min(smallest, h_step)
            max_error = max(max_error, err)
            accepted += 1
            if accept is not None:
                y_acc = accept(t_new, y_new)
                if y_acc is not y_new:
                    # hook altered the state (e.g. clamped); refresh the
                    # FSAL derivative so the next step sees the new state
                    y_new = np.asarray(y_acc, dtype=float)
                    f_new = np.asarray(fun(t_new, y_new), dtype=float)
            if event is not None:
                g_new = event(t_new, y_new)
                if g_prev > 0.0 >= g_new:
                    s_cross = _bisect_event(event, t, y, f, t_new, y_new, f_new)
                    s_cross, y_cross = _refine_event(
                        fun, event, t, y, t_new, s_cross, rtol, atol
                    )
                    ts.append(s_cross)
                    ys.append(y_cross)
                    fs.append(np.asarray(fun(s_cross, y_cross), dtype=float))
                    return OdeSolution(
                        np.array(ts), np.array(ys), np.array(fs),
                        accepted, rejected, max_error, smallest, event_time=s_cross,
                    )
                g_prev = g_new
            t, y, f = t_new, y_new, f_new
            ts.append(t)
            ys.append(y.copy())
            fs.append(f.copy())
            factor = _MAX_FACTOR if err == 0.0 else min(_MAX_FACTOR, _SAFETY * err ** (-1.0 / _ORDER))
            h = min(h_step * max(factor, _MIN_FACTOR), max_step)
        else:
            rejected += 1
            h = h_step * max(_MIN_FACTOR, _SAFETY * err ** (-1.0 / _ORDER))

    return OdeSolution(np.array(ts), np.array(ys), np.array(fs), accepted, rejected, max_error, smallest)


def _bisect_event(event, t0, y0, f0, t1, y1, f1, iters: int = 80):
    """Locate the event zero on one step's Hermite interpolant."""
    lo, hi = t0, t1
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if event(mid, _hermite(t0, y0, f0, t1, y1, f1, mid)) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _refine_event(fun, event, t0, y0, t1, s_guess, rtol, atol, iters: int = 48):
    """Polish the crossing by bisecting on the true solution.

    The Hermite interpolant drifts O(h^4) from the solution over a long
    accepted step, so the estimate from :func:`_bisect_event` is re-bracketed
    with short re-integrations from the step start. Each move of the left
    endpoint reuses the already-integrated state, keeping the total work a
    small multiple of the original step.
    """
    lo, y_lo = t0, y0
    hi = t1
    floor = 4e-12 * max(1.0, abs(t0), abs(t1))
    # seed the bracket near the interpolant's estimate when it is interior
    if (t1 - s_guess) * (s_guess - t0) > 0.0 and abs(s_guess - t0) > floor:
        sol = solve(fun, lo, y_lo, s_guess, rtol=rtol, atol=atol)
        if event(s_guess, sol.y[-1]) > 0.0:
            lo, y_lo = s_guess, sol.y[-1]
        else:
            hi = s_guess
    for _ in range(iters):
        if abs(hi - lo) <= floor:
            break
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        sol = solve(fun, lo, y_lo, mid, rtol=rtol, atol=atol)
        if event(mid, sol.y[-1]) > 0.0:
            lo, y_lo = mid, sol.y[-1]
        else:
            hi = mid
    return lo, np.asarray(y_lo, dtype=float)


def solve_fixed(fun, t0: float, y0, t_end: float, n_steps: int) -> OdeSolution:
    """Fixed-step integration with the 5th-order weights (no error control)."""
    y = np.asarray(y0, dtype=float)
    h = (t_end - t0) / n_steps
    ts = [t0]
    ys = [y.copy()]
    f = np.asarray(fun(t0, y), dtype=float)
    fs = [f.copy()]
    K = np.empty((7, len(y)))
    t = t0
    for step in range(n_steps):
        K[0] = f
        for i in range(1, 7):
            yi = y + h * (K[:i].T @ _A[i])
            K[i] = fun(t + _C[i] * h, yi)
        y = y + h * (K.T @ _B)
        f = K[6].copy()
        t = t0 + (step + 1) * h
        ts.append(t)
        ys.append(y.copy())
        fs.append(f.copy())
    return OdeSolution(np.array(ts), np.array(ys), np.array(fs), n_steps, 0, 0.0, abs(h))
