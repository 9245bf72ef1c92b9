"""The closed five-component ODE system for plaque count, solubles, and mass.

State layout is (A, u, p, b, M): plaque number, free oligomers, membrane
protein, bound complex, and plaque mass. The closure is only valid for
constant rate models, which is enforced at the API boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import rk
from .model import Parameters, RateModel

__all__ = [
    "OdeState",
    "StepStats",
    "Trajectory",
    "OdeError",
    "NonnegativityError",
    "StableSetError",
    "rhs",
    "rhs_function",
    "integrate",
    "stable_set_bound",
    "weighted_total",
    "write_trajectory_csv",
]


class OdeError(rk.SolverError):
    """Integration aborted due to a violated structural guarantee."""


class NonnegativityError(OdeError):
    """A state component undershot below the clamping floor."""


class StableSetError(OdeError):
    """The weighted-total bound was exceeded beyond tolerance."""


class OdeState(NamedTuple):
    """Point value of the closed system."""

    A: float
    u: float
    p: float
    b: float
    M: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    @classmethod
    def from_array(cls, y) -> "OdeState":
        return cls(*map(float, y))


@dataclass(frozen=True)
class StepStats:
    """Integrator bookkeeping for one trajectory."""

    accepted: int
    rejected: int
    max_scaled_error: float
    min_step: float
    max_stable_set_excess: float


@dataclass(frozen=True)
class Trajectory:
    """Time series of the closed system on the accepted integration mesh."""

    times: np.ndarray
    states: np.ndarray  # shape (len(times), 5), columns A,u,p,b,M
    step_stats: StepStats
    _solution: rk.OdeSolution | None = None

    @property
    def final(self) -> OdeState:
        return OdeState.from_array(self.states[-1])

    def state_at(self, i: int) -> OdeState:
        return OdeState.from_array(self.states[i])

    def column(self, name: str) -> np.ndarray:
        return self.states[:, OdeState._fields.index(name)]

    def sample(self, times) -> np.ndarray:
        """Interpolated states at arbitrary times within the span."""
        if self._solution is None or len(self.times) == 1:
            return np.tile(self.states[-1], (len(np.atleast_1d(times)), 1))
        return self._solution.sample(times)


def _check_constant(rates: RateModel) -> None:
    if not rates.is_constant:
        raise ValueError(
            "the closed ODE system requires constant rates; "
            f"got kind={rates.kind!r}"
        )


def rhs_function(params: Parameters, rates: RateModel):
    """Scalar-unpacked right-hand side ``f(t, y)``, closed over the constants."""
    lam_u, gam_u = params.lambda_u, params.gamma_u
    lam_p, gam_p = params.lambda_p, params.gamma_p
    tau, sig, dlt = params.tau, params.sigma, params.delta
    alpha, n = params.alpha, params.n
    rho, mu = rates.rho0, rates.mu0

    def fun(t, y):
        A, u, p, b, M = y
        nuc = alpha * u**n
        bind = tau * u * p
        unbind = sig * b
        poly = rho * u * A
        return np.array(
            (
                nuc - mu * A,
                lam_u - gam_u * u - bind + unbind - n * nuc - poly,
                lam_p - gam_p * p - bind + unbind,
                bind - (sig + dlt) * b,
                n * nuc + poly - mu * M,
            )
        )

    return fun


def rhs(state: OdeState, params: Parameters, rates: RateModel) -> OdeState:
    """Time derivative of (A, u, p, b, M) at one nonnegative state."""
    _check_constant(rates)
    y = np.asarray(state, dtype=float)
    if y.shape != (5,):
        raise ValueError(f"state must have 5 components, got shape {y.shape}")
    if np.any(y < 0):
        raise ValueError(f"state must be componentwise nonnegative, got {tuple(y)}")
    return OdeState.from_array(rhs_function(params, rates)(0.0, y))


def stable_set_bound(initial, params: Parameters, rates: RateModel) -> float:
    """Invariant-region bound on n*A + u + p + 2b given the initial state.

    The bound is the initial weighted total plus lambda/m where lambda is
    the combined source rate and m the smallest of the four decay rates.
    """
    A0, u0, p0, b0 = (float(v) for v in np.asarray(initial, dtype=float)[:4])
    m = min(rates.mu0, params.gamma_u, params.gamma_p, params.delta)
    if m <= 0:
        raise ValueError("all decay rates must be positive for the bound to exist")
    return params.n * A0 + u0 + p0 + 2.0 * b0 + params.total_source / m


def weighted_total(y, n: int) -> float:
    """The conserved-up-to-decay combination n*A + u + p + 2b."""
    return n * float(y[0]) + float(y[1]) + float(y[2]) + 2.0 * float(y[3])


def integrate(
    initial,
    params: Parameters,
    rates: RateModel,
    t_end: float,
    tol: float = 1e-8,
    atol: float = 1e-10,
    max_step: float = math.inf,
) -> Trajectory:
    """Integrate the closed system from a nonnegative initial state.

    Adaptive embedded stepping at relative tolerance ``tol``. Accepted
    states may undershoot zero by at most ``10*tol`` (then they are clamped
    to zero); anything more negative aborts, as does a violation of the
    invariant-region bound beyond ``10*tol`` relative slack or a step-size
    underflow below 1e-12.
    """
    _check_constant(rates)
    if tol <= 0:
        raise ValueError("tol must be positive")
    y0 = np.asarray(initial, dtype=float)
    if y0.shape != (5,):
        raise ValueError(f"initial state must have 5 components, got shape {y0.shape}")
    if np.any(y0 < 0):
        raise ValueError(f"initial state must be nonnegative, got {tuple(y0)}")
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")

    bound = stable_set_bound(y0, params, rates)
    floor = -10.0 * tol
    slack = 10.0 * tol * bound
    n = params.n
    worst_excess = -math.inf

    def hook(t, y):
        nonlocal worst_excess
        if np.any(y < 0.0):
            if np.any(y < floor):
                worst = float(np.min(y))
                raise NonnegativityError(
                    f"component reached {worst:.3e} at t = {t:.6g}, below the "
                    f"clamping floor {floor:.3e}; reduce the step tolerance"
                )
            y = np.maximum(y, 0.0)
        excess = weighted_total(y, n) - bound
        worst_excess = max(worst_excess, excess)
        if excess > slack:
            raise StableSetError(
                f"weighted total exceeded the invariant-region bound by "
                f"{excess:.3e} at t = {t:.6g} (allowed slack {slack:.3e})"
            )
        return y

    fun = rhs_function(params, rates)
    sol = rk.solve(fun, 0.0, y0, t_end, rtol=tol, atol=atol, max_step=max_step, accept=hook)
    excess0 = weighted_total(y0, n) - bound
    worst_excess = max(worst_excess, excess0)
    stats = StepStats(
        accepted=sol.accepted,
        rejected=sol.rejected,
        max_scaled_error=sol.max_error,
        min_step=sol.min_step,
        max_stable_set_excess=worst_excess,
    )
    return Trajectory(times=sol.t, states=sol.y, step_stats=stats, _solution=sol)


def write_trajectory_csv(path, traj: Trajectory) -> None:
    """Write `t,A,u,p,b,M` rows at full double precision."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,A,u,p,b,M\n")
        for t, row in zip(traj.times, traj.states):
            fields = ",".join(f"{v:.17g}" for v in row)
            fh.write(f"{t:.17g},{fields}\n")
