"""Size-structured transport solver with nucleation influx.

Three complementary views of the same dynamics live here:

* characteristics of dX/ds = u(s)*rho(X) with crossing-time detection,
  and the pointwise mild-solution evaluator built on them;
* a conservative upwind finite-volume scheme on a truncated size axis,
  coupled to the soluble concentrations by operator splitting;
* a Picard fixed-point iteration on the soluble trajectories, where each
  iterate transports the initial density along exact characteristics.

The grid scheme and the Picard mode are independent discretizations and
are used to cross-validate each other.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels, rk
from .model import Parameters, RateModel, nucleation

__all__ = [
    "PdeError",
    "CFLError",
    "NegativeDensityError",
    "SingularInfluxError",
    "SpanError",
    "ContractionError",
    "CharacteristicCrossesBoundary",
    "PlaqueGrid",
    "CharacteristicField",
    "CoupledState",
    "CoupledRun",
    "MildSolution",
    "PicardResult",
    "moments",
    "trace_characteristic",
    "mild_evaluate",
    "max_stable_dt",
    "step_coupled",
    "simulate_coupled",
    "picard_solve",
    "default_x_max",
    "exp_decay_density",
    "write_density_csv",
    "write_moments_csv",
]


class PdeError(rk.SolverError):
    """Base class for transport-solver failures."""


class CFLError(PdeError):
    """The requested step exceeds the advective stability bound."""


class NegativeDensityError(PdeError):
    """A cell average went negative beyond rounding tolerance."""


class SingularInfluxError(PdeError):
    """The boundary-branch density is singular because u vanished at the
    characteristic's starting time; the influx flux stays finite, so the
    grid scheme is the appropriate tool at such points."""


class SpanError(ValueError):
    """A time outside the sampled soluble history was requested."""


class ContractionError(PdeError):
    """Picard iterates stopped contracting; shrink the horizon T."""


class CharacteristicCrossesBoundary(PdeError):
    """Backward tracing hit the critical size: the point originates at the
    nucleation boundary at time ``s0``, not in the initial data."""

    def __init__(self, s0: float):
        super().__init__(
            f"characteristic reaches the critical size at s0 = {s0:.12g}; "
            "the point originates at the nucleation boundary"
        )
        self.s0 = s0


# ---------------------------------------------------------------------------
# grid


@dataclass
class PlaqueGrid:
    """Cell-averaged density on a truncated size axis [x0, x_max].

    ``outflow_number``/``outflow_mass`` accumulate what has been advected
    past the truncation edge, so conservation checks can account for it.
    """

    x_edges: np.ndarray
    f_avg: np.ndarray
    outflow_number: float = 0.0
    outflow_mass: float = 0.0

    def __post_init__(self):
        self.x_edges = np.asarray(self.x_edges, dtype=float)
        self.f_avg = np.asarray(self.f_avg, dtype=float)
        if len(self.x_edges) != len(self.f_avg) + 1:
            raise ValueError("need len(x_edges) == len(f_avg) + 1")
        if np.any(np.diff(self.x_edges) <= 0):
            raise ValueError("x_edges must be strictly increasing")

    @classmethod
    def uniform(cls, x0: float, x_max: float, cells: int, density=None) -> "PlaqueGrid":
        """Uniform grid; ``density`` (callable) is sampled at cell centers."""
        edges = np.linspace(x0, x_max, cells + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
        f = np.zeros(cells) if density is None else np.asarray(density(centers), dtype=float)
        return cls(x_edges=edges, f_avg=f)

    @property
    def x0(self) -> float:
        return float(self.x_edges[0])

    @property
    def x_max(self) -> float:
        return float(self.x_edges[-1])

    @property
    def n_cells(self) -> int:
        return len(self.f_avg)

    @property
    def dx(self) -> np.ndarray:
        return np.diff(self.x_edges)

    @property
    def x_centers(self) -> np.ndarray:
        return 0.5 * (self.x_edges[:-1] + self.x_edges[1:])

    def copy(self) -> "PlaqueGrid":
        return PlaqueGrid(
            x_edges=self.x_edges.copy(),
            f_avg=self.f_avg.copy(),
            outflow_number=self.outflow_number,
            outflow_mass=self.outflow_mass,
        )

    def moment(self, r: float) -> float:
        return moments(self, r)


def moments(grid: PlaqueGrid, weight_power: float) -> float:
    """Midpoint-quadrature moment ∫ x^r f dx over the truncated axis.

    Only powers r in [0, 1] are meaningful for the solution space the
    transport problem lives in, and the quadrature enforces that range.
    """
    r = float(weight_power)
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"weight power must lie in [0, 1], got {r}")
    if r == 0.0:
        return float(np.sum(grid.f_avg * grid.dx))
    if r == 1.0:
        return float(np.sum(grid.x_centers * grid.f_avg * grid.dx))
    return float(np.sum(grid.x_centers**r * grid.f_avg * grid.dx))


def exp_decay_density(scale: float, amplitude: float = 1.0, x0: float = 1.0):
    """Density x -> amplitude * exp(-(x - x0)/scale), the standard test shape."""

    def density(x):
        return amplitude * np.exp(-(np.asarray(x, dtype=float) - x0) / scale)

    return density


# ---------------------------------------------------------------------------
# characteristics


@dataclass(frozen=True)
class CharacteristicField:
    """A sampled soluble history u(t) with the growth bounds it induces.

    ``A_bound`` bounds d/ds log X along characteristics; ``B_bound`` bounds
    the compression rate entering the flow Jacobian. Both derive from the
    linear growth constant C of the rate model and the sup of u.
    """

    t_nodes: np.ndarray
    u_values: np.ndarray
    x0: float
    C: float
    A_bound: float
    B_bound: float

    @classmethod
    def from_samples(cls, t_nodes, u_values, rates: RateModel, x0: float) -> "CharacteristicField":
        t_nodes = np.asarray(t_nodes, dtype=float)
        u_values = np.asarray(u_values, dtype=float)
        if len(t_nodes) != len(u_values):
            raise ValueError("t_nodes and u_values must have equal length")
        if len(t_nodes) < 2 or np.any(np.diff(t_nodes) <= 0):
            raise ValueError("t_nodes must be strictly increasing with >= 2 samples")
        if np.any(u_values < 0):
            raise ValueError("u samples must be nonnegative")
        u_sup = float(np.max(u_values))
        dsup = rates.rho_prime_sup(x0)
        C = rates.linear_bound(x0)
        return cls(
            t_nodes=t_nodes,
            u_values=u_values,
            x0=x0,
            C=C,
            A_bound=max(C * u_sup, u_sup * dsup),
            B_bound=u_sup * dsup,
        )

    @classmethod
    def constant_u(cls, u0: float, t_span: tuple[float, float], rates: RateModel, x0: float) -> "CharacteristicField":
        return cls.from_samples(np.array(t_span, dtype=float), np.array([u0, u0]), rates, x0)

    @property
    def t_start(self) -> float:
        return float(self.t_nodes[0])

    @property
    def t_end(self) -> float:
        return float(self.t_nodes[-1])

    def _check_span(self, *times) -> None:
        tiny = 1e-9 * max(1.0, abs(self.t_end))
        for s in times:
            if not (self.t_start - tiny <= s <= self.t_end + tiny):
                raise SpanError(
                    f"time {s} outside the sampled span [{self.t_start}, {self.t_end}]"
                )

    def u_at(self, s):
        """Piecewise-linear interpolant of the soluble history."""
        self._check_span(np.min(s) if not np.isscalar(s) else s, np.max(s) if not np.isscalar(s) else s)
        return np.interp(s, self.t_nodes, self.u_values)


def _flow_rhs(field: CharacteristicField, rates: RateModel):
    def fun(s, y):
        return field.u_at(s) * rates.rho(y)

    return fun


def trace_characteristic(
    x: float,
    t: float,
    s: float,
    field: CharacteristicField,
    rates: RateModel,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> float:
    """Position X(s; x, t) of the characteristic through (x, t).

    Integrates dX/ds = u(s)*rho(X) adaptively in either time direction.
    Tracing backward past the critical size raises
    :class:`CharacteristicCrossesBoundary` carrying the crossing time s0.
    """
    field._check_span(s, t)
    if x < field.x0:
        raise ValueError(f"x = {x} below the critical size {field.x0}")
    if s == t:
        return float(x)
    fun = _flow_rhs(field, rates)
    if s > t:
        sol = rk.solve(fun, t, [x], s, rtol=rtol, atol=atol, breakpoints=field.t_nodes)
        return float(sol.y_end[0])
    if x <= field.x0:
        raise CharacteristicCrossesBoundary(t)
    event = lambda sig, y: y[0] - field.x0  # noqa: E731
    sol = rk.solve(fun, t, [x], s, rtol=rtol, atol=atol, event=event, breakpoints=field.t_nodes)
    if sol.event_time is not None:
        raise CharacteristicCrossesBoundary(sol.event_time)
    return float(sol.y_end[0])


def _flow_back_augmented(
    x: float,
    t: float,
    s_end: float,
    field: CharacteristicField,
    rates: RateModel,
    rtol: float,
    atol: float,
):
    """Backward flow of [X, ∫mu, ∫c] from (x, t) toward s_end.

    Returns (y_at_stop, s_stop, crossed). The second component accumulates
    the decay integral and the third the Jacobian exponent, both measured
    from t (so they come out nonpositive going backward).
    """

    def fun(s, y):
        us = field.u_at(s)
        return np.array([us * rates.rho(y[0]), rates.mu(y[0]), us * rates.rho_prime(y[0])])

    if x <= field.x0:
        return np.array([field.x0, 0.0, 0.0]), t, True
    event = lambda s, y: y[0] - field.x0  # noqa: E731
    sol = rk.solve(
        fun, t, [x, 0.0, 0.0], s_end,
        rtol=rtol, atol=atol, event=event, breakpoints=field.t_nodes,
    )
    crossed = sol.event_time is not None
    return sol.y_end, (sol.event_time if crossed else s_end), crossed


def mild_evaluate(
    x: float,
    t: float,
    f_in,
    field: CharacteristicField,
    rates: RateModel,
    params: Parameters,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> float:
    """Pointwise density via the characteristic representation.

    Points whose backward characteristic stays above the critical size
    carry transported initial data; the rest carry nucleation influx from
    the boundary. ``f_in`` is a callable of size. A vanishing advection
    speed at the boundary-crossing time makes the density singular there,
    which is reported as :class:`SingularInfluxError`.
    """
    field._check_span(t)
    if x < field.x0:
        raise ValueError(f"x = {x} below the critical size {field.x0}")
    t_ref = field.t_start
    if t <= t_ref:
        return float(f_in(x))

    y_end, s_stop, crossed = _flow_back_augmented(x, t, t_ref, field, rates, rtol, atol)
    decay = math.exp(y_end[1])  # y[1] = -∫_{s}^{t} mu along the flow
    jac = math.exp(y_end[2])  # y[2] = ∫_{s}^{t} c,  c = -u rho'
    if not crossed:
        return float(f_in(y_end[0])) * jac * decay
    u_s0 = float(field.u_at(s_stop))
    speed = u_s0 * float(rates.rho(field.x0))
    if speed <= 1e-300:
        raise SingularInfluxError(
            f"advection speed u*rho(x0) vanishes at s0 = {s_stop:.6g}; the "
            "pointwise density is unbounded there (the flux stays finite)"
        )
    return nucleation(u_s0, params) * jac * decay / speed


# ---------------------------------------------------------------------------
# coupled grid solver


@dataclass
class CoupledState:
    """Grid density plus soluble concentrations at one time."""

    grid: PlaqueGrid
    u: float
    p: float
    b: float
    t: float = 0.0

    def copy(self) -> "CoupledState":
        return CoupledState(grid=self.grid.copy(), u=self.u, p=self.p, b=self.b, t=self.t)


def default_x_max(params: Parameters, rates: RateModel, T: float, u_scale: float) -> float:
    """Truncation size: four times the exponential growth envelope over T."""
    dsup = rates.rho_prime_sup(params.x0)
    C = rates.linear_bound(params.x0)
    a_bound = max(C * u_scale, u_scale * dsup)
    return params.x0 * math.exp(a_bound * T) * 4.0


def max_stable_dt(state: CoupledState, params: Parameters, rates: RateModel, safety: float = 0.9) -> float:
    """Largest step keeping both advection and decay positivity-safe."""
    grid = state.grid
    v_right = state.u * np.asarray(rates.rho(grid.x_edges[1:]), dtype=float)
    mu_c = np.asarray(rates.mu(grid.x_centers), dtype=float)
    rate = v_right / grid.dx + mu_c
    worst = float(np.max(rate))
    return math.inf if worst <= 0 else safety / worst


def _advective_cfl(state: CoupledState, rates: RateModel, safety: float) -> float:
    v_right = state.u * np.asarray(rates.rho(state.grid.x_edges[1:]), dtype=float)
    with np.errstate(divide="ignore"):
        ratios = np.where(v_right > 0, state.grid.dx / np.maximum(v_right, 1e-300), math.inf)
    return safety * float(np.min(ratios))


def _soluble_rate(u, p, b, i_rho, params: Parameters):
    """Right-hand side of the soluble subsystem given the coupling integral."""
    bind = params.tau * u * p
    unbind = params.sigma * b
    du = (
        params.lambda_u
        - params.gamma_u * u
        - bind
        + unbind
        - params.n * nucleation(max(u, 0.0), params)
        - u * i_rho / params.epsilon
    )
    dp = params.lambda_p - params.gamma_p * p - bind + unbind
    db = bind - (params.sigma + params.delta) * b
    return du, dp, db


def step_coupled(
    state: CoupledState,
    dt: float,
    params: Parameters,
    rates: RateModel,
    safety: float = 0.9,
) -> CoupledState:
    """One explicit step of the coupled transport-soluble system.

    Transport first: conservative upwind fluxes with the nucleation rate
    entering as the boundary influx (so the boundary condition holds in
    the flux sense), advection speed frozen at the start-of-step u.
    Then the solubles advance by a trapezoidal (Heun) substep whose two
    stages use the pre- and post-transport coupling integrals — keeping
    the soluble balance laws accurate to second order in dt even though
    the splitting itself is first order.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    cfl_dt = _advective_cfl(state, rates, safety)
    if dt > cfl_dt * (1 + 1e-12):
        raise CFLError(
            f"dt = {dt:.3e} exceeds the advective stability bound {cfl_dt:.3e} "
            f"(safety {safety})"
        )

    grid = state.grid
    centers = grid.x_centers
    rho_c = np.asarray(rates.rho(centers), dtype=float)
    mu_c = np.asarray(rates.mu(centers), dtype=float)
    v_edges = state.u * np.asarray(rates.rho(grid.x_edges), dtype=float)

    influx = nucleation(state.u, params)
    f_old = grid.f_avg
    i_rho_old = float(np.sum(rho_c * f_old * grid.dx))

    f_new = np.empty_like(f_old)
    out_flux = kernels.upwind_step(f_old, grid.dx, v_edges, mu_c, influx, dt, f_new)

    fmax = max(float(np.max(f_new, initial=0.0)), float(np.max(f_old, initial=0.0)), 1e-300)
    fmin = float(np.min(f_new, initial=0.0))
    if fmin < -1e-12 * fmax:
        raise NegativeDensityError(
            f"cell average reached {fmin:.3e} (beyond -1e-12*max f = "
            f"{-1e-12 * fmax:.3e}); the step violates positivity"
        )
    np.maximum(f_new, 0.0, out=f_new)

    i_rho_new = float(np.sum(rho_c * f_new * grid.dx))

    u0, p0, b0 = state.u, state.p, state.b
    du1, dp1, db1 = _soluble_rate(u0, p0, b0, i_rho_old, params)
    u_star = u0 + dt * du1
    p_star = p0 + dt * dp1
    b_star = b0 + dt * db1
    du2, dp2, db2 = _soluble_rate(max(u_star, 0.0), p_star, b_star, i_rho_new, params)
    u1 = max(u0 + 0.5 * dt * (du1 + du2), 0.0)
    p1 = max(p0 + 0.5 * dt * (dp1 + dp2), 0.0)
    b1 = max(b0 + 0.5 * dt * (db1 + db2), 0.0)

    new_grid = PlaqueGrid(
        x_edges=grid.x_edges,
        f_avg=f_new,
        outflow_number=grid.outflow_number + dt * out_flux,
        outflow_mass=grid.outflow_mass + dt * grid.x_max * out_flux,
    )
    return CoupledState(grid=new_grid, u=u1, p=p1, b=b1, t=state.t + dt)


@dataclass
class CoupledRun:
    """Recorded history of a coupled grid simulation."""

    times: np.ndarray
    u: np.ndarray
    p: np.ndarray
    b: np.ndarray
    m0: np.ndarray  # ∫ f dx per sample
    m1: np.ndarray  # ∫ x f dx per sample
    i_rho: np.ndarray  # ∫ rho f dx per sample
    outflow_number: np.ndarray  # cumulative
    outflow_mass: np.ndarray  # cumulative
    outflow_mass_rate: np.ndarray  # instantaneous x_max * boundary flux
    final_state: CoupledState
    dt: float
    densities: list[tuple[float, np.ndarray]] = dc_field(default_factory=list)

    @property
    def x_centers(self) -> np.ndarray:
        return self.final_state.grid.x_centers

    @property
    def x_max(self) -> float:
        return self.final_state.grid.x_max


def simulate_coupled(
    initial: CoupledState,
    T: float,
    params: Parameters,
    rates: RateModel,
    *,
    n_steps: int | None = None,
    safety: float = 0.9,
    u_headroom: float = 2.0,
    store_density: bool = False,
    outflow_warn_fraction: float = 1e-3,
) -> CoupledRun:
    """March the coupled system to ``initial.t + T`` with a uniform step.

    The default step count is set from the stability bound evaluated at a
    pessimistic soluble level (``u_headroom`` times the larger of the
    initial u and the source/decay quotient); pass ``n_steps`` to control
    it directly. The step is uniform so balance-law residuals measured on
    the samples converge cleanly. A CFL violation mid-run (u grew past the
    headroom) surfaces as :class:`CFLError`.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    if T == 0:
        g = initial.grid
        return CoupledRun(
            times=np.array([initial.t]),
            u=np.array([initial.u]),
            p=np.array([initial.p]),
            b=np.array([initial.b]),
            m0=np.array([g.moment(0.0)]),
            m1=np.array([g.moment(1.0)]),
            i_rho=np.array([float(np.sum(rates.rho(g.x_centers) * g.f_avg * g.dx))]),
            outflow_number=np.array([g.outflow_number]),
            outflow_mass=np.array([g.outflow_mass]),
            outflow_mass_rate=np.array([0.0]),
            final_state=initial.copy(),
            dt=0.0,
            densities=[(initial.t, g.f_avg.copy())] if store_density else [],
        )

    if n_steps is None:
        u_cap = u_headroom * max(initial.u, params.lambda_u / params.gamma_u)
        probe = CoupledState(grid=initial.grid, u=u_cap, p=initial.p, b=initial.b, t=initial.t)
        dt_max = max_stable_dt(probe, params, rates, safety)
        if not math.isfinite(dt_max):
            dt_max = T
        n_steps = max(1, math.ceil(T / dt_max))
    dt = T / n_steps

    state = initial.copy()
    grid = state.grid
    rho_c = np.asarray(rates.rho(grid.x_centers), dtype=float)
    dx = grid.dx

    times = np.empty(n_steps + 1)
    u_arr = np.empty(n_steps + 1)
    p_arr = np.empty(n_steps + 1)
    b_arr = np.empty(n_steps + 1)
    m0 = np.empty(n_steps + 1)
    m1 = np.empty(n_steps + 1)
    i_rho = np.empty(n_steps + 1)
    out_n = np.empty(n_steps + 1)
    out_m = np.empty(n_steps + 1)
    out_rate = np.empty(n_steps + 1)
    densities: list[tuple[float, np.ndarray]] = []

    def record(k, st: CoupledState, rate):
        times[k] = st.t
        u_arr[k] = st.u
        p_arr[k] = st.p
        b_arr[k] = st.b
        m0[k] = st.grid.moment(0.0)
        m1[k] = st.grid.moment(1.0)
        i_rho[k] = float(np.sum(rho_c * st.grid.f_avg * dx))
        out_n[k] = st.grid.outflow_number
        out_m[k] = st.grid.outflow_mass
        out_rate[k] = rate
        if store_density:
            densities.append((st.t, st.grid.f_avg.copy()))

    record(0, state, state.u * float(rates.rho(grid.x_max)) * (state.grid.f_avg[-1] if grid.n_cells else 0.0))
    for k in range(n_steps):
        prev_out = state.grid.outflow_mass
        state = step_coupled(state, dt, params, rates, safety=safety)
        record(k + 1, state, (state.grid.outflow_mass - prev_out) / dt)

    total_mass = m1[-1] + out_m[-1]
    if total_mass > 0 and out_m[-1] > outflow_warn_fraction * total_mass:
        warnings.warn(
            f"outflow past x_max = {grid.x_max:.4g} carried "
            f"{out_m[-1] / total_mass:.2%} of the mass; increase x_max",
            RuntimeWarning,
            stacklevel=2,
        )

    return CoupledRun(
        times=times,
        u=u_arr,
        p=p_arr,
        b=b_arr,
        m0=m0,
        m1=m1,
        i_rho=i_rho,
        outflow_number=out_n,
        outflow_mass=out_m,
        outflow_mass_rate=out_rate,
        final_state=state,
        dt=dt,
        densities=densities,
    )


# ---------------------------------------------------------------------------
# Picard fixed point on the soluble trajectories


class MildSolution:
    """Transported-measure view of the density for a fixed soluble history.

    The initial density is represented as a quadrature measure (nodes,
    weights, values); every node is pushed forward along its exact
    characteristic, and boundary characteristics are launched from each
    time node. Moments at any time node are then plain weighted sums —
    the transport Jacobians cancel against the change of variables, and
    the constant death rate contributes a closed-form decay factor.
    """

    def __init__(
        self,
        field: CharacteristicField,
        rates: RateModel,
        params: Parameters,
        y_nodes,
        y_weights,
        f_values,
        rtol: float = 1e-10,
        atol: float = 1e-12,
    ):
        self.field = field
        self.rates = rates
        self.params = params
        self.y_nodes = np.asarray(y_nodes, dtype=float)
        self.y_weights = np.asarray(y_weights, dtype=float)
        self.f_values = np.asarray(f_values, dtype=float)
        t_nodes = field.t_nodes
        self.t_nodes = t_nodes
        K = len(t_nodes)
        Ny = len(self.y_nodes)

        # forward flows; row k holds positions at t_nodes[k]
        self.Y = np.empty((K, Ny))
        self.Y[0] = self.y_nodes
        self.Xb = np.full((K, K), np.nan)  # Xb[k, j]: boundary char launched at t_j
        self.Xb[0, 0] = field.x0

        def fun(s, z):
            return field.u_at(s) * rates.rho(z)

        state = self.y_nodes.copy()
        boundary = np.array([field.x0])  # boundary[j]: char launched at t_nodes[j]
        for k in range(K - 1):
            z0 = np.concatenate((state, boundary))
            sol = rk.solve(fun, t_nodes[k], z0, t_nodes[k + 1], rtol=rtol, atol=atol)
            z1 = sol.y_end
            state = z1[:Ny]
            boundary = np.concatenate((z1[Ny:], [field.x0]))
            self.Y[k + 1] = state
            self.Xb[k + 1, : k + 2] = boundary

    @classmethod
    def from_grid(
        cls,
        field: CharacteristicField,
        rates: RateModel,
        params: Parameters,
        grid: PlaqueGrid,
        **kw,
    ) -> "MildSolution":
        return cls(field, rates, params, grid.x_centers, grid.dx, grid.f_avg, **kw)

    def moment(self, g, k: int) -> float:
        """∫ g(x) f(x, t_k) dx by pushing the initial measure forward."""
        t_k = self.t_nodes[k]
        mu0 = self.rates.mu0
        init = float(
            np.sum(
                self.y_weights
                * self.f_values
                * np.asarray(g(self.Y[k]), dtype=float)
            )
        ) * math.exp(-mu0 * t_k)
        if k == 0:
            return init
        s = self.t_nodes[: k + 1]
        u_s = self.field.u_values[: k + 1]
        nuc = self.params.alpha * u_s**self.params.n
        vals = np.asarray(g(self.Xb[k, : k + 1]), dtype=float) * nuc * np.exp(-mu0 * (t_k - s))
        boundary = float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(s)))
        return init + boundary

    def moment_series(self, g) -> np.ndarray:
        return np.array([self.moment(g, k) for k in range(len(self.t_nodes))])

    def density(self, x: float, t: float, f_in=None) -> float:
        """Pointwise evaluation (delegates to the two-branch formula)."""
        if f_in is None:
            f_in = self._interp_f_in
        return mild_evaluate(x, t, f_in, self.field, self.rates, self.params)

    def _interp_f_in(self, x):
        return np.interp(x, self.y_nodes, self.f_values, left=0.0, right=0.0)


@dataclass
class PicardResult:
    """Fixed-point iteration record for the soluble trajectories."""

    t_nodes: np.ndarray
    u: np.ndarray
    p: np.ndarray
    b: np.ndarray
    m0: np.ndarray
    m1: np.ndarray
    iterations: int
    deltas: list[float]
    ratios: list[float]
    converged: bool
    mild: MildSolution

    @property
    def contraction_ratio(self) -> float:
        """Geometric-mean contraction per iterate (< 1 when converging)."""
        usable = [r for r in self.ratios if r > 0]
        if not usable:
            return 0.0
        return float(np.exp(np.mean(np.log(usable))))


def _cumtrapz(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(t))
    return out


def picard_solve(
    initial: CoupledState,
    T: float,
    n_iter: int,
    params: Parameters,
    rates: RateModel,
    *,
    n_nodes: int = 65,
    tol: float = 1e-10,
    rtol: float = 1e-10,
) -> PicardResult:
    """Solve the coupled system by fixed-point iteration on (u, p, b).

    Each sweep freezes the soluble history, transports the initial density
    exactly along characteristics (with nucleation influx), evaluates the
    coupling integral ∫ rho f dx at the time nodes, and rebuilds (u, p, b)
    from their integral equations by trapezoidal quadrature. Convergence
    is measured in the sup norm over the nodes; three consecutive
    non-contracting sweeps raise :class:`ContractionError`.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if n_nodes < 3:
        raise ValueError("need at least 3 time nodes")
    t_nodes = initial.t + np.linspace(0.0, T, n_nodes)
    u0, p0, b0 = initial.u, initial.p, initial.b
    u_arr = np.full(n_nodes, u0)
    p_arr = np.full(n_nodes, p0)
    b_arr = np.full(n_nodes, b0)

    grid = initial.grid
    deltas: list[float] = []
    ratios: list[float] = []
    converged = False
    mild = None
    iterations = 0

    for iterations in range(1, n_iter + 1):
        field = CharacteristicField.from_samples(t_nodes, np.maximum(u_arr, 0.0), rates, params.x0)
        mild = MildSolution.from_grid(field, rates, params, grid, rtol=rtol)
        i_rho = mild.moment_series(rates.rho)

        bind = params.tau * u_arr * p_arr
        unbind = params.sigma * b_arr
        nuc = params.alpha * np.maximum(u_arr, 0.0) ** params.n
        du = (
            params.lambda_u
            - params.gamma_u * u_arr
            - bind
            + unbind
            - params.n * nuc
            - u_arr * i_rho / params.epsilon
        )
        dp = params.lambda_p - params.gamma_p * p_arr - bind + unbind
        db = bind - (params.sigma + params.delta) * b_arr

        new_u = u0 + _cumtrapz(du, t_nodes)
        new_p = p0 + _cumtrapz(dp, t_nodes)
        new_b = b0 + _cumtrapz(db, t_nodes)

        delta = max(
            float(np.max(np.abs(new_u - u_arr))),
            float(np.max(np.abs(new_p - p_arr))),
            float(np.max(np.abs(new_b - b_arr))),
        )
        u_arr, p_arr, b_arr = new_u, new_p, new_b
        if deltas:
            ratios.append(delta / deltas[-1] if deltas[-1] > 0 else 0.0)
        deltas.append(delta)
        if len(ratios) >= 3 and all(r >= 1.0 for r in ratios[-3:]):
            raise ContractionError(
                f"Picard iterates stopped contracting (last ratios "
                f"{[f'{r:.3f}' for r in ratios[-3:]]}); shrink the horizon T = {T}"
            )
        if delta < tol:
            converged = True
            break

    final_field = CharacteristicField.from_samples(t_nodes, np.maximum(u_arr, 0.0), rates, params.x0)
    mild = MildSolution.from_grid(final_field, rates, params, grid, rtol=rtol)
    ones = lambda x: np.ones_like(np.asarray(x, dtype=float))  # noqa: E731
    ident = lambda x: np.asarray(x, dtype=float)  # noqa: E731
    return PicardResult(
        t_nodes=t_nodes,
        u=u_arr,
        p=p_arr,
        b=b_arr,
        m0=mild.moment_series(ones),
        m1=mild.moment_series(ident),
        iterations=iterations,
        deltas=deltas,
        ratios=ratios,
        converged=converged,
        mild=mild,
    )


# ---------------------------------------------------------------------------
# CSV export


def write_density_csv(path, run: CoupledRun) -> None:
    """Write stored density snapshots as `t,x_center,f_avg` rows."""
    centers = run.x_centers
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,x_center,f_avg\n")
        snapshots = run.densities or [(run.times[-1], run.final_state.grid.f_avg)]
        for t, f in snapshots:
            for xc, fv in zip(centers, f):
                fh.write(f"{t:.17g},{xc:.17g},{fv:.17g}\n")


def write_moments_csv(path, run: CoupledRun) -> None:
    """Write the moments trajectory as `t,M0,M1,u,p,b` rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,M0,M1,u,p,b\n")
        for k in range(len(run.times)):
            fh.write(
                f"{run.times[k]:.17g},{run.m0[k]:.17g},{run.m1[k]:.17g},"
                f"{run.u[k]:.17g},{run.p[k]:.17g},{run.b[k]:.17g}\n"
            )
