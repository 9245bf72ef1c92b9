"""Conservation laws, containment bounds, and solver cross-validation.

Each check measures a signed worst-case residual against a stated
tolerance and reports both, never asserting; the caller (tests, CLI)
decides what a failure means. Differentiation is done on the stored
samples rather than by re-querying vector fields, so a check validates
the recorded trajectory itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pde
from .model import Parameters, RateModel, model_digest
from .ode import Trajectory, integrate, stable_set_bound, weighted_total

__all__ = [
    "CheckReport",
    "prion_balance",
    "oligomer_balance",
    "moment_closure_check",
    "stable_set_check",
    "mass_estimate_check",
    "contraction_gap_check",
    "run_all",
]


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one diagnostic: worst signed residual vs. tolerance."""

    name: str
    max_violation: float
    tolerance: float
    passed: bool
    context: dict

    def __str__(self):
        status = "ok" if self.passed else "FAIL"
        return (
            f"[{status}] {self.name}: max_violation = {self.max_violation:.6g}, "
            f"tolerance = {self.tolerance:.6g}"
        )


def _report(name: str, max_violation: float, tolerance: float, context: dict) -> CheckReport:
    return CheckReport(
        name=name,
        max_violation=float(max_violation),
        tolerance=float(tolerance),
        passed=bool(max_violation <= tolerance),
        context=context,
    )


def _derivative(t: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Second-order derivative estimates at interior samples.

    Three-point stencil exact for quadratics on a nonuniform mesh.
    """
    if len(t) < 3:
        raise ValueError("need at least 3 samples to differentiate")
    h1 = t[1:-1] - t[:-2]
    h2 = t[2:] - t[1:-1]
    return (
        (-h2 / (h1 * (h1 + h2))) * v[:-2]
        + ((h2 - h1) / (h1 * h2)) * v[1:-1]
        + (h1 / (h2 * (h1 + h2))) * v[2:]
    )


def _series(run) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray | None]:
    """(times, u, p, b) from either a Trajectory or a CoupledRun."""
    if isinstance(run, Trajectory):
        return run.times, run.column("u"), run.column("p"), run.column("b")
    return run.times, run.u, run.p, run.b


def prion_balance(run, params: Parameters) -> CheckReport:
    """Total prion content obeys d/dt(p+b) = lambda_p - gamma_p*p - delta*b.

    Holds algebraically for both the ODE closure and the coupled system,
    so the measured residual is pure discretization error: second order in
    the sample spacing.
    """
    t, _, p, b = _series(run)
    total = p + b
    expected = params.lambda_p - params.gamma_p * p - params.delta * b
    residual = _derivative(t, total) - expected[1:-1]
    dt_max = float(np.max(np.diff(t)))
    tol = max(1e-6, 10.0 * dt_max**2)
    return _report(
        "prion_balance",
        np.max(np.abs(residual)) if len(residual) else 0.0,
        tol,
        {"samples": len(t), "dt_max": dt_max},
    )


def oligomer_balance(run: pde.CoupledRun, params: Parameters, rates: RateModel) -> CheckReport:
    """Total oligomer content (free + bound + plaque mass) balance.

    d/dt(b + u + M1/eps) should equal
    lambda_u - gamma_u*u - delta*b - mu*M1/eps, corrected by the mass flux
    leaving through the truncation edge. First-order accurate in the cell
    width, so the tolerance scales with dx.
    """
    eps = params.epsilon
    total = run.b + run.u + run.m1 / eps
    mu_m1 = rates.mu0 * run.m1
    expected = (
        params.lambda_u
        - params.gamma_u * run.u
        - params.delta * run.b
        - mu_m1 / eps
        - run.outflow_mass_rate / eps
    )
    residual = _derivative(run.times, total) - expected[1:-1]
    dx = float(np.max(run.final_state.grid.dx))
    scale = max(1.0, float(np.max(np.abs(expected))))
    tol = max(1e-6, 5.0 * dx * scale)
    return _report(
        "oligomer_balance",
        np.max(np.abs(residual)) if len(residual) else 0.0,
        tol,
        {"samples": len(run.times), "dx": dx, "scale": scale},
    )


def moment_closure_check(
    params: Parameters,
    rates: RateModel,
    initial: pde.CoupledState,
    T: float,
    tolerance: float = 0.01,
    ode_tol: float = 1e-10,
    **simulate_kw,
) -> CheckReport:
    """Grid moments vs. the closed ODE system, constant rates only.

    The grid's zeroth and first moments seed (A, M) of the closure; both
    solvers then run to T and the worst relative deviation over time in
    (A, M, u, p, b) is reported.
    """
    if not rates.is_constant:
        raise ValueError("the moment closure only holds for constant rates")
    grid = initial.grid
    a0 = grid.moment(0.0)
    m0 = grid.moment(1.0)
    run = pde.simulate_coupled(initial, T, params, rates, **simulate_kw)
    traj = integrate(
        np.array([a0, initial.u, initial.p, initial.b, m0]),
        params,
        rates,
        T,
        tol=ode_tol,
    )
    ode_cmp = traj.sample(run.times - initial.t)  # columns (A, u, p, b, M)
    pde_cmp = np.column_stack((run.m0, run.u, run.p, run.b, run.m1))
    scales = np.maximum(np.max(np.abs(ode_cmp), axis=0), 1e-12)
    deviations = np.max(np.abs(pde_cmp - ode_cmp), axis=0) / scales
    names = ("A", "u", "p", "b", "M")
    return _report(
        "moment_closure",
        float(np.max(deviations)),
        tolerance,
        {
            "cells": grid.n_cells,
            "T": T,
            "per_quantity": dict(zip(names, (float(d) for d in deviations))),
        },
    )


def stable_set_check(
    traj: Trajectory,
    params: Parameters,
    rates: RateModel,
    initial=None,
    rel_tolerance: float = 1e-6,
) -> CheckReport:
    """Weighted total n*A + u + p + 2b stays inside the invariant region."""
    y0 = np.asarray(initial if initial is not None else traj.states[0], dtype=float)
    bound = stable_set_bound(y0, params, rates)
    totals = np.array([weighted_total(y, params.n) for y in traj.states])
    worst = float(np.max(totals - bound))
    return _report(
        "stable_set",
        worst,
        rel_tolerance * bound,
        {"bound": bound, "samples": len(traj.times)},
    )


def _cumtrapz(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(t))
    return out


def mass_estimate_check(
    run: pde.CoupledRun, params: Parameters, rates: RateModel, rel_tolerance: float = 1e-6
) -> CheckReport:
    """Plaque mass vs. its exponential a-priori envelope.

    ∫x f at time t (plus what already left the truncated domain) must stay
    below exp(A_bound*t) * (initial mass + x0 * cumulative nucleation).
    """
    field = pde.CharacteristicField.from_samples(run.times, run.u, rates, params.x0)
    nuc = params.alpha * run.u**params.n
    cum_nuc = _cumtrapz(nuc, run.times)
    elapsed = run.times - run.times[0]
    envelope = np.exp(field.A_bound * elapsed) * (run.m1[0] + params.x0 * cum_nuc)
    lhs = run.m1 + run.outflow_mass
    worst = float(np.max(lhs - envelope))
    return _report(
        "mass_estimate",
        worst,
        rel_tolerance * max(1.0, float(np.max(envelope))),
        {"A_bound": field.A_bound, "samples": len(run.times)},
    )


def contraction_gap_check(
    initial: pde.CoupledState,
    T: float,
    params: Parameters,
    rates: RateModel,
    *,
    u_factor: float = 1.1,
    n_steps: int | None = None,
    slack: float = 2.0,
) -> CheckReport:
    """Density distance between two runs obeys the continuity estimate.

    Two coupled runs share everything but the initial soluble level; the
    L1(x dx) distance between their densities must stay below the sum of
    the accumulated-distance term and the Lipschitz-in-u source term, with
    the decay contribution dropped (it only tightens the bound) and a
    numerical slack factor.
    """
    second = initial.copy()
    second.u = initial.u * u_factor
    run1 = pde.simulate_coupled(initial, T, params, rates, n_steps=n_steps, store_density=True)
    run2 = pde.simulate_coupled(
        second, T, params, rates, n_steps=len(run1.times) - 1, store_density=True
    )
    t = run1.times
    xc = run1.x_centers
    dxw = run1.final_state.grid.dx
    dist = np.array(
        [
            float(np.sum(xc * np.abs(f1 - f2) * dxw))
            for (_, f1), (_, f2) in zip(run1.densities, run2.densities)
        ]
    )
    field1 = pde.CharacteristicField.from_samples(t, run1.u, rates, params.x0)
    r_sup = max(float(np.max(run1.u)), float(np.max(run2.u)))
    lipschitz_n = params.alpha * params.n * r_sup ** (params.n - 1)
    c_lin = rates.linear_bound(params.x0)
    source = (lipschitz_n + c_lin * run2.m1) * np.abs(run1.u - run2.u)
    rhs = dist[0] + field1.A_bound * _cumtrapz(dist, t) + _cumtrapz(source, t)
    worst = float(np.max(dist - slack * rhs))
    scale = max(float(np.max(dist)), 1e-12)
    return _report(
        "contraction_gap",
        worst,
        1e-9 * scale,
        {"u_factor": u_factor, "samples": len(t), "max_distance": float(np.max(dist))},
    )


def run_all(
    params: Parameters,
    rates: RateModel,
    *,
    cells: int = 1000,
    T: float = 0.5,
    u0: float = 1.0,
    p0: float = 1.0,
    b0: float = 1.0,
    density_scale: float = 1.0,
) -> list[CheckReport]:
    """Standard diagnostic battery on one model configuration."""
    digest = model_digest(params, rates)
    reports: list[CheckReport] = []

    traj = integrate(np.array([0.0, u0, p0, b0, 0.0]), params, rates, 20.0, tol=1e-9)
    r = prion_balance(traj, params)
    reports.append(_with_digest(r, digest))
    reports.append(_with_digest(stable_set_check(traj, params, rates), digest))

    x_max = pde.default_x_max(params, rates, T, max(u0, params.lambda_u / params.gamma_u))
    # leave room for the initial tail too: beyond 9.2 decay lengths it holds
    # under 1e-4 of the mass, well inside the outflow warning threshold
    x_max = max(x_max, params.x0 + 9.2 * density_scale)
    grid = pde.PlaqueGrid.uniform(
        params.x0, x_max, cells, pde.exp_decay_density(density_scale, 1.0, params.x0)
    )
    state = pde.CoupledState(grid=grid, u=u0, p=p0, b=b0)
    run = pde.simulate_coupled(state, T, params, rates)
    reports.append(_with_digest(prion_balance(run, params), digest))
    reports.append(_with_digest(oligomer_balance(run, params, rates), digest))
    reports.append(_with_digest(mass_estimate_check(run, params, rates), digest))
    reports.append(
        _with_digest(moment_closure_check(params, rates, state, T, tolerance=0.02), digest)
    )
    return reports


def _with_digest(report: CheckReport, digest: str) -> CheckReport:
    ctx = dict(report.context)
    ctx["model"] = digest
    return CheckReport(
        name=report.name,
        max_violation=report.max_violation,
        tolerance=report.tolerance,
        passed=report.passed,
        context=ctx,
    )
