"""Steady state, linearization, and stability certificates for the closure.

The positive equilibrium is the unique positive root of a scalar function Q;
it is located by sign-change bracketing plus bisection and polished with a
few Newton steps. Local stability is certified through the closed-form
characteristic coefficients a1..a4 (cross-checked against numerically
expanded eigenvalues) and, in the nucleation-free regime, global stability
through an explicit Lyapunov certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Parameters, RateModel
from .ode import rhs_function

__all__ = [
    "SteadyStateReport",
    "RouthHurwitz",
    "LyapunovCondition",
    "StabilityReport",
    "LyapunovConditionError",
    "BracketError",
    "q_evaluate",
    "q_derivative",
    "find_steady_state",
    "jacobian_at",
    "characteristic_coefficients",
    "routh_hurwitz",
    "eigenvalue_real_parts",
    "lyapunov_condition",
    "lyapunov_constants",
    "lyapunov_value",
    "stability_report",
]


class BracketError(RuntimeError):
    """Root bracketing failed; indicates invalid parameters or an internal bug."""


class LyapunovConditionError(ValueError):
    """The certificate's parameter condition does not hold."""


@dataclass(frozen=True)
class SteadyStateReport:
    """The positive equilibrium and the algebra that produced it."""

    u_inf: float
    A_inf: float
    p_inf: float
    b_inf: float
    tau_star: float
    a_coeff: float
    q_root_bracket: tuple[float, float]
    residual: float
    m_inf: float = 0.0  # slaved plaque-mass equilibrium

    def as_state(self) -> np.ndarray:
        """Full 5-component equilibrium in (A, u, p, b, M) layout."""
        return np.array([self.A_inf, self.u_inf, self.p_inf, self.b_inf, self.m_inf])


@dataclass(frozen=True)
class RouthHurwitz:
    """Sign conditions on the quartic characteristic coefficients."""

    all_positive: bool
    margin: float

    @property
    def stable(self) -> bool:
        return self.all_positive and self.margin > 0.0


@dataclass(frozen=True)
class LyapunovCondition:
    """The three chained quantities whose ordering enables the certificate."""

    value1: float  # 1 + 2(delta+gamma_u)/sigma
    value2: float  # delta / (2 gamma_p)
    value3: float  # gamma_p / sigma

    @property
    def holds(self) -> bool:
        return self.value1 > self.value2 > self.value3

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.value1, self.value2, self.value3)


@dataclass(frozen=True)
class StabilityReport:
    """Linearization data at the equilibrium plus certificate summaries."""

    jacobian: np.ndarray
    a1: float
    a2: float
    a3: float
    a4: float
    rh_margin: float
    eigen_real_parts: np.ndarray
    lyapunov_condition: LyapunovCondition

    @property
    def coefficients(self) -> tuple[float, float, float, float]:
        return (self.a1, self.a2, self.a3, self.a4)

    @property
    def locally_stable(self) -> bool:
        return bool(np.all(self.eigen_real_parts < 0.0))


def _q_terms(params: Parameters, rates: RateModel, strict_alpha0_quadratic: bool):
    """Coefficients of Q(x) = gp*lu + a*x - P(x) as (constant, a, P monomials)."""
    ts = params.tau_star
    a = ts * (params.lambda_u - params.lambda_p) - params.gamma_u * params.gamma_p
    alpha, n = params.alpha, params.n
    rho, mu = rates.rho0, rates.mu0
    # One historical variant of the nucleation-free quadratic swaps the
    # gamma_u factor for lambda_u; keep it reachable for comparison runs.
    quad = ts * (params.lambda_u if strict_alpha0_quadratic else params.gamma_u)
    monomials = (
        (quad, 2),
        (alpha * params.gamma_p * n, n),
        (alpha * ts * n + rho * params.gamma_p * alpha / mu, n + 1),
        (rho * ts * alpha / mu, n + 2),
    )
    return params.gamma_p * params.lambda_u, a, monomials


def q_evaluate(
    x: float,
    params: Parameters,
    rates: RateModel,
    strict_alpha0_quadratic: bool = False,
) -> float:
    """The root function Q whose unique positive zero is u_inf."""
    if x < 0:
        raise ValueError(f"Q is only defined for x >= 0, got {x}")
    const, a, monomials = _q_terms(params, rates, strict_alpha0_quadratic)
    p_val = 0.0
    for coeff, power in monomials:
        p_val += coeff * x**power
    return const + a * x - p_val


def q_derivative(
    x: float,
    params: Parameters,
    rates: RateModel,
    strict_alpha0_quadratic: bool = False,
) -> float:
    """dQ/dx, used by the Newton polish."""
    _, a, monomials = _q_terms(params, rates, strict_alpha0_quadratic)
    dp = 0.0
    for coeff, power in monomials:
        dp += coeff * power * x ** (power - 1)
    return a - dp


def find_steady_state(
    params: Parameters,
    rates: RateModel,
    tol: float = 1e-12,
    strict_alpha0_quadratic: bool = False,
) -> SteadyStateReport:
    """Locate the unique positive equilibrium of the closed system.

    Q(0) > 0 always, and Q is eventually negative, so a sign-change bracket
    is found by doubling; bisection shrinks it below ``tol`` and at most
    five Newton steps polish the root without leaving the bracket. The
    residual reported is the max absolute component of the soluble
    right-hand side at the assembled equilibrium.
    """
    if not rates.is_constant:
        raise ValueError("the equilibrium algebra requires constant rates")

    def q(x):
        return q_evaluate(x, params, rates, strict_alpha0_quadratic)

    lo, hi = 0.0, 1.0
    doublings = 0
    while q(hi) > 0.0:
        lo = hi
        hi *= 2.0
        doublings += 1
        if doublings > 200:
            raise BracketError(
                "no sign change found within 200 doublings; Q should always "
                "turn negative for valid parameters"
            )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if q(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    bracket = (lo, hi)

    root = 0.5 * (lo + hi)
    for _ in range(5):
        dq = q_derivative(root, params, rates, strict_alpha0_quadratic)
        if dq == 0.0:
            break
        step = q(root) / dq
        candidate = root - step
        if not (lo <= candidate <= hi):
            break
        if candidate == root:
            break
        root = candidate

    ts = params.tau_star
    a = ts * (params.lambda_u - params.lambda_p) - params.gamma_u * params.gamma_p
    u_inf = root
    A_inf = params.alpha / rates.mu0 * u_inf**params.n
    p_inf = params.lambda_p / (ts * u_inf + params.gamma_p)
    b_inf = params.lambda_p * (params.tau - ts) * u_inf / (params.sigma * (ts * u_inf + params.gamma_p))
    m_inf = (params.n * params.alpha * u_inf**params.n + rates.rho0 * u_inf * A_inf) / rates.mu0

    state = np.array([A_inf, u_inf, p_inf, b_inf, m_inf])
    deriv = rhs_function(params, rates)(0.0, state)
    residual = float(np.max(np.abs(deriv[:4])))

    return SteadyStateReport(
        u_inf=u_inf,
        A_inf=A_inf,
        p_inf=p_inf,
        b_inf=b_inf,
        tau_star=ts,
        a_coeff=a,
        q_root_bracket=bracket,
        residual=residual,
        m_inf=m_inf,
    )


def jacobian_at(ss: SteadyStateReport, params: Parameters, rates: RateModel) -> np.ndarray:
    """4x4 linearization of the (A, u, p, b) subsystem at the equilibrium.

    The (2,2) entry is the full derivative of the u-equation,
    -(gamma_u + tau*p_inf + alpha*n^2*u_inf^(n-1) + rho*A_inf), so that
    -trace equals the first characteristic coefficient.
    """
    tau, sig, dlt = params.tau, params.sigma, params.delta
    alpha, n = params.alpha, params.n
    rho, mu = rates.rho0, rates.mu0
    u, p, A = ss.u_inf, ss.p_inf, ss.A_inf
    return np.array(
        [
            [-mu, alpha * n * u ** (n - 1), 0.0, 0.0],
            [-rho * u, -(params.gamma_u + tau * p + alpha * n**2 * u ** (n - 1) + rho * A), -tau * u, sig],
            [0.0, -tau * p, -(params.gamma_p + tau * u), sig],
            [0.0, tau * p, tau * u, -(sig + dlt)],
        ]
    )


def characteristic_coefficients(
    ss: SteadyStateReport, params: Parameters, rates: RateModel
) -> tuple[float, float, float, float]:
    """Closed-form coefficients of det(lambda*I - D) = l^4 + a1 l^3 + ... + a4."""
    gu, gp = params.gamma_u, params.gamma_p
    tau, sig, dlt = params.tau, params.sigma, params.delta
    alpha, n = params.alpha, params.n
    rho, mu = rates.rho0, rates.mu0
    lp = params.lambda_p
    u = ss.u_inf
    ts = params.tau_star

    pterm = tau * lp / (ts * u + gp)
    g_core = gu + alpha * n**2 * u ** (n - 1) + rho * alpha / mu * u**n

    a1 = mu + g_core + pterm + gp + tau * u + sig + dlt
    a2 = (
        (mu + g_core) * (gp + tau * u + sig + dlt)
        + gp * sig
        + (gp + tau * u) * dlt
        + mu * (g_core + pterm)
        + rho * alpha * n * u**n
        + tau * (gp + dlt) * lp / (ts * u + gp)
    )
    a3 = (
        (mu + g_core) * (gp * sig + (gp + tau * u) * dlt)
        + (gp * dlt + (gp + dlt) * mu) * pterm
        + (mu * g_core + rho * alpha * n * u**n) * (gp + tau * u + sig + dlt)
    )
    a4 = mu * gp * dlt * pterm + (mu * g_core + rho * alpha * n * u**n) * (
        gp * sig + (gp + tau * u) * dlt
    )
    return (a1, a2, a3, a4)


def routh_hurwitz(coeffs) -> RouthHurwitz:
    """Quartic stability test: all coefficients positive and
    a1*a2*a3 - a3^2 - a1^2*a4 > 0."""
    a1, a2, a3, a4 = (float(c) for c in coeffs)
    for c in (a1, a2, a3, a4):
        if not math.isfinite(c):
            raise ValueError("characteristic coefficients must be finite")
    margin = a1 * a2 * a3 - a3**2 - a1**2 * a4
    return RouthHurwitz(all_positive=(a1 > 0 and a2 > 0 and a3 > 0 and a4 > 0), margin=margin)


def eigenvalue_real_parts(jacobian: np.ndarray) -> np.ndarray:
    """Sorted real parts of the linearization spectrum (numerical cross-check)."""
    return np.sort(np.linalg.eigvals(np.asarray(jacobian, dtype=float)).real)


def lyapunov_condition(params: Parameters) -> LyapunovCondition:
    """The chained inequality 1 + 2(delta+gamma_u)/sigma > delta/(2 gamma_p)
    > gamma_p/sigma enabling the global certificate."""
    return LyapunovCondition(
        value1=1.0 + 2.0 * (params.delta + params.gamma_u) / params.sigma,
        value2=params.delta / (2.0 * params.gamma_p),
        value3=params.gamma_p / params.sigma,
    )


def _lyap_ingredients(ss: SteadyStateReport, params: Parameters, rates: RateModel):
    gu, gp = params.gamma_u, params.gamma_p
    sig, dlt, tau = params.sigma, params.delta, params.tau
    rho, mu = rates.rho0, rates.mu0
    d2g = dlt / (2.0 * gp)
    R = rho * ss.p_inf / (gu + rho * ss.A_inf + mu)
    W = 1.0 + 2.0 * (dlt + gu) / sig
    return gu, gp, sig, dlt, tau, rho, mu, d2g, R, W


def lyapunov_constants(
    ss: SteadyStateReport, params: Parameters, rates: RateModel
) -> tuple[float, float, float]:
    """(T1, T2, s1): the certificate weights, evaluated term by term."""
    gu, gp, sig, dlt, tau, rho, mu, d2g, R, W = _lyap_ingredients(ss, params, rates)
    u_inf = ss.u_inf

    T1 = (
        rho**2 * dlt * u_inf**2 * (1.0 + 2.0 * (1.0 + dlt) / sig) / (8.0 * mu * gp)
        + (gp + mu) ** 2 * d2g**2 / (4.0 * gp * mu)
        + ((dlt + mu) * (R + 1.0) + (sig + dlt + mu) * rho / tau + 2.0 * rho * u_inf) ** 2
        / (8.0 * mu * sig)
    )

    den = (W - d2g) * (d2g * sig / gp - 1.0)
    T2 = (
        d2g**2 * R**2 * ((2.0 * sig + dlt) / (2.0 * gp)) / den
        + d2g**2 * R * (2.0 + 4.0 * (rho / tau) * (dlt + gu) / sig) / den
        + d2g**3 * ((rho / tau) * (2.0 + rho / tau) + sig / gp + 2.0 * (dlt + gu) / gp) / den
        + d2g**2 * (1.0 + rho / tau) * W * (rho / tau) / den
        + d2g * R**2 / W
        + W * d2g**2 / (W - d2g)
    )
    return T1, T2, max(T1, T2)


def lyapunov_value(
    state, ss: SteadyStateReport, params: Parameters, rates: RateModel
) -> tuple[float, float]:
    """Evaluate the global-stability certificate (Phi, Phi_dot) at a state.

    Only valid in the nucleation-free regime (alpha = 0) under the chained
    parameter condition; both are checked and a diagnostic listing the three
    condition values is raised otherwise. Phi and its displayed derivative
    are evaluated exactly as written, including the state-dependent
    coefficient rho*(A_inf + theta1) inside the quadratic form.
    """
    if params.alpha != 0.0:
        raise LyapunovConditionError(
            f"the certificate requires alpha = 0, got alpha = {params.alpha}"
        )
    cond = lyapunov_condition(params)
    if not cond.holds:
        raise LyapunovConditionError(
            "parameter condition violated: need "
            f"{cond.value1:.6g} > {cond.value2:.6g} > {cond.value3:.6g} "
            "(1 + 2(delta+gamma_u)/sigma > delta/(2 gamma_p) > gamma_p/sigma)"
        )

    gu, gp, sig, dlt, tau, rho, mu, d2g, R, W = _lyap_ingredients(ss, params, rates)
    _, _, s1 = lyapunov_constants(ss, params, rates)

    y = np.asarray(state, dtype=float)
    A, u, p, b = (float(v) for v in y[:4])
    th1 = A - ss.A_inf
    th2 = u - ss.u_inf
    th3 = p - ss.p_inf
    th4 = b - ss.b_inf

    phi = (
        0.5 * (2.0 * gp / dlt) * s1 * th1**2
        + 0.5 * (1.0 + 2.0 * (dlt + gu + rho * (ss.A_inf + th1)) / sig) * th2**2
        + 0.5 * (2.0 * gp / dlt) * th3**2
        + 0.5 * (sig / gp) * th4**2
        + R * th1 * th2
        + th1 * th3
        + th2 * th3
        + (R + 1.0 + rho / tau) * th1 * th4
        + 2.0 * th2 * th4
        + (2.0 * gp / dlt) * th3 * th4
    )

    g_state = gu + rho * (ss.A_inf + th1)
    phi_dot = (
        -(mu * s1 + rho * u * (rho * d2g * ss.p_inf) / (gu + rho * ss.A_inf + mu)) * th1**2
        - rho * ss.u_inf * (1.0 + 2.0 * (g_state + dlt) / sig) * d2g * th1 * th2
        - (2.0 * (g_state + tau * p) * (g_state + dlt) / sig + g_state) * d2g * th2**2
        - ((dlt + mu) * (R + 1.0) + (sig + dlt + mu) * rho / tau + 2.0 * rho * ss.u_inf)
        * d2g
        * th1
        * th4
        - (dlt * tau * u / (2.0 * gp) + gp) * th3**2
        - dlt * (sig / gp * d2g) * th4**2
        - (gp + mu) * d2g * th1 * th3
    )
    return float(phi), float(phi_dot)


def stability_report(
    params: Parameters, rates: RateModel, ss: SteadyStateReport | None = None
) -> StabilityReport:
    """Assemble the full local/global stability summary at the equilibrium."""
    if ss is None:
        ss = find_steady_state(params, rates)
    jac = jacobian_at(ss, params, rates)
    a1, a2, a3, a4 = characteristic_coefficients(ss, params, rates)
    rh = routh_hurwitz((a1, a2, a3, a4))
    return StabilityReport(
        jacobian=jac,
        a1=a1,
        a2=a2,
        a3=a3,
        a4=a4,
        rh_margin=rh.margin,
        eigen_real_parts=eigenvalue_real_parts(jac),
        lyapunov_condition=lyapunov_condition(params),
    )
