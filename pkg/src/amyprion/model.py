"""Model constants, size-dependent rate laws, and hypothesis validation.

Everything downstream (ODE closure, equilibrium algebra, transport solver)
consumes the two immutable objects defined here: :class:`Parameters` for the
scalar rate constants and :class:`RateModel` for the size-dependent
polymerization/degradation laws.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, fields

import numpy as np

__all__ = [
    "Parameters",
    "RateModel",
    "HypothesisCheck",
    "ValidationReport",
    "ConfigError",
    "validate",
    "nucleation",
    "read_config",
    "load_model",
    "save_model",
    "model_digest",
    "PARAM_KEYS",
]

#: Recognized keys of the flat key=value parameter file, in canonical order.
PARAM_KEYS = (
    "lambda_u",
    "gamma_u",
    "lambda_p",
    "gamma_p",
    "tau",
    "sigma",
    "delta",
    "alpha",
    "n",
    "epsilon",
    "x0",
    "rate_kind",
    "rho0",
    "mu0",
    "rho_c",
    "theta",
)


class ConfigError(ValueError):
    """Raised for malformed or inconsistent parameter files."""


@dataclass(frozen=True)
class Parameters:
    """Scalar rate constants of the soluble compartments plus nucleation.

    All rates are per day; concentrations are in arbitrary mass units.

    Attributes
    ----------
    lambda_u, gamma_u : float
        Source and degradation rates of free oligomers.
    lambda_p, gamma_p : float
        Source and degradation rates of the membrane protein.
    tau, sigma, delta : float
        Binding, unbinding, and degradation rates of the bound complex.
    alpha : float
        Nucleation rate constant; ``alpha = 0`` switches off plaque
        formation entirely.
    n : int
        Number of oligomers in a critical plaque (integer >= 1).
    epsilon : float
        Mass of a single oligomer; defaults to 1.
    x0 : float
        Critical plaque size. Defaults to ``epsilon * n`` and must equal it.
    """

    lambda_u: float
    gamma_u: float
    lambda_p: float
    gamma_p: float
    tau: float
    sigma: float
    delta: float
    alpha: float
    n: int = 1
    epsilon: float = 1.0
    x0: float | None = None

    def __post_init__(self):
        if self.x0 is None:
            object.__setattr__(self, "x0", self.epsilon * self.n)

    @property
    def tau_star(self) -> float:
        """Effective binding rate tau * delta / (delta + sigma)."""
        return self.tau * self.delta / (self.delta + self.sigma)

    @property
    def total_source(self) -> float:
        """Combined inflow lambda_u + lambda_p feeding the soluble pool."""
        return self.lambda_u + self.lambda_p

    def replace(self, **changes) -> "Parameters":
        """Return a copy with the given fields replaced."""
        current = {f.name: getattr(self, f.name) for f in fields(self)}
        current.update(changes)
        return Parameters(**current)


class RateModel:
    """Size-dependent polymerization rate rho(x) and death rate mu(x).

    Two families are supported: constant rates (used by the ODE closure)
    and a sublinear power law ``rho(x) = c * x**theta`` with constant mu
    (used by the transport solver). Instances are immutable.
    """

    __slots__ = ("kind", "rho0", "mu0", "rho_c", "theta")

    def __init__(self, kind, rho0=None, mu0=None, rho_c=None, theta=None):
        if kind not in ("constant", "power_law"):
            raise ValueError(f"unknown rate kind {kind!r}")
        if mu0 is None:
            raise ValueError("mu0 is required")
        if kind == "constant" and rho0 is None:
            raise ValueError("constant rates require rho0")
        if kind == "power_law" and (rho_c is None or theta is None):
            raise ValueError("power-law rates require rho_c and theta")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "rho0", float(rho0) if rho0 is not None else None)
        object.__setattr__(self, "mu0", float(mu0))
        object.__setattr__(self, "rho_c", float(rho_c) if rho_c is not None else None)
        object.__setattr__(self, "theta", float(theta) if theta is not None else None)

    def __setattr__(self, name, value):
        raise AttributeError("RateModel is immutable")

    def __repr__(self):
        if self.kind == "constant":
            return f"RateModel.constant(rho0={self.rho0}, mu0={self.mu0})"
        return f"RateModel.power_law(c={self.rho_c}, theta={self.theta}, mu0={self.mu0})"

    def __eq__(self, other):
        if not isinstance(other, RateModel):
            return NotImplemented
        return (self.kind, self.rho0, self.mu0, self.rho_c, self.theta) == (
            other.kind,
            other.rho0,
            other.mu0,
            other.rho_c,
            other.theta,
        )

    def __hash__(self):
        return hash((self.kind, self.rho0, self.mu0, self.rho_c, self.theta))

    @classmethod
    def constant(cls, rho0: float, mu0: float) -> "RateModel":
        """Constant rho and mu (the regime of the closed ODE system)."""
        return cls("constant", rho0=rho0, mu0=mu0)

    @classmethod
    def power_law(cls, c: float, theta: float, mu0: float) -> "RateModel":
        """rho(x) = c * x**theta with constant death rate mu0."""
        return cls("power_law", mu0=mu0, rho_c=c, theta=theta)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def rho(self, x):
        """Polymerization rate at size x (scalar or array)."""
        if self.kind == "constant":
            return self.rho0 if np.isscalar(x) else np.full_like(np.asarray(x, float), self.rho0)
        return self.rho_c * np.asarray(x, float) ** self.theta if not np.isscalar(x) else self.rho_c * x**self.theta

    def rho_prime(self, x):
        """Derivative of rho at size x."""
        if self.kind == "constant":
            return 0.0 if np.isscalar(x) else np.zeros_like(np.asarray(x, float))
        if np.isscalar(x):
            return self.rho_c * self.theta * x ** (self.theta - 1.0)
        return self.rho_c * self.theta * np.asarray(x, float) ** (self.theta - 1.0)

    def mu(self, x):
        """Death/degradation rate at size x (constant for both families)."""
        return self.mu0 if np.isscalar(x) else np.full_like(np.asarray(x, float), self.mu0)

    def rho_prime_sup(self, x_lo: float, x_hi: float | None = None) -> float:
        """Supremum of |rho'| on [x_lo, x_hi] (or [x_lo, inf)).

        For the constant family this is 0; for a power law with
        theta <= 1 the derivative is nonincreasing, so the sup on
        [x_lo, inf) is attained at x_lo. theta > 1 needs a finite x_hi.
        """
        if self.kind == "constant":
            return 0.0
        if self.theta <= 1.0:
            return abs(self.rho_prime(x_lo))
        if x_hi is None:
            raise ValueError("rho' is unbounded on [x_lo, inf) for theta > 1")
        return max(abs(self.rho_prime(x_lo)), abs(self.rho_prime(x_hi)))

    def linear_bound(self, x0: float, x_hi: float | None = None) -> float:
        """Constant C with rho(x) <= C*x for x >= x0.

        Uses the explicit recipe C = 2*sup|rho'| + rho(x0)/x0 rather than a
        sharper numerical supremum, trading tightness for reproducibility.
        """
        return 2.0 * self.rho_prime_sup(x0, x_hi) + self.rho(x0) / x0


@dataclass(frozen=True)
class HypothesisCheck:
    """Outcome of a single structural-hypothesis check."""

    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    """Aggregate of all hypothesis checks plus the linear growth bound."""

    checks: tuple[HypothesisCheck, ...]
    linear_bound_C: float | None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[HypothesisCheck]:
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = []
        for c in self.checks:
            lines.append(f"[{'ok' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
        if self.linear_bound_C is not None:
            lines.append(f"linear_bound_C = {self.linear_bound_C:.17g}")
        return "\n".join(lines)


def validate(
    params: Parameters,
    rates: RateModel,
    *,
    x_max_validation: float | None = None,
    samples: int = 2048,
) -> ValidationReport:
    """Check every structural hypothesis; report failures, never repair.

    Positivity of the seven soluble rates, integrality of n, the critical
    size consistency x0 = epsilon*n, pointwise nonnegativity of rho and mu
    on a dense sample, the power-law exponent range, and the linear growth
    bound rho(x) <= C*x are all verified. ``x_max_validation`` bounds the
    sampled interval (default 1e4 * x0).
    """
    checks: list[HypothesisCheck] = []

    def add(name, passed, detail):
        checks.append(HypothesisCheck(name, bool(passed), detail))

    for name in ("lambda_u", "gamma_u", "lambda_p", "gamma_p", "tau", "sigma", "delta"):
        v = getattr(params, name)
        add(f"positive_rate:{name}", v > 0, f"{name} = {v}")

    add("nonnegative_alpha", params.alpha >= 0, f"alpha = {params.alpha}")
    n_ok = isinstance(params.n, int) and not isinstance(params.n, bool) and params.n >= 1
    add("integer_n", n_ok, f"n = {params.n!r}")
    add("positive_epsilon", params.epsilon > 0, f"epsilon = {params.epsilon}")
    x0_ok = params.x0 > 0 and math.isclose(params.x0, params.epsilon * params.n, rel_tol=1e-12)
    add("critical_size", x0_ok, f"x0 = {params.x0}, epsilon*n = {params.epsilon * params.n}")

    add("positive_mu", rates.mu0 >= 0, f"mu0 = {rates.mu0}")
    if rates.kind == "constant":
        add("nonnegative_rho", rates.rho0 >= 0, f"rho0 = {rates.rho0}")
    else:
        add("nonnegative_rho_c", rates.rho_c >= 0, f"rho_c = {rates.rho_c}")
        theta_ok = 0.0 < rates.theta < 1.0
        add("exponent_range", theta_ok, f"theta = {rates.theta} (must lie in (0,1))")

    linear_bound_C = None
    if params.x0 > 0:
        x_hi = x_max_validation if x_max_validation is not None else 1e4 * params.x0
        xs = np.linspace(params.x0, x_hi, samples)
        rho_ok = True
        growth_ok = True
        if rates.kind == "power_law" and not (0.0 < rates.theta < 1.0):
            # growth bound is only meaningful for the sublinear family
            add("linear_growth", False, "skipped: exponent outside (0,1)")
        else:
            rho_vals = rates.rho(xs)
            mu_vals = rates.mu(xs)
            rho_ok = bool(np.all(rho_vals >= 0) and np.all(mu_vals >= 0))
            add("pointwise_nonnegative", rho_ok, f"sampled on [{params.x0}, {x_hi}]")
            linear_bound_C = rates.linear_bound(params.x0, x_hi)
            growth_ok = bool(np.all(rho_vals <= linear_bound_C * xs * (1 + 1e-12)))
            add(
                "linear_growth",
                growth_ok,
                f"C = {linear_bound_C:.17g}; rho(x) <= C*x on sample",
            )

    add("nucleation_origin", nucleation(0.0, params) == 0.0, "N(0) = 0")

    return ValidationReport(checks=tuple(checks), linear_bound_C=linear_bound_C)


def nucleation(u: float, params: Parameters) -> float:
    """Nucleation rate alpha * u**n of new critical-size plaques.

    Negative concentrations are rejected; N(0) is exactly 0.
    """
    if u < 0:
        raise ValueError(f"negative oligomer concentration u = {u}")
    return params.alpha * u**params.n


# ---------------------------------------------------------------------------
# flat key=value parameter files


def read_config(path) -> dict[str, str]:
    """Parse a flat key=value file into a string dict.

    Blank lines and ``#`` comments are ignored; later keys override
    earlier ones. Unknown keys raise :class:`ConfigError`.
    """
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in PARAM_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    return out


def _get_float(cfg: dict[str, str], key: str, path) -> float:
    if key not in cfg:
        raise ConfigError(f"{path}: missing required key {key!r}")
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"{path}: key {key!r} is not a number: {cfg[key]!r}") from exc


def load_model(path) -> tuple[Parameters, RateModel]:
    """Load (Parameters, RateModel) from a flat key=value file.

    Required keys: the seven soluble rates, alpha, n, rate_kind, mu0, and
    the rho keys matching rate_kind (rho0 for constant; rho_c and theta
    for power_law). epsilon defaults to 1 and x0 to epsilon*n.
    """
    cfg = read_config(path)

    scalars = {k: _get_float(cfg, k, path) for k in ("lambda_u", "gamma_u", "lambda_p", "gamma_p", "tau", "sigma", "delta", "alpha")}
    if "n" not in cfg:
        raise ConfigError(f"{path}: missing required key 'n'")
    try:
        n = int(cfg["n"])
    except ValueError as exc:
        raise ConfigError(f"{path}: key 'n' must be an integer: {cfg['n']!r}") from exc
    epsilon = float(cfg.get("epsilon", 1.0))
    x0 = float(cfg["x0"]) if "x0" in cfg else None
    params = Parameters(n=n, epsilon=epsilon, x0=x0, **scalars)

    kind = cfg.get("rate_kind", "constant").strip().lower()
    mu0 = _get_float(cfg, "mu0", path)
    if kind == "constant":
        rates = RateModel.constant(rho0=_get_float(cfg, "rho0", path), mu0=mu0)
    elif kind == "power_law":
        rates = RateModel.power_law(c=_get_float(cfg, "rho_c", path), theta=_get_float(cfg, "theta", path), mu0=mu0)
    else:
        raise ConfigError(f"{path}: rate_kind must be 'constant' or 'power_law', got {kind!r}")
    return params, rates


def save_model(path, params: Parameters, rates: RateModel) -> None:
    """Write (Parameters, RateModel) back to the flat key=value format."""
    lines = []
    for key in ("lambda_u", "gamma_u", "lambda_p", "gamma_p", "tau", "sigma", "delta", "alpha"):
        lines.append(f"{key} = {getattr(params, key):.17g}")
    lines.append(f"n = {params.n}")
    lines.append(f"epsilon = {params.epsilon:.17g}")
    lines.append(f"x0 = {params.x0:.17g}")
    lines.append(f"rate_kind = {rates.kind}")
    lines.append(f"mu0 = {rates.mu0:.17g}")
    if rates.kind == "constant":
        lines.append(f"rho0 = {rates.rho0:.17g}")
    else:
        lines.append(f"rho_c = {rates.rho_c:.17g}")
        lines.append(f"theta = {rates.theta:.17g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def model_digest(params: Parameters, rates: RateModel) -> str:
    """Short stable hash of the full model definition, for provenance."""
    parts = [f"{f.name}={getattr(params, f.name)!r}" for f in fields(params)]
    parts.append(repr(rates))
    return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]
