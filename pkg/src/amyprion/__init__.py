"""Oligomer-plaque aggregation dynamics: ODE closure, transport PDE, stability.

The package couples a five-component reaction system (plaque-mass proxy A,
oligomers u, normal protein p, bound complexes b, total mass M) to a
size-structured transport equation for the plaque density, with tools for
equilibrium location, linear and Lyapunov stability certificates, a
finite-volume coupled solver, mild-solution evaluation along
characteristics, and fixed-point (Picard) construction of solutions.
"""

from .model import (
    ConfigError,
    Parameters,
    RateModel,
    ValidationReport,
    load_model,
    model_digest,
    nucleation,
    read_config,
    save_model,
    validate,
)
from .ode import (
    OdeState,
    StableSetError,
    Trajectory,
    integrate,
    rhs,
    stable_set_bound,
    weighted_total,
    write_trajectory_csv,
)
from .pde import (
    CharacteristicCrossesBoundary,
    CharacteristicField,
    ContractionError,
    CoupledRun,
    CoupledState,
    MildSolution,
    PicardResult,
    PlaqueGrid,
    SingularInfluxError,
    exp_decay_density,
    mild_evaluate,
    picard_solve,
    simulate_coupled,
    step_coupled,
    trace_characteristic,
    write_density_csv,
    write_moments_csv,
)
from .rk import SolverError, StepUnderflowError, solve, solve_fixed
from .stability import (
    BracketError,
    LyapunovConditionError,
    RouthHurwitz,
    StabilityReport,
    SteadyStateReport,
    characteristic_coefficients,
    eigenvalue_real_parts,
    find_steady_state,
    jacobian_at,
    lyapunov_condition,
    lyapunov_constants,
    lyapunov_value,
    q_evaluate,
    routh_hurwitz,
    stability_report,
)
from .checks import (
    CheckReport,
    contraction_gap_check,
    mass_estimate_check,
    moment_closure_check,
    oligomer_balance,
    prion_balance,
    run_all,
    stable_set_check,
)
from .kernels import HAVE_COMPILED, IMPLEMENTATION, upwind_step

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Parameters",
    "RateModel",
    "ValidationReport",
    "load_model",
    "model_digest",
    "nucleation",
    "read_config",
    "save_model",
    "validate",
    "OdeState",
    "StableSetError",
    "Trajectory",
    "integrate",
    "rhs",
    "stable_set_bound",
    "weighted_total",
    "write_trajectory_csv",
    "CharacteristicCrossesBoundary",
    "CharacteristicField",
    "ContractionError",
    "CoupledRun",
    "CoupledState",
    "MildSolution",
    "PicardResult",
    "PlaqueGrid",
    "SingularInfluxError",
    "exp_decay_density",
    "mild_evaluate",
    "picard_solve",
    "simulate_coupled",
    "step_coupled",
    "trace_characteristic",
    "write_density_csv",
    "write_moments_csv",
    "SolverError",
    "StepUnderflowError",
    "solve",
    "solve_fixed",
    "BracketError",
    "LyapunovConditionError",
    "RouthHurwitz",
    "StabilityReport",
    "SteadyStateReport",
    "characteristic_coefficients",
    "eigenvalue_real_parts",
    "find_steady_state",
    "jacobian_at",
    "lyapunov_condition",
    "lyapunov_constants",
    "lyapunov_value",
    "q_evaluate",
    "routh_hurwitz",
    "stability_report",
    "CheckReport",
    "contraction_gap_check",
    "mass_estimate_check",
    "moment_closure_check",
    "oligomer_balance",
    "prion_balance",
    "run_all",
    "stable_set_check",
    "HAVE_COMPILED",
    "IMPLEMENTATION",
    "upwind_step",
    "__version__",
]
