"""Command-line surface: subcommand dispatch, CSV artifacts, sweeps.

Exit codes: 0 success, 1 validation failure (bad config, violated
hypotheses, failing checks), 2 solver failure, 64 usage error.
All numeric output uses 17 significant digits so identical configurations
produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, checks, pde, stability
from .model import (
    ConfigError,
    Parameters,
    RateModel,
    load_model,
    model_digest,
    validate,
)
from .ode import integrate, write_trajectory_csv
from .rk import SolverError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_USAGE = 64

_FMT = "%.17g"


def _fmt(value: float) -> str:
    return _FMT % value


def _write_meta(out_dir: str, argv: list[str], digest: str, started: float, extra=None) -> None:
    lines = [
        f"config_hash = {digest}",
        f"package_version = {__version__}",
        f"numpy_version = {np.__version__}",
        f"python_version = {platform.python_version()}",
        f"command = {' '.join(argv)}",
        f"wall_time_s = {time.perf_counter() - started:.3f}",
    ]
    if extra:
        lines.extend(f"{k} = {v}" for k, v in extra.items())
    with open(os.path.join(out_dir, "run.meta"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _load_validated(path: str) -> tuple[Parameters, RateModel]:
    params, rates = load_model(path)
    report = validate(params, rates)
    if not report.passed:
        failures = "; ".join(f"{c.name} ({c.detail})" for c in report.failures())
        raise ConfigError(f"hypothesis validation failed: {failures}")
    return params, rates


def _parse_initial(text: str) -> np.ndarray:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 5:
        raise ConfigError(f"--initial needs 5 comma-separated values, got {len(parts)}")
    return np.array(parts)


def _parse_density(spec: str, x0: float):
    """Initial density spec: zero | exp_decay:scale[:amplitude] | table:file."""
    if spec == "zero":
        return None
    if spec.startswith("exp_decay:"):
        fields = spec.split(":")[1:]
        if not 1 <= len(fields) <= 2:
            raise ConfigError(f"bad density spec {spec!r}")
        scale = float(fields[0])
        amplitude = float(fields[1]) if len(fields) == 2 else 1.0
        if scale <= 0:
            raise ConfigError("exp_decay scale must be positive")
        return pde.exp_decay_density(scale, amplitude, x0)
    if spec.startswith("table:"):
        path = spec.split(":", 1)[1]
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        xs, fs = data[:, 0], data[:, 1]
        if np.any(np.diff(xs) <= 0):
            raise ConfigError(f"{path}: table x column must be strictly increasing")
        return lambda x: np.interp(x, xs, fs, left=0.0, right=0.0)
    raise ConfigError(f"unknown density spec {spec!r}")


def _equilibrium_lines(ss) -> list[str]:
    return [
        f"u_inf = {_fmt(ss.u_inf)}",
        f"A_inf = {_fmt(ss.A_inf)}",
        f"p_inf = {_fmt(ss.p_inf)}",
        f"b_inf = {_fmt(ss.b_inf)}",
        f"M_inf = {_fmt(ss.m_inf)}",
        f"tau_star = {_fmt(ss.tau_star)}",
        f"a_coeff = {_fmt(ss.a_coeff)}",
        f"bracket_lo = {_fmt(ss.q_root_bracket[0])}",
        f"bracket_hi = {_fmt(ss.q_root_bracket[1])}",
        f"residual = {_fmt(ss.residual)}",
    ]


_SWEEP_COLUMNS = (
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
    "rho0",
    "mu0",
    "rho_c",
    "theta",
    "u_inf",
    "A_inf",
    "p_inf",
    "b_inf",
    "a1",
    "a2",
    "a3",
    "a4",
    "rh_margin",
    "cond1",
    "cond2",
    "cond3",
    "lyap_ok",
)


def _sweep_row(params: Parameters, rates: RateModel) -> str:
    ss = stability.find_steady_state(params, rates)
    rep = stability.stability_report(params, rates, ss)
    cond = rep.lyapunov_condition
    values: list[str] = []
    for key in _SWEEP_COLUMNS[:15]:
        if key == "n":
            values.append(str(params.n))
        elif hasattr(params, key):
            values.append(_fmt(getattr(params, key)))
        else:
            attr = getattr(rates, key)
            values.append("" if attr is None else _fmt(attr))
    values.extend(
        [
            _fmt(ss.u_inf),
            _fmt(ss.A_inf),
            _fmt(ss.p_inf),
            _fmt(ss.b_inf),
            _fmt(rep.a1),
            _fmt(rep.a2),
            _fmt(rep.a3),
            _fmt(rep.a4),
            _fmt(rep.rh_margin),
            _fmt(cond.value1),
            _fmt(cond.value2),
            _fmt(cond.value3),
            "1" if (params.alpha == 0 and cond.holds) else "0",
        ]
    )
    return ",".join(values)


def _parse_vary(spec: str) -> tuple[str, np.ndarray]:
    if "=" not in spec:
        raise ConfigError(f"--vary must look like name=lo:hi:count, got {spec!r}")
    name, grid = spec.split("=", 1)
    name = name.strip()
    parts = grid.split(":")
    if len(parts) == 4 and parts[0] == "log":
        lo, hi, count = float(parts[1]), float(parts[2]), int(parts[3])
        if lo <= 0 or hi <= 0:
            raise ConfigError("log spacing requires positive endpoints")
        values = np.geomspace(lo, hi, count)
    elif len(parts) == 3:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        values = np.linspace(lo, hi, count)
    else:
        raise ConfigError(f"bad grid spec {grid!r} (use lo:hi:count or log:lo:hi:count)")
    if count < 1:
        raise ConfigError("count must be >= 1")
    return name, values


def _apply_vary(params: Parameters, rates: RateModel, name: str, value: float):
    param_keys = {"lambda_u", "gamma_u", "lambda_p", "gamma_p", "tau", "sigma", "delta", "alpha", "epsilon"}
    if name in param_keys:
        return params.replace(**{name: float(value)}), rates
    if name == "n":
        return params.replace(n=int(round(value)), x0=None), rates
    if name in ("rho0", "mu0", "rho_c", "theta"):
        kw = {
            "rho0": rates.rho0,
            "mu0": rates.mu0,
            "rho_c": rates.rho_c,
            "theta": rates.theta,
        }
        kw[name] = float(value)
        if rates.kind == "constant":
            return params, RateModel.constant(rho0=kw["rho0"], mu0=kw["mu0"])
        return params, RateModel.power_law(c=kw["rho_c"], theta=kw["theta"], mu0=kw["mu0"])
    raise ConfigError(f"cannot vary unknown or derived key {name!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amyprion",
        description="Simulation and stability analysis of an oligomer-plaque aggregation model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--params", required=True, help="flat key=value parameter file")
        p.add_argument("--out", default=".", help="output directory (default: current)")

    p_ode = sub.add_parser("simulate-ode", help="integrate the closed five-component system")
    common(p_ode)
    p_ode.add_argument("--initial", default="0,0,0,0,0", help="A,u,p,b,M starting values")
    p_ode.add_argument("--t-end", type=float, default=100.0)
    p_ode.add_argument("--tol", type=float, default=1e-8)

    p_pde = sub.add_parser("simulate-pde", help="run the coupled size-structured solver")
    common(p_pde)
    p_pde.add_argument("--t-end", type=float, default=1.0)
    p_pde.add_argument("--cells", type=int, default=1000)
    p_pde.add_argument("--x-max", type=float, default=None)
    p_pde.add_argument("--density", default="zero", help="zero | exp_decay:scale[:amplitude] | table:file")
    p_pde.add_argument("--u0", type=float, default=1.0)
    p_pde.add_argument("--p0", type=float, default=1.0)
    p_pde.add_argument("--b0", type=float, default=0.0)
    p_pde.add_argument("--n-steps", type=int, default=None)
    p_pde.add_argument("--snapshots", type=int, default=0, help="density snapshots to keep")

    p_eq = sub.add_parser("equilibrium", help="locate the positive steady state")
    common(p_eq)
    p_eq.add_argument("--tol", type=float, default=1e-12)
    p_eq.add_argument("--csv", default=None, help="also append a sweep-format CSV row here")

    p_st = sub.add_parser("stability", help="linearization and stability certificates")
    common(p_st)
    p_st.add_argument("--csv", default=None, help="also append a sweep-format CSV row here")

    p_ly = sub.add_parser("lyapunov", help="global-stability certificate (alpha = 0 regime)")
    common(p_ly)
    p_ly.add_argument("--initial", default=None, help="optional A,u,p,b,M state to evaluate")

    p_ck = sub.add_parser("check", help="run the diagnostic battery")
    common(p_ck)
    p_ck.add_argument("--cells", type=int, default=1000)
    p_ck.add_argument("--t-end", type=float, default=0.5)

    p_sw = sub.add_parser("sweep", help="equilibrium+stability over a parameter grid")
    common(p_sw)
    p_sw.add_argument("--vary", required=True, help="name=lo:hi:count or name=log:lo:hi:count")
    p_sw.add_argument("--jobs", type=int, default=4)
    return parser


def dispatch(argv: list[str]) -> int:
    try:
        parser = _build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
        started = time.perf_counter()
        # sweep accepts a bare .csv target; everything else treats --out as a dir
        out_dir = os.path.dirname(args.out) or "." if args.out.endswith(".csv") else args.out
        os.makedirs(out_dir, exist_ok=True)
        params, rates = _load_validated(args.params)
        digest = model_digest(params, rates)
        handler = {
            "simulate-ode": _cmd_simulate_ode,
            "simulate-pde": _cmd_simulate_pde,
            "equilibrium": _cmd_equilibrium,
            "stability": _cmd_stability,
            "lyapunov": _cmd_lyapunov,
            "check": _cmd_check,
            "sweep": _cmd_sweep,
        }[args.command]
        code = handler(args, params, rates)
        _write_meta(out_dir, ["amyprion", *argv], digest, started)
        return code
    except (ConfigError, stability.LyapunovConditionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def _cmd_simulate_ode(args, params, rates) -> int:
    initial = _parse_initial(args.initial)
    if np.any(initial < 0):
        raise ConfigError("initial state must be nonnegative")
    traj = integrate(initial, params, rates, args.t_end, tol=args.tol)
    out_csv = os.path.join(args.out, "trajectory.csv")
    write_trajectory_csv(out_csv, traj)
    final = traj.final
    print(
        f"t = {_fmt(traj.times[-1])}: A = {_fmt(final.A)}, u = {_fmt(final.u)}, "
        f"p = {_fmt(final.p)}, b = {_fmt(final.b)}, M = {_fmt(final.M)}"
    )
    print(f"wrote {out_csv} ({len(traj.times)} samples)")
    return EXIT_OK


def _cmd_simulate_pde(args, params, rates) -> int:
    if args.cells < 1:
        raise ConfigError("--cells must be >= 1")
    x_max = args.x_max
    if x_max is None:
        x_max = pde.default_x_max(
            params, rates, args.t_end, max(args.u0, params.lambda_u / params.gamma_u)
        )
    if x_max <= params.x0:
        raise ConfigError(f"--x-max must exceed the critical size {params.x0}")
    density = _parse_density(args.density, params.x0)
    grid = pde.PlaqueGrid.uniform(params.x0, x_max, args.cells, density)
    state = pde.CoupledState(grid=grid, u=args.u0, p=args.p0, b=args.b0)
    run = pde.simulate_coupled(
        state,
        args.t_end,
        params,
        rates,
        n_steps=args.n_steps,
        store_density=args.snapshots > 0,
    )
    if args.snapshots > 0 and len(run.densities) > args.snapshots:
        idx = np.unique(np.linspace(0, len(run.densities) - 1, args.snapshots).astype(int))
        run.densities = [run.densities[i] for i in idx]
    moments_csv = os.path.join(args.out, "moments.csv")
    pde.write_moments_csv(moments_csv, run)
    density_csv = os.path.join(args.out, "density.csv")
    pde.write_density_csv(density_csv, run)
    print(
        f"t = {_fmt(run.times[-1])}: M0 = {_fmt(run.m0[-1])}, M1 = {_fmt(run.m1[-1])}, "
        f"u = {_fmt(run.u[-1])}, p = {_fmt(run.p[-1])}, b = {_fmt(run.b[-1])}"
    )
    print(f"outflow_mass = {_fmt(run.outflow_mass[-1])}")
    print(f"wrote {moments_csv} and {density_csv} ({len(run.times)} samples, dt = {_fmt(run.dt)})")
    return EXIT_OK


def _cmd_equilibrium(args, params, rates) -> int:
    ss = stability.find_steady_state(params, rates, tol=args.tol)
    lines = _equilibrium_lines(ss)
    for line in lines:
        print(line)
    with open(os.path.join(args.out, "equilibrium.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    if args.csv:
        _append_sweep_row(args.csv, params, rates)
    return EXIT_OK


def _cmd_stability(args, params, rates) -> int:
    rep = stability.stability_report(params, rates)
    cond = rep.lyapunov_condition
    lines = [
        f"a1 = {_fmt(rep.a1)}",
        f"a2 = {_fmt(rep.a2)}",
        f"a3 = {_fmt(rep.a3)}",
        f"a4 = {_fmt(rep.a4)}",
        f"rh_margin = {_fmt(rep.rh_margin)}",
        "eigen_real_parts = " + ",".join(_fmt(v) for v in rep.eigen_real_parts),
        f"cond1 = {_fmt(cond.value1)}",
        f"cond2 = {_fmt(cond.value2)}",
        f"cond3 = {_fmt(cond.value3)}",
        f"lyap_condition_holds = {int(cond.holds)}",
        f"locally_stable = {int(rep.locally_stable)}",
    ]
    for line in lines:
        print(line)
    with open(os.path.join(args.out, "stability.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    if args.csv:
        _append_sweep_row(args.csv, params, rates)
    return EXIT_OK


def _cmd_lyapunov(args, params, rates) -> int:
    cond = stability.lyapunov_condition(params)
    print(f"cond1 = {_fmt(cond.value1)}")
    print(f"cond2 = {_fmt(cond.value2)}")
    print(f"cond3 = {_fmt(cond.value3)}")
    if params.alpha != 0.0 or not cond.holds:
        raise stability.LyapunovConditionError(
            f"certificate unavailable: alpha = {params.alpha}, chain "
            f"{_fmt(cond.value1)} > {_fmt(cond.value2)} > {_fmt(cond.value3)} "
            f"{'holds' if cond.holds else 'fails'}"
        )
    ss = stability.find_steady_state(params, rates)
    t1, t2, s1 = stability.lyapunov_constants(ss, params, rates)
    print(f"T1 = {_fmt(t1)}")
    print(f"T2 = {_fmt(t2)}")
    print(f"s1 = {_fmt(s1)}")
    if args.initial is not None:
        state = _parse_initial(args.initial)
        phi, phi_dot = stability.lyapunov_value(state, ss, params, rates)
        print(f"phi = {_fmt(phi)}")
        print(f"phi_dot = {_fmt(phi_dot)}")
    return EXIT_OK


def _cmd_check(args, params, rates) -> int:
    reports = checks.run_all(params, rates, cells=args.cells, T=args.t_end)
    csv_path = os.path.join(args.out, "checks.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("name,max_violation,tolerance,passed\n")
        for r in reports:
            fh.write(f"{r.name},{_fmt(r.max_violation)},{_fmt(r.tolerance)},{int(r.passed)}\n")
    for r in reports:
        print(str(r))
    print(f"wrote {csv_path}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VALIDATION


def _append_sweep_row(path, params, rates) -> None:
    new_file = not os.path.exists(path)
    with open(path, "a", encoding="utf-8", newline="") as fh:
        if new_file:
            fh.write(",".join(_SWEEP_COLUMNS) + "\n")
        fh.write(_sweep_row(params, rates) + "\n")


def _cmd_sweep(args, params, rates) -> int:
    name, values = _parse_vary(args.vary)
    points = [_apply_vary(params, rates, name, v) for v in values]

    def work(point):
        return _sweep_row(*point)

    jobs = max(1, args.jobs)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        rows = list(pool.map(work, points))  # merged in submission order

    out_path = args.out if args.out.endswith(".csv") else os.path.join(args.out, "sweep.csv")
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(_SWEEP_COLUMNS) + "\n")
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {out_path} ({len(rows)} rows varying {name})")
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
