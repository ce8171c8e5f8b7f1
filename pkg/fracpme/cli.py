"""Command-line front end: one subcommand per experiment, one table per run.

Exit codes: 0 success, 2 configuration or domain error, 3 numerical failure,
4 quadrature tolerance not reached.
"""
import argparse
import logging
import sys
from typing import List, Optional

import numpy as np
import pandas as pd

from fracpme import __version__
from fracpme.analysis import m0_lower_bound, m0_of_alpha, order_table_diffusion, order_table_synthetic
from fracpme.config import BcChoice, Command, OutputFormat, RunConfig, build_config, load_config, save_config
from fracpme.diffusion import build_problem, front_sweep, params_from_bc, profile_samples, solve_front
from fracpme.exceptions import ConfigError, DomainError, FracPMEError, NoCriticalValue, ToleranceNotReached
from fracpme.fdm import FdConfig, complexity_benchmark, simulate, wetting_front_fd
from fracpme.utils.tables import write_table
from fracpme.volterra import (
    SolverConfig,
    VolterraProblem,
    constant_solution,
    power_kernel,
    sine_kernel,
    solve,
)

logger = logging.getLogger(__name__)


# ================
# === COMMANDS ===
# ================
def _write(cfg, df, extra=None):
    metadata = cfg.metadata()
    metadata.update(extra or {})
    return write_table(
        df, cfg.output_path, cfg.command.value, cfg.created_at, metadata, cfg.format.value
    )


def cmd_solve(cfg: RunConfig, progress: bool = True) -> str:
    """
    Nodal values of one solve, or the constant-kernel error grid.
    With ``kernel="power"`` every (gamma, m) of ``gammas x ms`` is solved
    and its largest deviation from the constant solution is reported.
    """
    solver_cfg = SolverConfig(n_steps=cfg.n_steps, method=cfg.method, start=cfg.start)
    if cfg.kernel == "power":
        records = []
        for gamma in cfg.gammas:
            for m in cfg.ms:
                sol = solve(VolterraProblem(m=m, kernel=power_kernel(1.0, gamma)), solver_cfg)
                exact = constant_solution(1.0, gamma, m)
                records.append((gamma, m, cfg.n_steps, float(np.max(np.abs(sol.v - exact)))))
        df = pd.DataFrame(records, columns=["gamma", "m", "n_steps", "max_error"])
        return _write(cfg, df)
    if cfg.kernel == "sine":
        sol = solve(VolterraProblem(m=cfg.m, kernel=sine_kernel()), solver_cfg)
        return _write(cfg, pd.DataFrame({"z": sol.z, "v": sol.v, "y": sol.y}))
    frames = []
    for bc in cfg.boundary_conditions():
        p = params_from_bc(cfg.alpha, cfg.m, bc, cfg.neumann_a_mode)
        sol = solve(build_problem(p, solver_cfg.quad, cfg.grid_n), solver_cfg)
        frames.append(pd.DataFrame({"bc": bc.value, "z": sol.z, "v": sol.v, "y": sol.y}))
    return _write(cfg, pd.concat(frames, ignore_index=True))


def cmd_front(cfg: RunConfig, progress: bool = True) -> str:
    """Wetting front at ``m``, or at every value of ``ms`` with ``sweep``."""
    ms = cfg.ms if cfg.sweep else [cfg.m]
    frames = [
        front_sweep(
            cfg.alpha, ms, bc, cfg.n_steps,
            neumann_a_mode=cfg.neumann_a_mode, n_jobs=cfg.n_jobs, progress=progress,
        )
        for bc in cfg.boundary_conditions()
    ]
    return _write(cfg, pd.concat(frames, ignore_index=True))


def cmd_order(cfg: RunConfig, progress: bool = True) -> str:
    """Aitken orders on the sine kernel or on the diffusion grid ``alphas x ms``."""
    if cfg.kernel == "sine":
        df = order_table_synthetic(cfg.ms, cfg.base_n, n_jobs=cfg.n_jobs, progress=progress)
        return _write(cfg, df)
    if cfg.kernel == "power":
        raise ConfigError("order needs the sine or the diffusion kernel")
    frames = [
        order_table_diffusion(
            cfg.alphas, cfg.ms, bc, cfg.base_n, cfg.method,
            neumann_a_mode=cfg.neumann_a_mode, grid_n=cfg.grid_n,
            n_jobs=cfg.n_jobs, progress=progress,
        )
        for bc in cfg.boundary_conditions()
    ]
    return _write(cfg, pd.concat(frames, ignore_index=True))


def cmd_m0(cfg: RunConfig, progress: bool = True) -> str:
    """Critical power for every value of ``alphas``, next to its equal-bounds floor."""
    records = []
    for bc in cfg.boundary_conditions():
        for alpha in cfg.alphas:
            floor = m0_lower_bound(alpha)
            try:
                m0 = m0_of_alpha(alpha, bc, grid_n=cfg.grid_n, minus_cutoff=cfg.minus_cutoff)
                records.append((alpha, bc.value, m0, floor, ""))
            except NoCriticalValue as exc:
                logger.warning("%s", exc)
                records.append((alpha, bc.value, np.nan, floor, type(exc).__name__))
    columns = ["alpha", "bc", "m0", "m0_floor", "error"]
    return _write(cfg, pd.DataFrame(records, columns=columns))


def cmd_fd(cfg: RunConfig, progress: bool = True) -> str:
    """Full finite-difference field in long format; fronts in the header."""
    fd_cfg = FdConfig(theta=cfg.theta, dt=cfg.dt, dx=cfg.dx, t_final=cfg.t_final, x_max=cfg.x_max)
    frames, fronts = [], {}
    for bc in cfg.boundary_conditions():
        field = simulate(cfg.alpha, cfg.m, bc, fd_cfg)
        fronts[f"front_{bc.value}"] = repr(wetting_front_fd(field, fd_cfg))
        tt, xx = np.meshgrid(field.t, field.x, indexing="ij")
        frames.append(
            pd.DataFrame({"bc": bc.value, "t": tt.ravel(), "x": xx.ravel(), "u": field.u.ravel()})
        )
    return _write(cfg, pd.concat(frames, ignore_index=True), fronts)


def cmd_bench(cfg: RunConfig, progress: bool = True) -> str:
    """Cost of both methods per tolerance; fitted slopes in the header."""
    report = complexity_benchmark(
        cfg.tolerances, cfg.alpha, cfg.m,
        t_final=cfg.t_final, kappa=cfg.dx / cfg.dt, timeout=cfg.timeout,
        reference_n=cfg.reference_n, theta=cfg.theta,
    )
    extra = {f"slope_{k}": repr(v) for k, v in sorted(report.slopes.items())}
    extra["reference_front"] = repr(report.reference_front)
    return _write(cfg, report.table, extra)


def cmd_profile(cfg: RunConfig, progress: bool = True) -> str:
    """Profiles ``u(x, t)`` for plotting, one block per boundary condition."""
    solver_cfg = SolverConfig(n_steps=cfg.n_steps, method=cfg.method, start=cfg.start)
    frames, fronts = [], {}
    for bc in cfg.boundary_conditions():
        p, sol, front = solve_front(cfg.alpha, cfg.m, bc, solver_cfg, cfg.neumann_a_mode, cfg.grid_n)
        fronts[f"eta_star_{bc.value}"] = repr(front.eta_star)
        frames.append(profile_samples(p, sol, front, cfg.t, cfg.n_x))
    return _write(cfg, pd.concat(frames, ignore_index=True), fronts)


COMMANDS = {
    Command.SOLVE: cmd_solve,
    Command.FRONT: cmd_front,
    Command.ORDER: cmd_order,
    Command.M0: cmd_m0,
    Command.FD: cmd_fd,
    Command.BENCH: cmd_bench,
    Command.PROFILE: cmd_profile,
}


# ===============
# === PARSING ===
# ===============
def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, help="Order of the time derivative in (0, 1].")
    common.add_argument("--m", type=float, help="Power of the diffusivity, >= 1.")
    common.add_argument("--bc", choices=[b.value for b in BcChoice])
    common.add_argument("--n", dest="n_steps", type=int, help="Number of Volterra steps.")
    common.add_argument("--method", choices=["rectangle", "trapezoid", "naive"])
    common.add_argument("--start", choices=["extrapolated", "finite"], help="Starting value of the recursion.")
    common.add_argument("--kernel", choices=["diffusion", "power", "sine"])
    common.add_argument("-o", "--output", dest="output_path", type=str)
    common.add_argument("--format", choices=[f.value for f in OutputFormat])
    common.add_argument("--t", type=float, help="Time of the profile.")
    common.add_argument("--n-x", dest="n_x", type=int, help="Samples per profile.")
    common.add_argument("--sweep", action="store_true", default=None, help="Front for every m in --ms.")
    common.add_argument("--base-n", dest="base_n", type=int)
    common.add_argument("--alphas", type=_float_list, help="Comma separated.")
    common.add_argument("--ms", type=_float_list, help="Comma separated.")
    common.add_argument("--gammas", type=_float_list, help="Comma separated.")
    common.add_argument("--tolerances", type=_float_list, help="Comma separated, decreasing.")
    common.add_argument("--dt", type=float)
    common.add_argument("--dx", type=float)
    common.add_argument("--x-max", dest="x_max", type=float)
    common.add_argument("--t-final", dest="t_final", type=float)
    common.add_argument("--theta", type=float)
    common.add_argument("--timeout", type=float, help="Seconds per benchmark cell.")
    common.add_argument("--reference-n", dest="reference_n", type=int)
    common.add_argument("--grid-n", dest="grid_n", type=int, help="Grid for sampled kernel bounds.")
    common.add_argument("--minus-cutoff", dest="minus_cutoff", type=float, help="Largest z sampled for K- in m0.")
    common.add_argument("--neumann-a-mode", dest="neumann_a_mode", choices=["derived", "table"])
    common.add_argument("--n-jobs", dest="n_jobs", type=int)
    common.add_argument("--created-at", dest="created_at", type=str)
    common.add_argument("--config", type=str, help="JSON config to start from.")
    common.add_argument("--save-config", dest="save_config", type=str, help="Write the resolved config.")
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(
        prog="fracpme", description="Self-similar solutions of the time-fractional porous medium equation."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, fn in COMMANDS.items():
        sub.add_parser(command.value, parents=[common], help=fn.__doc__.strip().splitlines()[0])
    return parser


_NOT_CONFIG = {"config", "save_config", "verbose", "quiet"}


def config_from_args(args) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if v is not None and k not in _NOT_CONFIG}
    if args.config:
        return load_config(args.config, **values)
    return build_config(**values)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="[%(levelname)s] %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.save_config:
            save_config(cfg, args.save_config)
        path = COMMANDS[cfg.command](cfg, progress=not args.quiet)
    except (ConfigError, DomainError) as exc:
        logger.error("%s", exc)
        return 2
    except ToleranceNotReached as exc:
        logger.error("%s", exc)
        return 4
    except FracPMEError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 3
    logger.info("done: %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
