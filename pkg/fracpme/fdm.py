"""Finite-difference baseline for the time-fractional porous medium equation.

The Caputo derivative of order alpha is discretised with the L1 formula and
the degenerate flux ``(u^m u_x)_x`` with a theta-weighted three-point stencil
whose diffusivity is linearised by extrapolation from the two last levels.
Each step is one tridiagonal solve. The module also times this scheme against
the Volterra solver of :mod:`fracpme.diffusion`.
"""
import logging
import time
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import linalg

from fracpme.diffusion import BoundaryCondition, build_problem, params_from_bc, wetting_front
from fracpme.exceptions import DomainError, DomainTooSmall, FracPMEError, TridiagonalBreakdown
from fracpme.spfun import DEFAULT_QUAD, QuadConfig, gamma_fn
from fracpme.volterra import SolverConfig, solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FdConfig:
    """Grid and scheme settings.

    Parameters
    ----------
    theta : float
        Weight of the new time level; 1 is fully implicit.
    dt, dx : float
        Time and space steps.
    t_final, x_max : float
        Extent of the space-time grid ``[0, x_max] x [0, t_final]``.
    zero_threshold : float
        Values at or below it count as dry when locating the front.
    """

    theta: float = 1.0
    dt: float = 0.01
    dx: float = 0.01
    t_final: float = 1.0
    x_max: float = 3.0
    zero_threshold: float = 1e-10

    def __post_init__(self):
        if not 0 <= self.theta <= 1:
            raise DomainError(f"theta must lie in [0, 1], got {self.theta}")
        if not (self.dt > 0 and self.dx > 0):
            raise DomainError(f"dt and dx must be > 0, got {self.dt}, {self.dx}")
        if not (self.t_final >= self.dt and self.x_max >= 4 * self.dx):
            raise DomainError("grid needs at least one time step and four cells")
        if not self.zero_threshold >= 0:
            raise DomainError(f"zero_threshold must be >= 0, got {self.zero_threshold}")

    @property
    def n_t(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def n_x(self) -> int:
        return int(round(self.x_max / self.dx))


@dataclass
class FdField:
    """Solution ``u[i, j]`` at ``t_i = i dt`` and ``x_j = j dx``.

    Rows are filled by :func:`step`; the array is made read-only once
    :func:`simulate` completes.
    """

    u: np.ndarray
    dt: float
    dx: float
    alpha: float
    m: float
    bc: BoundaryCondition
    filled: int = 0

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.u.shape[0]) * self.dt

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.u.shape[1]) * self.dx

    @classmethod
    def zeros(cls, cfg: FdConfig, alpha: float, m: float, bc) -> "FdField":
        bc = BoundaryCondition(bc)
        u = np.zeros((cfg.n_t + 1, cfg.n_x + 1))
        if bc is BoundaryCondition.DIRICHLET:
            u[0, 0] = 1.0
        return cls(u=u, dt=cfg.dt, dx=cfg.dx, alpha=alpha, m=m, bc=bc)


def l1_weights(i: int, alpha: float) -> np.ndarray:
    """History weights ``a_{k,i}``, k = 1..i, of the L1 formula.

    .. math:: a_{k,i} = (d+2)^{1-\\alpha} - 2(d+1)^{1-\\alpha} + d^{1-\\alpha},
              \\qquad d = i - k

    with ``d^{1-alpha} = 0`` at ``d = 0`` (so ``a_{i,i} = 2^{1-alpha} - 2``
    also for alpha = 1).
    """
    if i < 1:
        raise DomainError(f"i must be >= 1, got {i}")
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    beta = 1.0 - alpha
    d = np.arange(i - 1, -1, -1, dtype=float)
    last = np.zeros_like(d)
    last[d > 0] = d[d > 0] ** beta
    return (d + 2.0) ** beta - 2.0 * (d + 1.0) ** beta + last


def _l1_start_weight(i: int, alpha: float) -> float:
    # coefficient -b_i of the initial level: b_i = (i+1)^(1-alpha) - i^(1-alpha)
    beta = 1.0 - alpha
    return float((i + 1.0) ** beta - (i ** beta if i > 0 else 0.0))


def _extrapolated_power(now: np.ndarray, prev: np.ndarray, m: float) -> np.ndarray:
    # u^m at the next level from a first-order Taylor step in time
    return now**m + m * now ** (m - 1.0) * (now - prev)


def _face_diffusivities(now: np.ndarray, prev: np.ndarray, m: float) -> np.ndarray:
    """``D_{j+1/2}`` on the faces j = 0..J-1, shared by both adjacent cells."""
    ext = _extrapolated_power(now, prev, m)
    return np.maximum(0.5 * (ext[:-1] + ext[1:]), 0.0)


def linearized_diffusivity(field: FdField, i: int, j: int, m: float, side: int) -> float:
    """Diffusivity on the face ``j + side/2`` for the step from level i to i+1.

    .. math::

        D_{j+1/2} = \\max\\Big(\\frac{E(u_j) + E(u_{j+1})}{2}, 0\\Big),\\quad
        E(v) = (v^i)^m + m (v^i)^{m-1} (v^i - v^{i-1})

    The same value enters the balances of cells j and j+1, so the stencil
    conserves mass.
    """
    if i < 1 or i > field.filled:
        raise DomainError(f"level i={i} needs rows i-1 and i to be filled")
    if side not in (-1, 1):
        raise DomainError(f"side must be -1 or +1, got {side}")
    n_x = field.u.shape[1] - 1
    face = j if side > 0 else j - 1
    if not (0 <= j <= n_x and 0 <= face < n_x):
        raise DomainError(f"face {j}{'+' if side > 0 else '-'}1/2 is outside the grid")
    return float(_face_diffusivities(field.u[i], field.u[i - 1], m)[face])


def _flux_term(u: np.ndarray, d_minus: np.ndarray, d_plus: np.ndarray) -> np.ndarray:
    # D+ (u_{j+1} - u_j) - D- (u_j - u_{j-1}) at the interior nodes
    return d_plus * (u[2:] - u[1:-1]) - d_minus * (u[1:-1] - u[:-2])


def step(field: FdField, i: int, cfg: FdConfig, bc=None) -> np.ndarray:
    """Advance from level ``i`` to ``i + 1`` and store the new row.

    ``u^{i+1} + sum_k a_{k,i} u^k - b_i u^0 = r (theta L(u^{i+1}) + (1-theta) L(u^i))``
    with ``r = Gamma(2-alpha) dt^alpha / dx^2`` and ``L`` the flux stencil; the
    implicit diffusivities are extrapolated from levels ``i`` and ``i-1``.

    Raises
    ------
    TridiagonalBreakdown
        If the banded system is singular.
    """
    bc = BoundaryCondition(bc) if bc is not None else field.bc
    if i != field.filled:
        raise DomainError(f"level {i} is not the last filled level {field.filled}")
    if i + 1 >= field.u.shape[0]:
        raise DomainError(f"no room for level {i + 1}")
    u, alpha, m, theta = field.u, field.alpha, field.m, cfg.theta
    dx = field.dx
    n_nodes = u.shape[1]
    r = gamma_fn(2.0 - alpha) * field.dt**alpha / dx**2

    now = u[i]
    prev = u[i - 1] if i >= 1 else now
    d_face = _face_diffusivities(now, prev, m)
    e_face = _face_diffusivities(now, now, m)
    d_minus, d_plus = d_face[:-1], d_face[1:]

    history = -_l1_start_weight(i, alpha) * u[0]
    if i >= 1:
        history = history + l1_weights(i, alpha) @ u[1 : i + 1]

    rhs = -history
    rhs[1:-1] += (1.0 - theta) * r * _flux_term(now, e_face[:-1], e_face[1:])

    # banded storage: row 0 upper, row 1 diagonal, row 2 lower
    ab = np.zeros((3, n_nodes))
    ab[1, 1:-1] = 1.0 + theta * r * (d_minus + d_plus)
    ab[0, 2:] = -theta * r * d_plus
    ab[2, :-2] = -theta * r * d_minus

    # dry right edge
    ab[1, -1] = 1.0
    rhs[-1] = 0.0

    if bc is BoundaryCondition.DIRICHLET:
        ab[1, 0] = 1.0
        rhs[0] = 1.0
    else:
        # half cell [0, dx/2] behind the shared face 1/2; the influx
        # -u^m u_x(0) is 1 (Neumann) or u(0) (Robin)
        robin = 1.0 if bc is BoundaryCondition.ROBIN else 0.0
        ab[1, 0] = 1.0 + theta * 2.0 * r * (d_face[0] - robin * dx)
        ab[0, 1] = -theta * 2.0 * r * d_face[0]
        rhs[0] += (1.0 - theta) * 2.0 * r * (e_face[0] * (now[1] - now[0]) + robin * dx * now[0])
        if bc is BoundaryCondition.NEUMANN:
            rhs[0] += 2.0 * r * dx

    try:
        new = linalg.solve_banded((1, 1), ab, rhs)
    except (linalg.LinAlgError, ValueError) as exc:
        raise TridiagonalBreakdown(i + 1) from exc
    if not np.all(np.isfinite(new)):
        raise TridiagonalBreakdown(i + 1)
    new = np.maximum(new, 0.0)
    if bc is BoundaryCondition.DIRICHLET:
        new[0] = 1.0
    u[i + 1] = new
    field.filled = i + 1
    return new


def simulate(alpha: float, m: float, bc, cfg: Optional[FdConfig] = None) -> FdField:
    """Run the scheme from dry initial data up to ``t_final``.

    Raises
    ------
    DomainTooSmall
        As soon as the wet region reaches the last interior node.
    """
    cfg = cfg or FdConfig()
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if not m >= 1:
        raise DomainError(f"m must be >= 1, got {m}")
    fd = FdField.zeros(cfg, alpha, m, bc)
    n_x = cfg.n_x
    warn_at = int(0.9 * n_x)
    warned = False
    for i in range(cfg.n_t):
        row = step(fd, i, cfg)
        if row[n_x - 1] > cfg.zero_threshold:
            raise DomainTooSmall(n_x - 1, n_x)
        if not warned and row[warn_at] > cfg.zero_threshold:
            logger.warning("wet region reached x=%g of x_max=%g", warn_at * cfg.dx, cfg.x_max)
            warned = True
    fd.u.setflags(write=False)
    logger.info(
        "finite differences done: alpha=%g m=%g %s, %d x %d grid",
        alpha, m, fd.bc.value, cfg.n_t, n_x,
    )
    return fd


def wetting_front_fd(field: FdField, cfg: FdConfig) -> float:
    """Position ``x_j*`` of the last wet node of the final level.

    Returns 0 for an entirely dry field.
    """
    last = field.u[field.filled]
    wet = np.flatnonzero(last > cfg.zero_threshold)
    if wet.size == 0:
        return 0.0
    j_star = int(wet[-1])
    n_x = last.size - 1
    if j_star >= n_x - 1:
        raise DomainTooSmall(j_star, n_x)
    return float(j_star * field.dx)


# =========================
# === COST BENCHMARKING ===
# =========================


@dataclass(frozen=True)
class BenchmarkReport:
    """Per-tolerance costs and fitted log-log slopes of cost against 1/eps."""

    table: pd.DataFrame
    slopes: Dict[str, float]
    reference_front: float


def volterra_ops(n_steps: int) -> int:
    """Multiply-adds plus weight integrals plus roots of the explicit scheme."""
    return 3 * n_steps * (n_steps + 1) // 2 + n_steps + 1


def fd_ops(n_t: int, n_x: int) -> int:
    """History dot products plus tridiagonal solves of the finite differences."""
    return n_t * (n_t + 1) * n_x + 8 * n_t * n_x


def complexity_benchmark(
    tolerances: Sequence[float],
    alpha: float,
    m: float,
    t_final: float = 1.0,
    kappa: float = 1.0,
    timeout: float = 60.0,
    reference_n: int = 400,
    quad: QuadConfig = DEFAULT_QUAD,
    theta: float = 1.0,
) -> BenchmarkReport:
    """Cost of locating the Dirichlet front to each tolerance, both methods.

    The Volterra solver doubles ``N`` from 4 and the finite differences double
    the number of time steps from 8 (``dx = kappa dt``) until the front is
    within ``eps`` of the reference from ``reference_n`` Volterra steps, or
    until the cell has used ``timeout`` seconds (recorded as censored).
    """
    tolerances = [float(eps) for eps in tolerances]
    if len(tolerances) < 3:
        raise DomainError("need at least three tolerances")
    if any(b >= a for a, b in zip(tolerances, tolerances[1:])) or tolerances[-1] <= 0:
        raise DomainError("tolerances must be positive and decreasing")

    p = params_from_bc(alpha, m, BoundaryCondition.DIRICHLET)
    problem = build_problem(p, quad)

    def volterra_front(n_steps):
        sol = solve(problem, SolverConfig(n_steps=n_steps, quad=quad))
        return wetting_front(sol, p).eta_star * t_final**p.b

    reference = volterra_front(reference_n)
    logger.info("reference front at t=%g: %.12g", t_final, reference)

    def fd_front(n_t):
        dt = t_final / n_t
        cfg = FdConfig(
            theta=theta, dt=dt, dx=kappa * dt, t_final=t_final, x_max=2.0 * reference + 4 * kappa * dt
        )
        return wetting_front_fd(simulate(alpha, m, p.bc, cfg), cfg), fd_ops(cfg.n_t, cfg.n_x)

    records = []
    for eps in tolerances:
        for method, n0 in (("volterra", 4), ("fd", 8)):
            n, spent, error, ops = n0, 0.0, np.inf, 0
            while True:
                start = time.perf_counter()
                try:
                    if method == "volterra":
                        front, ops = volterra_front(n), volterra_ops(n)
                    else:
                        front, ops = fd_front(n)
                except FracPMEError as exc:
                    logger.warning("%s run with n=%d failed: %s", method, n, exc)
                    front = np.nan
                spent += time.perf_counter() - start
                error = abs(front - reference) if np.isfinite(front) else np.inf
                if error <= eps or spent > timeout:
                    break
                n *= 2
            censored = not error <= eps
            if censored:
                logger.warning("%s censored at eps=%g after %.1fs", method, eps, spent)
            records.append((method, eps, n, spent, ops, error, censored))

    df = pd.DataFrame(
        records,
        columns=["method", "tolerance", "n", "wall_time", "ops", "error", "censored"],
    )
    slopes = {}
    for method, group in df[~df["censored"]].groupby("method"):
        if len(group) >= 2:
            x = np.log(1.0 / group["tolerance"].to_numpy())
            y = np.log(group["ops"].to_numpy(dtype=float))
            slopes[method] = float(np.polyfit(x, y, 1)[0])
    return BenchmarkReport(df, slopes, reference)
