"""Convergence orders, Gronwall sequences and the critical power m0.

The guaranteed order of the trapezoid scheme is ``min(2, 3 - mu_m)`` with
``mu_m = 4 K+ / ((m+1) V-)``; the error recursion behind it is controlled by
the sequence ``f_n`` of :func:`gronwall_f`.
"""
import logging
from dataclasses import dataclass
from functools import partial
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import optimize

from fracpme.diffusion import (
    BoundaryCondition,
    build_problem,
    kernel_bounds_empirical,
    params_from_bc,
)
from fracpme.exceptions import DomainError, EstimateUnstable, FracPMEError, NoCriticalValue
from fracpme.spfun import DEFAULT_QUAD, QuadConfig, beta_fn, gamma_fn
from fracpme.utils.parallel import run_jobs
from fracpme.volterra import SolverConfig, VolterraProblem, sine_kernel, solve

logger = logging.getLogger(__name__)

# K- for mu_m is sampled on z <= MU_CUTOFF; the kernel ratio degenerates near z = u = 1
MU_CUTOFF = 0.5


@dataclass(frozen=True)
class OrderEstimate:
    """Order from the terminal values at ``N``, ``2N`` and ``4N``."""

    base_n: int
    value: float
    triple: Tuple[float, float, float]


@dataclass(frozen=True)
class MuReport:
    """``mu_m`` and the order it guarantees for the trapezoid scheme at one ``(alpha, m)``."""

    alpha: float
    m: float
    k_plus: float
    v_minus: float
    mu_m: float
    guaranteed_order: float


# ============================
# === ORDER OF CONVERGENCE ===
# ============================


def aitken_order(runner: Callable[[int], float], base_n: int) -> OrderEstimate:
    """Estimate the order as ``log2(|v_2N - v_N| / |v_4N - v_2N|)``.

    Parameters
    ----------
    runner : callable
        Maps a number of steps ``N`` to the computed value at ``z = 1``.
    base_n : int
        Coarsest ``N``; even and >= 10.

    Raises
    ------
    EstimateUnstable
        If two successive values coincide.
    """
    if base_n < 10 or base_n % 2:
        raise DomainError(f"base_n must be even and >= 10, got {base_n}")
    triple = tuple(float(runner(base_n * k)) for k in (1, 2, 4))
    d_coarse = abs(triple[1] - triple[0])
    d_fine = abs(triple[2] - triple[1])
    if d_coarse == 0 or d_fine == 0 or not np.isfinite(d_coarse / d_fine):
        raise EstimateUnstable(triple)
    value = float(np.log2(d_coarse / d_fine))
    logger.info("order estimate from N=%d: %.4f", base_n, value)
    return OrderEstimate(base_n, value, triple)


def terminal_value(
    problem: VolterraProblem, method: str, quad: QuadConfig, n_steps: int
) -> float:
    """``v(1)`` computed with ``n_steps`` steps; a picklable runner via partial."""
    sol = solve(problem, SolverConfig(n_steps=n_steps, method=method, quad=quad))
    return float(sol.v[-1])


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or x.size != y.size:
        raise DomainError("need at least two (x, y) pairs of equal length")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("log-log slope needs positive data")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def _order_cell(job):
    label, problem, method, quad, base_n = job
    runner = partial(terminal_value, problem, method, quad)
    try:
        est = aitken_order(runner, base_n)
    except FracPMEError as exc:
        logger.warning("order cell %s failed: %s", label, exc)
        return label + (method, np.nan, np.nan, np.nan, np.nan, type(exc).__name__)
    return label + (method, est.value) + est.triple + ("",)


def order_table_synthetic(
    ms: Sequence[float],
    base_n: int = 100,
    methods: Sequence[str] = ("trapezoid", "rectangle"),
    quad: QuadConfig = DEFAULT_QUAD,
    n_jobs: Optional[int] = None,
    progress: bool = True,
) -> pd.DataFrame:
    """Orders for the kernel ``sqrt(z-s)/(1+sin(s)^2)``, one row per (method, m)."""
    kernel = sine_kernel()
    jobs = [
        ((float(m),), VolterraProblem(m=float(m), kernel=kernel), method, quad, base_n)
        for method in methods
        for m in ms
    ]
    records = run_jobs(_order_cell, jobs, n_jobs=n_jobs, desc="orders", progress=progress)
    return pd.DataFrame(
        records, columns=["m", "method", "order", "v_n", "v_2n", "v_4n", "error"]
    )


def _diffusion_order_job(alpha, m, bc, method, quad, base_n, neumann_a_mode, grid_n):
    p = params_from_bc(alpha, m, bc, neumann_a_mode)
    return ((alpha, m), build_problem(p, quad, grid_n), method, quad, base_n)


def order_table_diffusion(
    alphas: Sequence[float],
    ms: Sequence[float],
    bc,
    base_n: int = 100,
    method: str = "trapezoid",
    quad: QuadConfig = DEFAULT_QUAD,
    neumann_a_mode: str = "derived",
    grid_n: int = 200,
    n_jobs: Optional[int] = None,
    progress: bool = True,
) -> pd.DataFrame:
    """Orders on the diffusion problems, one row per ``(alpha, m)`` cell.

    A failing cell is recorded with NaN values and the error class name.
    """
    jobs = [
        _diffusion_order_job(float(alpha), float(m), bc, method, quad, base_n, neumann_a_mode, grid_n)
        for alpha in alphas
        for m in ms
    ]
    records = run_jobs(_order_cell, jobs, n_jobs=n_jobs, desc="orders", progress=progress)
    df = pd.DataFrame(
        records, columns=["alpha", "m", "method", "order", "v_n", "v_2n", "v_4n", "error"]
    )
    df.insert(0, "bc", BoundaryCondition(bc).value)
    return df


# ==========================
# === GRONWALL SEQUENCES ===
# ==========================


def gronwall_f(n: int, mu: float) -> float:
    """Closed form of the bounding sequence of the discrete Gronwall lemma.

    .. math:: f_n = \\frac{\\Gamma(n+\\mu)}{n!} \\sum_{k=0}^{n-1} \\frac{k!}{\\Gamma(k+1+\\mu)}

    With ``L_k = sum_{j<=k} log(1 + mu/j)`` this equals
    ``(1/n) sum_k exp(L_{n-1} - L_k)``, which is evaluated without overflow.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not mu > 0:
        raise DomainError(f"mu must be > 0, got {mu}")
    j = np.arange(1, n)
    logs = np.concatenate(([0.0], np.cumsum(np.log1p(mu / j))))
    return float(np.sum(np.exp(logs[-1] - logs)) / n)


def gronwall_recurrence(n_max: int, mu: float) -> np.ndarray:
    """``f_1..f_n_max`` from ``f_n = (1 + (mu-1)/n) f_{n-1} + 1/n``, ``f_1 = 1``."""
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    f = np.empty(n_max)
    f[0] = 1.0
    for n in range(2, n_max + 1):
        f[n - 1] = (1.0 + (mu - 1.0) / n) * f[n - 2] + 1.0 / n
    return f


def gronwall_asymptote(n: float, mu: float) -> float:
    """Leading behaviour ``n^(mu-1) / ((mu-1) Gamma(mu))`` of ``f_n``, mu > 1."""
    if not mu > 1:
        raise DomainError(f"asymptote defined for mu > 1, got {mu}")
    return float(n ** (mu - 1.0) / ((mu - 1.0) * gamma_fn(mu)))


def simulate_gronwall(
    n_max: int, mu: float, delta: float = 1.0, seed: int = 0, slack: Tuple[float, float] = (0.5, 1.0)
) -> Tuple[np.ndarray, np.ndarray]:
    """Random sequence obeying ``e_n <= (mu/n) sum_{i<n} e_i + delta``.

    Each ``e_n`` is the right-hand side scaled by a uniform factor drawn from
    ``slack``; ``slack=(1, 1)`` gives the extremal sequence ``delta f_n``.

    Returns
    -------
    e, bound : ndarray
        The sequence and ``delta * f_n``, both of length ``n_max``.
    """
    if not delta > 0:
        raise DomainError(f"delta must be > 0, got {delta}")
    rng = np.random.default_rng(seed)
    factors = rng.uniform(slack[0], slack[1], size=n_max)
    e = np.empty(n_max)
    total = 0.0
    for n in range(1, n_max + 1):
        e[n - 1] = factors[n - 1] * (mu / n * total + delta)
        total += e[n - 1]
    return e, delta * gronwall_recurrence(n_max, mu)


# =========================
# === CRITICAL POWER m0 ===
# =========================


def mu_report(
    alpha: float,
    m: float,
    bc,
    eps: float = 0.0,
    grid_n: int = 200,
    neumann_a_mode: str = "derived",
    minus_cutoff: float = MU_CUTOFF,
) -> MuReport:
    """``mu_m`` and the guaranteed order for one diffusion problem.

    ``V- = K-(beta(gamma+1, (gamma+1)/m + 1) - eps)`` with sampled ``K+`` and
    ``K-`` sampled on ``z <= minus_cutoff``. Since ``K+ >= K-``, ``mu_m`` is
    never below ``4/((m+1) beta)``; see :func:`m0_lower_bound`.
    """
    p = params_from_bc(alpha, m, bc, neumann_a_mode)
    beta = beta_fn(p.gamma + 1.0, (p.gamma + 1.0) / m + 1.0)
    if not 0 <= eps < 0.5 * beta:
        raise DomainError(f"eps must lie in [0, {0.5 * beta:.6g}), got {eps}")
    k_minus, k_plus = kernel_bounds_empirical(p, grid_n, minus_cutoff)
    v_minus = k_minus * (beta - eps)
    mu_m = 4.0 * k_plus / ((m + 1.0) * v_minus)
    return MuReport(
        alpha=alpha,
        m=m,
        k_plus=k_plus,
        v_minus=v_minus,
        mu_m=mu_m,
        guaranteed_order=min(2.0, 3.0 - mu_m),
    )


def m0_of_alpha(
    alpha: float,
    bc="dirichlet",
    bracket: Tuple[float, float] = (1.0, 10.0),
    tol: float = 1e-3,
    grid_n: int = 200,
    minus_cutoff: float = MU_CUTOFF,
) -> float:
    """Critical power ``m0`` solving ``mu_m = 3``, found by bisection.

    The result is never below :func:`m0_lower_bound`.

    Raises
    ------
    NoCriticalValue
        If ``mu_m - 3`` has the same sign at both ends of ``bracket``.
    """
    if not 0 < alpha <= 0.99:
        raise DomainError(f"alpha must lie in (0, 0.99], got {alpha}")

    def excess(m):
        return mu_report(alpha, m, bc, 0.0, grid_n, minus_cutoff=minus_cutoff).mu_m - 3.0

    lo, hi = bracket
    f_lo, f_hi = excess(lo), excess(hi)
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoCriticalValue(bracket, (f_lo, f_hi))
    m0 = optimize.bisect(excess, lo, hi, xtol=1e-10)
    residual = excess(m0)
    if abs(residual) > tol:
        logger.warning("mu_m - 3 = %.3g at m0=%.6g exceeds %g", residual, m0, tol)
    logger.info("m0(alpha=%g) = %.6g", alpha, m0)
    return float(m0)


def m0_lower_bound(alpha: float, bracket: Tuple[float, float] = (1.0, 10.0)) -> float:
    """Critical power for ``K+ = K-``, the smallest ``m0`` any kernel can give.

    Root of ``4 / ((m+1) beta(2-alpha, (2-alpha)/m + 1)) = 3``; it tends to
    4/3 as alpha -> 1 and grows as alpha decreases.
    """
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    s = 2.0 - alpha

    def excess(m):
        return 4.0 / ((m + 1.0) * beta_fn(s, s / m + 1.0)) - 3.0

    lo, hi = bracket
    f_lo, f_hi = excess(lo), excess(hi)
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoCriticalValue(bracket, (f_lo, f_hi))
    return float(optimize.brentq(excess, lo, hi, xtol=1e-12))
