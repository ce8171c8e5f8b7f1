"""Self-similar solutions of the time-fractional porous medium equation.

The equation ``u_t^alpha = (u^m u_x)_x`` on the half-line, started from zero
data and driven by a self-similar boundary condition at ``x = 0``, has
solutions ``u(x, t) = C t^a y(1 - x/(eta* t^b))`` where ``y`` solves a
Volterra equation with kernel ``K(z, u)`` (see :mod:`fracpme.volterra`).
This module builds that kernel for each boundary condition, extracts the
wetting front ``eta*`` from a numerical ``y`` and maps back to ``u(x, t)``.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import partial
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import special

from fracpme.exceptions import DomainError, FracPMEError, FrontUndefined
from fracpme.spfun import DEFAULT_QUAD, QuadConfig, adaptive_quad, beta_fn, gamma_fn
from fracpme.utils.parallel import run_jobs
from fracpme.volterra import (
    GridSolution,
    KernelSpec,
    SolverConfig,
    VolterraProblem,
    sample_kernel_bounds,
    solve,
)

logger = logging.getLogger(__name__)

NEUMANN_A_MODES = ("derived", "table")

# Below this lower terminal the kernel integral is taken from 0.
_W_ZERO = 1e-12


class BoundaryCondition(str, Enum):
    """Self-similar condition imposed at ``x = 0``."""

    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    ROBIN = "robin"


@dataclass(frozen=True)
class SelfSimilarParams:
    """Exponents ``a``, ``b`` of ``u = t^a U(x t^-b)`` and the coefficients
    ``A``, ``B`` of the reduced equation, for one boundary condition.

    The scaling identity ``2b - m a = alpha`` is checked on construction.
    """

    alpha: float
    m: float
    bc: BoundaryCondition
    a: float
    b: float
    A: float
    B: float

    def __post_init__(self):
        if abs(2 * self.b - self.m * self.a - self.alpha) > 1e-12 * max(1.0, self.m):
            raise DomainError(
                f"2b - m a = {2 * self.b - self.m * self.a!r} differs from alpha={self.alpha}"
            )
        if self.A < 0 or self.B < 0:
            raise DomainError(f"need A, B >= 0, got A={self.A}, B={self.B}")
        if self.B != self.b:
            raise DomainError(f"need B = b, got B={self.B}, b={self.b}")

    @property
    def gamma(self) -> float:
        return 1.0 - self.alpha


@dataclass(frozen=True)
class FrontResult:
    """Wetting front ``eta*`` and scale ``C = eta*^(2/m)``.

    ``deriv_used`` is the boundary quantity the front was computed from:
    ``y(1)`` for Dirichlet, ``(y^m)'(1)`` for Robin and ``(y^{m+1})'(1)``
    for Neumann.
    """

    eta_star: float
    c_scale: float
    y_at_1: float
    deriv_used: float


@dataclass(frozen=True)
class SolutionBounds:
    """Envelope constants of ``y`` (``c_minus``, ``c_plus``) and, for Dirichlet
    data, of ``u`` (``u_minus``, ``u_plus``)."""

    c_minus: float
    c_plus: float
    u_minus: Optional[float] = None
    u_plus: Optional[float] = None
    nodes_inside: bool = True


def params_from_bc(
    alpha: float, m: float, bc, neumann_a_mode: str = "derived"
) -> SelfSimilarParams:
    """Similarity exponents and coefficients of one boundary condition.

    Parameters
    ----------
    alpha : float
        Order of the time derivative, in (0, 1].
    m : float
        Diffusivity power, >= 1.
    bc : BoundaryCondition or str
    neumann_a_mode : {"derived", "table"}
        For Neumann data, ``A = 1 - alpha + a`` ("derived", consistent with
        the other two conditions) or ``A = 1 - (m+1)/(m+2)`` ("table").
    """
    bc = BoundaryCondition(bc)
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if not m >= 1:
        raise DomainError(f"m must be >= 1, got {m}")
    if neumann_a_mode not in NEUMANN_A_MODES:
        raise DomainError(
            f"neumann_a_mode must be one of {NEUMANN_A_MODES}, got {neumann_a_mode!r}"
        )

    if bc is BoundaryCondition.DIRICHLET:
        a, b = 0.0, alpha / 2.0
    elif bc is BoundaryCondition.ROBIN:
        a, b = alpha / m, alpha
    else:
        a, b = alpha / (m + 2.0), (m + 1.0) * alpha / (m + 2.0)

    if bc is BoundaryCondition.NEUMANN and neumann_a_mode == "table":
        A = 1.0 - (m + 1.0) / (m + 2.0)
    else:
        A = 1.0 - alpha + a
    return SelfSimilarParams(alpha=alpha, m=m, bc=bc, a=a, b=b, A=A, B=b)


def _flux(z, s, p: SelfSimilarParams):
    # right-hand side of the reduced equation, linear in both arguments
    return (p.m + 1.0) * (p.B * (1.0 - s) + (p.A + p.B) * (z - s))


def _scaled_beta(s, q, x):
    # beta(s, q, x)/Gamma(s) = I_x(s, q) Gamma(q)/Gamma(q+s)
    return special.betainc(s, q, x) * np.exp(special.gammaln(q) - special.gammaln(q + s))


def _kernel_point(z: float, u: float, p: SelfSimilarParams) -> float:
    if u < 0 or z > 1:
        raise DomainError(f"kernel needs 0 <= u and z <= 1, got z={z}, u={u}")
    if u >= z:
        return 0.0
    if p.alpha == 1.0:
        return float(_flux(z, u, p))
    s = 1.0 - p.alpha
    x = 1.0 - ((1.0 - z) / (1.0 - u)) ** (1.0 / p.b)
    value = (p.m + 1.0) * (
        (p.A + 2.0 * p.B) * (1.0 - u) * _scaled_beta(s, p.a + 2.0 * p.b + 1.0, x)
        - (p.A + p.B) * (1.0 - z) * _scaled_beta(s, p.a + p.b + 1.0, x)
    )
    return max(float(value), 0.0)


def kernel_incbeta(z, u, p: SelfSimilarParams):
    """Kernel ``K(z, u)`` through incomplete beta functions.

    With ``w = ((1-z)/(1-u))^(1/b)``,

    .. math::

        K = \\frac{m+1}{\\Gamma(1-\\alpha)}\\Big[(A+2B)(1-u)\\,\\beta(1-\\alpha, a+2b+1, 1-w)
            - (A+B)(1-z)\\,\\beta(1-\\alpha, a+b+1, 1-w)\\Big]

    for ``u < z`` and ``K = 0`` otherwise. Each ``beta/Gamma(1-alpha)`` is
    evaluated as ``I_x(1-alpha, q) Gamma(q)/Gamma(q+1-alpha)`` so that
    ``alpha = 1`` gives the classical kernel ``(m+1)(B(1-u) + (A+B)(z-u))``.
    Accepts scalars or broadcastable arrays.
    """
    if np.ndim(z) == 0 and np.ndim(u) == 0:
        return _kernel_point(float(z), float(u), p)
    z_arr, u_arr = np.broadcast_arrays(
        np.asarray(z, dtype=float), np.asarray(u, dtype=float)
    )
    if np.any(u_arr < 0) or np.any(z_arr > 1):
        raise DomainError("kernel needs 0 <= u and z <= 1")
    out = np.zeros(z_arr.shape)
    mask = u_arr < z_arr
    zz, uu = z_arr[mask], u_arr[mask]

    if p.alpha == 1.0:
        out[mask] = _flux(zz, uu, p)
    else:
        x = 1.0 - ((1.0 - zz) / (1.0 - uu)) ** (1.0 / p.b)
        s = 1.0 - p.alpha
        out[mask] = (p.m + 1.0) * (
            (p.A + 2.0 * p.B) * (1.0 - uu) * _scaled_beta(s, p.a + 2.0 * p.b + 1.0, x)
            - (p.A + p.B) * (1.0 - zz) * _scaled_beta(s, p.a + p.b + 1.0, x)
        )
    return np.maximum(out, 0.0)


def kernel_direct(
    z: float, u: float, p: SelfSimilarParams, quad: QuadConfig = DEFAULT_QUAD
) -> float:
    """Kernel ``K(z, u)`` by quadrature of its defining integral.

    .. math::

        K(z,u) = \\frac{1}{\\Gamma(1-\\alpha)} \\int_w^1 F(z, 1-\\sigma^b(1-u))
            (1-\\sigma)^{-\\alpha} \\sigma^{a+b} d\\sigma

    with ``F(z, s) = (m+1)(B(1-s) + (A+B)(z-s))``. The ``(1-sigma)^-alpha``
    factor is integrated exactly by QUADPACK's algebraic-weight rule.
    """
    if u < 0 or z > 1:
        raise DomainError(f"kernel needs 0 <= u and z <= 1, got z={z}, u={u}")
    if u >= z:
        return 0.0
    if p.alpha == 1.0:
        return float(_flux(z, u, p))

    w = ((1.0 - z) / (1.0 - u)) ** (1.0 / p.b)

    def inner(sigma):
        return _flux(z, 1.0 - sigma**p.b * (1.0 - u), p)

    if w < _W_ZERO:
        value = adaptive_quad(inner, 0.0, 1.0, quad, endpoint_exponents=(p.a + p.b, -p.alpha))
    else:

        def integrand(sigma):
            return inner(sigma) * sigma ** (p.a + p.b)

        value = adaptive_quad(integrand, w, 1.0, quad, endpoint_exponents=(0.0, -p.alpha))
    return max(value, 0.0) / gamma_fn(1.0 - p.alpha)


def kernel_bounds_empirical(
    p: SelfSimilarParams, grid_n: int = 200, minus_cutoff: float = 1.0
) -> Tuple[float, float]:
    """Numerical ``(K-, K+)``: extremes of ``K(z,u)/(z-u)^(1-alpha)`` on a
    ``grid_n`` simplex grid, ``K-`` restricted to ``z <= minus_cutoff``."""
    return sample_kernel_bounds(partial(kernel_incbeta, p=p), p.gamma, grid_n, minus_cutoff)


def kernel_bounds_analytic(p: SelfSimilarParams, cutoff: float) -> Tuple[float, float]:
    """Closed-form ``(K-, K+)`` valid for ``0 <= u <= z <= cutoff < 1``.

    .. math::

        K_+ = \\frac{m+1}{\\Gamma(2-\\alpha)}(A+2B)(b(1-X))^{\\alpha-1}, \\quad
        K_- = \\frac{m+1}{\\Gamma(2-\\alpha)} B (1-X)^{a/b+2}
    """
    if not 0 < cutoff < 1:
        raise DomainError(f"cutoff must lie in (0, 1), got {cutoff}")
    scale = (p.m + 1.0) / gamma_fn(2.0 - p.alpha)
    k_plus = scale * (p.A + 2.0 * p.B) * (p.b * (1.0 - cutoff)) ** (p.alpha - 1.0)
    k_minus = scale * p.B * (1.0 - cutoff) ** (p.a / p.b + 2.0)
    return k_minus, k_plus


def _kernel_eval(p: SelfSimilarParams, quad: QuadConfig, z: float, u: float) -> float:
    value = kernel_incbeta(z, u, p)
    if np.isfinite(value):
        return value
    logger.debug("incomplete-beta kernel not finite at (%g, %g), using quadrature", z, u)
    return kernel_direct(z, u, p, quad)


def build_problem(
    p: SelfSimilarParams, quad: QuadConfig = DEFAULT_QUAD, grid_n: int = 200
) -> VolterraProblem:
    """Volterra problem for ``y`` with ``gamma = 1 - alpha`` and empirical
    kernel constants."""
    k_minus, k_plus = kernel_bounds_empirical(p, grid_n)
    kernel = KernelSpec(
        gamma=p.gamma,
        k_minus=k_minus,
        k_plus=k_plus,
        eval=partial(_kernel_eval, p, quad),
        name=f"{p.bc.value}(alpha={p.alpha:g}, m={p.m:g})",
    )
    return VolterraProblem(m=p.m, kernel=kernel)


def _boundary_slope(f: np.ndarray, h: float) -> float:
    # second-order one-sided difference at the last node
    return (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)


def wetting_front(sol: GridSolution, p: SelfSimilarParams) -> FrontResult:
    """Front position ``eta*`` from the boundary behaviour of ``y`` at z = 1.

    Dirichlet: ``eta* = y(1)^(-m/2)``; Robin: ``eta* = m/(y^m)'(1)``;
    Neumann: ``eta* = ((m+1)/(y^{m+1})'(1))^(m/(m+2))``.

    Raises
    ------
    FrontUndefined
        If the boundary quantity is not positive.
    """
    if sol.n_steps < 4:
        raise DomainError(f"need at least 4 steps, got {sol.n_steps}")
    y, m = sol.y, p.m
    y1 = float(y[-1])
    if p.bc is BoundaryCondition.DIRICHLET:
        deriv = y1
        if not deriv > 0:
            raise FrontUndefined(deriv)
        eta = deriv ** (-m / 2.0)
    elif p.bc is BoundaryCondition.ROBIN:
        deriv = _boundary_slope(y**m, sol.h)
        if not deriv > 0:
            raise FrontUndefined(deriv)
        eta = m / deriv
    else:
        deriv = _boundary_slope(y ** (m + 1.0), sol.h)
        if not deriv > 0:
            raise FrontUndefined(deriv)
        eta = ((m + 1.0) / deriv) ** (m / (m + 2.0))
    return FrontResult(
        eta_star=float(eta),
        c_scale=float(eta ** (2.0 / m)),
        y_at_1=y1,
        deriv_used=float(deriv),
    )


def reconstruct_u(x, t: float, sol: GridSolution, front: FrontResult, p: SelfSimilarParams):
    """Physical solution ``u(x, t) = C t^a y(1 - x/(eta* t^b))``.

    ``y`` is interpolated linearly between nodes; ``u = 0`` beyond the front.
    Accepts a scalar or an array of positions.
    """
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t}")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise DomainError("x must be >= 0")
    z = 1.0 - x_arr / (front.eta_star * t**p.b)
    y = np.interp(z, sol.z, sol.y, left=0.0)
    u = np.where(z > 0, front.c_scale * t**p.a * y, 0.0)
    return float(u) if u.ndim == 0 else u


def solution_bounds(
    p: SelfSimilarParams, sol: GridSolution, kb: Tuple[float, float]
) -> SolutionBounds:
    """Envelopes ``C-^(1/m) z^((2-alpha)/m) <= y <= C+^(1/m) z^((2-alpha)/m)``.

    ``C = K beta(2-alpha, 1+(2-alpha)/m)``; for Dirichlet data also
    ``U = C^(1/m)/y(1)``. A node outside the envelope is logged as a warning
    since the envelope is asymptotic when ``K`` are sampled.
    """
    k_minus, k_plus = kb
    beta = beta_fn(2.0 - p.alpha, 1.0 + (2.0 - p.alpha) / p.m)
    c_minus, c_plus = k_minus * beta, k_plus * beta
    envelope = sol.z ** ((2.0 - p.alpha) / p.m)
    lower = c_minus ** (1.0 / p.m) * envelope
    upper = c_plus ** (1.0 / p.m) * envelope
    slack = 1e-12 * max(1.0, float(np.max(sol.y)))
    inside = bool(np.all(sol.y >= lower - slack) and np.all(sol.y <= upper + slack))
    if not inside:
        logger.warning(
            "numerical y leaves the envelope for %s (alpha=%g, m=%g)",
            p.bc.value, p.alpha, p.m,
        )
    u_minus = u_plus = None
    if p.bc is BoundaryCondition.DIRICHLET:
        y1 = float(sol.y[-1])
        u_minus = c_minus ** (1.0 / p.m) / y1
        u_plus = c_plus ** (1.0 / p.m) / y1
    return SolutionBounds(c_minus, c_plus, u_minus, u_plus, inside)


def profile_samples(
    p: SelfSimilarParams,
    sol: GridSolution,
    front: FrontResult,
    t: float = 1.0,
    n_x: int = 201,
    extent: float = 1.1,
) -> pd.DataFrame:
    """``u(x, t)`` at ``n_x`` points of ``[0, extent * eta* t^b]``."""
    if n_x < 2:
        raise DomainError(f"n_x must be >= 2, got {n_x}")
    x = np.linspace(0.0, extent * front.eta_star * t**p.b, n_x)
    u = reconstruct_u(x, t, sol, front, p)
    return pd.DataFrame({"bc": p.bc.value, "t": t, "x": x, "u": u})


def solve_front(
    alpha: float,
    m: float,
    bc,
    cfg: Optional[SolverConfig] = None,
    neumann_a_mode: str = "derived",
    grid_n: int = 200,
) -> Tuple[SelfSimilarParams, GridSolution, FrontResult]:
    """Parameters, numerical solution and front for one ``(alpha, m, bc)``."""
    cfg = cfg or SolverConfig()
    p = params_from_bc(alpha, m, bc, neumann_a_mode)
    sol = solve(build_problem(p, cfg.quad, grid_n), cfg)
    front = wetting_front(sol, p)
    logger.info("front for %s alpha=%g m=%g: eta*=%.12g", p.bc.value, alpha, m, front.eta_star)
    return p, sol, front


def _front_cell(job):
    alpha, m, bc, cfg, neumann_a_mode = job
    try:
        _, _, front = solve_front(alpha, m, bc, cfg, neumann_a_mode)
    except FracPMEError as exc:
        logger.warning("front failed for m=%g: %s", m, exc)
        return (m, np.nan, np.nan, type(exc).__name__)
    return (m, front.eta_star, front.c_scale, "")


def front_sweep(
    alpha: float,
    ms: Sequence[float],
    bc,
    n_steps: int = 100,
    quad: QuadConfig = DEFAULT_QUAD,
    neumann_a_mode: str = "derived",
    n_jobs: Optional[int] = None,
    progress: bool = True,
) -> pd.DataFrame:
    """Wetting front for every ``m`` in ``ms``; one row per ``m``."""
    bc = BoundaryCondition(bc)
    cfg = SolverConfig(n_steps=n_steps, quad=quad)
    jobs = [(alpha, float(m), bc, cfg, neumann_a_mode) for m in ms]
    records = run_jobs(_front_cell, jobs, n_jobs=n_jobs, desc="front", progress=progress)
    df = pd.DataFrame(records, columns=["m", "eta_star", "c_scale", "error"])
    df.insert(0, "bc", bc.value)
    df.insert(0, "alpha", alpha)
    return df
