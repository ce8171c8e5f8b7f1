"""Special functions and quadrature used throughout the package.

Thin, validated wrappers around ``scipy.special`` and QUADPACK. All functions
are pure and safe to call from several workers at once.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import integrate, special

from fracpme.exceptions import DomainError, NewtonDivergence, ToleranceNotReached

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

NEWTON_MAX_ITER = 100
STALL_ULPS = 1e3


@dataclass(frozen=True)
class QuadConfig:
    """Tolerances of the adaptive Gauss-Kronrod quadrature.

    Parameters
    ----------
    abs_tol : float
        Absolute tolerance, > 0.
    rel_tol : float
        Relative tolerance, >= 0.
    max_subdivisions : int
        Upper bound on the number of subintervals, >= 1.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 200

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError(f"abs_tol must be > 0, got {self.abs_tol}")
        if not self.rel_tol >= 0:
            raise DomainError(f"rel_tol must be >= 0, got {self.rel_tol}")
        if self.max_subdivisions < 1:
            raise DomainError(
                f"max_subdivisions must be >= 1, got {self.max_subdivisions}"
            )


DEFAULT_QUAD = QuadConfig()


def gamma_fn(x: ArrayLike) -> ArrayLike:
    """Euler gamma function for x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError(f"gamma_fn requires x > 0, got {x}")
    out = special.gamma(x)
    return float(out) if out.ndim == 0 else out


def beta_fn(a: ArrayLike, b: ArrayLike) -> ArrayLike:
    """Euler beta function Gamma(a)Gamma(b)/Gamma(a+b) for a, b > 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise DomainError(f"beta_fn requires a, b > 0, got a={a}, b={b}")
    out = special.beta(a, b)
    return float(out) if out.ndim == 0 else out


def inc_beta(a: float, b: float, z: ArrayLike) -> ArrayLike:
    """Lower incomplete beta function, not regularised.

    .. math:: \\beta(a, b, z) = \\int_0^z t^{a-1}(1-t)^{b-1} dt

    Parameters
    ----------
    a, b : float
        Positive shape parameters.
    z : float or array
        Upper terminal(s) in [0, 1].
    """
    z = np.asarray(z, dtype=float)
    if not (a > 0 and b > 0):
        raise DomainError(f"inc_beta requires a, b > 0, got a={a}, b={b}")
    if np.any(~((z >= 0) & (z <= 1))):
        raise DomainError(f"inc_beta requires 0 <= z <= 1, got {z}")
    out = special.betainc(a, b, z) * special.beta(a, b)
    return float(out) if out.ndim == 0 else out


def adaptive_quad(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    cfg: QuadConfig = DEFAULT_QUAD,
    endpoint_exponents: Optional[Tuple[float, float]] = None,
) -> float:
    """Integrate ``f`` over [lo, hi] with adaptive Gauss-Kronrod quadrature.

    Without ``endpoint_exponents`` QUADPACK's QAGS is used: the interval is
    bisected towards the worst subinterval and the sequence of estimates is
    extrapolated, which copes with integrable endpoint singularities. With
    ``endpoint_exponents=(p, q)`` the algebraic factor
    ``(s - lo)**p * (hi - s)**q`` is integrated exactly against ``f``
    (QAWS), so ``f`` should be the smooth remainder of the integrand.

    Raises
    ------
    ToleranceNotReached
        If the requested tolerance max(abs_tol, rel_tol*|I|) was not met.
    """
    if hi == lo:
        return 0.0
    kwargs = dict(
        epsabs=cfg.abs_tol,
        epsrel=cfg.rel_tol,
        limit=cfg.max_subdivisions,
        full_output=1,
    )
    if endpoint_exponents is not None:
        kwargs.update(weight="alg", wvar=tuple(endpoint_exponents))
    result = integrate.quad(f, lo, hi, **kwargs)
    value, abserr = result[0], result[1]
    if len(result) > 3:
        tolerance = max(cfg.abs_tol, cfg.rel_tol * abs(value))
        if not np.isfinite(value) or abserr > tolerance:
            raise ToleranceNotReached(value, abserr, result[3])
        logger.debug("quadrature on [%g, %g] flagged: %s", lo, hi, result[3])
    return float(value)


def newton_root_power(
    a_coef: float,
    b_coef: float,
    c_coef: float,
    m: float,
    x0: float,
    tol: float = 1e-14,
) -> float:
    """Positive root of a*x^(m+1) - b*x - c = 0 by Newton's method.

    For a > 0 and b, c >= 0 (not both zero) the function is convex on
    (0, inf) and negative at 0+, so the positive root is unique.

    Returns
    -------
    float
        An iterate with ``|residual| <= tol``. When the iterates stop moving
        (a fixed point or a two-cycle in floating point) before that, the
        bound is relaxed to ``1000 eps max(a x^(m+1), b x, c)``, the rounding
        floor of the residual itself.

    Raises
    ------
    NewtonDivergence
        When the iteration leaves (0, inf), hits a zero derivative, stalls
        above the rounding floor or does not converge within 100 iterations.
    """
    if not a_coef > 0:
        raise DomainError(f"a_coef must be > 0, got {a_coef}")
    if b_coef < 0 or c_coef < 0 or not (b_coef > 0 or c_coef > 0):
        raise DomainError(
            f"need b_coef, c_coef >= 0 with one positive, got {b_coef}, {c_coef}"
        )
    if not (m > 0 and x0 > 0):
        raise DomainError(f"need m > 0 and x0 > 0, got m={m}, x0={x0}")

    x = x_prev = float(x0)
    for it in range(NEWTON_MAX_ITER):
        xm = x**m
        residual = a_coef * xm * x - b_coef * x - c_coef
        if abs(residual) <= tol:
            logger.debug("Newton converged in %d iterations to %r", it, x)
            return x
        slope = (m + 1) * a_coef * xm - b_coef
        if slope == 0 or not np.isfinite(slope):
            raise NewtonDivergence(x, "zero or non-finite derivative")
        x_new = x - residual / slope
        if not (np.isfinite(x_new) and x_new > 0):
            raise NewtonDivergence(x, "iterate left (0, inf)")
        if x_new == x or x_new == x_prev:
            scale = max(a_coef * xm * x, b_coef * x, c_coef)
            if abs(residual) <= STALL_ULPS * np.finfo(float).eps * scale:
                logger.debug("Newton stalled at %r, residual %.3e", x, residual)
                return x
            raise NewtonDivergence(x, f"stalled with residual {residual:.3e}")
        x_prev, x = x, x_new
    raise NewtonDivergence(x, f"no convergence in {NEWTON_MAX_ITER} iterations")
