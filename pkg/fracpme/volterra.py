"""Product-integration solver for non-Lipschitz Volterra equations.

Solves

.. math:: y(z)^{m+1} = \\int_0^z K(z,s) y(s) ds, \\qquad 0 \\le z \\le 1,

for the non-trivial solution. The power-law degeneracy at the origin is peeled
off with ``y(z) = z**p * v(z)``, ``p = (gamma+1)/m``, and ``v`` is advanced
by an explicit scheme

.. math:: v_n^{m+1} = z_n^{-q} \\sum_{i<n} w_{n,i}(h) v_i, \\qquad q = (m+1)p,

where the weights integrate the kernel exactly against a piecewise constant
(rectangle) or piecewise linear (trapezoid) reconstruction of ``v``.
"""
import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import optimize

from fracpme.exceptions import (
    DomainError,
    FracPMEError,
    NewtonDivergence,
    ToleranceNotReached,
    TrivialSolutionCollapse,
    WeightComputationError,
)
from fracpme.spfun import DEFAULT_QUAD, QuadConfig, adaptive_quad, beta_fn, newton_root_power

logger = logging.getLogger(__name__)

METHODS = ("rectangle", "trapezoid", "naive")
STARTS = ("extrapolated", "finite")

# Above this power the (m+1)-th root is taken in the log domain.
LARGE_M = 500


@dataclass(frozen=True)
class KernelSpec:
    """Weakly singular kernel K(z, s) with sandwich constants.

    Parameters
    ----------
    gamma : float
        Exponent of the power-law behaviour, ``K ~ (z-s)**gamma``.
    k_minus, k_plus : float
        Constants with ``k_minus*(z-s)**gamma <= K(z,s) <= k_plus*(z-s)**gamma``.
    eval : callable
        ``eval(z, s)`` for ``0 <= s <= z <= 1``, nonnegative.
    name : str
        Label used in logs and tables.
    """

    gamma: float
    k_minus: float
    k_plus: float
    eval: Callable[[float, float], float]
    name: str = "kernel"

    def __post_init__(self):
        if not self.gamma >= 0:
            raise DomainError(f"gamma must be >= 0, got {self.gamma}")
        if not self.k_minus > 0:
            raise DomainError(f"k_minus must be > 0, got {self.k_minus}")
        if not self.k_plus >= self.k_minus:
            raise DomainError(
                f"need k_plus >= k_minus, got {self.k_plus} < {self.k_minus}"
            )

    def __call__(self, z: float, s: float) -> float:
        return self.eval(z, s)


@dataclass(frozen=True)
class VolterraProblem:
    """Nonlinearity power ``m`` together with the kernel."""

    m: float
    kernel: KernelSpec

    def __post_init__(self):
        if not self.m > 0:
            raise DomainError(f"m must be > 0, got {self.m}")

    @property
    def p(self) -> float:
        """Peeling exponent (gamma+1)/m."""
        return (self.kernel.gamma + 1.0) / self.m

    @property
    def q(self) -> float:
        """Scaling exponent (m+1)(gamma+1)/m of the scheme."""
        return (self.m + 1.0) * self.p


@dataclass(frozen=True)
class SolverConfig:
    """Discretisation settings of :func:`solve`.

    ``method`` is ``"trapezoid"`` (second order), ``"rectangle"`` (first
    order) or ``"naive"`` (lower-terminal rectangle rule, kept as a
    counterexample: it does not reproduce constant solutions).

    ``start`` selects the starting value ``v_0``: ``"finite"`` evaluates the
    limit integral at the step ``h``, ``"extrapolated"`` removes its O(h) term
    with one Richardson step (see :func:`initial_v0`).
    """

    n_steps: int = 100
    method: str = "trapezoid"
    quad: QuadConfig = field(default_factory=QuadConfig)
    newton_tol: float = 1e-14
    start: str = "extrapolated"

    def __post_init__(self):
        if self.n_steps < 2:
            raise DomainError(f"n_steps must be >= 2, got {self.n_steps}")
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.newton_tol > 0:
            raise DomainError(f"newton_tol must be > 0, got {self.newton_tol}")
        if self.start not in STARTS:
            raise DomainError(f"start must be one of {STARTS}, got {self.start!r}")


@dataclass(frozen=True)
class GridSolution:
    """Nodal values of the peeled unknown on ``z_n = n/N``.

    The ``v`` array is made read-only on construction.
    """

    n_steps: int
    gamma: float
    m: float
    v: np.ndarray
    method: str = "trapezoid"

    def __post_init__(self):
        v = np.array(self.v, dtype=float)
        if v.shape != (self.n_steps + 1,):
            raise DomainError(
                f"v must have {self.n_steps + 1} entries, got shape {v.shape}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def h(self) -> float:
        return 1.0 / self.n_steps

    @property
    def z(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.h

    @property
    def p(self) -> float:
        return (self.gamma + 1.0) / self.m

    @property
    def y(self) -> np.ndarray:
        """Unpeeled solution ``y_n = z_n**p * v_n``; ``y_0 = 0``."""
        return self.z**self.p * self.v

    @property
    def y_at_1(self) -> float:
        return float(self.v[-1])


def constant_solution(k_plus: float, gamma: float, m: float) -> float:
    """Exact ``v`` for the kernel ``k_plus*(z-s)**gamma``.

    .. math:: v = (K_+ \\beta(\\gamma+1, (\\gamma+1)/m + 1))^{1/m}
    """
    if not (k_plus > 0 and gamma >= 0 and m > 0):
        raise DomainError(
            f"need k_plus > 0, gamma >= 0, m > 0; got {k_plus}, {gamma}, {m}"
        )
    return float((k_plus * beta_fn(gamma + 1.0, (gamma + 1.0) / m + 1.0)) ** (1.0 / m))


def v_bounds(problem: VolterraProblem, eps_frac: float = 0.05) -> Tuple[float, float]:
    """Lower and upper bounds on the peeled solution ``v``.

    ``(K-(beta - eps))**(1/m) <= v <= (K+(beta + eps))**(1/m)`` with
    ``beta = beta(gamma+1, (gamma+1)/m + 1)`` and ``eps = eps_frac*beta``.
    """
    if not 0 <= eps_frac < 1:
        raise DomainError(f"eps_frac must lie in [0, 1), got {eps_frac}")
    kernel = problem.kernel
    beta = beta_fn(kernel.gamma + 1.0, problem.p + 1.0)
    eps = eps_frac * beta
    lower = (kernel.k_minus * (beta - eps)) ** (1.0 / problem.m)
    upper = (kernel.k_plus * (beta + eps)) ** (1.0 / problem.m)
    return lower, upper


def _integrate(f, lo, hi, quad, n, i):
    try:
        return adaptive_quad(f, lo, hi, quad)
    except ToleranceNotReached as exc:
        raise ToleranceNotReached(exc.estimate, exc.abserr, f"weight w[{n},{i}]") from exc
    except FracPMEError as exc:
        raise WeightComputationError(n, i) from exc


def weights_rectangle(
    n: int, kernel: KernelSpec, m: float, h: float, quad: QuadConfig = DEFAULT_QUAD
) -> np.ndarray:
    """Row ``w_{n,i} = int_{z_i}^{z_{i+1}} K(z_n,s) s**p ds``, i < n."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    p = (kernel.gamma + 1.0) / m
    zn = n * h

    def integrand(s):
        return kernel(zn, s) * s**p

    return np.array(
        [_integrate(integrand, i * h, (i + 1) * h, quad, n, i) for i in range(n)]
    )


def weights_naive_rectangle(
    n: int, kernel: KernelSpec, m: float, h: float, quad: QuadConfig = DEFAULT_QUAD
) -> np.ndarray:
    """Row ``w_{n,i} = h K(z_n, z_i) z_i**p``: whole integrand frozen at the
    lower terminal of each cell. ``quad`` is unused."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    p = (kernel.gamma + 1.0) / m
    zn = n * h
    return np.array([h * kernel(zn, i * h) * (i * h) ** p for i in range(n)])


def weights_trapezoid(
    n: int, kernel: KernelSpec, m: float, h: float, quad: QuadConfig = DEFAULT_QUAD
) -> np.ndarray:
    """Row of the explicit linear-interpolation weights.

    For even ``n`` the interval is cut into panels ``[z_2i, z_2i+2]`` and ``v``
    is interpolated through the first two nodes of each panel. For odd ``n``
    the first cell ``[0, z_1]`` is interpolated on its own and the rest is
    cut into panels ``[z_2i-1, z_2i+1]``. The node ``z_n`` is never used.

    For ``n = 1`` the two integrals over ``[0, z_1]`` against ``1 - s/h``
    and ``s/h`` are returned; they multiply ``v_0`` and ``v_1`` and feed the
    starting equation of :func:`initial_v1`.

    Returns
    -------
    w : ndarray
        ``n`` weights (two when ``n = 1``).
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    p = (kernel.gamma + 1.0) / m
    zn = n * h
    w = np.zeros(max(n, 2))

    def panel(left, lo, hi, i_left):
        # linear hats anchored at ``left`` with nodes left, left + h
        def falling(s):
            return kernel(zn, s) * s**p * (1.0 - (s - left) / h)

        def rising(s):
            return kernel(zn, s) * s**p * (s - left) / h

        w[i_left] += _integrate(falling, lo, hi, quad, n, i_left)
        w[i_left + 1] += _integrate(rising, lo, hi, quad, n, i_left + 1)

    if n == 1:
        panel(0.0, 0.0, h, 0)
        return w
    if n % 2 == 0:
        for i in range(n // 2):
            panel(2 * i * h, 2 * i * h, (2 * i + 2) * h, 2 * i)
    else:
        panel(0.0, 0.0, h, 0)
        for i in range(1, (n - 1) // 2 + 1):
            panel((2 * i - 1) * h, (2 * i - 1) * h, (2 * i + 1) * h, 2 * i - 1)
    return w


_WEIGHTS = {
    "rectangle": weights_rectangle,
    "trapezoid": weights_trapezoid,
    "naive": weights_naive_rectangle,
}


def _start_integral(problem: VolterraProblem, h: float, quad: QuadConfig) -> float:
    kernel, p = problem.kernel, problem.p

    def integrand(sigma):
        return kernel(h, h * sigma) * sigma**p

    return h ** (-kernel.gamma) * adaptive_quad(integrand, 0.0, 1.0, quad)


def initial_v0(
    problem: VolterraProblem,
    h: float,
    quad: QuadConfig = DEFAULT_QUAD,
    extrapolate: bool = False,
) -> float:
    """Starting value ``(h**-gamma int_0^1 K(h, h*sigma) sigma**p dsigma)**(1/m)``.

    Evaluated at the finite step ``h``. With ``extrapolate`` the integral
    ``g(h)`` is replaced by ``2 g(h/2) - g(h)``: kernels that are smooth in
    ``z`` give ``g(h) = g(0) + O(h)``, and that first-order term otherwise
    limits the observed order of the trapezoid scheme at large ``m``. Both
    variants are exact for ``K = K_+ (z-s)**gamma``.

    Returns 0 with a warning if the kernel vanishes near the origin.
    """
    if not h > 0:
        raise DomainError(f"h must be > 0, got {h}")
    integral = _start_integral(problem, h, quad)
    if extrapolate:
        integral = 2.0 * _start_integral(problem, 0.5 * h, quad) - integral
    if not np.isfinite(integral):
        raise DomainError(f"starting value is not finite (integral={integral!r})")
    if integral <= 0:
        logger.warning("kernel integral at h=%g is %g: only the trivial solution", h, integral)
        return 0.0
    return float(integral ** (1.0 / problem.m))


def initial_v1(
    problem: VolterraProblem,
    h: float,
    v0: float,
    quad: QuadConfig = DEFAULT_QUAD,
    newton_tol: float = 1e-14,
) -> float:
    """Second starting value of the trapezoid scheme.

    Positive root of ``h**q x**(m+1) - b x - c v0 = 0`` where ``b`` and ``c``
    are the integrals of ``K(h,s) s**p`` against ``s/h`` and ``1 - s/h`` on
    ``[0, h]``. Newton's method is seeded at ``v0``; Brent's method on
    ``[v0/10, 10 v0]`` is the fallback.
    """
    if not v0 > 0:
        raise TrivialSolutionCollapse(1, v0)
    c_int, b_int = weights_trapezoid(1, problem.kernel, problem.m, h, quad)
    m = problem.m
    # normalised by the leading coefficient h**q
    scale = h ** (-problem.q)
    b_coef = b_int * scale
    c_coef = c_int * v0 * scale
    try:
        return newton_root_power(1.0, b_coef, c_coef, m, v0, tol=newton_tol)
    except NewtonDivergence as exc:
        logger.debug("Newton failed for v1 (%s), falling back to Brent", exc)

    # log form (m+1) t - log(b e^t + c) is increasing in t
    def g(t):
        return (m + 1.0) * t - np.log(b_coef * np.exp(t) + c_coef)

    lo, hi = np.log(v0 / 10.0), np.log(10.0 * v0)
    try:
        t_star = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    except ValueError as exc:
        raise NewtonDivergence(v0, "no root in [v0/10, 10 v0]") from exc
    return float(np.exp(t_star))


def _root(bracket: float, m: float) -> float:
    if m >= LARGE_M:
        return float(np.exp(np.log(bracket) / (m + 1.0)))
    return float(bracket ** (1.0 / (m + 1.0)))


def solve(problem: VolterraProblem, cfg: Optional[SolverConfig] = None) -> GridSolution:
    """March the explicit scheme over ``z_n = n/N``, n = 0..N.

    Raises
    ------
    TrivialSolutionCollapse
        If a step would require the root of a nonpositive number.
    """
    cfg = cfg or SolverConfig()
    n_steps, m = cfg.n_steps, problem.m
    h = 1.0 / n_steps
    q = problem.q
    weight_row = _WEIGHTS[cfg.method]

    v = np.empty(n_steps + 1)
    v[0] = initial_v0(problem, h, cfg.quad, extrapolate=cfg.start == "extrapolated")
    if not v[0] > 0:
        raise TrivialSolutionCollapse(0, v[0])

    if cfg.method == "trapezoid":
        v[1] = initial_v1(problem, h, v[0], cfg.quad, cfg.newton_tol)
        first = 2
    elif cfg.method == "naive":
        # the lower-terminal rule gives w_{1,0} = 0, so v_1 is copied from v_0
        v[1] = v[0]
        first = 2
    else:
        first = 1

    for n in range(first, n_steps + 1):
        w = weight_row(n, problem.kernel, m, h, cfg.quad)
        bracket = (n * h) ** (-q) * float(np.dot(w, v[:n]))
        if not (np.isfinite(bracket) and bracket > 0):
            raise TrivialSolutionCollapse(n, bracket)
        v[n] = _root(bracket, m)
        logger.debug("step n=%d: v=%.17g", n, v[n])

    logger.info(
        "solved %s problem (m=%g, gamma=%g) with %s, N=%d: v(1)=%.12g",
        problem.kernel.name, m, problem.kernel.gamma, cfg.method, n_steps, v[-1],
    )
    return GridSolution(n_steps, problem.kernel.gamma, m, v, cfg.method)


def sample_kernel_bounds(
    eval_fn: Callable, gamma: float, grid_n: int = 200, minus_cutoff: float = 1.0
) -> Tuple[float, float]:
    """Smallest and largest ``K(z,u)/(z-u)**gamma`` on a uniform simplex grid.

    Nodes are ``z_i = i/grid_n`` and ``u_j = j/grid_n`` with ``j < i``, so the
    band ``z - u < 1/grid_n**2`` is excluded. ``eval_fn`` must accept
    broadcastable arrays; wrap scalar kernels with :func:`numpy.vectorize`.

    The smallest ratio is taken over the nodes with ``z <= minus_cutoff``
    only, like the closed-form bounds on ``[0, X]``; the largest over the
    whole simplex.
    """
    if grid_n < 16:
        raise DomainError(f"grid_n must be >= 16, got {grid_n}")
    if not 0 < minus_cutoff <= 1:
        raise DomainError(f"minus_cutoff must lie in (0, 1], got {minus_cutoff}")
    if minus_cutoff * grid_n < 1.0 - 1e-9:
        raise DomainError(f"no grid node with 0 < z <= {minus_cutoff} for grid_n={grid_n}")
    nodes = np.arange(grid_n + 1) / grid_n
    zz, uu = np.meshgrid(nodes, nodes, indexing="ij")
    mask = (zz - uu) >= 1.0 / grid_n**2
    z, u = zz[mask], uu[mask]
    ratio = np.asarray(eval_fn(z, u), dtype=float) / (z - u) ** gamma
    lower = ratio[z <= minus_cutoff + 1e-12]
    return float(lower.min()), float(ratio.max())


def _power_eval(k_plus, gamma, z, s):
    return k_plus * np.maximum(z - s, 0.0) ** gamma


def _sine_eval(z, s):
    return np.sqrt(np.maximum(z - s, 0.0)) / (1.0 + np.sin(s) ** 2)


def power_kernel(k_plus: float = 1.0, gamma: float = 0.0) -> KernelSpec:
    """Kernel ``k_plus*(z-s)**gamma``, whose solution is constant."""
    return KernelSpec(
        gamma=gamma,
        k_minus=k_plus,
        k_plus=k_plus,
        eval=partial(_power_eval, k_plus, gamma),
        name=f"power(k={k_plus:g}, gamma={gamma:g})",
    )


def sine_kernel() -> KernelSpec:
    """Kernel ``sqrt(z-s)/(1 + sin(s)**2)`` with smooth non-constant solution."""
    return KernelSpec(
        gamma=0.5,
        k_minus=1.0 / (1.0 + np.sin(1.0) ** 2),
        k_plus=1.0,
        eval=_sine_eval,
        name="sine",
    )
