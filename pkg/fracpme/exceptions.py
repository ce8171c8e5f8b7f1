"""Errors raised by fracpme.

Every error carries the numbers needed to diagnose it; lower-level causes are
chained with ``raise ... from``.
"""
from typing import Optional, Sequence, Tuple


class FracPMEError(Exception):
    """Base class of every error raised by the package."""


class DomainError(FracPMEError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(FracPMEError):
    """A run configuration is inconsistent or cannot be loaded."""


class ToleranceNotReached(FracPMEError):
    """Adaptive quadrature exhausted its subdivisions.

    Parameters
    ----------
    estimate : float
        Best estimate of the integral.
    abserr : float
        Estimated absolute error of ``estimate``.
    """

    def __init__(self, estimate: float, abserr: float, message: str = ""):
        self.estimate = estimate
        self.abserr = abserr
        super().__init__(
            f"tolerance not reached: estimate={estimate!r}, abserr={abserr:.3e}"
            + (f" ({message})" if message else "")
        )


class NewtonDivergence(FracPMEError):
    """Newton's method failed to converge or left the positive half-line."""

    def __init__(self, last_iterate: float, message: str = ""):
        self.last_iterate = last_iterate
        super().__init__(f"Newton iteration failed at x={last_iterate!r}: {message}")


class TrivialSolutionCollapse(FracPMEError):
    """The scheme was driven towards the trivial solution y = 0."""

    def __init__(self, step: int, value: Optional[float] = None):
        self.step = step
        self.value = value
        super().__init__(
            f"collapse to trivial solution at step n={step} (bracket={value!r})"
        )


class WeightComputationError(FracPMEError):
    """A quadrature weight w_{n,i} could not be computed."""

    def __init__(self, n: int, i: int):
        self.n = n
        self.i = i
        super().__init__(f"weight w[{n},{i}] could not be computed")


class FrontUndefined(FracPMEError):
    """The boundary derivative defining the wetting front is not positive."""

    def __init__(self, derivative: float):
        self.derivative = derivative
        super().__init__(f"front undefined: boundary derivative {derivative!r} <= 0")


class EstimateUnstable(FracPMEError):
    """Successive differences vanish, so the order cannot be estimated."""

    def __init__(self, triple: Sequence[float]):
        self.triple = tuple(triple)
        super().__init__(f"order estimate unstable for values {self.triple!r}")


class NoCriticalValue(FracPMEError):
    """mu_m - 3 does not change sign in the search bracket."""

    def __init__(self, bracket: Tuple[float, float], values: Tuple[float, float]):
        self.bracket = bracket
        self.values = values
        super().__init__(
            f"no critical m in bracket {bracket!r} (mu_m - 3 = {values!r})"
        )


class TridiagonalBreakdown(FracPMEError):
    """The implicit finite-difference system is singular."""

    def __init__(self, time_index: int):
        self.time_index = time_index
        super().__init__(f"tridiagonal solve broke down at time index {time_index}")


class DomainTooSmall(FracPMEError):
    """The finite-difference front reached the right edge of the domain."""

    def __init__(self, front_index: int, n_x: int):
        self.front_index = front_index
        self.n_x = n_x
        super().__init__(
            f"domain too small: front at node {front_index} of {n_x}"
        )
