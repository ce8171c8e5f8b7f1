import math

import numpy as np
import pytest

from fracpme.exceptions import DomainError, NewtonDivergence, ToleranceNotReached
from fracpme.spfun import (
    QuadConfig,
    adaptive_quad,
    beta_fn,
    gamma_fn,
    inc_beta,
    newton_root_power,
)


def test_gamma_and_beta_values():
    assert gamma_fn(5.0) == pytest.approx(24.0)
    assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi))
    assert beta_fn(2.0, 3.0) == pytest.approx(1.0 / 12.0)
    np.testing.assert_allclose(gamma_fn(np.array([1.0, 2.0, 3.0])), [1.0, 1.0, 2.0])


@pytest.mark.parametrize("x", [0.0, -1.0, float("nan")])
def test_gamma_rejects_nonpositive(x):
    with pytest.raises(DomainError):
        gamma_fn(x)


def test_inc_beta_limits():
    assert inc_beta(2.0, 3.0, 1.0) == pytest.approx(beta_fn(2.0, 3.0))
    assert inc_beta(2.0, 3.0, 0.0) == 0.0
    assert inc_beta(1.0, 1.0, 0.3) == pytest.approx(0.3)
    assert inc_beta(2.0, 1.0, 0.5) == pytest.approx(0.125)
    with pytest.raises(DomainError):
        inc_beta(2.0, 3.0, 1.5)
    with pytest.raises(DomainError):
        inc_beta(0.0, 3.0, 0.5)


def test_adaptive_quad_smooth_and_singular():
    assert adaptive_quad(lambda s: s**2, 0.0, 1.0) == pytest.approx(1.0 / 3.0, rel=1e-12)
    assert adaptive_quad(lambda s: s**-0.5, 0.0, 1.0) == pytest.approx(2.0, rel=1e-9)
    assert adaptive_quad(lambda s: 1.0, 0.0, 1.0, endpoint_exponents=(0.0, -0.5)) == pytest.approx(
        2.0, rel=1e-12
    )
    assert adaptive_quad(lambda s: 1.0, 0.3, 0.3) == 0.0


def test_adaptive_quad_reports_unmet_tolerance():
    cfg = QuadConfig(max_subdivisions=1)
    with pytest.raises(ToleranceNotReached) as info:
        adaptive_quad(lambda s: math.sin(100.0 * s), 0.0, 10.0, cfg)
    assert info.value.abserr > cfg.abs_tol


@pytest.mark.parametrize(
    "kwargs", [dict(abs_tol=0.0), dict(rel_tol=-1.0), dict(max_subdivisions=0)]
)
def test_quad_config_validation(kwargs):
    with pytest.raises(DomainError):
        QuadConfig(**kwargs)


def test_newton_root_power():
    assert newton_root_power(1.0, 0.0, 8.0, 2.0, 1.0) == pytest.approx(2.0, rel=1e-14)
    assert newton_root_power(1.0, 1.0, 0.0, 1.0, 3.0) == pytest.approx(1.0, rel=1e-14)
    # x^3 = x + 1: the plastic number
    assert newton_root_power(1.0, 1.0, 1.0, 2.0, 1.0) == pytest.approx(1.324717957244746)


def test_newton_root_power_errors():
    with pytest.raises(DomainError):
        newton_root_power(0.0, 1.0, 1.0, 2.0, 1.0)
    with pytest.raises(DomainError):
        newton_root_power(1.0, 0.0, 0.0, 2.0, 1.0)
    with pytest.raises(NewtonDivergence):
        newton_root_power(1.0, 1.0, 1.0, 1.0, 0.1)


def test_newton_root_power_stall_stays_at_rounding_floor():
    # x^2 = 2e6: the float root leaves a residual of about 2e-10, above tol
    x = newton_root_power(1.0, 0.0, 2e6, 1.0, 1000.0, tol=1e-14)
    assert x == pytest.approx(math.sqrt(2e6), rel=1e-15)
    residual = abs(x * x - 2e6)
    assert 1e-14 < residual <= 1e3 * np.finfo(float).eps * 2e6


def test_newton_root_power_stall_above_floor_raises(monkeypatch):
    monkeypatch.setattr("fracpme.spfun.STALL_ULPS", 0.1)
    with pytest.raises(NewtonDivergence, match="stalled"):
        newton_root_power(1.0, 0.0, 2e6, 1.0, 1000.0, tol=1e-14)
