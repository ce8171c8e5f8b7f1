import math
from functools import partial

import numpy as np
import pytest

from fracpme.analysis import aitken_order, terminal_value
from fracpme.exceptions import (
    DomainError,
    ToleranceNotReached,
    TrivialSolutionCollapse,
    WeightComputationError,
)
from fracpme.spfun import DEFAULT_QUAD, beta_fn
from fracpme.volterra import (
    KernelSpec,
    SolverConfig,
    VolterraProblem,
    constant_solution,
    power_kernel,
    sample_kernel_bounds,
    sine_kernel,
    solve,
    v_bounds,
    weights_naive_rectangle,
    weights_rectangle,
    weights_trapezoid,
)

GAMMAS = [0.0, 0.5, math.sqrt(2.0), math.pi]
POWERS = [1.0, 2.0, 10.0, 100.0]


def test_constant_solution_value():
    # beta(1, 2) = 1/2
    assert constant_solution(1.0, 0.0, 1.0) == pytest.approx(0.5)
    assert constant_solution(2.0, 0.5, 2.0) == pytest.approx(math.sqrt(2.0 * beta_fn(1.5, 1.75)))


@pytest.mark.parametrize("gamma", GAMMAS)
@pytest.mark.parametrize("m", POWERS)
def test_trapezoid_reproduces_constant_solution(gamma, m):
    sol = solve(VolterraProblem(m=m, kernel=power_kernel(1.0, gamma)), SolverConfig(n_steps=10))
    exact = constant_solution(1.0, gamma, m)
    assert np.max(np.abs(sol.v - exact)) <= 1e-8


@pytest.mark.parametrize("gamma", [0.0, 0.5])
def test_rectangle_reproduces_constant_solution(gamma):
    problem = VolterraProblem(m=2.0, kernel=power_kernel(1.5, gamma))
    sol = solve(problem, SolverConfig(n_steps=10, method="rectangle"))
    np.testing.assert_allclose(sol.v, constant_solution(1.5, gamma, 2.0), rtol=1e-9)


def test_naive_rectangle_is_not_exact():
    problem = VolterraProblem(m=2.0, kernel=power_kernel(1.0, 0.5))
    sol = solve(problem, SolverConfig(n_steps=10, method="naive"))
    exact = constant_solution(1.0, 0.5, 2.0)
    assert sol.v[0] == pytest.approx(exact, rel=1e-10)
    assert np.max(np.abs(sol.v - exact)) > 1e-3
    assert sol.v[3] != sol.v[2]


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7])
def test_weight_rows_integrate_the_kernel(n):
    gamma, m, h = 0.5, 2.0, 0.1
    kernel = power_kernel(1.0, gamma)
    p = (gamma + 1.0) / m
    zn = n * h
    # int_0^zn (zn - s)^gamma s^p ds
    total = zn ** (gamma + p + 1.0) * beta_fn(gamma + 1.0, p + 1.0)
    trap = weights_trapezoid(n, kernel, m, h)
    rect = weights_rectangle(n, kernel, m, h)
    assert trap.shape == (max(n, 2),)
    assert rect.shape == (n,)
    assert trap.sum() == pytest.approx(total, rel=1e-9)
    assert rect.sum() == pytest.approx(total, rel=1e-9)
    assert np.all(rect >= 0)


def test_naive_weights_freeze_the_lower_terminal():
    kernel = power_kernel(1.0, 0.0)
    w = weights_naive_rectangle(4, kernel, 1.0, 0.25)
    np.testing.assert_allclose(w, 0.25 * np.array([0.0, 0.25, 0.5, 0.75]))


def test_weights_reject_bad_row():
    with pytest.raises(DomainError):
        weights_trapezoid(0, power_kernel(), 1.0, 0.1)


def test_grid_solution_accessors():
    sol = solve(VolterraProblem(m=2.0, kernel=sine_kernel()), SolverConfig(n_steps=10))
    assert sol.h == pytest.approx(0.1)
    assert sol.z[0] == 0.0 and sol.z[-1] == pytest.approx(1.0)
    assert sol.y[0] == 0.0
    assert sol.y_at_1 == pytest.approx(sol.y[-1])
    assert not sol.v.flags.writeable
    with pytest.raises(ValueError):
        sol.v[0] = 1.0


def test_sine_kernel_solution_within_bounds():
    problem = VolterraProblem(m=2.0, kernel=sine_kernel())
    sol = solve(problem, SolverConfig(n_steps=20))
    lower, upper = v_bounds(problem)
    assert np.all(sol.v >= lower)
    assert np.all(sol.v <= upper)


def test_sine_kernel_constants():
    kernel = sine_kernel()
    k_minus, k_plus = sample_kernel_bounds(kernel.eval, kernel.gamma, grid_n=64)
    assert k_plus == pytest.approx(1.0)
    assert kernel.k_minus - 1e-12 <= k_minus < 1.0
    # 1/(1 + sin(s)^2) is smallest at s = 1
    assert kernel.k_minus == pytest.approx(1.0 / (1.0 + math.sin(1.0) ** 2))
    assert k_minus == pytest.approx(kernel.k_minus, rel=0.02)


def test_zero_kernel_collapses_to_trivial_solution():
    kernel = KernelSpec(gamma=0.0, k_minus=1.0, k_plus=1.0, eval=lambda z, s: 0.0)
    with pytest.raises(TrivialSolutionCollapse) as info:
        solve(VolterraProblem(m=2.0, kernel=kernel), SolverConfig(n_steps=4))
    assert info.value.step == 0


def test_invalid_inputs():
    with pytest.raises(DomainError):
        KernelSpec(gamma=0.0, k_minus=2.0, k_plus=1.0, eval=lambda z, s: 1.0)
    with pytest.raises(DomainError):
        SolverConfig(method="simpson")
    with pytest.raises(DomainError):
        SolverConfig(n_steps=1)
    with pytest.raises(DomainError):
        SolverConfig(start="midpoint")
    with pytest.raises(DomainError):
        VolterraProblem(m=0.0, kernel=power_kernel())
    with pytest.raises(DomainError):
        sample_kernel_bounds(power_kernel().eval, 0.0, grid_n=8)


def test_large_power_uses_log_root():
    sol = solve(VolterraProblem(m=600.0, kernel=power_kernel(1.0, 0.5)), SolverConfig(n_steps=6))
    np.testing.assert_allclose(sol.v, constant_solution(1.0, 0.5, 600.0), rtol=1e-10)


def _failing_quad(error, real, f, lo, hi, quad):
    # the starting values integrate over [0, h] or [0, 1]; weight panels start later
    if lo > 0:
        raise error
    return real(f, lo, hi, quad)


def test_weight_tolerance_failure_keeps_its_type(monkeypatch):
    import fracpme.volterra as volterra

    error = ToleranceNotReached(1.0, 1e-3, "limit reached")
    monkeypatch.setattr(volterra, "adaptive_quad", partial(_failing_quad, error, volterra.adaptive_quad))
    with pytest.raises(ToleranceNotReached, match=r"w\[3,1\]"):
        solve(VolterraProblem(m=2.0, kernel=sine_kernel()), SolverConfig(n_steps=4))


def test_other_weight_failures_name_the_weight(monkeypatch):
    import fracpme.volterra as volterra

    error = DomainError("kernel not finite")
    monkeypatch.setattr(volterra, "adaptive_quad", partial(_failing_quad, error, volterra.adaptive_quad))
    with pytest.raises(WeightComputationError) as info:
        solve(VolterraProblem(m=2.0, kernel=sine_kernel()), SolverConfig(n_steps=4))
    assert (info.value.n, info.value.i) == (3, 1)


@pytest.mark.slow
@pytest.mark.parametrize("m, expected", [(1.0, 2.02), (10.0, 1.96), (100.0, 1.84)])
def test_sine_kernel_trapezoid_order(m, expected):
    runner = partial(terminal_value, VolterraProblem(m=m, kernel=sine_kernel()), "trapezoid", DEFAULT_QUAD)
    assert aitken_order(runner, 100).value == pytest.approx(expected, abs=0.15)


@pytest.mark.slow
@pytest.mark.parametrize("m", [1.0, 2.0, 10.0, 100.0])
def test_sine_kernel_rectangle_order(m):
    runner = partial(terminal_value, VolterraProblem(m=m, kernel=sine_kernel()), "rectangle", DEFAULT_QUAD)
    assert aitken_order(runner, 100).value == pytest.approx(0.99, abs=0.10)
