import math

import numpy as np
import pytest

from errors import DomainError, IntegrationError
from numerics import (frequency_grid, gauss_legendre_panels, integrate_adaptive, integrate_frequency,
                      integrate_semi_infinite)
from physics import HBAR, K_B


def test_integrates_sine():
    result = integrate_adaptive(math.sin, 0.0, math.pi, tol=1e-10)
    np.testing.assert_allclose(result.value, 2.0, rtol=1e-10)
    assert result.error_estimate < 1e-9
    assert result.evaluations == 15 * (2 * result.subintervals - 1)


def test_peaked_integrand_refines():
    width = 1e-3
    result = integrate_adaptive(lambda x: width / ((x - 0.3) ** 2 + width**2), 0.0, 1.0, tol=1e-8)
    expected = math.atan(0.7 / width) + math.atan(0.3 / width)
    np.testing.assert_allclose(result.value, expected, rtol=1e-8)
    assert result.subintervals > 1


def test_vector_integrand_driven_by_first_component():
    result = integrate_adaptive(lambda x: np.array([x**2, x**3, 1.0]), 0.0, 2.0, tol=1e-12)
    np.testing.assert_allclose(result.values, [8 / 3, 4.0, 2.0], rtol=1e-12)
    assert result.component(1) == pytest.approx(4.0)


def test_final_partition_reproduces_value():
    result = integrate_adaptive(lambda x: math.exp(-x) * math.cos(5 * x), 0.0, 4.0, tol=1e-10)
    assert np.all(np.diff(result.nodes) > 0)
    np.testing.assert_allclose(result.weights @ result.samples[:, 0], result.value, rtol=1e-12)


def test_subinterval_cap_reports_worst_interval():
    with pytest.raises(IntegrationError) as info:
        integrate_adaptive(lambda x: math.sin(1.0 / x), 1e-6, 1.0, tol=1e-14, max_subintervals=4)
    a, b, err = info.value.worst_interval
    assert a < b and err > 0
    assert math.isfinite(info.value.partial_value)


def test_rejects_empty_interval_and_bad_integrand():
    with pytest.raises(DomainError):
        integrate_adaptive(math.sin, 1.0, 1.0)
    with pytest.raises(DomainError):
        integrate_adaptive(lambda x: math.inf, 0.0, 1.0)


def test_semi_infinite():
    result = integrate_semi_infinite(lambda x: math.exp(-x), 0.0, tol=1e-10)
    np.testing.assert_allclose(result.value, 1.0, rtol=1e-9)


def test_frequency_grid_bounds():
    grid = frequency_grid(300.0)
    assert grid.x_min == 1e-4 and grid.x_max == 40.0
    np.testing.assert_allclose(grid.omega(1.0), K_B * 300.0 / HBAR)
    with pytest.raises(DomainError):
        frequency_grid(0.0)


def test_planck_integral_over_frequency_grid():
    # int x^3 / (e^x - 1) dx = pi^4 / 15; the truncation at x = 40 is negligible
    grid = frequency_grid(500.0, tol=1e-9)
    scale = grid.jacobian
    result = integrate_frequency(lambda w: (w / scale) ** 3 / math.expm1(w / scale), grid)
    np.testing.assert_allclose(result.value / scale, math.pi**4 / 15, rtol=1e-8)
    np.testing.assert_allclose(result.weights @ result.samples[:, 0], result.value, rtol=1e-10)


def test_gauss_legendre_panels_are_exact_for_polynomials():
    points, weights = gauss_legendre_panels(-1.0, 3.0, 5, 6)
    assert points.shape == weights.shape == (30,)
    np.testing.assert_allclose(weights.sum(), 4.0)
    np.testing.assert_allclose(weights @ points**7, (3.0**8 - 1.0) / 8, rtol=1e-12)
    with pytest.raises(DomainError):
        gauss_legendre_panels(0.0, 1.0, 0, 4)
