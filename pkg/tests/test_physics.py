import math

import numpy as np
import pytest
from scipy import constants

from errors import DomainError
from physics import (C, HBAR, K_B, STEFAN_BOLTZMANN, mean_mode_energy, occupation, planck_factor,
                     stefan_boltzmann_flux, thermal_wavelength, zero_point_factor)


def test_stefan_boltzmann_matches_codata():
    np.testing.assert_allclose(STEFAN_BOLTZMANN, constants.Stefan_Boltzmann, rtol=1e-12)


def test_occupation_vanishes_at_zero_temperature():
    assert occupation(1e14, 0.0) == 0.0
    assert planck_factor(1e14, 0.0).value == 0.0


def test_occupation_does_not_overflow():
    assert occupation(1e16, 1.0) == 0.0


def test_planck_factor_formula():
    omega, T = 1.7e14, 300.0
    n = 1.0 / math.expm1(HBAR * omega / (K_B * T))
    expected = omega**4 * HBAR * 16 * math.pi**2 / C**4 * n
    weight = planck_factor(omega, T)
    np.testing.assert_allclose(weight.value, expected, rtol=1e-14)
    assert weight.omega == omega
    assert weight.temperature == T


def test_classical_limit_of_mode_energy():
    # hbar omega << k_B T
    np.testing.assert_allclose(mean_mode_energy(1e9, 1000.0), K_B * 1000.0, rtol=1e-4)


def test_zero_point_is_half_a_quantum():
    omega = 3e14
    np.testing.assert_allclose(zero_point_factor(omega), omega**4 * HBAR * 8 * math.pi**2 / C**4)


def test_thermal_wavelength_at_room_temperature():
    np.testing.assert_allclose(thermal_wavelength(300.0), 7.634e-6, rtol=1e-3)


def test_black_body_flux():
    np.testing.assert_allclose(stefan_boltzmann_flux(300.0), 459.3, rtol=1e-3)


@pytest.mark.parametrize("omega, T", [(0.0, 300.0), (-1.0, 300.0), (1e14, -1.0)])
def test_domain_errors(omega, T):
    with pytest.raises(DomainError):
        planck_factor(omega, T)


def test_thermal_wavelength_needs_positive_temperature():
    with pytest.raises(DomainError):
        thermal_wavelength(0.0)
