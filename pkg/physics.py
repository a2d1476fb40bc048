"""Physical constants and thermal spectral weights.

SI units throughout; the angular frequency omega (rad/s) is the only
spectral variable.  The thermal weight

    a_T(omega) = omega^4 hbar (4 pi)^2 / c^4 / (exp(hbar omega / k_B T) - 1)

is proportional to the occupation number of field oscillators.  Every flux
formula in this package uses the equivalent per-channel energy
``mean_mode_energy`` = a_T c^4 / (16 pi^2 omega^3) = hbar omega n(omega, T).
"""

import math
from dataclasses import dataclass

from scipy import constants as _codata

from errors import DomainError

# Above this value of hbar*omega/(k_B T) the occupation is below 1e-304.
OVERFLOW_EXPONENT = 700.0


@dataclass(frozen=True)
class Constants:
    """CODATA constants used by the toolkit."""

    c: float
    hbar: float
    k_b: float


CONSTANTS = Constants(c=_codata.speed_of_light, hbar=_codata.hbar, k_b=_codata.Boltzmann)

C = CONSTANTS.c
HBAR = CONSTANTS.hbar
K_B = CONSTANTS.k_b
STEFAN_BOLTZMANN = math.pi**2 * K_B**4 / (60.0 * HBAR**3 * C**2)


@dataclass(frozen=True)
class SpectralWeight:
    value: float
    omega: float
    temperature: float


def _check_omega(omega: float) -> None:
    if not omega > 0:
        raise DomainError(f"angular frequency must be positive, got {omega}")


def _check_temperature(T: float) -> None:
    if not T >= 0:
        raise DomainError(f"temperature must be non-negative, got {T}")


def occupation(omega: float, T: float) -> float:
    """Bose-Einstein occupation 1/(exp(hbar omega / k_B T) - 1), zero at T = 0."""
    if T == 0:
        return 0.0
    x = HBAR * omega / (K_B * T)
    if x > OVERFLOW_EXPONENT:
        return 0.0
    return 1.0 / math.expm1(x)


def planck_factor(omega: float, T: float) -> SpectralWeight:
    """Thermal spectral weight a_T(omega)."""
    _check_omega(omega)
    _check_temperature(T)
    value = omega**4 * HBAR * (4.0 * math.pi) ** 2 / C**4 * occupation(omega, T)
    return SpectralWeight(value=value, omega=omega, temperature=T)


def zero_point_factor(omega: float) -> float:
    """Zero-point weight a_0(omega) = omega^4 hbar (4 pi)^2 / (2 c^4).

    Exposed for completeness only: zero-point fluctuations carry no net heat,
    so no operation of this package adds it to a power.
    """
    _check_omega(omega)
    return omega**4 * HBAR * (4.0 * math.pi) ** 2 / (2.0 * C**4)


def mean_mode_energy(omega: float, T: float) -> float:
    """Mean thermal energy hbar*omega*n of one field mode (a_T c^4 / (16 pi^2 omega^3))."""
    _check_omega(omega)
    _check_temperature(T)
    return HBAR * omega * occupation(omega, T)


def thermal_wavelength(T: float) -> float:
    """lambda_T = hbar c / (k_B T) in metres."""
    if not T > 0:
        raise DomainError(f"thermal wavelength needs T > 0, got {T}")
    return HBAR * C / (K_B * T)


def stefan_boltzmann_flux(T: float) -> float:
    """Black-body emitted power per area, sigma T^4 (W/m^2)."""
    _check_temperature(T)
    return STEFAN_BOLTZMANN * T**4
