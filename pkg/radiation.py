"""Heat radiated by an isolated plate, sphere or cylinder at temperature T.

All three are frequency integrals of the mean mode energy
Theta(omega, T) = hbar omega n(omega, T) times a sum of per-mode absorption
brackets (Kirchhoff: a mode emits what it absorbs):

* plate (per area):     Theta omega^2/(4 pi^2 c^2) int_0^{pi/2} sum_P (1 - |r_P|^2) sin cos dtheta
* sphere (total):       Theta (2/pi) sum_l (2l+1) sum_P b_l^P
* cylinder (per length): Theta / pi^2 int dk_par sum_n sum_P b_n^P(k_par)

Powers are returned positive; ``normalized`` divides by sigma T^4 A.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from config import settings, resolve_tol
from errors import PassivityError, TruncationError
from materials import DielectricModel, MagneticPermeability, permittivity, skin_depth
from models import EmissionResult, Polarization, PolarizationSplit, SpectralCurve, TruncationInfo
from numerics import QuadratureResult, frequency_grid, gauss_legendre_panels, integrate_adaptive, integrate_frequency
from physics import C, mean_mode_energy, stefan_boltzmann_flux
from scattering import absorption_bracket, cylinder_matrices, fresnel_coefficients, mie_coefficients

_logger = logging.getLogger(__name__)

# Per-mode brackets below this are treated as a passivity violation rather than round-off.
BRACKET_ROUNDOFF = 1e-9

# Fixed angular rule for the plate (integrand is smooth in theta).
_PLATE_ANGLES, _PLATE_ANGLE_WEIGHTS = gauss_legendre_panels(0.0, 0.5 * math.pi, 4, 12)


@dataclass
class _TruncationLog:
    orders: int = 0
    error: float = 0.0

    def record(self, orders: int, error: float) -> None:
        self.orders = max(self.orders, orders)
        self.error = max(self.error, error)


def check_brackets(brackets: np.ndarray, where: str) -> None:
    worst = float(np.min(brackets)) if brackets.size else 0.0
    if worst < -BRACKET_ROUNDOFF:
        raise PassivityError(f"negative absorption bracket {worst:.3g} in {where}")


def _spectrum(result: QuadratureResult) -> SpectralCurve:
    return SpectralCurve(
        omega=result.nodes.tolist(),
        density=result.samples[:, 0].tolist(),
        weights=result.weights.tolist(),
    )


def _truncated_mode_sum(evaluate, start: int, tol: float, floor: float, log: _TruncationLog, label: str):
    """Double the order cutoff until the added orders change the sum by less than 0.1*tol.

    ``evaluate(lo, hi)`` returns the contributions of orders lo..hi-1 (rows)
    with columns [total, E, M]; orders already summed are not recomputed.
    Returns the column sums at the accepted cutoff.
    """
    cap = settings.L_MAX_CAP
    orders = min(start, cap)
    terms = evaluate(0, orders)
    total = terms.sum(axis=0)
    if orders >= cap:
        # the first pass already hit the cap: accept only if the top orders are negligible
        change = abs(terms[-1, 0]) / max(abs(total[0]), floor)
        if change >= 0.1 * tol:
            raise TruncationError(f"{label} mode sum not converged at the order cap", orders, change)
        log.record(orders, change)
        return total
    while True:
        finer_orders = min(2 * orders, cap)
        increment = evaluate(orders, finer_orders).sum(axis=0)
        total = total + increment
        change = abs(increment[0]) / max(abs(total[0]), floor)
        if change < 0.1 * tol:
            log.record(finer_orders, change)
            return total
        _logger.debug(f"{label}: orders {orders} -> {finer_orders}, relative change {change:.3g}")
        if finer_orders >= cap:
            raise TruncationError(f"{label} mode sum not converged at the order cap", finer_orders, change)
        orders = finer_orders


def _emission(integrand, T: float, tol: float, area: float) -> Tuple[QuadratureResult, float]:
    grid = frequency_grid(T, tol)
    reference = stefan_boltzmann_flux(T) * area
    result = integrate_frequency(integrand, grid, abs_tol=1e-3 * tol * reference)
    return result, reference


def _package(result: QuadratureResult, reference: float, log: _TruncationLog) -> EmissionResult:
    power = max(result.value, 0.0)
    return EmissionResult(
        power=power,
        normalized=power / reference,
        by_polarization=PolarizationSplit(E=result.component(1), M=result.component(2)),
        spectrum=_spectrum(result),
        truncation=TruncationInfo(orders=log.orders, error=log.error),
        quadrature_error=result.error_estimate,
    )


# --------------------------------------------------------------------------- #
# Plate                                                                        #
# --------------------------------------------------------------------------- #

def plate_angular_factor(eps: complex, omega: float, force_black: bool = False) -> Tuple[float, float]:
    """int_0^{pi/2} (1 - |r_P|^2) sin cos dtheta for P = E, M (1/2 each for a black plate)."""
    if force_black:
        return 0.5, 0.5
    k0 = omega / C
    r_e, r_m, _ = fresnel_coefficients(eps, omega, k0 * np.sin(_PLATE_ANGLES))
    kernel = _PLATE_ANGLE_WEIGHTS * np.sin(_PLATE_ANGLES) * np.cos(_PLATE_ANGLES)
    e = 1.0 - np.abs(r_e) ** 2
    m = 1.0 - np.abs(r_m) ** 2
    check_brackets(np.concatenate([e, m]), f"plate emission at omega={omega:g}")
    return float(kernel @ e), float(kernel @ m)


def radiate_plate(model: DielectricModel, T: float, tol: float | None = None, force_black: bool = False) -> EmissionResult:
    """Hemispherical emission per area; ``normalized`` is the emissivity e(T).

    ``force_black`` replaces the Fresnel coefficients by r = 0.
    """
    tol = resolve_tol(tol)
    _logger.debug(f"radiate_plate T={T} tol={tol} black={force_black}")

    def integrand(omega: float):
        eps = complex(permittivity(model, omega))
        a_e, a_m = plate_angular_factor(eps, omega, force_black)
        prefactor = mean_mode_energy(omega, T) * omega**2 / (4 * math.pi**2 * C**2)
        return np.array([prefactor * (a_e + a_m), prefactor * a_e, prefactor * a_m])

    result, reference = _emission(integrand, T, tol, 1.0)
    return _package(result, reference, _TruncationLog())


# --------------------------------------------------------------------------- #
# Sphere                                                                       #
# --------------------------------------------------------------------------- #

def radiate_sphere(model: DielectricModel, mu: complex | MagneticPermeability, R: float, T: float,
                   tol: float | None = None) -> EmissionResult:
    """Total power radiated by a homogeneous sphere of radius R.

    The E share collects the electric multipoles (t_e), M the magnetic ones.
    """
    tol = resolve_tol(tol)
    mu_value = mu.mu if isinstance(mu, MagneticPermeability) else complex(mu)
    log = _TruncationLog()

    def integrand(omega: float):
        eps = complex(permittivity(model, omega))
        x = omega * R / C

        def terms(lo: int, hi: int) -> np.ndarray:
            t_e, t_m = mie_coefficients(eps, mu_value, omega, R, hi)
            b_e, b_m = absorption_bracket(t_e[lo:]), absorption_bracket(t_m[lo:])
            check_brackets(np.concatenate([b_e, b_m]), f"sphere emission at omega={omega:g}")
            weight = 2 * np.arange(lo + 1, hi + 1) + 1
            return np.column_stack([weight * (b_e + b_m), weight * b_e, weight * b_m])

        start = math.ceil(x) + settings.TRUNCATION_MARGIN
        total = _truncated_mode_sum(terms, start, tol, 1e-3 * (x + 1) ** 2, log, "sphere")
        return mean_mode_energy(omega, T) * (2 / math.pi) * total

    result, reference = _emission(integrand, T, tol, 4 * math.pi * R**2)
    _logger.debug(f"radiate_sphere R={R:g} T={T}: orders up to {log.orders}")
    return _package(result, reference, log)


# --------------------------------------------------------------------------- #
# Cylinder                                                                     #
# --------------------------------------------------------------------------- #

def cylinder_mode_sum(eps: complex, omega: float, R: float, k_parallel: float, tol: float,
                      log: _TruncationLog) -> np.ndarray:
    """[total, E, M] of sum over all n of the brackets at one axial wavenumber."""
    x = omega * R / C

    def terms(lo: int, hi: int) -> np.ndarray:
        brackets = absorption_bracket(cylinder_matrices(eps, omega, R, hi - 1, k_parallel, n_min=lo))
        check_brackets(brackets, f"cylinder emission at omega={omega:g}")
        # n and -n contribute equally
        weight = np.where(np.arange(lo, hi) == 0, 1.0, 2.0)[:, None]
        brackets = weight * brackets
        return np.column_stack([brackets.sum(axis=1), brackets[:, 0], brackets[:, 1]])

    start = math.ceil(x) + settings.TRUNCATION_MARGIN
    return _truncated_mode_sum(terms, start, tol, 1e-3 * (x + 1), log, "cylinder")


def radiate_cylinder(model: DielectricModel, R: float, T: float, tol: float | None = None) -> EmissionResult:
    """Power radiated per unit length by an infinite cylinder of radius R.

    The axial wavenumber k_par = (omega/c) sin(phi) is integrated adaptively
    over phi in [0, pi/2] and doubled (k_par -> -k_par symmetry).  E is the
    parallel polarization, M the perpendicular one.
    """
    tol = resolve_tol(tol)
    log = _TruncationLog()
    inner_tol = 0.1 * tol

    def integrand(omega: float):
        eps = complex(permittivity(model, omega))
        k0 = omega / C

        def angular(phi: float):
            return k0 * math.cos(phi) * cylinder_mode_sum(eps, omega, R, k0 * math.sin(phi), tol, log)

        inner = integrate_adaptive(angular, 0.0, 0.5 * math.pi, inner_tol,
                                   abs_tol=1e-3 * tol * k0 * (k0 * R + 1))
        return mean_mode_energy(omega, T) / math.pi**2 * 2.0 * inner.values

    result, reference = _emission(integrand, T, tol, 2 * math.pi * R)
    _logger.debug(f"radiate_cylinder R={R:g} T={T}: orders up to {log.orders}")
    return _package(result, reference, log)


# --------------------------------------------------------------------------- #
# Derived quantities                                                           #
# --------------------------------------------------------------------------- #

def smallest_skin_depth(model: DielectricModel, T: float, samples: int = 400) -> float:
    """Minimum skin depth over the band where x^3/(e^x - 1) exceeds 1 % of its peak."""
    grid = frequency_grid(T)
    x = np.geomspace(grid.x_min, grid.x_max, samples)
    weight = x**3 / np.expm1(x)
    band = x[weight >= 0.01 * weight.max()]
    return min(skin_depth(model, grid.omega(float(v))) for v in band)


def polarization_share(result: EmissionResult, polarization: Polarization = Polarization.E) -> float:
    return result.by_polarization.share(polarization)
