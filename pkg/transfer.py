"""Heat transfer between two bodies: plate-plate, sphere-plate, PTA and the large-d limit.

Every transfer here is a net spectral flux

    P = int d omega [Theta(omega, T_a) - Theta(omega, T_b)] kernel(omega)

with a temperature-independent kernel, so equal temperatures give exactly
zero and swapping them flips the sign.  Integrands return five components,
[total, E, M, propagating, evanescent]; E and M split by the polarization
of the plate waves (E = TE/s, M = TM/p), the channels by whether the plate
wave is propagating or evanescent.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from config import resolve_tol, settings
from conversion import QuadratureSpec, conversion_block, planar_nodes
from errors import ConditioningError, DomainError, TruncationError
from materials import DielectricModel, MagneticPermeability, permittivity
from models import (
    ChannelSplit,
    ConvergenceInfo,
    PolarizationSplit,
    Reflections,
    Solver,
    SpectralCurve,
    TransferResult,
)
from numerics import QuadratureResult, frequency_grid, gauss_legendre_panels, integrate_adaptive, integrate_frequency
from physics import C, mean_mode_energy, planck_factor, stefan_boltzmann_flux
from radiation import check_brackets, radiate_plate
from scattering import absorption_bracket, fresnel_coefficients, mie_log_amplitudes

_logger = logging.getLogger(__name__)

COMPONENTS = ("total", "E", "M", "propagating", "evanescent")

# Evanescent plate-plate waves are integrated in u = 2 kappa_z d over [0, 80].
_EVANESCENT_U, _EVANESCENT_U_WEIGHTS = gauss_legendre_panels(0.0, 80.0, 64, 12)

# Angular rule for the large-d plate factor.
_ANGLES, _ANGLE_WEIGHTS = gauss_legendre_panels(0.0, 0.5 * math.pi, 4, 12)


def _check_geometry(**lengths: float) -> None:
    for name, value in lengths.items():
        if not value > 0:
            raise DomainError(f"{name} must be positive, got {value}")


def _check_temperatures(**temperatures: float) -> None:
    for name, value in temperatures.items():
        if not value >= 0:
            raise DomainError(f"{name} must be non-negative, got {value}")


def _mu_value(mu) -> complex:
    return mu.mu if isinstance(mu, MagneticPermeability) else complex(mu)


def _net_spectral_integral(kernel: Callable[[float], np.ndarray], T_a: float, T_b: float, tol: float,
                           reference: float) -> QuadratureResult:
    grid = frequency_grid(max(T_a, T_b), tol)

    def integrand(omega: float) -> np.ndarray:
        delta = mean_mode_energy(omega, T_a) - mean_mode_energy(omega, T_b)
        if delta == 0:
            return np.zeros(len(COMPONENTS))
        return delta * kernel(omega)

    return integrate_frequency(integrand, grid, abs_tol=1e-3 * tol * reference)


def _package(result: QuadratureResult, normalization: Optional[float], convergence: ConvergenceInfo) -> TransferResult:
    values = result.values
    return TransferResult(
        power=result.value,
        normalized=result.value / normalization if normalization else None,
        spectrum=SpectralCurve(
            omega=result.nodes.tolist(),
            density=result.samples[:, 0].tolist(),
            weights=result.weights.tolist(),
        ),
        channels=ChannelSplit(propagating=float(values[3]), evanescent=float(values[4])),
        by_polarization=PolarizationSplit(E=float(values[1]), M=float(values[2])),
        convergence=convergence,
    )


def _zero(convergence: ConvergenceInfo) -> TransferResult:
    return TransferResult(
        power=0.0,
        normalized=0.0,
        channels=ChannelSplit(),
        by_polarization=PolarizationSplit(E=0.0, M=0.0),
        convergence=convergence,
    )


def _combine(parts: np.ndarray) -> np.ndarray:
    """[E prop, E evan, M prop, M evan] -> [total, E, M, propagating, evanescent]."""
    e_prop, e_evan, m_prop, m_evan = parts
    return np.array([
        parts.sum(),
        e_prop + e_evan,
        m_prop + m_evan,
        e_prop + m_prop,
        e_evan + m_evan,
    ])


# --------------------------------------------------------------------------- #
# Plate - plate                                                                #
# --------------------------------------------------------------------------- #

def _plate_reflections(eps: Optional[complex], omega: float, kappa: np.ndarray):
    if eps is None:
        zero = np.zeros(kappa.shape, dtype=complex)
        return zero, zero
    r_e, r_m, _ = fresnel_coefficients(eps, omega, kappa)
    return r_e, r_m


def plate_plate_kernel(eps1: Optional[complex], eps2: Optional[complex], omega: float, d: float,
                       reflections: Reflections = Reflections.FULL, divergent_only: bool = False) -> np.ndarray:
    """Transmission kernel per unit Theta: 1/(4 pi^2) int kappa dkappa sum_P tau_P.

    ``eps=None`` marks a black plate (r = 0).  Propagating waves are
    integrated in the polar angle, evanescent ones in u = 2 kappa_z d.
    """
    k = omega / C
    parts = np.zeros(4)

    if not divergent_only:
        panels = max(settings.PROPAGATING_PANELS, math.ceil(2 * k * d / math.pi))
        theta, w_theta = gauss_legendre_panels(0.0, 0.5 * math.pi, panels, settings.NODES_PER_PANEL)
        kappa = k * np.sin(theta)
        measure = k * k * np.sin(theta) * np.cos(theta) * w_theta
        phase = np.exp(2j * k * np.cos(theta) * d)
        for index, (r1, r2) in enumerate(zip(_plate_reflections(eps1, omega, kappa),
                                             _plate_reflections(eps2, omega, kappa))):
            tau = (1 - np.abs(r1) ** 2) * (1 - np.abs(r2) ** 2)
            if reflections == Reflections.FULL:
                tau = tau / np.abs(1 - r1 * r2 * phase) ** 2
            parts[2 * index] = measure @ tau

    kappa_z = _EVANESCENT_U / (2 * d)
    kappa = np.sqrt(k * k + kappa_z * kappa_z)
    measure = _EVANESCENT_U * _EVANESCENT_U_WEIGHTS / (4 * d * d)
    decay = np.exp(-_EVANESCENT_U)
    for index, (r1, r2) in enumerate(zip(_plate_reflections(eps1, omega, kappa),
                                         _plate_reflections(eps2, omega, kappa))):
        if divergent_only and index == 0:
            continue
        tau = 4 * r1.imag * r2.imag * decay
        if reflections == Reflections.FULL:
            tau = tau / np.abs(1 - r1 * r2 * decay) ** 2
        parts[2 * index + 1] = measure @ tau

    return _combine(parts) / (4 * math.pi**2)


def plate_plate_flux(model1: DielectricModel, model2: DielectricModel, d: float, T1: float, T2: float,
                     tol: float | None = None, force_black: bool = False,
                     reflections: Reflections = Reflections.FULL, divergent_only: bool = False) -> TransferResult:
    """Net flux per area from plate 1 (at T1) to plate 2 (at T2) across a vacuum gap d.

    ``normalized`` divides by the black-plate value sigma (T1^4 - T2^4).
    ``divergent_only`` keeps only the evanescent TM (p) waves, the part that
    grows without bound as d -> 0.
    """
    _check_geometry(d=d)
    _check_temperatures(T1=T1, T2=T2)
    tol = resolve_tol(tol)
    reflections = Reflections(reflections)
    convergence = ConvergenceInfo(reflections=reflections)
    if T1 == T2:
        return _zero(convergence)

    def kernel(omega: float) -> np.ndarray:
        if force_black:
            eps1 = eps2 = None
        else:
            eps1 = complex(permittivity(model1, omega))
            eps2 = complex(permittivity(model2, omega))
        return plate_plate_kernel(eps1, eps2, omega, d, reflections, divergent_only)

    black = stefan_boltzmann_flux(T1) - stefan_boltzmann_flux(T2)
    result = _net_spectral_integral(kernel, T1, T2, tol, abs(black))
    convergence.quadrature_error = result.error_estimate
    _logger.debug(f"plate_plate_flux d={d:.3g} T1={T1} T2={T2}: {result.value:.6g} W/m^2")
    return _package(result, black, convergence)


# --------------------------------------------------------------------------- #
# Sphere - plate                                                               #
# --------------------------------------------------------------------------- #

@dataclass
class _SolveStats:
    condition: float = 0.0
    neumann_fallbacks: int = 0


def auto_l_max(R: float, d: float) -> int:
    """Starting multipole order max(AUTO_L_MAX_FLOOR, ceil(5 R/(R+d) sqrt(R/d)))."""
    _check_geometry(R=R, d=d)
    return max(settings.AUTO_L_MAX_FLOOR, math.ceil(5 * R / (R + d) * math.sqrt(R / d)))


def _neumann_inverse(operator: np.ndarray, tol: float) -> Optional[np.ndarray]:
    """sum_n X^n for X = 1 - operator, or None when the series has not converged."""
    step = np.eye(operator.shape[0]) - operator
    term = np.eye(operator.shape[0], dtype=complex)
    total = term.copy()
    for _ in range(settings.NEUMANN_MAX_TERMS):
        term = step @ term
        total += term
        if np.linalg.norm(term, 1) < 0.1 * tol * np.linalg.norm(total, 1):
            return total
    return None


def _resolvent(operator: np.ndarray, solver: Solver, tol: float, stats: _SolveStats) -> np.ndarray:
    """Inverse of ``operator`` = 1 - U'T' with a 1-norm condition check."""
    inverse = None
    if solver == Solver.NEUMANN:
        inverse = _neumann_inverse(operator, tol)
        if inverse is None:
            stats.neumann_fallbacks += 1
            _logger.warning("Neumann series did not converge, falling back to LU")
    if inverse is None:
        factors = lu_factor(operator)
        inverse = lu_solve(factors, np.eye(operator.shape[0], dtype=complex))
    condition = float(np.linalg.norm(operator, 1) * np.linalg.norm(inverse, 1))
    if not condition <= settings.MAX_CONDITION:
        raise ConditioningError(f"multiple-scattering system is ill-conditioned ({condition:.3g})", condition)
    stats.condition = max(stats.condition, condition)
    return inverse


def sphere_plate_kernel(eps_s: complex, eps_p: complex, mu_s: complex, omega: float, R: float, d: float,
                        l_max: int, reflections: Reflections = Reflections.FULL, solver: Solver = Solver.LU,
                        divergent_only: bool = False, tol: float | None = None,
                        stats: Optional[_SolveStats] = None) -> np.ndarray:
    """Power absorbed by the sphere per unit plate Theta, five components.

    For each m the plate sources give the regular-wave covariance
    A = sum_n measure sum_j w_j v v^dagger (v = B^dagger e^{i k_z D}), the
    sphere absorbs tr(K M A M^dagger) with K = diag(b_l) and
    M = (1 - U T)^-1 (M = 1 for one reflection).  All operators are used in
    the sigma_l-rescaled form; the trace is invariant.
    """
    tol = resolve_tol(tol)
    stats = stats or _SolveStats()
    k = omega / C
    separation = d + R
    nodes = planar_nodes(omega, l_max, QuadratureSpec.for_gap(omega, d), separation)

    r_e, r_m, _ = fresnel_coefficients(eps_p, omega, nodes.kappa)
    reflection = np.stack([r_e, r_m])
    absorbed = np.where(nodes.evanescent[None, :], 2 * reflection.imag, 1 - np.abs(reflection) ** 2)
    check_brackets(absorbed.ravel(), f"plate absorption at omega={omega:g}")

    sources = []
    for pol in (0, 1):
        for evanescent in (False, True):
            weight = np.zeros_like(absorbed)
            mask = nodes.evanescent if evanescent else ~nodes.evanescent
            keep = not divergent_only or (pol == 1 and evanescent)
            if keep:
                weight[pol, mask] = absorbed[pol, mask]
            sources.append(weight)
    active = [i for i, weight in enumerate(sources) if np.any(weight)]

    amplitudes = mie_log_amplitudes(eps_s, mu_s, omega, R, l_max)
    t_abs_e = np.abs(amplitudes.t_e())
    t_abs_m = np.abs(amplitudes.t_m())
    check_brackets(np.concatenate([absorption_bracket(amplitudes.t_e()), absorption_bracket(amplitudes.t_m())]),
                   f"sphere absorption at omega={omega:g}")

    parts = np.zeros(4)
    dominant = (0.0, None)
    for m in range(l_max + 1):
        block = conversion_block(nodes, omega, l_max, m, separation)
        index = block.degrees - 1
        electric = block.taus == 1
        mantissa = np.where(electric, amplitudes.t_e_mantissa[index], amplitudes.t_m_mantissa[index])
        with np.errstate(under="ignore"):
            t_scaled = mantissa * np.exp(amplitudes.log_scale[index] + 2 * block.log_sigma)
        t_abs = np.where(electric, t_abs_e[index], t_abs_m[index])
        kernel = -(t_scaled.real + np.abs(t_scaled) * t_abs)

        values = np.zeros(4)
        per_mode = np.zeros(block.size)
        if reflections == Reflections.ONE:
            for i in active:
                contribution = kernel * block.source_diagonal(sources[i])
                per_mode += contribution
                values[i] = float(contribution.sum())
        else:
            operator = np.eye(block.size) - block.reflection_operator(reflection) * t_scaled[None, :]
            resolvent = _resolvent(operator, solver, tol, stats)
            for i in active:
                # diag(M A M^dagger)
                spread = np.einsum("ab,ab->a", resolvent @ block.source_covariance(sources[i]), resolvent.conj())
                contribution = kernel * spread.real
                per_mode += contribution
                values[i] = float(contribution.sum())
        parts += (1.0 if m == 0 else 2.0) * values
        if per_mode.size and per_mode.max() > dominant[0]:
            dominant = (float(per_mode.max()), block.mode(int(per_mode.argmax())))

    if dominant[1] is not None:
        _logger.debug(f"omega={omega:.4g} d={d:.3g}: largest absorption in {dominant[1]}")

    return _combine(parts) * 4.0 / (math.pi * k)


def _sphere_plate_at(model_s, model_p, mu_s: complex, R: float, d: float, T_p: float, T_s: float,
                     l_max: int, reflections: Reflections, solver: Solver, divergent_only: bool,
                     tol: float) -> TransferResult:
    stats = _SolveStats()

    def kernel(omega: float) -> np.ndarray:
        eps_s = complex(permittivity(model_s, omega))
        eps_p = complex(permittivity(model_p, omega))
        return sphere_plate_kernel(eps_s, eps_p, mu_s, omega, R, d, l_max, reflections, solver,
                                   divergent_only, tol, stats)

    half_sphere = 2 * math.pi * R**2
    reference = abs(stefan_boltzmann_flux(T_p) - stefan_boltzmann_flux(T_s)) * half_sphere
    result = _net_spectral_integral(kernel, T_p, T_s, tol, reference)
    convergence = ConvergenceInfo(
        l_max_used=l_max,
        reflections=reflections,
        quadrature_error=result.error_estimate,
        condition=stats.condition or None,
    )
    if stats.neumann_fallbacks:
        _logger.warning(f"LU fallback used in {stats.neumann_fallbacks} blocks at d={d:.3g}")
    normalization = stefan_boltzmann_flux(T_p) * half_sphere if T_p > 0 else None
    _logger.debug(f"sphere_plate l_max={l_max} d={d:.3g}: {result.value:.6g} W")
    return _package(result, normalization, convergence)


def sphere_plate_transfer(model_s: DielectricModel, model_p: DielectricModel, mu_s, R: float, d: float,
                          T_p: float, T_s: float, reflections: Reflections = Reflections.FULL,
                          l_max: Optional[int] = None, tol: float | None = None, solver: Solver = Solver.LU,
                          divergent_only: bool = False) -> TransferResult:
    """Net power absorbed by a sphere at T_s from a plate at T_p (surface gap d).

    ``l_max=None`` starts from :func:`auto_l_max` and multiplies the order by
    1.25 until the power changes by less than AUTO_L_MAX_CHANGE.
    ``normalized`` is the power over sigma T_p^4 2 pi R^2.
    """
    _check_geometry(R=R, d=d)
    _check_temperatures(T_p=T_p, T_s=T_s)
    tol = resolve_tol(tol)
    reflections, solver = Reflections(reflections), Solver(solver)
    mu = _mu_value(mu_s)
    if l_max is not None and l_max < 1:
        raise DomainError(f"l_max must be >= 1, got {l_max}")

    if T_p == T_s:
        return _zero(ConvergenceInfo(l_max_used=l_max or auto_l_max(R, d), reflections=reflections))

    def run(orders: int) -> TransferResult:
        return _sphere_plate_at(model_s, model_p, mu, R, d, T_p, T_s, orders, reflections, solver,
                                divergent_only, tol)

    if l_max is not None:
        return run(l_max)

    cap = settings.L_MAX_CAP
    orders = min(auto_l_max(R, d), cap)
    coarse = run(orders)
    while True:
        finer = min(math.ceil(1.25 * orders), cap)
        if finer == orders:
            raise TruncationError(f"sphere-plate l_max escalation reached the cap {cap}", orders,
                                  coarse.convergence.truncation_error)
        fine = run(finer)
        change = abs(fine.power - coarse.power) / max(abs(fine.power), 1e-300)
        _logger.debug(f"auto l_max {orders} -> {finer}: relative change {change:.3g}")
        if change < settings.AUTO_L_MAX_CHANGE:
            fine.convergence.truncation_error = change
            return fine
        coarse.convergence.truncation_error = change
        orders, coarse = finer, fine


# --------------------------------------------------------------------------- #
# Proximity transfer approximation                                             #
# --------------------------------------------------------------------------- #

def pta_integral(flux: Callable[[float], object], R: float, d: float, tol: float | None = None) -> QuadratureResult:
    """2 pi R int_d^{d+R} flux(s) ds, integrated in ln s.

    ``flux`` may return a vector; every component is integrated.
    """
    _check_geometry(R=R, d=d)

    def integrand(t: float) -> np.ndarray:
        s = math.exp(t)
        return np.atleast_1d(np.asarray(flux(s), dtype=float)) * s

    result = integrate_adaptive(integrand, math.log(d), math.log(d + R), tol)
    scale = 2 * math.pi * R
    result.value *= scale
    result.error_estimate *= scale
    result.values = result.values * scale
    return result


def pta_transfer(model_s: DielectricModel, model_p: DielectricModel, R: float, d: float, T_p: float, T_s: float,
                 tol: float | None = None, divergent_only: bool = False, force_black: bool = False,
                 reflections: Reflections = Reflections.FULL) -> TransferResult:
    """Proximity estimate of the sphere-plate transfer from the plate-plate flux.

    The sphere material forms the second half-space of the plate pair.
    ``divergent_only`` restricts the flux to the evanescent TM channel.
    """
    _check_geometry(R=R, d=d)
    _check_temperatures(T_p=T_p, T_s=T_s)
    tol = resolve_tol(tol)
    reflections = Reflections(reflections)
    convergence = ConvergenceInfo(reflections=reflections)
    if T_p == T_s:
        return _zero(convergence)

    def flux(s: float) -> np.ndarray:
        plates = plate_plate_flux(model_p, model_s, s, T_p, T_s, tol, force_black, reflections, divergent_only)
        return np.array([
            plates.power,
            plates.by_polarization.E,
            plates.by_polarization.M,
            plates.channels.propagating,
            plates.channels.evanescent,
        ])

    result = pta_integral(flux, R, d, tol)
    convergence.quadrature_error = result.error_estimate
    values = result.values
    normalization = stefan_boltzmann_flux(T_p) * 2 * math.pi * R**2
    return TransferResult(
        power=result.value,
        normalized=result.value / normalization if normalization else None,
        channels=ChannelSplit(propagating=float(values[3]), evanescent=float(values[4])),
        by_polarization=PolarizationSplit(E=float(values[1]), M=float(values[2])),
        convergence=convergence,
    )


# --------------------------------------------------------------------------- #
# Limits                                                                       #
# --------------------------------------------------------------------------- #

def large_d_angular_factor(eps_p: Optional[complex], omega: float) -> np.ndarray:
    """[sum, E, M] of int_0^{pi/2} sin(theta) (1 - |r_P|^2) dtheta; ``eps_p=None`` is a black plate."""
    kernel = _ANGLE_WEIGHTS * np.sin(_ANGLES)
    if eps_p is None:
        e = m = float(kernel.sum())
    else:
        r_e, r_m, _ = fresnel_coefficients(eps_p, omega, omega / C * np.sin(_ANGLES))
        e = float(kernel @ (1 - np.abs(r_e) ** 2))
        m = float(kernel @ (1 - np.abs(r_m) ** 2))
    return np.array([e + m, e, m])


def sphere_plate_large_d(model_s: DielectricModel, model_p: DielectricModel, mu_s, R: float, T_p: float,
                         tol: float | None = None, force_black: bool = False) -> TransferResult:
    """Dipole-sphere limit d >> lambda_T >> R:

        (c R^3 / 16 pi^3) int d omega a_T Im[(mu-1)/(mu+2) + (eps-1)/(eps+2)] int sin sum_P (1 - |r_P|^2) dtheta

    The result does not depend on d.  ``normalized`` is over sigma T_p^4 2 pi R^2.
    """
    _check_geometry(R=R)
    _check_temperatures(T_p=T_p)
    tol = resolve_tol(tol)
    mu = _mu_value(mu_s)
    if T_p == 0:
        return _zero(ConvergenceInfo())
    grid = frequency_grid(T_p, tol)
    magnetic = ((mu - 1) / (mu + 2)).imag

    def integrand(omega: float) -> np.ndarray:
        eps_s = complex(permittivity(model_s, omega))
        eps_p = None if force_black else complex(permittivity(model_p, omega))
        polarizability = ((eps_s - 1) / (eps_s + 2)).imag + magnetic
        prefactor = C * R**3 / (16 * math.pi**3) * planck_factor(omega, T_p).value * polarizability
        return prefactor * large_d_angular_factor(eps_p, omega)

    reference = stefan_boltzmann_flux(T_p) * 2 * math.pi * R**2
    result = integrate_frequency(integrand, grid, abs_tol=1e-3 * tol * reference)
    return TransferResult(
        power=result.value,
        normalized=result.value / reference,
        spectrum=SpectralCurve(
            omega=result.nodes.tolist(),
            density=result.samples[:, 0].tolist(),
            weights=result.weights.tolist(),
        ),
        channels=ChannelSplit(propagating=result.value, evanescent=0.0),
        by_polarization=PolarizationSplit(E=result.component(1), M=result.component(2)),
        convergence=ConvergenceInfo(quadrature_error=result.error_estimate),
    )


def classical_sphere_plate_limit(model_s: DielectricModel, model_p: DielectricModel, R: float, T: float,
                                 tol: float | None = None) -> float:
    """Ray-optics estimate sigma T^4 e_s e_p 2 pi R^2 for R >> lambda_T (emissivities of flat surfaces)."""
    _check_geometry(R=R)
    e_s = radiate_plate(model_s, T, tol).normalized
    e_p = radiate_plate(model_p, T, tol).normalized
    return stefan_boltzmann_flux(T) * e_s * e_p * 2 * math.pi * R**2
