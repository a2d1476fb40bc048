"""Scattering amplitudes (T-matrix elements) of plate, sphere and cylinder.

Convention used everywhere in the package: time factor exp(-i omega t),
scattered amplitude = t * incoming regular amplitude, S = 1 + 2t,
Im eps >= 0 and Im k_z >= 0.  With this choice the bracket

    b = -(Re t_PP + sum_P' |t_P'P|^2)

is the (non-negative) absorbed fraction of an incoming mode.  References that
use the opposite sign for t differ by t -> -t (Mie: t_e = -a_l, t_m = -b_l).
Plates report Fresnel reflection coefficients r instead of t; their per-mode
emissivity is 1 - |r|^2 for propagating waves.
"""

import cmath
import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from errors import DomainError, SpecialFunctionAccuracyError
from physics import C
from specfun import (
    cylindrical_bessel_jh,
    cylindrical_log_derivative,
    spherical_bessel_jh,
    spherical_log_derivative,
)

_logger = logging.getLogger(__name__)


def _kz(value):
    """Square root with the Im >= 0 branch."""
    root = np.sqrt(np.asarray(value, dtype=complex))
    return np.where(root.imag < 0, -root, root)


def _check_frequency(omega: float) -> float:
    if not omega > 0:
        raise DomainError(f"angular frequency must be positive, got {omega}")
    return omega / C


# --------------------------------------------------------------------------- #
# Plate                                                                        #
# --------------------------------------------------------------------------- #

@dataclass
class FresnelPair:
    r_e: complex  # transverse electric (s)
    r_m: complex  # transverse magnetic (p)
    k_transverse: float
    omega: float
    evanescent: bool


def fresnel_coefficients(eps: complex, omega: float, k_transverse) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised (r_e, r_m, k_z) for vacuum incidence on a half-space of permittivity ``eps``."""
    k0 = _check_frequency(omega)
    kappa = np.asarray(k_transverse, dtype=float)
    if np.any(kappa < 0):
        raise DomainError("transverse wavenumber must be >= 0")
    kz0 = _kz(k0 * k0 - kappa * kappa)
    kz1 = _kz(eps * k0 * k0 - kappa * kappa)
    r_e = (kz0 - kz1) / (kz0 + kz1)
    r_m = (eps * kz0 - kz1) / (eps * kz0 + kz1)
    return r_e, r_m, kz0


def fresnel(eps_plate: complex, omega: float, k_transverse: float) -> FresnelPair:
    r_e, r_m, _ = fresnel_coefficients(eps_plate, omega, k_transverse)
    return FresnelPair(
        r_e=complex(r_e),
        r_m=complex(r_m),
        k_transverse=float(k_transverse),
        omega=omega,
        evanescent=k_transverse > omega / C,
    )


# --------------------------------------------------------------------------- #
# Sphere                                                                       #
# --------------------------------------------------------------------------- #

@dataclass
class MieBlock:
    l: int
    t_e: complex  # electric multipole
    t_m: complex  # magnetic multipole
    size_parameter: float


@dataclass
class MieAmplitudes:
    """t_P,l = mantissa_P,l * exp(log_scale_l) for l = 1..l_max.

    High orders of a small sphere have |t| far below the double range; the
    split keeps them usable by callers that rescale before multiplying.
    """

    t_e_mantissa: np.ndarray
    t_m_mantissa: np.ndarray
    log_scale: np.ndarray
    direct_orders: int

    def t_e(self) -> np.ndarray:
        with np.errstate(under="ignore"):
            return self.t_e_mantissa * np.exp(self.log_scale)

    def t_m(self) -> np.ndarray:
        with np.errstate(under="ignore"):
            return self.t_m_mantissa * np.exp(self.log_scale)

    def scaled(self, log_factor: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(t_e, t_m) multiplied by exp(log_factor), evaluated without overflow."""
        with np.errstate(under="ignore"):
            factor = np.exp(self.log_scale + log_factor)
        return self.t_e_mantissa * factor, self.t_m_mantissa * factor


# j_l and h_l are used directly while both stay inside these bounds (their
# quotient is then representable); higher orders switch to ratio recurrences.
_DIRECT_SMALL = 1e-140
_DIRECT_LARGE = 1e140


def _direct_orders(j, h, l_max: int) -> int:
    count = 0
    for l in range(1, l_max + 1):
        values = (j.values[l], h.values[l], j.derivatives[l], h.derivatives[l])
        if not all(np.isfinite(v) for v in values):
            break
        if abs(j.values[l]) < _DIRECT_SMALL or abs(h.values[l]) > _DIRECT_LARGE:
            break
        count = l
    return count


def mie_log_amplitudes(eps: complex, mu: complex, omega: float, R: float, l_max: int) -> MieAmplitudes:
    """Mie amplitudes of a homogeneous sphere in vacuum, in mantissa/log-scale form.

    Low orders use j_l, h_l directly together with the interior log-derivative
    psi'(mx)/psi(mx).  Above the last order where j_l/h_l is representable the
    exterior functions are carried as ratios: rho^j_l = j_l/j_{l-1} from the
    downward recurrence, rho^h_l = h_l/h_{l-1} upwards, with

        a_l = (j_l/h_l) [m^2 (1 + x j'/j) - mu mx D_l] / [m^2 (1 + x h'/h) - mu mx D_l]
        b_l = (j_l/h_l) [mu (1 + x j'/j) - mx D_l] / [mu (1 + x h'/h) - mx D_l]

    and f'/f = 1/rho_l - (l+1)/x.  t_e = -a_l, t_m = -b_l.
    """
    if l_max < 1:
        raise DomainError(f"l_max must be >= 1, got {l_max}")
    if not R > 0:
        raise DomainError(f"sphere radius must be positive, got {R}")
    x = _check_frequency(omega) * R
    eps, mu = complex(eps), complex(mu)
    m = complex(_kz(eps * mu))
    mx = m * x

    j, h = spherical_bessel_jh(l_max, x)
    inner = mx * spherical_log_derivative(l_max, mx)
    direct = _direct_orders(j, h, l_max)
    if direct < 1:
        raise SpecialFunctionAccuracyError(f"exterior Bessel functions out of range at x={x:g}")

    t_e = np.zeros(l_max, dtype=complex)
    t_m = np.zeros(l_max, dtype=complex)
    log_scale = np.zeros(l_max)

    with np.errstate(all="ignore"):
        for l in range(1, direct + 1):
            jl, hl = j.values[l], h.values[l]
            psi_prime = jl + x * j.derivatives[l]
            xi_prime = hl + x * h.derivatives[l]
            a = (m * m * psi_prime - mu * jl * inner[l]) / (m * m * xi_prime - mu * hl * inner[l])
            b = (mu * psi_prime - jl * inner[l]) / (mu * xi_prime - hl * inner[l])
            t_e[l - 1] = -a if np.isfinite(a) else 0.0
            t_m[l - 1] = -b if np.isfinite(b) else 0.0

    if direct < l_max:
        start = l_max + math.ceil(10 + 2 * math.sqrt(x))
        rho_j = np.zeros(start + 2)
        for l in range(start, direct, -1):
            rho_j[l] = 1.0 / ((2 * l + 1) / x - rho_j[l + 1])
        sign = math.copysign(1.0, j.values[direct].real)
        log_j = math.log(abs(j.values[direct]))
        rho_h = h.values[direct] / h.values[direct - 1]
        log_h = cmath.log(h.values[direct])
        for l in range(direct + 1, l_max + 1):
            rho_h = (2 * l - 1) / x - 1.0 / rho_h
            log_j += math.log(abs(rho_j[l]))
            sign = math.copysign(sign, sign * rho_j[l])
            log_h += cmath.log(rho_h)
            jd = 1.0 / rho_j[l] - (l + 1) / x
            hd = 1.0 / rho_h - (l + 1) / x
            ratio = log_j - log_h
            phase = sign * cmath.exp(-1j * log_h.imag)
            a = (m * m * (1 + x * jd) - mu * inner[l]) / (m * m * (1 + x * hd) - mu * inner[l])
            b = (mu * (1 + x * jd) - inner[l]) / (mu * (1 + x * hd) - inner[l])
            t_e[l - 1] = -phase * a
            t_m[l - 1] = -phase * b
            log_scale[l - 1] = ratio.real
        _logger.debug(f"Mie x={x:.3g}: direct orders 1..{direct}, ratio recurrence up to {l_max}")

    return MieAmplitudes(t_e_mantissa=t_e, t_m_mantissa=t_m, log_scale=log_scale, direct_orders=direct)


def mie_coefficients(eps: complex, mu: complex, omega: float, R: float, l_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """(t_e, t_m) for l = 1..l_max of a homogeneous sphere in vacuum.

    Orders whose amplitude lies below the double range come back as zero.
    """
    amplitudes = mie_log_amplitudes(eps, mu, omega, R, l_max)
    return amplitudes.t_e(), amplitudes.t_m()


def mie_block(eps_sphere: complex, mu_sphere: complex, omega: float, R: float, l: int) -> MieBlock:
    t_e, t_m = mie_coefficients(eps_sphere, mu_sphere, omega, R, l)
    return MieBlock(l=l, t_e=complex(t_e[-1]), t_m=complex(t_m[-1]), size_parameter=omega * R / C)


# --------------------------------------------------------------------------- #
# Cylinder                                                                     #
# --------------------------------------------------------------------------- #

@dataclass
class CylinderBlock:
    """2x2 block t[P', P] for azimuthal order n and axial wavenumber k_parallel.

    Index 0 is the E wave (E_z != 0, parallel polarization), 1 the M wave.
    """

    n: int
    k_parallel: float
    t: np.ndarray

    def mirrored(self) -> "CylinderBlock":
        """Block for -n: diagonal unchanged, off-diagonal entries flip sign."""
        t = self.t.copy()
        t[0, 1] = -t[0, 1]
        t[1, 0] = -t[1, 0]
        return CylinderBlock(n=-self.n, k_parallel=self.k_parallel, t=t)


def cylinder_matrices(eps: complex, omega: float, R: float, n_max: int, k_parallel: float,
                      n_min: int = 0) -> np.ndarray:
    """t[n - n_min, P', P] for n = n_min..n_max, solved as one batch of 2x2 systems.

    Orders whose Hankel functions overflow (t below the double range) come
    back as zero blocks.
    """
    if not R > 0:
        raise DomainError(f"cylinder radius must be positive, got {R}")
    if not 0 <= n_min <= n_max:
        raise DomainError(f"need 0 <= n_min <= n_max, got {n_min}, {n_max}")
    k0 = _check_frequency(omega)
    eps = complex(eps)
    kz = float(k_parallel)
    q0 = complex(_kz(k0 * k0 - kz * kz))
    q1 = complex(_kz(eps * k0 * k0 - kz * kz))
    if q0 == 0 or q1 == 0:
        raise DomainError(f"grazing incidence k_parallel={kz:g} has no radial wavenumber")

    j, h = cylindrical_bessel_jh(n_max, q0 * R)
    orders = np.arange(n_min, n_max + 1)
    log_d = cylindrical_log_derivative(n_max, q1 * R)[orders]
    gamma = orders * (1j * kz / (k0 * R) * (1.0 / (q0 * q0) - 1.0 / (q1 * q1)))

    def system(f: np.ndarray, fp: np.ndarray) -> np.ndarray:
        a = np.empty((orders.size, 2, 2), dtype=complex)
        a[:, 0, 0] = fp / q0 - eps * log_d * f / q1
        a[:, 0, 1] = gamma * f
        a[:, 1, 0] = -gamma * f
        a[:, 1, 1] = fp / q0 - log_d * f / q1
        return a

    t = np.zeros((orders.size, 2, 2), dtype=complex)
    with np.errstate(all="ignore"):
        a_j = system(j.values[orders], j.derivatives[orders])
        a_h = system(h.values[orders], h.derivatives[orders])
        usable = np.all(np.isfinite(a_h), axis=(1, 2)) & np.all(np.isfinite(a_j), axis=(1, 2))
        usable[usable] = np.linalg.det(a_h[usable]) != 0
        if np.any(usable):
            t[usable] = -np.linalg.solve(a_h[usable], a_j[usable])
    usable &= np.all(np.isfinite(t), axis=(1, 2))
    t[~usable] = 0.0
    if not np.all(usable):
        _logger.debug(f"cylinder orders {orders[~usable].tolist()} zeroed at omega={omega:.4g}, "
                      f"k_parallel={kz:.4g} (Hankel overflow)")
    return t


def cylinder_blocks(eps: complex, omega: float, R: float, n_max: int, k_parallel: float) -> List[CylinderBlock]:
    """Blocks for n = 0..n_max; negative orders follow from :meth:`CylinderBlock.mirrored`."""
    t = cylinder_matrices(eps, omega, R, n_max, k_parallel)
    return [CylinderBlock(n=n, k_parallel=float(k_parallel), t=t[n]) for n in range(n_max + 1)]


def cylinder_block(eps_cyl: complex, omega: float, R: float, n: int, k_parallel: float) -> CylinderBlock:
    block = cylinder_blocks(eps_cyl, omega, R, abs(n), k_parallel)[-1]
    return block.mirrored() if n < 0 else block


# --------------------------------------------------------------------------- #
# Absorption                                                                   #
# --------------------------------------------------------------------------- #

def absorption_bracket(t) -> np.ndarray:
    """-(Re t_PP + sum_P' |t_P'P|^2) per incoming mode.

    Scalars and 1-d arrays are diagonal amplitudes; for arrays of matrices the
    last two axes are (P', P) and the result has one entry per column P.
    """
    t = np.asarray(t, dtype=complex)
    if t.ndim >= 2 and t.shape[-1] == t.shape[-2] and t.shape[-1] > 1:
        diagonal = np.diagonal(t, axis1=-2, axis2=-1)
        return -(diagonal.real + np.sum(np.abs(t) ** 2, axis=-2))
    return -(t.real + np.abs(t) ** 2)


def unitarity_defect(t) -> float:
    """max |S^dagger S - 1| for S = 1 + 2t (scalar or square matrix)."""
    t = np.atleast_2d(np.asarray(t, dtype=complex))
    s = np.eye(t.shape[-1]) + 2.0 * t
    return float(np.max(np.abs(s.conj().T @ s - np.eye(t.shape[-1]))))
