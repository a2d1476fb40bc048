"""Complex-argument Bessel functions and normalized Legendre functions.

Regular families (j_l, J_n) come from Miller's downward recurrence with a
closed-form normalization; irregular ones (h_l, H_n of the first kind) come
from upward recurrence seeded by closed forms or asymptotic series.  Values
and derivatives are returned together in a ``BesselSet``.

Conventions
-----------
* spherical: f'_l = f_{l-1} - (l+1)/z f_l, f'_0 = -f_1
* cylindrical: f'_n = f_{n-1} - n/z f_n, f'_0 = -f_1
"""

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from config import settings
from errors import DomainError, SpecialFunctionAccuracyError

_logger = logging.getLogger(__name__)

EULER_GAMMA = 0.57721566490153286060651209008240243

_RESCALE_AT = 1e250
_NORMALIZATION_TOL = 1e-10

# |z| above which the cylindrical Hankel seeds come from the asymptotic series
# (measured as |z| + |Im z|, the Neumann series loses ~2|Im z| digits to cancellation)
_HANKEL_ASYMPTOTIC_AT = 18.0


@dataclass
class BesselSet:
    orders: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    argument: complex


def _check_arguments(n_max: int, z: complex) -> complex:
    if n_max < 0:
        raise DomainError(f"n_max must be >= 0, got {n_max}")
    z = complex(z)
    if z == 0:
        raise DomainError("Bessel functions evaluated at z = 0")
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"non-finite argument {z}")
    return z


def _start_order(n_max: int, z: complex) -> int:
    return n_max + math.ceil(10 + 2 * math.sqrt(abs(z)))


def _miller(start: int, z: complex, coefficient: Callable[[int], float]) -> np.ndarray:
    """Unnormalized f_0 .. f_start from f_{n-1} = coefficient(n)/z f_n - f_{n+1}, f_{start+1} = 0."""
    f = np.zeros(start + 2, dtype=complex)
    f[start] = 1.0
    for n in range(start, 0, -1):
        f[n - 1] = coefficient(n) / z * f[n] - f[n + 1]
        if abs(f[n - 1]) > _RESCALE_AT:
            f[n - 1:] /= _RESCALE_AT
    return f[: start + 1]


def _derivatives(f: np.ndarray, z: complex, shift: int) -> np.ndarray:
    """f'_l = f_{l-1} - (l + shift)/z f_l with f'_0 = -f_1; drops the extra top order."""
    d = np.empty(f.size - 1, dtype=complex)
    d[0] = -f[1]
    l = np.arange(1, f.size - 1)
    with np.errstate(over="ignore", invalid="ignore"):
        d[1:] = f[:-2] - (l + shift) / z * f[1:-1]
    return d


# --------------------------------------------------------------------------- #
# Spherical family                                                             #
# --------------------------------------------------------------------------- #

def _double_factorial(n: int) -> float:
    result = 1.0
    while n > 1:
        result *= n
        n -= 2
    return result


def _spherical_j01(z: complex) -> Tuple[complex, complex]:
    """j_0 and j_1; power series below |z| = 1 where the closed form of j_1 cancels."""
    if abs(z) < 1.0:
        out = []
        for n in (0, 1):
            term = z**n / _double_factorial(2 * n + 1)
            total = term
            k = 0
            while abs(term) > 1e-18 * abs(total):
                k += 1
                term *= -(z * z) / 2.0 / k / (2 * n + 2 * k + 1)
                total += term
            out.append(total)
        return out[0], out[1]
    s, c = cmath.sin(z), cmath.cos(z)
    return s / z, s / (z * z) - c / z


def _spherical_j_miller(n: int, z: complex) -> np.ndarray:
    j0, j1 = _spherical_j01(z)
    start = max(_start_order(n, z), 2)
    for _ in range(settings.BESSEL_MAX_DOUBLINGS + 1):
        f = _miller(start, z, lambda k: 2 * k + 1)
        if abs(j0) >= abs(j1):
            scale = j0 / f[0]
            reference, normalized = j1, scale * f[1]
        else:
            scale = j1 / f[1]
            reference, normalized = j0, scale * f[0]
        if abs(normalized - reference) <= _NORMALIZATION_TOL * max(abs(j0), abs(j1)):
            return scale * f[: n + 1]
        _logger.debug(f"spherical Miller start {start} failed at z={z}, doubling")
        start *= 2
    raise SpecialFunctionAccuracyError(f"spherical j normalization failed at z={z}, orders={n}")


def _spherical_hankel_series(l: int, z: complex, kind: int) -> complex:
    """h_l^(1) (kind=1) or h_l^(2) (kind=2) from the terminating large-argument expansion."""
    i = 1j if kind == 1 else -1j
    x = i / (2 * z)
    coefficient = 1.0
    power = 1.0 + 0j
    total = 1.0 + 0j
    for k in range(l):
        coefficient *= (l + k + 1) * (l - k) / (k + 1)
        power *= x
        total += coefficient * power
    return (-i) ** (l + 1) * cmath.exp(i * z) / z * total


def spherical_bessel_jh(n_max: int, z: complex) -> Tuple[BesselSet, BesselSet]:
    """Spherical Bessel j_l and Hankel h_l^(1) for l = 0..n_max, with derivatives."""
    z = _check_arguments(n_max, z)
    n = n_max + 1  # one extra order for f'_0 = -f_1 when n_max = 0

    if abs(z) > 1.5 * n_max + 40:
        h = np.array([_spherical_hankel_series(l, z, 1) for l in range(n + 1)])
        h2 = np.array([_spherical_hankel_series(l, z, 2) for l in range(n + 1)])
        j = 0.5 * (h + h2)
    else:
        j = _spherical_j_miller(n, z)
        h = np.zeros(n + 1, dtype=complex)
        e = cmath.exp(1j * z)
        h[0] = -1j * e / z
        h[1] = -e * (z + 1j) / (z * z)
        # overflows to inf for tiny |z| at high orders; callers treat those orders as silent
        with np.errstate(over="ignore", invalid="ignore"):
            for l in range(1, n):
                h[l + 1] = (2 * l + 1) / z * h[l] - h[l - 1]

    orders = np.arange(n_max + 1)
    return (
        BesselSet(orders, j[: n_max + 1], _derivatives(j, z, 1), z),
        BesselSet(orders, h[: n_max + 1], _derivatives(h, z, 1), z),
    )


def spherical_log_derivative(n_max: int, z: complex) -> np.ndarray:
    """psi_l'(z)/psi_l(z) for psi_l = z j_l(z), l = 0..n_max.

    Downward recurrence D_{l-1} = l/z - 1/(D_l + l/z) started at zero well
    above max(n_max, |z|); stays finite where j_l itself would overflow.
    """
    z = _check_arguments(n_max, z)
    start = max(n_max, math.ceil(abs(z))) + 15
    d = np.zeros(start + 1, dtype=complex)
    for l in range(start, 0, -1):
        d[l - 1] = l / z - 1.0 / (d[l] + l / z)
    return d[: n_max + 1]


# --------------------------------------------------------------------------- #
# Cylindrical family                                                           #
# --------------------------------------------------------------------------- #

def _cylindrical_j_miller(n: int, z: complex) -> Tuple[np.ndarray, np.ndarray]:
    """J_0..J_n and the full normalized Miller sequence (for the Neumann series)."""
    start = max(_start_order(n, z), 2)
    sign = -1j if z.imag >= 0 else 1j
    for _ in range(settings.BESSEL_MAX_DOUBLINGS + 1):
        f = _miller(start, z, lambda k: 2 * k)
        k = np.arange(1, start + 1)
        # exp(-iz) = J_0 + 2 sum (-i)^n J_n  (mirror identity below the real axis)
        generating = f[0] + 2.0 * np.sum(sign ** k * f[1:])
        scale = cmath.exp(sign * z) / generating
        full = scale * f
        even = full[0] + 2.0 * np.sum(full[2::2])
        magnitude = abs(full[0]) + 2.0 * np.sum(np.abs(full[2::2]))
        if abs(even - 1.0) <= _NORMALIZATION_TOL * max(1.0, magnitude):
            return full[: n + 1], full
        _logger.debug(f"cylindrical Miller start {start} failed at z={z}, doubling")
        start *= 2
    raise SpecialFunctionAccuracyError(f"cylindrical J normalization failed at z={z}, orders={n}")


def _neumann_y01(z: complex, full: np.ndarray) -> Tuple[complex, complex]:
    """Y_0 and Y_1 from the Neumann series over the normalized J sequence."""
    log_term = cmath.log(z / 2.0) + EULER_GAMMA
    k = np.arange(1, (full.size - 2) // 2 + 1)
    signs = (-1.0) ** k
    j_even = full[2 * k]
    j_even_prime = 0.5 * (full[2 * k - 1] - full[2 * k + 1])
    y0 = (2 / math.pi) * log_term * full[0] - (4 / math.pi) * np.sum(signs * j_even / k)
    y0_prime = (2 / math.pi) * (full[0] / z - log_term * full[1]) - (4 / math.pi) * np.sum(signs * j_even_prime / k)
    return complex(y0), complex(-y0_prime)


def _hankel_asymptotic(order: int, z: complex) -> complex:
    """H_order^(1)(z) from the Hankel asymptotic series, optimally truncated."""
    mu = 4.0 * order * order
    total = 1.0 + 0j
    term = 1.0 + 0j
    k = 1
    while True:
        factor = (mu - (2 * k - 1) ** 2) / (k * 8.0) * 1j / z
        next_term = term * factor
        if abs(next_term) >= abs(term) or abs(next_term) < 1e-17 * abs(total):
            if abs(next_term) < abs(term):
                total += next_term
            break
        term = next_term
        total += term
        k += 1
    phase = z - order * math.pi / 2 - math.pi / 4
    return cmath.sqrt(2.0 / (math.pi * z)) * cmath.exp(1j * phase) * total


def cylindrical_bessel_jh(n_max: int, z: complex) -> Tuple[BesselSet, BesselSet]:
    """Cylindrical Bessel J_n and Hankel H_n^(1) for n = 0..n_max, with derivatives."""
    z = _check_arguments(n_max, z)
    n = n_max + 1
    j, full = _cylindrical_j_miller(n, z)

    if abs(z) + abs(z.imag) > _HANKEL_ASYMPTOTIC_AT:
        h0, h1 = _hankel_asymptotic(0, z), _hankel_asymptotic(1, z)
    else:
        y0, y1 = _neumann_y01(z, full)
        h0, h1 = full[0] + 1j * y0, full[1] + 1j * y1

    h = np.zeros(n + 1, dtype=complex)
    h[0], h[1] = h0, h1
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n):
            h[k + 1] = 2 * k / z * h[k] - h[k - 1]

    orders = np.arange(n_max + 1)
    return (
        BesselSet(orders, j[: n_max + 1], _derivatives(j, z, 0), z),
        BesselSet(orders, h[: n_max + 1], _derivatives(h, z, 0), z),
    )


def cylindrical_neumann(n_max: int, z: complex) -> np.ndarray:
    """Y_n = (H_n - J_n)/i for n = 0..n_max."""
    j, h = cylindrical_bessel_jh(n_max, z)
    return (h.values - j.values) / 1j


def cylindrical_log_derivative(n_max: int, z: complex) -> np.ndarray:
    """J_n'(z)/J_n(z) for n = 0..n_max from the downward ratio rho_n = J_n/J_{n-1}."""
    z = _check_arguments(n_max, z)
    start = max(n_max, math.ceil(abs(z))) + math.ceil(15 + 2 * math.sqrt(abs(z)))
    rho = np.zeros(start + 2, dtype=complex)
    for k in range(start, 0, -1):
        rho[k] = 1.0 / (2 * k / z - rho[k + 1])
    out = np.empty(n_max + 1, dtype=complex)
    out[0] = -rho[1]
    k = np.arange(1, n_max + 1)
    out[1:] = 1.0 / rho[k] - k / z
    return out


# --------------------------------------------------------------------------- #
# Normalized associated Legendre functions                                     #
# --------------------------------------------------------------------------- #

def normalized_legendre(l_max: int, m: int, cos_theta, sin_theta, scaled: bool = False):
    """Orthonormal P_l^m, pi_l^m = P_l^m / sin and tau_l^m = dP_l^m/dtheta for l = 0..l_max.

    No Condon-Shortley phase; ``m >= 0``.  Entries with l < m are zero.
    Arguments may be complex (evanescent directions have |sin| > 1) and may
    be arrays of directions; the results then have shape (l_max + 1, *shape).

    With ``scaled=True`` every degree-l entry is divided by sin^l.  Deep
    evanescent directions have |sin| >> 1 and the unscaled values overflow
    long before l reaches a few hundred; the scaled ones stay O(1).
    """
    if m < 0:
        raise DomainError(f"normalized_legendre needs m >= 0, got {m}")
    ct = np.asarray(cos_theta, dtype=complex)
    st = np.asarray(sin_theta, dtype=complex)
    shape = (l_max + 1,) + np.broadcast(ct, st).shape
    p = np.zeros(shape, dtype=complex)
    pi = np.zeros(shape, dtype=complex)
    tau = np.zeros(shape, dtype=complex)
    if m > l_max:
        return p, pi, tau
    if scaled and np.any(st == 0):
        raise DomainError("scaled Legendre functions need sin(theta) != 0")

    step = ct / st if scaled else ct
    back = 1 / (st * st) if scaled else 1.0
    lift = 1 / st if scaled else 1.0

    # P_m^m and pi_m^m = P_m^m / sin without dividing
    seed = math.sqrt(0.5)
    for k in range(1, m + 1):
        seed *= math.sqrt((2 * k + 1) / (2 * k))

    def run(values: np.ndarray, start) -> None:
        values[m] = start
        if m + 1 <= l_max:
            values[m + 1] = math.sqrt(2 * m + 3) * step * start
        for l in range(m + 2, l_max + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) * (2 * l + 1) / ((2 * l - 3) * (l * l - m * m)))
            values[l] = a * step * values[l - 1] - b * back * values[l - 2]

    run(p, seed if scaled else seed * st**m)
    if m >= 1:
        run(pi, seed / st if scaled else seed * st ** (m - 1))
        for l in range(m, l_max + 1):
            coefficient = math.sqrt((l * l - m * m) * (2 * l + 1) / (2 * l - 1))
            previous = pi[l - 1] if l - 1 >= m else 0j
            tau[l] = l * ct * pi[l] - coefficient * lift * previous
    else:
        _, pi1, _ = normalized_legendre(l_max, 1, ct, st, scaled)
        for l in range(1, l_max + 1):
            tau[l] = -math.sqrt(l * (l + 1)) * st * pi1[l]
    return p, pi, tau
