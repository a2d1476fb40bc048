"""Planar <-> spherical vector wave conversion for the sphere-plate geometry.

The sphere sits at the origin, the plate surface at z = -D (D = d + R).
Plane waves are labelled by the transverse wavenumber kappa, the azimuth
alpha and the polarization j (0 = TE/s, 1 = TM/p); spherical waves by
(tau, l, m) with tau = 0 the magnetic (TE) and tau = 1 the electric (TM)
multipole.  With B the transformation coefficients

    Psi^(3)_{tau l m} = 1/(2 pi) sum_j int kappa dkappa dalpha e^{i m alpha} / (k_z k) B_{tau l m j}(+-k_z) Phi_j
    Phi_j              = 4 sum_{tau l m} e^{-i m alpha} B^dagger_{tau l m j}(k_z) Psi^(1)_{tau l m}

the alpha integral is diagonal in m, so every quantity below is built per m.

Kappa is integrated with a fixed composite Gauss-Legendre rule, in the polar
angle beta (kappa = k sin beta) for propagating waves and in u
(kappa = k cosh u) for evanescent ones.  Both maps absorb the 1/k_z
singularity at kappa = k.

Evanescent waves carry sin(theta) = cosh u >> 1, so B grows like cosh(u)^l
while the plate propagator decays like exp(-2 kappa_z D).  Each degree l is
therefore rescaled by sigma_l (``log_sigma``) so that all stored factors
exp(l ln sin - kappa_z D - ln sigma_l) are at most one; operators built here
are the similarity transforms Sigma^-1 X Sigma^-1 of the physical ones.
"""

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from config import settings
from errors import ConversionError, DomainError
from models import Direction, Polarization, SphericalMode
from numerics import gauss_legendre_panels
from physics import C
from specfun import normalized_legendre, spherical_bessel_jh

_logger = logging.getLogger(__name__)

# Accepted max |RT - 1| of the spherical -> planar -> spherical round trip.
ROUND_TRIP_TOL = 1e-6


@dataclass(frozen=True)
class QuadratureSpec:
    """Planar quadrature layout.  ``kappa_max`` <= k means propagating waves only.

    ``propagating_panels`` fixes the propagating panel count; left unset it
    follows the separation and the multipole order (see :func:`planar_nodes`).
    """

    kappa_max: Optional[float] = None
    propagating_panels: Optional[int] = None
    evanescent_panels: int = field(default_factory=lambda: settings.EVANESCENT_PANELS)
    nodes_per_panel: int = field(default_factory=lambda: settings.NODES_PER_PANEL)

    @classmethod
    def for_gap(cls, omega: float, gap: float, **kwargs) -> "QuadratureSpec":
        """Evanescent cutoff kappa_max = omega/c + EVANESCENT_LAMBDA / gap."""
        if not gap > 0:
            raise DomainError(f"gap must be positive, got {gap}")
        return cls(kappa_max=omega / C + settings.EVANESCENT_LAMBDA / gap, **kwargs)


@dataclass
class PlanarNodes:
    k: float
    kappa: np.ndarray
    kz: np.ndarray  # Im >= 0
    measure: np.ndarray  # kappa dkappa / |k_z|
    evanescent: np.ndarray
    propagating_panels: int = 0
    nodes_per_panel: int = 0

    @property
    def size(self) -> int:
        return self.kappa.size

    @property
    def cos_theta(self) -> np.ndarray:
        return self.kz / self.k

    @property
    def sin_theta(self) -> np.ndarray:
        return self.kappa / self.k

    @property
    def propagator_measure(self) -> np.ndarray:
        """kappa dkappa / k_z with the complex k_z (-i times ``measure`` for evanescent nodes)."""
        return np.where(self.evanescent, -1j * self.measure, self.measure + 0j)


def planar_nodes(omega: float, l_max: int, quadrature: Optional[QuadratureSpec] = None,
                 separation: float = 0.0) -> PlanarNodes:
    """Quadrature nodes in kappa for one frequency.

    Unless ``quadrature`` fixes it, the propagating panel count grows
    with k*separation (oscillating plate phase) and with l_max: products of
    two multipoles oscillate like exp(i (2 l_max + 1) beta), and an n-point
    panel stays accurate to about 1e-9 while it spans at most 4n/3 radians
    of that phase.
    """
    if not omega > 0:
        raise DomainError(f"angular frequency must be positive, got {omega}")
    quadrature = quadrature or QuadratureSpec()
    k = omega / C
    per_panel = quadrature.nodes_per_panel
    panels = quadrature.propagating_panels or max(
        settings.PROPAGATING_PANELS,
        math.ceil(k * separation / (2 * math.pi)),
        math.ceil(3 * math.pi * (2 * l_max + 1) / (8 * per_panel)),
    )
    beta, w_beta = gauss_legendre_panels(0.0, 0.5 * math.pi, panels, per_panel)
    kappa = [k * np.sin(beta)]
    kz = [k * np.cos(beta) + 0j]
    measure = [k * np.sin(beta) * w_beta]
    evanescent = [np.zeros(beta.size, dtype=bool)]

    if quadrature.kappa_max is not None and quadrature.kappa_max > k:
        u_max = math.acosh(quadrature.kappa_max / k)
        u, w_u = gauss_legendre_panels(0.0, u_max, quadrature.evanescent_panels, per_panel)
        kappa.append(k * np.cosh(u))
        kz.append(1j * k * np.sinh(u))
        measure.append(k * np.cosh(u) * w_u)
        evanescent.append(np.ones(u.size, dtype=bool))

    nodes = PlanarNodes(
        k=k,
        kappa=np.concatenate(kappa),
        kz=np.concatenate(kz),
        measure=np.concatenate(measure),
        evanescent=np.concatenate(evanescent),
        propagating_panels=panels,
        nodes_per_panel=per_panel,
    )
    _logger.debug(f"planar nodes at omega={omega:.4g}: {panels} propagating panels, "
                  f"{int(nodes.evanescent.sum())} evanescent nodes")
    return nodes


# --------------------------------------------------------------------------- #
# Transformation coefficients                                                  #
# --------------------------------------------------------------------------- #

def spherical_modes(l_max: int, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """(tau, l) of the spherical modes of azimuthal order m, tau-major."""
    degrees = np.arange(max(1, abs(m)), l_max + 1)
    taus = np.repeat([0, 1], degrees.size)
    return taus, np.tile(degrees, 2)


def conversion_coefficients(l_max: int, m: int, cos_theta, sin_theta, dagger: bool = False,
                            scaled: bool = False) -> np.ndarray:
    """B_{tau l m j} (or B^dagger) as an array [mode, j, node].

    B = -1/i^(l+1) / sqrt(2l(l+1)) (i delta_j0 + delta_j1) (delta_{tau j} tau_l^|m| + (1 - delta_{tau j}) m pi_l^|m|);
    the dagger variant replaces i by -i.  ``scaled`` divides degree l by sin^l.
    """
    if l_max < 1:
        raise DomainError(f"l_max must be >= 1, got {l_max}")
    if abs(m) > l_max:
        raise DomainError(f"|m| = {abs(m)} exceeds l_max = {l_max}")
    ct = np.atleast_1d(np.asarray(cos_theta, dtype=complex))
    st = np.atleast_1d(np.asarray(sin_theta, dtype=complex))
    _, pi, tau = normalized_legendre(l_max, abs(m), ct, st, scaled)
    taus, degrees = spherical_modes(l_max, m)
    unit = -1j if dagger else 1j
    norm = -1.0 / unit ** (degrees + 1) / np.sqrt(2.0 * degrees * (degrees + 1))

    out = np.empty((taus.size, 2, ct.size), dtype=complex)
    for j, pol_factor in ((0, unit), (1, 1.0)):
        sphfun = np.where((taus == j)[:, None], tau[degrees], m * pi[degrees])
        out[:, j, :] = (norm * pol_factor)[:, None] * sphfun
    return out


def _log_sigma(nodes: PlanarNodes, l_max: int, separation: float) -> np.ndarray:
    """ln sigma_l = max(0, max over evanescent nodes of l ln sin - kappa_z D), l = 0..l_max."""
    log_sigma = np.zeros(l_max + 1)
    if not np.any(nodes.evanescent):
        return log_sigma
    ln_st = np.log(nodes.sin_theta[nodes.evanescent].real)
    decay = nodes.kz[nodes.evanescent].imag * separation
    degrees = np.arange(l_max + 1)
    exponent = degrees[:, None] * ln_st[None, :] - decay[None, :]
    return np.maximum(0.0, exponent.max(axis=1))


@dataclass
class ConversionBlock:
    """Conversion between the planar nodes and the spherical modes of one m.

    ``up``/``down`` hold B(+-k_z) and ``up_dagger``/``down_dagger`` hold
    B^dagger(+-k_z), all [mode, j, node] and all multiplied by the node factor
    g = exp(i k_z D - ln sigma_l) (times sin^l for the scaled evanescent
    columns).  A product B^dagger g ... g B therefore carries the plate
    round-trip phase exp(2 i k_z D).
    """

    omega: float
    l_max: int
    m: int
    separation: float
    nodes: PlanarNodes
    taus: np.ndarray
    degrees: np.ndarray
    log_sigma: np.ndarray  # per mode
    up: np.ndarray
    down: np.ndarray
    up_dagger: np.ndarray
    down_dagger: np.ndarray
    round_trip_error: float = 0.0

    @property
    def size(self) -> int:
        return self.taus.size

    def mode(self, index: int) -> SphericalMode:
        """Label of row ``index``; tau 1 is the electric (E) multipole."""
        polarization = Polarization.E if self.taus[index] == 1 else Polarization.M
        return SphericalMode(l=int(self.degrees[index]), m=self.m, polarization=polarization)

    def reflection_operator(self, reflection: np.ndarray) -> np.ndarray:
        """U' = Sigma^-1 U Sigma^-1 for plate reflection coefficients ``reflection[j, node]``.

        U maps outgoing spherical amplitudes to the regular amplitudes of the
        plate-reflected field at the sphere:
        U = (4/k) sum_n (kappa dkappa / k_z) sum_j B^dagger_up r_j e^{2 i k_z D} B_down^T.
        """
        weight = (4.0 / self.nodes.k) * self.nodes.propagator_measure[None, :] * reflection
        return np.einsum("ajn,jn,bjn->ab", self.up_dagger, weight, self.down)

    def source_covariance(self, weight: np.ndarray) -> np.ndarray:
        """A' = sum_n measure_n sum_j w_j v v^dagger, v = B^dagger_up g, for plate weights ``weight[j, node]``.

        The caller supplies w_j = 1 - |r_j|^2 (propagating) or 2 Im r_j
        (evanescent) and the overall Theta * 4/(pi k) prefactor.
        """
        w = self.nodes.measure[None, :] * weight
        return np.einsum("ajn,jn,bjn->ab", self.up_dagger, w, self.up_dagger.conj(), optimize=True)

    def source_diagonal(self, weight: np.ndarray) -> np.ndarray:
        """diag(A') for real plate weights, without forming the full covariance."""
        w = self.nodes.measure[None, :] * weight
        return np.einsum("ajn,jn->a", np.abs(self.up_dagger) ** 2, w)

    def to_planar(self, coefficients: np.ndarray, direction: Direction = Direction.DOWN) -> np.ndarray:
        """Plane-wave amplitudes [j, node] (before the 1/(2 pi k_z k) measure) of outgoing spherical waves."""
        coefficients = np.asarray(coefficients, dtype=complex)
        matrix = self.down if direction == Direction.DOWN else self.up
        return np.einsum("ajn,a->jn", matrix, coefficients)

    def to_spherical(self, planar: np.ndarray, direction: Direction = Direction.UP) -> np.ndarray:
        """Regular spherical amplitudes of a plane-wave field given per node: 4/k sum measure B^dagger a."""
        planar = np.asarray(planar, dtype=complex)
        matrix = self.up_dagger if direction == Direction.UP else self.down_dagger
        weight = (4.0 / self.nodes.k) * self.nodes.propagator_measure
        return np.einsum("ajn,jn,n->a", matrix, planar, weight)


def _node_factors(nodes: PlanarNodes, degrees: np.ndarray, log_sigma: np.ndarray, separation: float) -> np.ndarray:
    """g[mode, node] = exp(i k_z D - ln sigma_l), with an extra sin^l on evanescent nodes."""
    ln_st = np.where(nodes.evanescent, np.log(np.abs(nodes.sin_theta)), 0.0)
    exponent = (1j * nodes.kz * separation)[None, :] + degrees[:, None] * ln_st[None, :] - log_sigma[:, None]
    with np.errstate(under="ignore"):
        return np.exp(exponent)


def _coefficients(nodes: PlanarNodes, l_max: int, m: int, sign: int, dagger: bool) -> np.ndarray:
    """B over all nodes, unscaled on propagating and scaled on evanescent columns."""
    ct = sign * nodes.cos_theta
    st = nodes.sin_theta + 0j
    prop = ~nodes.evanescent
    n_modes = spherical_modes(l_max, m)[0].size
    out = np.zeros((n_modes, 2, nodes.size), dtype=complex)
    if np.any(prop):
        out[:, :, prop] = conversion_coefficients(l_max, m, ct[prop], st[prop], dagger=dagger)
    if np.any(nodes.evanescent):
        ev = nodes.evanescent
        out[:, :, ev] = conversion_coefficients(l_max, m, ct[ev], st[ev], dagger=dagger, scaled=True)
    return out


@functools.lru_cache(maxsize=1024)
def _angular_round_trip_error(panels: int, per_panel: int, l_max: int, m: int) -> float:
    """max |RT - 1| with RT = 2 sum over propagating nodes of sin(beta) w sum_j (B^dagger B)(up + down).

    Depends on the angular layout only (the k in the measure cancels), so it
    is shared by every frequency with the same panel count.
    """
    beta, w_beta = gauss_legendre_panels(0.0, 0.5 * math.pi, panels, per_panel)
    ct = np.cos(beta) + 0j
    st = np.sin(beta) + 0j
    weight = 2.0 * np.sin(beta) * w_beta
    rt = 0
    for sign in (1, -1):
        b = conversion_coefficients(l_max, m, sign * ct, st)
        b_dagger = conversion_coefficients(l_max, m, sign * ct, st, dagger=True)
        rt = rt + np.einsum("ajn,bjn,n->ab", b_dagger, b, weight, optimize=True)
    return float(np.max(np.abs(rt - np.eye(rt.shape[0]))))


def _round_trip_error(nodes: PlanarNodes, l_max: int, m: int) -> float:
    return _angular_round_trip_error(nodes.propagating_panels, nodes.nodes_per_panel, l_max, m)


def conversion_block(nodes: PlanarNodes, omega: float, l_max: int, m: int, separation: float = 0.0,
                     check: bool = True) -> ConversionBlock:
    """Build the block of azimuthal order m on precomputed nodes."""
    taus, degrees = spherical_modes(l_max, m)
    log_sigma_l = _log_sigma(nodes, l_max, separation)
    log_sigma = log_sigma_l[degrees]
    g = _node_factors(nodes, degrees, log_sigma, separation)[:, None, :]

    error = 0.0
    if check:
        error = _round_trip_error(nodes, l_max, m)
        if error > ROUND_TRIP_TOL:
            raise ConversionError(
                f"round-trip identity off by {error:.3g} at omega={omega:.4g}, l_max={l_max}, m={m}"
            )

    return ConversionBlock(
        omega=omega,
        l_max=l_max,
        m=m,
        separation=separation,
        nodes=nodes,
        taus=taus,
        degrees=degrees,
        log_sigma=log_sigma,
        up=_coefficients(nodes, l_max, m, 1, False) * g,
        down=_coefficients(nodes, l_max, m, -1, False) * g,
        up_dagger=_coefficients(nodes, l_max, m, 1, True) * g,
        down_dagger=_coefficients(nodes, l_max, m, -1, True) * g,
        round_trip_error=error,
    )


def wave_conversion(omega: float, l_max: int, quadrature: Optional[QuadratureSpec] = None,
                    separation: Optional[float] = None, m: int = 0) -> ConversionBlock:
    """Conversion block for one frequency, multipole cutoff and azimuthal order.

    ``separation`` is the sphere-centre-to-plate distance D = d + R; without
    it the plate factors are one.  Raises ConversionError when the round-trip
    identity fails on the retained spherical subspace.
    """
    if l_max < 1:
        raise DomainError(f"l_max must be >= 1, got {l_max}")
    separation = separation or 0.0
    nodes = planar_nodes(omega, l_max, quadrature, separation)
    return conversion_block(nodes, omega, l_max, m, separation)


def conversion_blocks(omega: float, l_max: int, quadrature: Optional[QuadratureSpec] = None,
                      separation: float = 0.0) -> List[ConversionBlock]:
    """Blocks for m = 0..l_max on shared nodes (negative m mirror the positive ones)."""
    nodes = planar_nodes(omega, l_max, quadrature, separation)
    return [conversion_block(nodes, omega, l_max, m, separation) for m in range(l_max + 1)]


# --------------------------------------------------------------------------- #
# Field evaluators                                                             #
# --------------------------------------------------------------------------- #

def plane_vector_wave(kappa: float, alpha, kz: complex, polarization: int, point) -> np.ndarray:
    """Electric field of the plane vector wave Phi_j at ``point`` (x, y, z).

    ``alpha`` may be an array of azimuths; the result then has shape (3, *alpha.shape).
    """
    x, y, z = point
    alpha = np.asarray(alpha, dtype=float)
    k = np.sqrt(kappa**2 + kz**2 + 0j)
    cos_a, sin_a = np.cos(alpha), np.sin(alpha)
    phase = np.exp(1j * (kappa * cos_a * x + kappa * sin_a * y + kz * z))
    if polarization == 0:
        e = np.array([-sin_a, cos_a, np.zeros_like(alpha)], dtype=complex)
    elif polarization == 1:
        e = np.array([cos_a * kz / k, sin_a * kz / k, np.full_like(alpha, -kappa / k, dtype=complex)], dtype=complex)
    else:
        raise DomainError(f"polarization must be 0 (TE) or 1 (TM), got {polarization}")
    return e * phase


def spherical_vector_wave(k: float, kind: int, tau: int, l: int, m: int, point) -> np.ndarray:
    """Electric field of the spherical vector wave (regular ``kind=1``, outgoing ``kind=3``)."""
    if kind not in (1, 3):
        raise DomainError(f"kind must be 1 (regular) or 3 (outgoing), got {kind}")
    if tau not in (0, 1):
        raise DomainError(f"tau must be 0 or 1, got {tau}")
    x, y, z = (float(c) for c in point)
    r = math.sqrt(x * x + y * y + z * z)
    if r == 0:
        raise DomainError("spherical vector waves are evaluated at r > 0")
    theta = math.acos(z / r)
    phi = math.atan2(y, x)
    e_r = np.array([x / r, y / r, z / r])
    e_theta = np.array([math.cos(theta) * math.cos(phi), math.cos(theta) * math.sin(phi), -math.sin(theta)])
    e_phi = np.array([-math.sin(phi), math.cos(phi), 0.0])

    p, pi, tau_fn = normalized_legendre(l, abs(m), math.cos(theta), math.sin(theta))
    kr = k * r
    j, h = spherical_bessel_jh(l, kr)
    bessel = j if kind == 1 else h
    z_l = bessel.values[l]
    d_xz = z_l + kr * bessel.derivatives[l]

    e_imphi = np.exp(1j * m * phi)
    prefactor = 1.0 / math.sqrt(2 * l * (l + 1))
    if tau == 0:
        field = z_l * (1j * m * pi[l] * e_theta - tau_fn[l] * e_phi)
    else:
        field = (l * (l + 1) * z_l / kr * p[l] * e_r
                 + d_xz / kr * (tau_fn[l] * e_theta + 1j * m * pi[l] * e_phi))
    return prefactor * field * e_imphi


def outgoing_wave_from_planar(nodes: PlanarNodes, tau: int, l: int, m: int, point, azimuths: int = 64) -> np.ndarray:
    """Psi^(3)_{tau l m} at a point with z > 0, summed from its up-going plane-wave expansion."""
    x, y, z = point
    if not z > 0:
        raise DomainError("the up-going expansion is valid above the source only (z > 0)")
    alphas = 2 * math.pi * np.arange(azimuths) / azimuths
    # trapezoid in alpha (d_alpha = 2 pi / azimuths) times the 1/(2 pi) prefactor
    azimuthal = np.exp(1j * m * alphas) / azimuths
    b = _coefficients_at(nodes, l, m, tau)
    field = np.zeros(3, dtype=complex)
    for n in range(nodes.size):
        kappa, kz = float(nodes.kappa[n]), complex(nodes.kz[n])
        measure = nodes.propagator_measure[n] / nodes.k
        for j in (0, 1):
            waves = plane_vector_wave(kappa, alphas, kz, j, (x, y, z))
            field += measure * b[j, n] * (waves @ azimuthal)
    return field


def _coefficients_at(nodes: PlanarNodes, l: int, m: int, tau: int) -> np.ndarray:
    """B_{tau l m j}(+k_z) for one mode, unscaled, as [j, node]."""
    b = conversion_coefficients(l, m, nodes.cos_theta, nodes.sin_theta + 0j)
    taus, degrees = spherical_modes(l, m)
    row = int(np.nonzero((taus == tau) & (degrees == l))[0][0])
    return b[row]
