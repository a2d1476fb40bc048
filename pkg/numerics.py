"""Quadrature shared by the radiation and transfer modules.

``integrate_adaptive`` is a global-adaptive 7/15 Gauss-Kronrod integrator:
the interval with the largest error estimate is bisected until the summed
estimate drops below ``max(tol * |value|, abs_tol)``.  Integrands may return
a vector; component 0 drives convergence and the remaining components ride
along on the same nodes (polarization or channel splits).
"""

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np

from config import settings, resolve_tol
from errors import DomainError, IntegrationError
from physics import HBAR, K_B

_logger = logging.getLogger(__name__)

# Kronrod abscissae (positive half, descending) and weights.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
# Gauss weights at _XGK[1], _XGK[3], _XGK[5], _XGK[7].
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# 15-node layout: -x0 .. -x6, 0, +x6 .. +x0
_NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
_KRONROD = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
_GAUSS = np.zeros(15)
for _i, _w in zip((1, 3, 5), _WG[:3]):
    _GAUSS[_i] = _w
    _GAUSS[14 - _i] = _w
_GAUSS[7] = _WG[3]


@dataclass
class QuadratureResult:
    """Outcome of an adaptive integration.

    ``value`` and ``error_estimate`` refer to component 0; ``values`` holds
    every component.  ``nodes``/``weights``/``samples`` record the final
    partition (sorted by node) so callers can rebuild spectra.
    """

    value: float
    error_estimate: float
    evaluations: int
    subintervals: int
    values: np.ndarray = field(default_factory=lambda: np.zeros(1))
    nodes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    samples: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))

    def component(self, index: int) -> float:
        return float(self.values[index])


@dataclass
class _Segment:
    a: float
    b: float
    kronrod: np.ndarray
    error: float
    nodes: np.ndarray
    weights: np.ndarray
    samples: np.ndarray


def _evaluate(f: Callable, a: float, b: float) -> _Segment:
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = centre + half * _NODES
    fx = np.array([np.atleast_1d(np.asarray(f(xi), dtype=float)) for xi in x])
    if not np.all(np.isfinite(fx)):
        raise DomainError(f"integrand not finite on [{a:g}, {b:g}]")
    kronrod = half * (_KRONROD @ fx)
    gauss = half * (_GAUSS @ fx)
    return _Segment(a, b, kronrod, float(abs(kronrod[0] - gauss[0])), x, half * _KRONROD, fx)


def integrate_adaptive(
    f: Callable[[float], object],
    a: float,
    b: float,
    tol: float | None = None,
    abs_tol: float = 0.0,
    max_subintervals: int | None = None,
) -> QuadratureResult:
    """Integrate ``f`` over [a, b] to relative ``tol`` (or absolute ``abs_tol``)."""
    tol = resolve_tol(tol)
    if not a < b:
        raise DomainError(f"integration needs a < b, got [{a}, {b}]")
    cap = max_subintervals or settings.MAX_SUBINTERVALS

    first = _evaluate(f, a, b)
    # (-error, insertion counter) keeps the ordering deterministic on ties
    heap: List[Tuple[float, int, _Segment]] = [(-first.error, 0, first)]
    counter = 1
    total = first.kronrod.copy()
    error = first.error

    while error > max(tol * abs(total[0]), abs_tol):
        if len(heap) >= cap:
            _, _, worst = heap[0]
            raise IntegrationError(
                f"adaptive quadrature hit the {cap}-subinterval cap",
                (worst.a, worst.b, worst.error),
                float(total[0]),
            )
        _, _, worst = heapq.heappop(heap)
        mid = 0.5 * (worst.a + worst.b)
        if not worst.a < mid < worst.b:
            # interval below floating-point resolution; cannot refine further
            heapq.heappush(heap, (-worst.error, counter, worst))
            raise IntegrationError("subinterval too small to bisect", (worst.a, worst.b, worst.error), float(total[0]))
        left = _evaluate(f, worst.a, mid)
        right = _evaluate(f, mid, worst.b)
        for seg in (left, right):
            heapq.heappush(heap, (-seg.error, counter, seg))
            counter += 1
        total = total - worst.kronrod + left.kronrod + right.kronrod
        error = error - worst.error + left.error + right.error
        # recompute from leaves occasionally to shed accumulated cancellation error
        if counter % 64 == 0:
            total = np.sum([s.kronrod for _, _, s in heap], axis=0)
            error = math.fsum(s.error for _, _, s in heap)

    segments = sorted((s for _, _, s in heap), key=lambda s: s.a)
    total = np.sum([s.kronrod for s in segments], axis=0)
    error = math.fsum(s.error for s in segments)
    nodes = np.concatenate([s.nodes for s in segments])
    weights = np.concatenate([s.weights for s in segments])
    samples = np.concatenate([s.samples for s in segments], axis=0)

    _logger.debug(f"GK15 on [{a:g}, {b:g}]: {len(segments)} subintervals, error {error:.3g}")
    return QuadratureResult(
        value=float(total[0]),
        error_estimate=float(error),
        evaluations=15 * (2 * len(segments) - 1),
        subintervals=len(segments),
        values=total,
        nodes=nodes,
        weights=weights,
        samples=samples,
    )


def integrate_semi_infinite(f: Callable[[float], object], a: float, tol: float | None = None, **kwargs) -> QuadratureResult:
    """Integrate over [a, inf) with the map x = a + t / (1 - t), t in [0, 1)."""

    def mapped(t: float):
        one_minus = 1.0 - t
        return np.asarray(f(a + t / one_minus), dtype=float) / one_minus**2

    return integrate_adaptive(mapped, 0.0, 1.0, tol, **kwargs)


# --------------------------------------------------------------------------- #
# Frequency grid                                                               #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class FrequencyGrid:
    """Reduced-frequency domain x = hbar*omega/(k_B T) on [x_min, x_max]."""

    temperature: float
    x_min: float
    x_max: float
    jacobian: float
    tol: float

    def omega(self, x: float) -> float:
        return x * self.jacobian


def frequency_grid(T: float, tol: float | None = None) -> FrequencyGrid:
    if not T > 0:
        raise DomainError(f"frequency grid needs T > 0, got {T}")
    return FrequencyGrid(
        temperature=T,
        x_min=settings.X_MIN,
        x_max=settings.X_MAX,
        jacobian=K_B * T / HBAR,
        tol=resolve_tol(tol),
    )


def integrate_frequency(f: Callable[[float], object], grid: FrequencyGrid, abs_tol: float = 0.0) -> QuadratureResult:
    """Integrate ``f(omega) d omega`` over the grid; nodes and weights come back in omega units."""
    result = integrate_adaptive(lambda x: f(grid.omega(x)), grid.x_min, grid.x_max, grid.tol,
                                abs_tol=abs_tol / grid.jacobian)
    scale = grid.jacobian
    result.value *= scale
    result.error_estimate *= scale
    result.values = result.values * scale
    result.nodes = result.nodes * scale
    result.weights = result.weights * scale
    return result


def gauss_legendre_panels(a: float, b: float, panels: int, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule: ``panels`` equal panels with ``nodes`` points each."""
    if panels < 1 or nodes < 1:
        raise DomainError("need at least one panel and one node")
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    centre = 0.5 * (edges[:-1] + edges[1:])
    points = (centre[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return points, weights
