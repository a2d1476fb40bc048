import math

import numpy as np
import pytest

from conversion import (QuadratureSpec, conversion_block, conversion_blocks, conversion_coefficients,
                        outgoing_wave_from_planar, plane_vector_wave, planar_nodes, spherical_modes,
                        spherical_vector_wave, wave_conversion)
from errors import ConversionError, DomainError
from models import Direction, Polarization
from physics import C

K = 1e6
OMEGA = K * C


@pytest.mark.parametrize("m", [0, 1, 4])
def test_round_trip_identity(m):
    block = wave_conversion(OMEGA, 8, m=m)
    assert block.round_trip_error < 1e-6
    taus, degrees = spherical_modes(8, m)
    assert block.size == taus.size == 2 * (8 - max(1, m) + 1)
    assert set(degrees) == set(range(max(1, m), 9))


def test_planar_round_trip_returns_coefficients():
    block = wave_conversion(OMEGA, 6, m=2)
    rng = np.random.default_rng(7)
    c = rng.normal(size=block.size) + 1j * rng.normal(size=block.size)
    back = (block.to_spherical(block.to_planar(c, Direction.UP), Direction.UP)
            + block.to_spherical(block.to_planar(c, Direction.DOWN), Direction.DOWN))
    np.testing.assert_allclose(back, 2 * c, atol=1e-6 * np.abs(c).max())


def test_zero_vector_maps_to_zero():
    block = wave_conversion(OMEGA, 5, QuadratureSpec.for_gap(OMEGA, 1e-6), separation=2e-6, m=1)
    planar = block.to_planar(np.zeros(block.size))
    assert planar.shape == (2, block.nodes.size)
    assert not planar.any()
    assert not block.to_spherical(np.zeros((2, block.nodes.size))).any()


def test_coarse_quadrature_fails_round_trip():
    coarse = QuadratureSpec(propagating_panels=1, nodes_per_panel=2)
    with pytest.raises(ConversionError):
        wave_conversion(OMEGA, 20, coarse)


def test_propagating_panels_scale_with_separation_and_order():
    small = planar_nodes(OMEGA, 4)
    assert small.size == 4 * 12
    far = planar_nodes(OMEGA, 4, separation=99.5 * 2 * math.pi / K)
    assert far.size == 100 * 12
    high_order = planar_nodes(OMEGA, 110)
    assert high_order.size == 22 * 12
    assert high_order.propagating_panels == 22
    assert not small.evanescent.any()


@pytest.mark.parametrize("l_max", [40, 112, 250])
def test_round_trip_holds_at_high_order(l_max):
    for m in (0, 1, l_max // 2):
        block = wave_conversion(OMEGA, l_max, m=m)
        assert block.round_trip_error < 1e-6


def test_explicit_panels_are_kept():
    nodes = planar_nodes(OMEGA, 200, QuadratureSpec(propagating_panels=3))
    assert nodes.propagating_panels == 3
    assert nodes.size == 3 * 12


def test_evanescent_nodes_reach_the_cutoff():
    spec = QuadratureSpec.for_gap(OMEGA, 1e-7)
    nodes = planar_nodes(OMEGA, 4, spec)
    assert nodes.evanescent.sum() == spec.evanescent_panels * spec.nodes_per_panel
    assert nodes.kappa.max() < spec.kappa_max
    assert nodes.kappa[nodes.evanescent].max() > 0.99 * spec.kappa_max
    assert np.all(nodes.kz[nodes.evanescent].imag > 0)
    with pytest.raises(DomainError):
        QuadratureSpec.for_gap(OMEGA, 0.0)


@pytest.mark.parametrize("tau, l, m", [(0, 1, 0), (1, 1, 1), (0, 2, 1), (1, 3, -2)])
def test_outgoing_wave_matches_its_plane_wave_expansion(tau, l, m):
    point = (0.3 / K, 0.2 / K, 2.0 / K)
    nodes = planar_nodes(OMEGA, l, QuadratureSpec.for_gap(OMEGA, point[2]))
    expected = spherical_vector_wave(K, 3, tau, l, m, point)
    summed = outgoing_wave_from_planar(nodes, tau, l, m, point)
    assert np.linalg.norm(summed - expected) < 1e-6 * np.linalg.norm(expected)


def test_expansion_is_only_valid_above_the_source():
    nodes = planar_nodes(OMEGA, 2)
    with pytest.raises(DomainError):
        outgoing_wave_from_planar(nodes, 0, 1, 0, (0.0, 0.0, -1.0 / K))


def test_plane_waves_are_transverse():
    kappa, kz = 0.6 * K, 0.8 * K
    alpha = np.array([0.0, 1.0, 2.5])
    for pol in (0, 1):
        field = plane_vector_wave(kappa, alpha, kz, pol, (0.0, 0.0, 0.0))
        wavevector = np.array([kappa * np.cos(alpha), kappa * np.sin(alpha), np.full(3, kz)])
        np.testing.assert_allclose(np.sum(field * wavevector, axis=0), 0.0, atol=1e-9 * K)
        np.testing.assert_allclose(np.linalg.norm(field, axis=0), 1.0)
    with pytest.raises(DomainError):
        plane_vector_wave(kappa, alpha, kz, 2, (0.0, 0.0, 0.0))


def test_spherical_wave_errors():
    with pytest.raises(DomainError):
        spherical_vector_wave(K, 2, 0, 1, 0, (1.0, 0.0, 0.0))
    with pytest.raises(DomainError):
        spherical_vector_wave(K, 1, 0, 1, 0, (0.0, 0.0, 0.0))


def test_coefficient_errors():
    with pytest.raises(DomainError):
        conversion_coefficients(0, 0, 1.0, 0.0)
    with pytest.raises(DomainError):
        conversion_coefficients(2, 3, 1.0, 0.0)


def test_rescaled_reflection_operator_matches_direct_sum():
    d, R = 5e-8, 1e-7
    separation = d + R
    l_max, m = 4, 1
    nodes = planar_nodes(OMEGA, l_max, QuadratureSpec.for_gap(OMEGA, d), separation)
    block = conversion_block(nodes, OMEGA, l_max, m, separation)
    assert np.any(block.log_sigma > 0)

    rng = np.random.default_rng(3)
    reflection = 0.5 * (rng.random((2, nodes.size)) + 1j * rng.random((2, nodes.size)))
    st = nodes.sin_theta + 0j
    b_up_dagger = conversion_coefficients(l_max, m, nodes.cos_theta, st, dagger=True)
    b_down = conversion_coefficients(l_max, m, -nodes.cos_theta, st)
    weight = (4 / nodes.k) * nodes.propagator_measure * np.exp(2j * nodes.kz * separation) * reflection
    direct = np.einsum("ajn,jn,bjn->ab", b_up_dagger, weight, b_down)
    sigma = np.exp(block.log_sigma)

    np.testing.assert_allclose(block.reflection_operator(reflection), direct / np.outer(sigma, sigma),
                               rtol=1e-9, atol=1e-12 * np.abs(direct / np.outer(sigma, sigma)).max())


def test_blocks_cover_all_azimuthal_orders():
    blocks = conversion_blocks(OMEGA, 3)
    assert [b.m for b in blocks] == [0, 1, 2, 3]
    assert all(b.round_trip_error < 1e-6 for b in blocks)


def test_mode_labels_follow_the_block_layout():
    block = wave_conversion(OMEGA, 4, m=2)
    first, last = block.mode(0), block.mode(block.size - 1)
    assert (first.l, first.m, first.polarization) == (2, 2, Polarization.M)
    assert (last.l, last.m, last.polarization) == (4, 2, Polarization.E)


def test_source_diagonal_matches_covariance():
    d = 1e-7
    nodes = planar_nodes(OMEGA, 5, QuadratureSpec.for_gap(OMEGA, d), 2 * d)
    block = conversion_block(nodes, OMEGA, 5, 1, 2 * d)
    weight = np.random.default_rng(11).random((2, nodes.size))
    np.testing.assert_allclose(block.source_diagonal(weight), np.diagonal(block.source_covariance(weight)).real,
                               rtol=1e-10)
