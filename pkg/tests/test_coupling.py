"""
Test fiber coupling, distinguishability and the collapse rule.
"""

import math

import numpy as np
import pytest

from twisted_slit.beam import RadialField, SuperpositionState, hygg_field, lg_mode, radial_grid
from twisted_slit.coupling import (
    COLLIMATOR_APERTURE,
    FOVField,
    IncomingField,
    apply_aperture,
    azimuthal_overlap,
    collapse_state,
    component_overlaps,
    coupling_efficiency,
    distinguishability,
    gaussian_fov,
    simulate_counts,
)
from twisted_slit.errors import DomainError


@pytest.fixture
def plane_fields(params):
    """Gaussian and l=10 HyGG profiles at 1 m on a shared grid."""
    z = 1.0
    grid = radial_grid(params, 10, z)
    return hygg_field(params, 0, z, grid), hygg_field(params, 10, z, grid)


@pytest.fixture
def matched_fov(plane_fields):
    gaussian, _ = plane_fields
    return FOVField(RadialField(gaussian.z, 0, gaussian.grid, np.conj(gaussian.amp)))


def test_azimuthal_overlap():
    assert azimuthal_overlap(0) == pytest.approx(1.0)
    for ell in (1, 6, 10, 12, -10):
        assert abs(azimuthal_overlap(ell)) < 1e-12


def test_matched_fov_couples_alpha_squared(plane_fields, matched_fov):
    """With B = A* the efficiency is exactly the Gaussian weight."""
    gaussian, helical = plane_fields
    state = SuperpositionState.from_weights([0, 10], [0.5, 0.5])
    incoming = IncomingField(state, {0: gaussian, 10: helical})
    assert coupling_efficiency(incoming, matched_fov) == pytest.approx(0.5, abs=1e-8)
    assert incoming.alpha == pytest.approx(math.sqrt(0.5))


def test_helical_component_does_not_couple(plane_fields, matched_fov):
    gaussian, helical = plane_fields
    state = SuperpositionState.from_weights([0, 10], [0.25, 0.75])
    overlaps = component_overlaps(IncomingField(state, {0: gaussian, 10: helical}), matched_fov)
    assert abs(overlaps[0]) == pytest.approx(1.0, abs=1e-8)
    assert abs(overlaps[10]) < 1e-10


def test_waist_mismatch_closed_form(params):
    """Gaussian-Gaussian coupling is (2 w1 w2 / (w1^2 + w2^2))^2."""
    grid = np.linspace(0.0, 12e-3, 8001)
    w1, w2 = 1.5e-3, 1.2e-3
    beam = lg_mode(params.with_waist(w1), 0, 0, 0.0, grid)
    incoming = IncomingField(SuperpositionState(((0, 1.0 + 0j),)), {0: RadialField(2.0, 0, grid, beam.amp)})
    eta = coupling_efficiency(incoming, gaussian_fov(params, w2, 2.0, grid))
    assert eta == pytest.approx((2.0 * w1 * w2 / (w1**2 + w2**2)) ** 2, abs=1e-6)


def test_plane_mismatch_rejected(plane_fields, params):
    gaussian, _ = plane_fields
    fov = gaussian_fov(params, 1.5e-3, 2.0, gaussian.grid)
    with pytest.raises(DomainError):
        coupling_efficiency(IncomingField(SuperpositionState(((0, 1.0 + 0j),)), {0: gaussian}), fov)


def test_missing_profile_rejected(plane_fields):
    gaussian, _ = plane_fields
    with pytest.raises(DomainError):
        IncomingField(SuperpositionState.from_weights([0, 10], [0.5, 0.5]), {0: gaussian})


def test_leakage_range(plane_fields, matched_fov):
    gaussian, _ = plane_fields
    incoming = IncomingField(SuperpositionState(((0, 1.0 + 0j),)), {0: gaussian})
    with pytest.raises(DomainError):
        coupling_efficiency(incoming, matched_fov, leakage=1.0)


def test_leakage_rides_with_gaussian(plane_fields, matched_fov):
    gaussian, helical = plane_fields
    state = SuperpositionState.from_weights([0, 10], [0.5, 0.5])
    incoming = IncomingField(state, {0: gaussian, 10: helical})
    assert coupling_efficiency(incoming, matched_fov, leakage=0.02) == pytest.approx(0.51, abs=1e-8)


def test_aperture_zeroes_outside(plane_fields):
    gaussian, _ = plane_fields
    clipped = apply_aperture(gaussian, 1e-3)
    assert np.all(clipped.amp[gaussian.grid > 1e-3] == 0)
    assert clipped.power() < gaussian.power()
    with pytest.raises(DomainError):
        apply_aperture(gaussian, 0.0)


def test_distinguishability():
    assert distinguishability(98, 1) == pytest.approx(97 / 99)
    assert distinguishability(0, 5) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        distinguishability(0, 0)
    with pytest.raises(DomainError):
        distinguishability(-1, 3)


def test_simulated_counts_are_distinguishable(plane_fields, matched_fov, rng):
    """Behind the 1.5 mm collimator the l=10 path is filtered with D above 0.98."""
    gaussian, helical = plane_fields
    n_g, n_lg = simulate_counts(gaussian, helical, matched_fov, 100_000, rng, leakage=0.005,
                                aperture=COLLIMATOR_APERTURE / 2.0)
    assert n_g > 0
    assert distinguishability(n_g, n_lg) >= 0.98


def test_collapse_state():
    """The post-measurement state is sqrt(D)|0> + sqrt(1-D)|l>."""
    state = SuperpositionState.from_weights([0, 10], [0.5, 0.5])
    result = collapse_state(state, 0.98)
    assert result.post_state.coefficient(0) == pytest.approx(math.sqrt(0.98))
    assert result.post_state.coefficient(10) == pytest.approx(math.sqrt(0.02))
    assert result.efficiency == pytest.approx(0.5)
    assert math.isnan(result.collapse_epoch)
    assert collapse_state(state, 1.0, z_lens=2.0).collapse_epoch == 2.0


def test_collapse_state_needs_two_modes():
    with pytest.raises(DomainError):
        collapse_state(SuperpositionState.from_weights([0, 6, 10], [0.4, 0.3, 0.3]), 0.9)
    with pytest.raises(DomainError):
        collapse_state(SuperpositionState.from_weights([0, 10], [0.5, 0.5]), 1.5)


def test_collapse_with_profiles(plane_fields, matched_fov):
    gaussian, helical = plane_fields
    state = SuperpositionState.from_weights([0, 10], [0.5, 0.5])
    incoming = IncomingField(state, {0: gaussian, 10: helical})
    result = collapse_state(state, 0.99, incoming, matched_fov)
    assert result.efficiency == pytest.approx(0.5, abs=1e-8)
    assert result.collapse_epoch == pytest.approx(1.0)


def test_efficiency_ignores_global_phase(plane_fields, matched_fov):
    gaussian, helical = plane_fields
    state = SuperpositionState.from_weights([0, 10], [0.3, 0.7])
    profiles = {0: gaussian, 10: helical}
    eta = coupling_efficiency(IncomingField(state, profiles), matched_fov)
    for phase in (0.4, math.pi / 2, 2.9):
        rotated = IncomingField(state.with_phase(phase), profiles)
        assert coupling_efficiency(rotated, matched_fov) == pytest.approx(eta, abs=1e-12)


def test_efficiency_is_quadratic_in_alpha(plane_fields, params, rng):
    """For a mismatched FOV the efficiency is |alpha|^2 times that of the bare Gaussian."""
    gaussian, helical = plane_fields
    fov = gaussian_fov(params, 1.2e-3, gaussian.z, gaussian.grid)
    profiles = {0: gaussian, 10: helical}
    pure = coupling_efficiency(IncomingField(SuperpositionState(((0, 1.0 + 0j),)), profiles), fov)
    assert 0 < pure < 1
    for alpha2 in rng.uniform(0.05, 0.95, size=5):
        incoming = IncomingField(SuperpositionState.two_mode(float(alpha2), 10), profiles)
        assert coupling_efficiency(incoming, fov) == pytest.approx(alpha2 * pure, rel=1e-8)
