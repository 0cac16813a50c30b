"""
Test beam parameters, superposition states and analytic fields.
"""

import math

import numpy as np
import pytest

from twisted_slit.beam import (
    BeamParams,
    RadialField,
    SuperpositionState,
    beam_radius,
    hygg_field,
    initial_field,
    lg_mode,
    max_intensity_radius,
    mode_fields,
    radial_grid,
)
from twisted_slit.errors import DomainError


def test_beam_params_derived_values(params):
    """Wavenumber and Rayleigh range follow from wavelength and waist."""
    assert params.k0 == pytest.approx(2.0 * math.pi / 795e-9)
    assert params.z_r == pytest.approx(math.pi * 1.5e-3**2 / 795e-9)
    assert params.with_waist(0.75e-3).z_r == pytest.approx(params.z_r / 4.0)


@pytest.mark.parametrize("wavelength, waist", [(0.0, 1e-3), (795e-9, -1e-3)])
def test_beam_params_rejects_nonpositive(wavelength, waist):
    with pytest.raises(DomainError):
        BeamParams(wavelength, waist)


def test_superposition_from_weights():
    """Coefficients are square roots of the weights."""
    state = SuperpositionState.from_weights([0, 10], [0.75, 0.25])
    assert state.coefficient(0) == pytest.approx(math.sqrt(0.75))
    assert state.coefficient(10) == pytest.approx(0.5)
    assert state.coefficient(3) == 0
    assert state.weights() == pytest.approx({0: 0.75, 10: 0.25})
    assert state.ells == [0, 10]


def test_superposition_validation():
    """Norm, distinct modes and weight sums are enforced."""
    with pytest.raises(DomainError):
        SuperpositionState(((0, 1.0 + 0j), (0, 0j)))
    with pytest.raises(DomainError):
        SuperpositionState(((0, 0.5 + 0j), (6, 0.5 + 0j)))
    with pytest.raises(DomainError):
        SuperpositionState.from_weights([0, 6], [0.5, 0.6])
    with pytest.raises(DomainError):
        SuperpositionState.from_weights([0, 6], [1.2, -0.2])


def test_two_mode_drops_empty_terms():
    assert SuperpositionState.two_mode(1.0, 10).ells == [0]
    assert SuperpositionState.two_mode(0.0, 10).ells == [10]
    state = SuperpositionState.two_mode(0.5, -6)
    assert state.weights() == pytest.approx({0: 0.5, -6: 0.5})
    with pytest.raises(DomainError):
        SuperpositionState.two_mode(1.5, 6)


def test_phase_keeps_weights():
    state = SuperpositionState.from_weights([0, 12], [0.5, 0.5]).with_phase(1.3)
    assert state.weights() == pytest.approx({0: 0.5, 12: 0.5})
    assert "|12>" in state.label()


def test_radial_field_validation():
    with pytest.raises(DomainError):
        RadialField(0.0, 0, np.array([0.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(DomainError):
        RadialField(0.0, 0, np.array([0.0, 2.0, 1.0]), np.ones(3))
    with pytest.raises(DomainError):
        RadialField(0.0, 0, np.array([-1.0, 0.0, 1.0]), np.ones(3))


def test_radial_grid_layout(params):
    """Strictly increasing, positive, ending at the requested radius."""
    grid = radial_grid(params, 10, 1.0, points=2048)
    assert grid.size == 2048
    assert grid[0] > 0
    assert np.all(np.diff(grid) > 0)
    w = beam_radius(params, 1.0)
    assert grid[-1] == pytest.approx(6.0 * max(w, max_intensity_radius(params, 10, 1.0)))
    assert radial_grid(params, 0, 0.0, r_max=5e-3, points=1024)[-1] == pytest.approx(5e-3)


def test_radial_grid_refines_the_core(params):
    """The core spacing tracks the linear spacing, and doubling the points halves both."""
    ell, z = 6, 1.0
    r_max = 4.0 * max(beam_radius(params, z), max_intensity_radius(params, ell, z))
    widest = []
    for points in (8192, 16384):
        grid = radial_grid(params, ell, z, r_max=r_max, points=points)
        steps = np.diff(grid)
        linear = steps[-1]
        assert steps.max() <= 1.05 * linear
        widest.append(steps.max())
    assert widest[1] == pytest.approx(0.5 * widest[0], rel=0.05)


def test_radial_grid_needs_core_points(params):
    with pytest.raises(DomainError):
        radial_grid(params, 6, 1.0, points=100)


def test_initial_field_unit_power(params):
    field = initial_field(params, 6, radial_grid(params, 0, 0.0))
    assert field.power() == pytest.approx(1.0, abs=1e-10)
    assert field.z == 0.0
    assert field.ell == 6


def test_gaussian_hygg_matches_lg(params):
    """For l = 0 the analytic field is the propagated Gaussian, Gouy phase included."""
    grid = radial_grid(params, 0, 1.0)
    hygg = hygg_field(params, 0, 1.0, grid)
    lg = lg_mode(params, 0, 0, 1.0, grid)
    assert hygg.relative_l2(lg) < 1e-8


@pytest.mark.parametrize("ell", [1, 6, 10])
def test_hygg_field_power(params, ell):
    """The closed form carries the unit input power up to the tail beyond the grid."""
    grid = radial_grid(params, ell, 1.0)
    field = hygg_field(params, ell, 1.0, grid)
    assert field.power() == pytest.approx(1.0, abs=1e-10)
    assert field.diagnostics["raw_power"] == pytest.approx(1.0, abs=0.02)
    assert field.intensity[0] < 1e-4 * field.intensity.max()


def test_hygg_field_chirality(params):
    """Amplitude depends on |l| only."""
    grid = radial_grid(params, 6, 1.2)
    np.testing.assert_allclose(hygg_field(params, -6, 1.2, grid).amp, hygg_field(params, 6, 1.2, grid).amp)


def test_hygg_field_rejects_waist_plane(params):
    with pytest.raises(DomainError):
        hygg_field(params, 6, 0.0, radial_grid(params, 6, 0.0))


@pytest.mark.parametrize("ell", [1, 6, 12])
def test_lg_peak_at_r1(params, ell):
    """LG_0^l peaks at sqrt(|l|/2) w(z)."""
    z = 1.0
    grid = np.linspace(0.0, 6.0 * max_intensity_radius(params, ell, z), 20001)
    field = lg_mode(params, 0, ell, z, grid)
    assert field.peak_radius() == pytest.approx(max_intensity_radius(params, ell, z), rel=1e-3)
    assert field.power() == pytest.approx(1.0, abs=1e-10)


def test_lg_rejects_negative_radial_index(params):
    with pytest.raises(DomainError):
        lg_mode(params, -1, 0, 0.0, np.linspace(0.0, 1e-2, 11))


def test_relative_l2_interpolates(params):
    grid = radial_grid(params, 0, 0.0)
    field = initial_field(params, 0, grid)
    other = RadialField(0.0, 0, grid[::2], field.amp[::2])
    assert field.relative_l2(other) < 1e-4
    assert field.relative_l2(field) == 0.0


def test_mode_fields(params):
    grid = radial_grid(params, 10, 0.5)
    fields = mode_fields(params, [0, 10], 0.5, grid)
    assert set(fields) == {0, 10}
    assert fields[10].ell == 10
    at_waist = mode_fields(params, [6], 0.0, grid)
    assert at_waist[6].z == 0.0
