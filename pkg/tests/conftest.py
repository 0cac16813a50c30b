"""
Shared fixtures for the twisted double-slit tests.
"""

import numpy as np
import pytest

from twisted_slit.beam import BeamParams
from twisted_slit.groupdelay import DelayCurve


@pytest.fixture
def params():
    """795 nm photons with a 1.5 mm waist."""
    return BeamParams(795e-9, 1.5e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(2017)


@pytest.fixture
def linear_curves(params):
    """Synthetic delay curves tau_l(z) = slope_l * z, no quadrature involved."""
    zs = np.linspace(1e-3, 2.0, 201)
    slopes = {0: 0.0, 6: 3.0e-6, 10: 7.8e-6, 12: 11.0e-6}
    curves = {}
    for ell, slope in slopes.items():
        k2 = np.full(zs.shape, 2.0 * (ell + 1) / params.waist**2)
        curves[ell] = DelayCurve(zs, slope * zs, f"l={ell}", k2, params.k0, ell)
    return curves


@pytest.fixture
def config_text():
    return """
[beam]
wavelength = 795
waist = 1.5

[state]
modes = [0, 10]
weights = [0.5, 0.5]

[distances]
z = [1.2, 2.0]
z_end = 2.0
"""
