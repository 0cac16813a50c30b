"""
Test confluent hypergeometric and Laguerre evaluations.
"""

import numpy as np
import pytest
from scipy.special import eval_genlaguerre

from twisted_slit.errors import DomainError
from twisted_slit.specfun import assoc_laguerre, kummer_1f1

mpmath = pytest.importorskip("mpmath")
mpmath.mp.dps = 40


def reference(a, b, z):
    return complex(mpmath.hyp1f1(a, b, mpmath.mpc(z.real, z.imag)))


@pytest.mark.parametrize(
    "a, b, z",
    [
        (3.0, 7.0, 2.5 + 1.0j),        # Taylor
        (0.5, 2.0, 0.3 - 0.2j),        # Taylor, odd l
        (5.0, 11.0, -20.0 + 3.0j),     # reflected
        (5.0, 11.0, 5.0 + 20.0j),      # Gauss-Jacobi
        (3.5, 8.0, 1.0 - 25.0j),       # Gauss-Jacobi, non-integer a
        (3.0, 7.0, 200.0 + 50.0j),     # asymptotic, terminating
        (0.5, 2.0, 60.0 + 40.0j),      # asymptotic, truncated
        (3.5, 8.0, 2.0 - 40.0j),       # asymptotic near the imaginary axis
    ],
)
def test_kummer_matches_mpmath(a, b, z):
    """Every regime agrees with an arbitrary-precision reference."""
    expected = reference(a, b, z)
    assert kummer_1f1(a, b, z) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize(
    "a, b, z",
    [
        (3.0, 7.0, 2.5 + 1.0j),
        (5.0, 11.0, -20.0 + 3.0j),
        (5.0, 11.0, 5.0 + 20.0j),
        (3.5, 8.0, 2.0 - 40.0j),
        (3.0, 7.0, 8000.0 - 3000.0j),
        (6.0, 13.0, 2.0e4 - 6.0e4j),
        (0.5, 2.0, 900.0 + 1.0j),
    ],
)
def test_scaled_kummer_matches_mpmath(a, b, z):
    """e^{-z} 1F1 stays finite where 1F1 alone overflows."""
    z_mp = mpmath.mpc(z.real, z.imag)
    expected = complex(mpmath.exp(-z_mp) * mpmath.hyp1f1(a, b, z_mp))
    assert kummer_1f1(a, b, z, scaled=True) == pytest.approx(expected, rel=1e-10)


def test_scaled_kummer_on_arrays():
    z = np.array([0.5 + 2.0j, -3.0 + 1.0j, 40.0 - 5.0j])
    np.testing.assert_allclose(kummer_1f1(3.0, 7.0, z, scaled=True), np.exp(-z) * kummer_1f1(3.0, 7.0, z), rtol=1e-12)
    assert kummer_1f1(-2.0, 2.5, 1.7, scaled=True) == pytest.approx(
        np.exp(-1.7) * kummer_1f1(-2.0, 2.5, 1.7), rel=1e-14
    )


def test_kummer_terminating_series():
    """A nonpositive-integer a gives a polynomial."""
    z = 1.7
    # 1F1(-2; b; z) = 1 - 2z/b + z^2/(b(b+1))
    b = 2.5
    expected = 1.0 - 2.0 * z / b + z**2 / (b * (b + 1.0))
    assert kummer_1f1(-2.0, b, z) == pytest.approx(expected, rel=1e-14)


def test_kummer_transformation_identity():
    """1F1(a; b; z) = e^z 1F1(b-a; b; -z)."""
    z = np.array([0.5 + 2.0j, 3.0 - 1.0j, 1.2 + 0.1j])
    left = kummer_1f1(2.0, 5.0, z)
    right = np.exp(z) * kummer_1f1(3.0, 5.0, -z)
    np.testing.assert_allclose(left, right, rtol=1e-12)


def test_kummer_contiguous_relation():
    """b(b-1) M(a,b-1) + b(1-b-z) M(a,b) + z(b-a) M(a,b+1) = 0."""
    a, b = 3.0, 7.0
    z = np.array([0.4 + 0.3j, 10.0 + 15.0j, 40.0 - 5.0j])
    total = (
        b * (b - 1.0) * kummer_1f1(a, b - 1.0, z)
        + b * (1.0 - b - z) * kummer_1f1(a, b, z)
        + z * (b - a) * kummer_1f1(a, b + 1.0, z)
    )
    scale = np.abs(b * (b - 1.0) * kummer_1f1(a, b - 1.0, z))
    assert np.all(np.abs(total) <= 1e-9 * scale)


def test_kummer_shapes():
    """Scalars give complex scalars; arrays keep their shape."""
    assert isinstance(kummer_1f1(1.0, 2.0, 0.5), complex)
    grid = np.linspace(0.0, 50.0, 12).reshape(3, 4) * (1.0 - 0.5j)
    assert kummer_1f1(3.0, 7.0, grid).shape == (3, 4)
    assert kummer_1f1(3.0, 7.0, 0.0) == pytest.approx(1.0)


@pytest.mark.parametrize("b", [0.0, -2.0])
def test_kummer_rejects_nonpositive_integer_b(b):
    with pytest.raises(DomainError):
        kummer_1f1(1.0, b, 0.5)


@pytest.mark.parametrize("p", [0, 1, 2, 5])
@pytest.mark.parametrize("l", [0, 1, 6, 12])
def test_laguerre_matches_scipy(p, l):
    """Recurrence agrees with scipy's generalized Laguerre polynomial."""
    x = np.linspace(0.0, 20.0, 41)
    np.testing.assert_allclose(assoc_laguerre(p, l, x), eval_genlaguerre(p, l, x), rtol=1e-10, atol=1e-10)


def test_laguerre_scalar_and_errors():
    assert assoc_laguerre(1, 2, 0.5) == pytest.approx(2.5)
    with pytest.raises(DomainError):
        assoc_laguerre(-1, 0, 1.0)
    with pytest.raises(DomainError):
        assoc_laguerre(1, -1, 1.0)
