"""
Special functions for the hypergeometric-Gaussian field.

kummer_1f1 evaluates the confluent hypergeometric function 1F1(a; b; z) for
real a, b and complex z (scalar or array). The method is chosen per element:

- a a nonpositive integer: the Taylor series terminates and is summed exactly.
- Re(z) < 0: Kummer's transformation 1F1(a; b; z) = e^z 1F1(b-a; b; -z) moves
  the argument into the right half plane, where no regime below cancels badly.
- |z| <= 30 with at most e^4 of cancellation (|z| - Re z <= 4, or |z| <= 4):
  Taylor series, stopped when a term falls below 1e-15 of the running sum,
  capped at 10,000 terms.
- |z| <= 30 otherwise (large imaginary part): Gauss-Jacobi quadrature of the
  Euler integral, valid for b > a > 0. Parameters outside that range use the
  Taylor series instead.
- |z| > 30: the two-sided large-argument expansion, truncated at its smallest
  term. It terminates (and is exact) when a or b - a is a positive integer.
  Elements whose truncation error exceeds the tolerance are retried with
  Gauss-Jacobi quadrature.

With scaled=True every regime returns e^{-z} 1F1(a; b; z) without forming
e^{z}, so fields with Re(z) in the thousands stay finite.

assoc_laguerre evaluates generalized Laguerre polynomials by the three-term
recurrence.
"""

import logging
from typing import Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import gamma, rgamma, roots_jacobi

from .errors import ConvergenceError, DomainError

logger = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-12
TERM_TOL = 1e-15
MAX_TERMS = 10_000
BIG_Z = 30.0
CANCELLATION_MARGIN = 4.0
MAX_ASYMPTOTIC_TERMS = 200
MAX_JACOBI_NODES = 600
JACOBI_CHUNK = 20_000

ComplexResult = Union[complex, np.ndarray]


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def kummer_1f1(
    a: float, b: float, z: ArrayLike, rtol: float = DEFAULT_RTOL, scaled: bool = False
) -> ComplexResult:
    """
    Confluent hypergeometric function 1F1(a; b; z).

    Args:
        a: Real upper parameter
        b: Real lower parameter, not zero or a negative integer
        z: Complex argument, scalar or array
        rtol: Relative tolerance for the asymptotic regime
        scaled: Return e^{-z} 1F1(a; b; z), finite where 1F1 alone overflows

    Returns:
        Complex scalar for scalar input, otherwise a complex array of z's shape

    Raises:
        DomainError: b is a nonpositive integer
        ConvergenceError: a regime failed to reach its tolerance
    """
    a = float(a)
    b = float(b)
    if _is_nonpositive_integer(b):
        raise DomainError(f"1F1 undefined for b={b} (nonpositive integer)")

    z_arr = np.asarray(z, dtype=complex)
    scalar = z_arr.ndim == 0
    flat = np.atleast_1d(z_arr).ravel()
    out = np.empty(flat.shape, dtype=complex)

    if _is_nonpositive_integer(a):
        out[:] = _taylor(a, b, flat)
        if scaled:
            out *= np.exp(-flat)
    else:
        reflect = flat.real < 0
        direct = ~reflect
        if np.any(direct):
            out[direct] = _right_half_plane(a, b, flat[direct], rtol, scaled)
        if np.any(reflect):
            w = -flat[reflect]
            # e^{-z} 1F1(a; b; z) = 1F1(b-a; b; -z)
            out[reflect] = _right_half_plane(b - a, b, w, rtol)
            if not scaled:
                out[reflect] *= np.exp(flat[reflect])

    if not np.all(np.isfinite(out)):
        bad = flat[~np.isfinite(out)][0]
        raise ConvergenceError("1F1 produced a non-finite value", {"a": a, "b": b, "z": bad})

    if scalar:
        return complex(out[0])
    return out.reshape(z_arr.shape)


def _right_half_plane(a: float, b: float, w: np.ndarray, rtol: float, scaled: bool = False) -> np.ndarray:
    """Dispatch for Re(w) >= 0; ``scaled`` drops the e^w growth."""
    if _is_nonpositive_integer(a):
        values = _taylor(a, b, w)
        return values * np.exp(-w) if scaled else values

    out = np.empty(w.shape, dtype=complex)
    mag = np.abs(w)
    taylor_ok = (mag <= BIG_Z) & ((mag - w.real <= CANCELLATION_MARGIN) | (mag <= CANCELLATION_MARGIN))
    large = mag > BIG_Z
    middle = ~taylor_ok & ~large
    jacobi_valid = b > a > 0

    if np.any(taylor_ok):
        out[taylor_ok] = _taylor(a, b, w[taylor_ok])

    if np.any(middle):
        if jacobi_valid:
            out[middle] = _gauss_jacobi(a, b, w[middle])
        else:
            out[middle] = _taylor(a, b, w[middle])

    if scaled:
        small = ~large
        out[small] *= np.exp(-w[small])

    if np.any(large):
        values, rel_err = _asymptotic(a, b, w[large], scaled)
        retry = rel_err > rtol
        if np.any(retry):
            if not jacobi_valid:
                worst = w[large][retry][np.argmax(rel_err[retry])]
                raise ConvergenceError(
                    "asymptotic 1F1 expansion did not reach tolerance",
                    {"a": a, "b": b, "z": worst, "rel_err": float(rel_err[retry].max())},
                )
            values[retry] = _gauss_jacobi(a, b, w[large][retry], scaled)
        out[large] = values

    logger.debug(
        f"1F1(a={a}, b={b}): taylor={int(taylor_ok.sum())} "
        f"jacobi={int(middle.sum())} asymptotic={int(large.sum())}"
    )
    return out


def _taylor(a: float, b: float, z: np.ndarray) -> np.ndarray:
    """Power series with a relative-term stopping rule."""
    total = np.ones(z.shape, dtype=complex)
    term = np.ones(z.shape, dtype=complex)
    active = np.ones(z.shape, dtype=bool)
    for n in range(MAX_TERMS):
        term[active] *= (a + n) / (b + n) * z[active] / (n + 1)
        total[active] += term[active]
        done = np.abs(term) <= TERM_TOL * np.abs(total)
        active &= ~done
        if not active.any():
            return total
    worst = int(np.argmax(np.where(active, np.abs(term), 0.0)))
    raise ConvergenceError(
        "1F1 Taylor series hit the iteration cap",
        {"a": a, "b": b, "terms": MAX_TERMS, "z": z[worst], "last_term": abs(term[worst])},
    )


def _gauss_jacobi(a: float, b: float, z: np.ndarray, scaled: bool = False) -> np.ndarray:
    """
    Euler integral 1F1 = G(b)/(G(a)G(b-a)) * int_0^1 e^{zt} t^{a-1} (1-t)^{b-a-1} dt.

    With t = (1 + x)/2 the weight becomes the Jacobi weight (1-x)^{b-a-1} (1+x)^{a-1}.
    """
    n = int(min(MAX_JACOBI_NODES, np.ceil(np.abs(z).max()) + 40))
    nodes, weights = roots_jacobi(n, b - a - 1.0, a - 1.0)
    scale = gamma(b) * rgamma(a) * rgamma(b - a) * 2.0 ** (1.0 - b)
    t = 0.5 * (1.0 + nodes) - (1.0 if scaled else 0.0)
    out = np.empty(z.shape, dtype=complex)
    for start in range(0, z.size, JACOBI_CHUNK):
        chunk = z[start:start + JACOBI_CHUNK]
        out[start:start + JACOBI_CHUNK] = scale * (np.exp(np.outer(chunk, t)) @ weights)
    return out


def _asymptotic(a: float, b: float, z: np.ndarray, scaled: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """
    Large-|z| expansion for Re(z) >= 0, truncated at the smallest term.

    Returns the values and a per-element relative truncation estimate.
    """
    sign = np.where(z.imag >= 0, 1.0, -1.0)
    log_z = np.log(z)
    shift = z if scaled else 0.0
    exp_part = gamma(b) * rgamma(a) * np.exp(z - shift + (a - b) * log_z)
    alg_part = gamma(b) * rgamma(b - a) * np.exp(1j * np.pi * a * sign - a * log_z - shift)

    s1, min1 = _truncated_series(1.0 - a, b - a, 1.0 / z)
    s2, min2 = _truncated_series(a, a - b + 1.0, -1.0 / z)

    values = exp_part * s1 + alg_part * s2
    scale = np.maximum(np.abs(values), np.finfo(float).tiny)
    rel_err = (np.abs(exp_part) * min1 + np.abs(alg_part) * min2) / scale
    return values, rel_err


def _truncated_series(p: float, q: float, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sum (p)_s (q)_s / s! x^s until the terms stop shrinking.

    Returns the partial sums and the magnitude of the first omitted term
    (zero where the series terminated or converged).
    """
    total = np.ones(x.shape, dtype=complex)
    term = np.ones(x.shape, dtype=complex)
    last_mag = np.ones(x.shape)
    remainder = np.zeros(x.shape)
    active = np.ones(x.shape, dtype=bool)
    for s in range(MAX_ASYMPTOTIC_TERMS):
        nxt = term * (p + s) * (q + s) / (s + 1) * x
        mag = np.abs(nxt)
        growing = active & (mag > last_mag)
        remainder[growing] = last_mag[growing]
        active &= ~growing
        total[active] += nxt[active]
        term = np.where(active, nxt, term)
        last_mag = np.where(active, mag, last_mag)
        converged = active & (mag <= TERM_TOL * np.abs(total))
        active &= ~converged
        if not active.any():
            break
    remainder[active] = last_mag[active]
    return total, remainder


def assoc_laguerre(p: int, l: int, x: ArrayLike) -> Union[float, np.ndarray]:
    """
    Generalized Laguerre polynomial L_p^l(x) by upward recurrence.

    (k+1) L_{k+1} = (2k+1+l-x) L_k - (k+l) L_{k-1}
    """
    if p < 0 or l < 0:
        raise DomainError(f"assoc_laguerre needs p, l >= 0 (got p={p}, l={l})")
    x_arr = np.asarray(x, dtype=float)
    prev = np.ones_like(x_arr)
    if p == 0:
        return prev if x_arr.ndim else float(prev)
    cur = 1.0 + l - x_arr
    for k in range(1, p):
        prev, cur = cur, ((2 * k + 1 + l - x_arr) * cur - (k + l) * prev) / (k + 1)
    return cur if x_arr.ndim else float(cur)
