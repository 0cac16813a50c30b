"""
Beam module.
Optical context, the SLM-output field, the analytic hypergeometric-Gaussian
field and pure Laguerre-Gaussian reference modes.

All amplitudes are envelopes: the carrier exp(-ikz) is dropped and the
azimuthal factor exp(-i l theta) is carried symbolically through ``ell``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import simpson
from scipy.special import gamma

from .errors import DomainError
from .specfun import assoc_laguerre, kummer_1f1

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 4096
CORE_POINTS = 512
CORE_DECADES = 3
NORM_TOL = 1e-12


@dataclass(frozen=True)
class BeamParams:
    """Wavelength and waist (meters) with the derived wavenumber and Rayleigh range."""

    wavelength: float
    waist: float
    k0: float = field(init=False)
    z_r: float = field(init=False)

    def __post_init__(self):
        if not self.wavelength > 0:
            raise DomainError(f"wavelength must be positive, got {self.wavelength}")
        if not self.waist > 0:
            raise DomainError(f"waist must be positive, got {self.waist}")
        object.__setattr__(self, "k0", 2.0 * math.pi / self.wavelength)
        object.__setattr__(self, "z_r", math.pi * self.waist**2 / self.wavelength)

    def with_waist(self, waist: float) -> "BeamParams":
        return BeamParams(self.wavelength, waist)


@dataclass(frozen=True)
class SuperpositionState:
    """Finite superposition sum_l c_l |l> with unit norm and distinct l."""

    terms: Tuple[Tuple[int, complex], ...]

    def __post_init__(self):
        if not self.terms:
            raise DomainError("superposition state needs at least one term")
        ells = [ell for ell, _ in self.terms]
        if len(set(ells)) != len(ells):
            raise DomainError(f"mode indices must be distinct, got {ells}")
        norm = sum(abs(c) ** 2 for _, c in self.terms)
        if abs(norm - 1.0) > NORM_TOL:
            raise DomainError(f"state norm is {norm!r}, expected 1")

    @classmethod
    def from_weights(cls, modes: Sequence[int], weights: Sequence[float]) -> "SuperpositionState":
        """Build a state with real coefficients sqrt(weight)."""
        if len(modes) != len(weights):
            raise DomainError("modes and weights differ in length")
        if any(w < 0 for w in weights):
            raise DomainError(f"weights must be nonnegative, got {list(weights)}")
        total = float(sum(weights))
        if total <= 0:
            raise DomainError("weights sum to zero")
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"weights sum to {total}, expected 1")
        return cls(tuple((int(m), complex(math.sqrt(w / total))) for m, w in zip(modes, weights)))

    @classmethod
    def two_mode(cls, alpha2: float, ell: int) -> "SuperpositionState":
        """sqrt(alpha2)|0> + sqrt(1 - alpha2)|ell>; drops a term whose weight is zero."""
        if not 0.0 <= alpha2 <= 1.0:
            raise DomainError(f"alpha^2 must lie in [0, 1], got {alpha2}")
        if ell == 0:
            return cls(((0, 1.0 + 0j),))
        terms = [(0, complex(math.sqrt(alpha2))), (ell, complex(math.sqrt(1.0 - alpha2)))]
        return cls(tuple(t for t in terms if t[1] != 0))

    @property
    def ells(self) -> List[int]:
        return [ell for ell, _ in self.terms]

    def weights(self) -> Dict[int, float]:
        return {ell: abs(c) ** 2 for ell, c in self.terms}

    def coefficient(self, ell: int) -> complex:
        for m, c in self.terms:
            if m == ell:
                return c
        return 0j

    def with_phase(self, phase: float) -> "SuperpositionState":
        factor = complex(math.cos(phase), math.sin(phase))
        return SuperpositionState(tuple((m, c * factor) for m, c in self.terms))

    def label(self) -> str:
        parts = []
        for ell, c in self.terms:
            parts.append(f"{abs(c) ** 2:.4g}|{ell}>")
        return " + ".join(parts)


@dataclass
class RadialField:
    """Complex amplitude of a single-l field sampled on a radial grid at distance z."""

    z: float
    ell: int
    grid: np.ndarray
    amp: np.ndarray
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.amp = np.asarray(self.amp, dtype=complex)
        if self.grid.ndim != 1 or self.grid.size < 3:
            raise DomainError("radial grid needs at least 3 points")
        if self.grid.shape != self.amp.shape:
            raise DomainError("grid and amplitude shapes differ")
        if np.any(np.diff(self.grid) <= 0) or self.grid[0] < 0:
            raise DomainError("radial grid must be nonnegative and strictly increasing")

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amp) ** 2

    def power(self) -> float:
        """Integral of |E|^2 r dr dtheta over the grid (Simpson)."""
        return float(2.0 * np.pi * simpson(self.intensity * self.grid, x=self.grid))

    def normalized(self) -> "RadialField":
        p = self.power()
        if not p > 0:
            raise DomainError(f"cannot normalize a field with power {p}")
        return RadialField(self.z, self.ell, self.grid, self.amp / math.sqrt(p), dict(self.diagnostics))

    def interpolate(self, grid: ArrayLike) -> np.ndarray:
        """Linear interpolation of the amplitude, zero outside the sampled range."""
        grid = np.asarray(grid, dtype=float)
        re = np.interp(grid, self.grid, self.amp.real, left=0.0, right=0.0)
        im = np.interp(grid, self.grid, self.amp.imag, left=0.0, right=0.0)
        return re + 1j * im

    def relative_l2(self, other: "RadialField") -> float:
        """
        Relative L2 distance ||self - other|| / ||other|| on this field's grid.

        The other field is interpolated when the grids differ.
        """
        if other.grid.shape == self.grid.shape and np.allclose(other.grid, self.grid, rtol=0, atol=0):
            ref = other.amp
        else:
            ref = other.interpolate(self.grid)
        num = simpson(np.abs(self.amp - ref) ** 2 * self.grid, x=self.grid)
        den = simpson(np.abs(ref) ** 2 * self.grid, x=self.grid)
        return float(math.sqrt(num / den))

    def peak_radius(self) -> float:
        return float(self.grid[int(np.argmax(self.intensity))])


def beam_radius(params: BeamParams, z: float) -> float:
    """w(z) = w0 sqrt(1 + (z/z_R)^2)."""
    return params.waist * math.sqrt(1.0 + (z / params.z_r) ** 2)


def max_intensity_radius(params: BeamParams, ell: int, z: float) -> float:
    """Radius of peak intensity of LG_0^l: sqrt(|l|/2) w(z)."""
    return math.sqrt(abs(ell) / 2.0) * beam_radius(params, z)


def radial_grid(
    params: BeamParams,
    ell: int,
    z: float,
    r_max: Optional[float] = None,
    points: int = DEFAULT_GRID_POINTS,
) -> np.ndarray:
    """
    Geometric-then-linear radial grid, dense near the vortex core.

    Points are split between the sections so the spacing is continuous at the
    core radius; doubling ``points`` refines both.

    Args:
        params: Beam parameters
        ell: Azimuthal index (only |l| matters)
        z: Propagation distance in meters
        r_max: Outer radius; defaults to 6 max(w(z), r1(z))
        points: Total number of samples

    Returns:
        Strictly increasing radii starting above zero
    """
    if points < CORE_POINTS + 16:
        raise DomainError(f"radial grid needs at least {CORE_POINTS + 16} points, got {points}")
    ell = abs(ell)
    w = beam_radius(params, z)
    r1 = max_intensity_radius(params, ell, z)
    if r_max is None:
        r_max = 6.0 * max(w, r1)

    r_core = 0.25 * w
    if ell > 0:
        r_core = r1
        if z > 0:
            r_core = min(r1, 2.0 * math.sqrt((ell + 1) * z / params.k0))
    r_core = min(r_core, 0.25 * r_max)

    # split so the last geometric step matches the linear step
    spread = CORE_DECADES * math.log(10.0) * r_core / (r_max - r_core)
    n_core = min(max(CORE_POINTS, round(points * spread / (1.0 + spread))), points - 16)
    inner = np.geomspace(10.0 ** -CORE_DECADES * r_core, r_core, n_core)
    outer = np.linspace(r_core, r_max, points - n_core + 1)[1:]
    return np.concatenate([inner, outer])


def initial_field(params: BeamParams, ell: int, grid: ArrayLike) -> RadialField:
    """Gaussian amplitude exp(-r^2/w0^2) behind the helical mask, unit power, z = 0."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise DomainError("initial_field needs a non-empty grid")
    amp = math.sqrt(2.0 / math.pi) / params.waist * np.exp(-(grid / params.waist) ** 2)
    return RadialField(0.0, ell, grid, amp.astype(complex)).normalized()


def hygg_field(params: BeamParams, ell: int, z: float, grid: ArrayLike) -> RadialField:
    """
    Analytic field of a helically phased Gaussian after free propagation over z.

    E(r) = C (b/sqrt(eps))^|l| exp(-g r^2) 1F1(|l|/2; |l|+1; f r^2), with
    b = k r/2z, eps = 1/w0^2 + ik/2z, f = b^2/(eps r^2) and g = f + ik/2z.
    C carries the absolute scale of the unit-power input, so the power on the
    grid before renormalization is recorded as ``raw_power``.

    Args:
        params: Beam parameters
        ell: Azimuthal index (amplitude depends on |l| only)
        z: Propagation distance in meters, z > 0
        grid: Radial sample points

    Returns:
        Unit-power RadialField
    """
    if not z > 0:
        raise DomainError(f"hygg_field needs z > 0 (use initial_field at z = 0), got {z}")
    grid = np.asarray(grid, dtype=float)
    n = abs(ell)
    k = params.k0
    eps = 1.0 / params.waist**2 + 1j * k / (2.0 * z)
    f = k**2 / (4.0 * z**2 * eps)
    g = f + 1j * k / (2.0 * z)

    prefactor = (
        (1j ** (n + 1)) * k / z
        * math.sqrt(2.0 / math.pi) / params.waist
        * gamma(n / 2.0 + 1.0) / (2.0 * math.factorial(n))
        / eps
    )
    ratio = k * grid / (2.0 * z * np.sqrt(eps))
    # e^{-g r^2} 1F1(f r^2) = e^{-(g-f) r^2} [e^{-f r^2} 1F1(f r^2)]
    hyper = kummer_1f1(n / 2.0, n + 1.0, f * grid**2, scaled=True)
    amp = prefactor * ratio**n * np.exp(-(g - f) * grid**2) * hyper

    raw = RadialField(z, ell, grid, amp)
    raw_power = raw.power()
    logger.debug(f"hygg_field l={ell} z={z:.4g} m: raw power {raw_power:.6f}")
    result = raw.normalized()
    result.diagnostics["raw_power"] = raw_power
    return result


def lg_mode(params: BeamParams, p: int, ell: int, z: float, grid: ArrayLike) -> RadialField:
    """Laguerre-Gaussian LG_p^l at distance z, unit power, with curvature and Gouy phase."""
    if p < 0:
        raise DomainError(f"radial index must be nonnegative, got {p}")
    grid = np.asarray(grid, dtype=float)
    n = abs(ell)
    w = beam_radius(params, z)
    inv_r = z / (z**2 + params.z_r**2)
    gouy = (2 * p + n + 1) * math.atan2(z, params.z_r)
    x = 2.0 * grid**2 / w**2
    amp = (
        (1.0 / w)
        * (math.sqrt(2.0) * grid / w) ** n
        * assoc_laguerre(p, n, x)
        * np.exp(-(grid / w) ** 2)
        * np.exp(-0.5j * params.k0 * grid**2 * inv_r)
        * np.exp(1j * gouy)
    )
    return RadialField(z, ell, grid, amp).normalized()


def mode_fields(
    params: BeamParams, ells: Iterable[int], z: float, grid: ArrayLike
) -> Dict[int, RadialField]:
    """Helically phased component fields at z for several l (initial_field at z = 0)."""
    fields = {}
    for ell in ells:
        fields[ell] = initial_field(params, ell, grid) if z == 0 else hygg_field(params, ell, z, grid)
    return fields
