"""
Hologram module.
SLM phase masks for the twisted double slit, the disk-partition mode
weights, intensity rendering and beam-profile diagnostics.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike

from .beam import BeamParams, RadialField, initial_field
from .errors import DegenerateFieldError, DomainError

logger = logging.getLogger(__name__)

SLM_PITCH = 6.4e-6
DEFAULT_LEVELS = 256
TWO_PI = 2.0 * math.pi

# Gaussian-slit diameters (pixels) used with the 400 fs pairs
SLIT_PRESETS_400FS = (200, 100)


@dataclass
class PhaseMask:
    """Per-pixel phase in [0, 2pi) on a (height, width) array."""

    phase: np.ndarray
    pitch: float = SLM_PITCH
    levels: int = DEFAULT_LEVELS
    center: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if not self.pitch > 0:
            raise DomainError(f"pixel pitch must be positive, got {self.pitch}")
        if np.any(self.phase < 0) or np.any(self.phase >= TWO_PI):
            raise DomainError("mask phases must lie in [0, 2pi)")

    @property
    def height(self) -> int:
        return int(self.phase.shape[0])

    @property
    def width(self) -> int:
        return int(self.phase.shape[1])

    @property
    def origin(self) -> Tuple[int, int]:
        """Vortex center (row, col); the array center when none was given."""
        return self.center if self.center is not None else (self.height // 2, self.width // 2)


@dataclass(frozen=True)
class SlitSpec:
    """Helical index, Gaussian-slit diameter (pixels) and optional center (row, col)."""

    ell: int
    diameter: float
    center: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if self.diameter < 0:
            raise DomainError(f"slit diameter must be nonnegative, got {self.diameter}")


def _pixel_polar(dims: Tuple[int, int], center: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    rows, cols = np.indices(dims)
    dy = (rows - center[0]).astype(float)
    dx = (cols - center[1]).astype(float)
    return np.hypot(dx, dy), np.arctan2(dy, dx)


def quantize(phase: np.ndarray, levels: int) -> np.ndarray:
    """Round phases to ``levels`` equally spaced values in [0, 2pi)."""
    if levels < 2:
        raise DomainError(f"an SLM needs at least 2 phase levels, got {levels}")
    steps = np.rint(phase / TWO_PI * levels) % levels
    return steps * (TWO_PI / levels)


def make_superposition_mask(
    spec: SlitSpec,
    dims: Tuple[int, int],
    levels: int = DEFAULT_LEVELS,
    pitch: float = SLM_PITCH,
) -> PhaseMask:
    """
    Flat disk (mirror region) inside a helical phase mod(-l theta, 2pi).

    Args:
        spec: Slit description; center defaults to (height//2, width//2)
        dims: (height, width) in pixels
        levels: Number of SLM phase levels
        pitch: Pixel pitch in meters

    Returns:
        Quantized PhaseMask
    """
    height, width = dims
    if spec.diameter > min(height, width):
        raise DomainError(f"slit diameter {spec.diameter} px does not fit a {height}x{width} mask")
    center = spec.center if spec.center is not None else (height // 2, width // 2)
    radius, theta = _pixel_polar(dims, center)
    helical = np.mod(-spec.ell * theta, TWO_PI)
    phase = quantize(helical, levels)
    phase[radius <= spec.diameter / 2.0] = 0.0
    logger.debug(f"mask l={spec.ell} slit {spec.diameter} px on {height}x{width}, {levels} levels")
    return PhaseMask(phase, pitch, levels, center)


def mode_weights(spec: SlitSpec, incident_waist: float, pitch: float = SLM_PITCH) -> Tuple[float, float]:
    """
    Disk-partition weights: Gaussian power inside the slit radius R goes to |0>.

    alpha^2 = 1 - exp(-2R^2/w^2), beta^2 = 1 - alpha^2.
    """
    if not incident_waist > 0:
        raise DomainError(f"incident waist must be positive, got {incident_waist}")
    radius = spec.diameter * pitch / 2.0
    alpha2 = -math.expm1(-2.0 * radius**2 / incident_waist**2)
    return alpha2, 1.0 - alpha2


def masked_components(
    params: BeamParams, spec: SlitSpec, grid: ArrayLike, pitch: float = SLM_PITCH
) -> Tuple[RadialField, RadialField]:
    """
    Split the incident Gaussian at the slit radius.

    Returns the flat-phase disk (l=0) and the helical annulus (l) as
    un-normalized fields whose powers are the disk-partition weights.
    """
    grid = np.asarray(grid, dtype=float)
    radius = spec.diameter * pitch / 2.0
    incident = initial_field(params, 0, grid).amp
    inside = grid <= radius
    disk = RadialField(0.0, 0, grid, np.where(inside, incident, 0.0))
    annulus = RadialField(0.0, spec.ell, grid, np.where(inside, 0.0, incident))
    return disk, annulus


def phase_step_levels(mask: PhaseMask, radius_px: float, ell: int = 0) -> Tuple[int, float]:
    """
    Distinct quantized phases on a one-pixel ring around the vortex center
    and the count per 2pi cycle.

    Fewer levels per cycle means a coarser staircase and a less efficient
    helical conversion.
    """
    radius, _ = _pixel_polar((mask.height, mask.width), mask.origin)
    ring = np.abs(radius - radius_px) < 0.5
    if not ring.any():
        raise DomainError(f"no pixels at radius {radius_px} px")
    distinct = int(np.unique(mask.phase[ring]).size)
    cycles = max(abs(ell), 1)
    return distinct, distinct / cycles


def mask_to_image(mask: PhaseMask) -> np.ndarray:
    """Phase 0..2pi mapped to 8-bit gray 0..255."""
    return np.rint(mask.phase / TWO_PI * 255.0).astype(np.uint8)


def render_intensity(field: RadialField, dims: Tuple[int, int], scale: float) -> np.ndarray:
    """
    |E|^2 on a pixel grid centred at (height//2, width//2), 8-bit full scale.

    Args:
        field: Radial field
        dims: (height, width) in pixels
        scale: Meters per pixel

    Returns:
        uint8 image
    """
    if not scale > 0:
        raise DomainError(f"pixel scale must be positive, got {scale}")
    height, width = dims
    radius, _ = _pixel_polar(dims, (height // 2, width // 2))
    intensity = np.interp(radius * scale, field.grid, field.intensity, right=0.0)
    peak = intensity.max()
    if peak <= 0:
        return np.zeros(dims, dtype=np.uint8)
    return np.rint(intensity / peak * 255.0).astype(np.uint8)


def inner_diameter(field: RadialField, threshold_fraction: float) -> float:
    """
    Twice the smallest radius where intensity first reaches the threshold.

    Linear interpolation between the bracketing samples; 0 when the profile
    already meets the threshold at its first sample.
    """
    if not 0.0 < threshold_fraction < 1.0:
        raise DomainError(f"threshold fraction must lie in (0, 1), got {threshold_fraction}")
    intensity = field.intensity
    peak = intensity.max()
    if not peak > 0:
        raise DegenerateFieldError("field has zero intensity", {"l": field.ell, "z": field.z})
    level = threshold_fraction * peak
    above = np.flatnonzero(intensity >= level)
    if above.size == 0:
        raise DegenerateFieldError("intensity threshold never reached", {"fraction": threshold_fraction})
    i = int(above[0])
    if i == 0:
        return 0.0
    r0, r1 = field.grid[i - 1], field.grid[i]
    i0, i1 = intensity[i - 1], intensity[i]
    return float(2.0 * (r0 + (level - i0) * (r1 - r0) / (i1 - i0)))
