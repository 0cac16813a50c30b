"""
Propagate module.
Collins diffraction integral for radially sampled single-l fields.

The azimuthal integral is done analytically, leaving the order-l
quasi-Hankel transform

    u1(r1) = (i^(l+1) k / B) exp(-ik D r1^2 / 2B)
             * int u0(r0) exp(-ik A r0^2 / 2B) J_l(k r0 r1 / B) r0 dr0

which is evaluated with Gauss-Legendre panels sized to the local phase
gradient of the chirp and the Bessel kernel. Bessel functions come from
scipy.special.jv, accurate to near machine precision for the orders and
arguments used here (l <= 14, real arguments).
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy.interpolate import CubicSpline
from scipy.special import jv

from .beam import BeamParams, RadialField
from .errors import DomainError, ResolutionError
from .quadrature import DEFAULT_ORDER, chirp_edges, panel_nodes

logger = logging.getLogger(__name__)

DET_TOL = 1e-12
PANEL_SPAN = 2.0 * math.pi
OUTPUT_CHUNK = 256
SIGNIFICANT = 1e-6
MAX_INPUT_PHASE_STEP = 0.5 * math.pi


@dataclass(frozen=True)
class ABCDMatrix:
    """Paraxial ray-transfer matrix; b in meters, c in 1/meters."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if abs(det - 1.0) > DET_TOL:
            raise DomainError(f"ABCD determinant must be 1, got {det!r}")

    def __matmul__(self, other: "ABCDMatrix") -> "ABCDMatrix":
        return ABCDMatrix(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    @property
    def determinant(self) -> float:
        return self.a * self.d - self.b * self.c


def abcd_free_space(z: float) -> ABCDMatrix:
    """[[1, z], [0, 1]]."""
    if z < 0:
        raise DomainError(f"free-space distance must be nonnegative, got {z}")
    return ABCDMatrix(1.0, float(z), 0.0, 1.0)


def check_input_sampling(field: RadialField) -> None:
    """Reject input fields whose own phase jumps by more than pi/2 between samples."""
    mag = np.abs(field.amp)
    significant = mag > SIGNIFICANT * mag.max()
    both = significant[:-1] & significant[1:]
    steps = np.abs(np.angle(field.amp[1:] * np.conj(field.amp[:-1])))
    bad = both & (steps > MAX_INPUT_PHASE_STEP)
    if np.any(bad):
        idx = np.flatnonzero(bad)
        raise ResolutionError(
            "input field phase is undersampled",
            {
                "zone": f"r0 in [{field.grid[idx[0]]:.4g}, {field.grid[idx[-1] + 1]:.4g}] m",
                "max_step_rad": float(steps[bad].max()),
            },
        )


def collins_propagate(
    field: RadialField,
    m: ABCDMatrix,
    params: BeamParams,
    out_grid: ArrayLike,
    order: int = DEFAULT_ORDER,
    z_out: Optional[float] = None,
) -> RadialField:
    """
    Propagate a single-l radial field through an ABCD system.

    Args:
        field: Input field; its grid bounds the integration domain
        m: Ray-transfer matrix with m.b != 0
        params: Beam parameters (wavenumber)
        out_grid: Output radii
        order: Gauss-Legendre nodes per panel
        z_out: Distance tag of the result; defaults to field.z + m.b

    Returns:
        Unit-power RadialField with ``raw_power`` and panel counts in diagnostics
    """
    if m.b == 0:
        raise DomainError("collins_propagate needs m.b != 0 (imaging systems are out of scope)")
    check_input_sampling(field)

    out_grid = np.asarray(out_grid, dtype=float)
    n = abs(field.ell)
    k = params.k0
    r_lo, r_hi = float(field.grid[0]), float(field.grid[-1])

    slope = k * m.a / abs(m.b)
    offset = k * float(out_grid.max()) / abs(m.b)
    edges = chirp_edges(
        r_lo,
        r_hi,
        slope,
        offset,
        span=PANEL_SPAN,
        max_width=(r_hi - r_lo) / 64.0,
        zone=f"input r0 in [{r_lo:.4g}, {r_hi:.4g}] m for output r1 <= {out_grid.max():.4g} m",
    )
    nodes, weights = panel_nodes(edges, order)

    re_spline = CubicSpline(field.grid, field.amp.real)
    im_spline = CubicSpline(field.grid, field.amp.imag)
    u0 = re_spline(nodes) + 1j * im_spline(nodes)
    integrand = u0 * np.exp(-0.5j * k * m.a * nodes**2 / m.b) * nodes * weights

    amp = np.empty(out_grid.shape, dtype=complex)
    for start in range(0, out_grid.size, OUTPUT_CHUNK):
        r1 = out_grid[start:start + OUTPUT_CHUNK]
        kernel = jv(n, k * np.outer(r1, nodes) / m.b)
        amp[start:start + OUTPUT_CHUNK] = kernel @ integrand

    amp *= (1j ** (n + 1)) * k / m.b * np.exp(-0.5j * k * m.d * out_grid**2 / m.b)

    z_tag = field.z + m.b if z_out is None else z_out
    raw = RadialField(z_tag, field.ell, out_grid, amp)
    raw_power = raw.power()
    ratio = raw_power / field.power()
    if not 0.99 <= ratio <= 1.01:
        logger.warning(
            f"Collins output keeps {ratio:.4f} of the input power for l={field.ell} at z={z_tag:.4g} m; "
            f"output grid may be too small"
        )
    logger.debug(f"collins l={field.ell}: {edges.size - 1} panels, {nodes.size} nodes")
    result = raw.normalized()
    result.diagnostics.update(
        {"raw_power": raw_power, "power_ratio": ratio, "panels": float(edges.size - 1), "nodes": float(nodes.size)}
    )
    return result
