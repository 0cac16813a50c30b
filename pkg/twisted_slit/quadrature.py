"""
Gauss-Legendre panel quadrature for oscillatory radial integrands.

Panel edges follow the accumulated phase of a linear phase gradient
phi'(r) = slope*r + offset, so every panel spans a bounded number of
oscillations. Shared by the Collins propagator and the analytic
transverse-wavevector integrals.
"""

import logging
import math
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.special import roots_legendre

from .errors import ResolutionError

logger = logging.getLogger(__name__)

DEFAULT_ORDER = 16
DEFAULT_SPAN = 4.0 * math.pi
MAX_PANELS = 400_000


@lru_cache(maxsize=16)
def legendre_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]."""
    nodes, weights = roots_legendre(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def uniform_edges(r_lo: float, r_hi: float, max_width: float) -> np.ndarray:
    n = max(1, int(math.ceil((r_hi - r_lo) / max_width)))
    return np.linspace(r_lo, r_hi, n + 1)


def chirp_edges(
    r_lo: float,
    r_hi: float,
    slope: float,
    offset: float = 0.0,
    span: float = DEFAULT_SPAN,
    max_width: float = math.inf,
    max_panels: int = MAX_PANELS,
    zone: str = "",
) -> np.ndarray:
    """
    Panel edges on [r_lo, r_hi] such that each panel spans at most ``span`` radians.

    Args:
        r_lo: Inner radius
        r_hi: Outer radius
        slope: Linear coefficient of the phase gradient (rad/m^2), >= 0
        offset: Constant part of the phase gradient (rad/m), >= 0
        span: Maximum phase per panel
        max_width: Maximum panel width regardless of phase
        max_panels: Cap on the number of panels
        zone: Label used in the resolution error

    Returns:
        Strictly increasing edges including both end points

    Raises:
        ResolutionError: more than ``max_panels`` panels would be needed
    """
    slope = abs(slope)
    offset = abs(offset)

    def phase(r):
        return 0.5 * slope * r**2 + offset * r

    total = phase(r_hi) - phase(r_lo)
    n_phase = int(math.ceil(total / span)) if total > 0 else 1
    n_width = int(math.ceil((r_hi - r_lo) / max_width)) if math.isfinite(max_width) else 1
    if max(n_phase, n_width) > max_panels:
        raise ResolutionError(
            "oscillatory integrand needs more quadrature panels than allowed",
            {"zone": zone or f"r in [{r_lo:.4g}, {r_hi:.4g}] m", "panels": max(n_phase, n_width)},
        )

    targets = phase(r_lo) + np.linspace(0.0, total, n_phase + 1)
    if slope > 0:
        edges = (-offset + np.sqrt(offset**2 + 2.0 * slope * targets)) / slope
    elif offset > 0:
        edges = targets / offset
    else:
        edges = np.array([r_lo, r_hi])
    edges[0], edges[-1] = r_lo, r_hi

    if math.isfinite(max_width):
        pieces = [uniform_edges(a, b, max_width)[:-1] for a, b in zip(edges[:-1], edges[1:])]
        edges = np.concatenate(pieces + [np.array([r_hi])])
        if edges.size - 1 > max_panels:
            raise ResolutionError(
                "panel refinement exceeded the cap",
                {"zone": zone or f"r in [{r_lo:.4g}, {r_hi:.4g}] m", "panels": edges.size - 1},
            )
    return edges


def panel_nodes(edges: np.ndarray, order: int = DEFAULT_ORDER) -> Tuple[np.ndarray, np.ndarray]:
    """Flattened nodes and weights for a Gauss-Legendre rule on every panel."""
    x, w = legendre_rule(order)
    lo = edges[:-1, None]
    half = 0.5 * np.diff(edges)[:, None]
    nodes = lo + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()
