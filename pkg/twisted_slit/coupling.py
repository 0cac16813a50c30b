"""
Coupling module.
Projection of the incoming field onto the single-mode fiber's field of
view, coupling efficiency, mode distinguishability and the collapse rule.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import simpson

from .beam import BeamParams, RadialField, SuperpositionState, lg_mode
from .errors import ConsistencyError, DomainError

logger = logging.getLogger(__name__)

COLLIMATOR_APERTURE = 1.5e-3
AZIMUTH_SAMPLES = 64
ORTHOGONALITY_TOL = 1e-10
PLANE_TOL = 1e-9
POWER_TOL = 1e-6


@dataclass
class FOVField:
    """Time-reversed fiber mode A*(r) at the coupling lens."""

    profile: RadialField

    def __post_init__(self):
        if abs(self.profile.power() - 1.0) > POWER_TOL:
            raise DomainError(f"FOV profile must have unit power, got {self.profile.power():.8f}")

    @property
    def plane(self) -> float:
        return self.profile.z


@dataclass
class IncomingField:
    """Two-mode state with its component profiles B (l=0) and C (l) at the lens plane."""

    state: SuperpositionState
    profiles: Dict[int, RadialField]

    def __post_init__(self):
        for ell in self.state.ells:
            if ell not in self.profiles:
                raise DomainError(f"no profile for component l={ell}")

    @property
    def alpha(self) -> complex:
        return self.state.coefficient(0)


@dataclass(frozen=True)
class CollapseResult:
    post_state: SuperpositionState
    efficiency: float
    collapse_epoch: float


def gaussian_fov(params: BeamParams, waist: float, z_lens: float, grid: ArrayLike) -> FOVField:
    """FOV wavefunction for a fiber mode imaged to a Gaussian of the given waist at the lens."""
    mode = lg_mode(params.with_waist(waist), 0, 0, 0.0, grid)
    return FOVField(RadialField(z_lens, 0, mode.grid, np.conj(mode.amp)))


def apply_aperture(field: RadialField, radius: float) -> RadialField:
    """Hard circular stop: zero amplitude beyond ``radius``."""
    if not radius > 0:
        raise DomainError(f"aperture radius must be positive, got {radius}")
    amp = np.where(field.grid <= radius, field.amp, 0.0)
    return RadialField(field.z, field.ell, field.grid, amp, dict(field.diagnostics))


def azimuthal_overlap(ell: int, samples: int = AZIMUTH_SAMPLES) -> complex:
    """Mean of exp(-i l theta) over uniform azimuths; 1 for l=0, 0 otherwise."""
    theta = 2.0 * np.pi * np.arange(samples) / samples
    return complex(np.mean(np.exp(-1j * ell * theta)))


def _overlap(component: RadialField, fov: FOVField) -> complex:
    """2 pi <e^{-i l theta}> int B(r) A*(r) r dr on the component's grid."""
    target = fov.profile.interpolate(component.grid)
    radial = simpson(component.amp * target * component.grid, x=component.grid)
    return 2.0 * np.pi * azimuthal_overlap(component.ell) * radial


def _check_planes(incoming: IncomingField, fov: FOVField) -> None:
    for ell, profile in incoming.profiles.items():
        if abs(profile.z - fov.plane) > PLANE_TOL * max(1.0, abs(fov.plane)):
            raise DomainError(
                f"component l={ell} sampled at z={profile.z} m but the FOV sits at z={fov.plane} m"
            )


def component_overlaps(
    incoming: IncomingField, fov: FOVField, aperture: Optional[float] = None
) -> Dict[int, complex]:
    """
    Overlap of every component with the FOV, asserting the helical ones vanish.

    Raises:
        ConsistencyError: a helical component has a nonzero azimuthal projection
    """
    _check_planes(incoming, fov)
    overlaps = {}
    for ell, profile in incoming.profiles.items():
        if abs(profile.power() - 1.0) > POWER_TOL:
            raise DomainError(f"component l={ell} must have unit power, got {profile.power():.8f}")
        if aperture is not None:
            profile = apply_aperture(profile, aperture)
        overlaps[ell] = _overlap(profile, fov)
        if ell != 0 and abs(overlaps[ell]) > ORTHOGONALITY_TOL:
            raise ConsistencyError(
                "helical component projects onto the Gaussian FOV",
                {"l": ell, "overlap": abs(overlaps[ell])},
            )
    return overlaps


def coupling_efficiency(
    incoming: IncomingField,
    fov: FOVField,
    aperture: Optional[float] = None,
    leakage: float = 0.0,
) -> float:
    """
    eta = |alpha|^2 |int int B A* r dr dtheta|^2.

    Args:
        incoming: State with component profiles at the lens plane
        fov: FOV wavefunction at the same plane
        aperture: Optional hard stop radius applied to the components
        leakage: Fraction of the helical path left unconverted; it rides
            with the Gaussian component

    Returns:
        Coupling probability in [0, 1]
    """
    if not 0.0 <= leakage < 1.0:
        raise DomainError(f"leakage must lie in [0, 1), got {leakage}")
    overlaps = component_overlaps(incoming, fov, aperture)
    weights = incoming.state.weights()
    gaussian_weight = weights.get(0, 0.0) + leakage * (1.0 - weights.get(0, 0.0))
    eta = gaussian_weight * abs(overlaps.get(0, 0j)) ** 2
    logger.debug(f"coupling efficiency {eta:.6f} (alpha^2={weights.get(0, 0.0):.4f}, leakage={leakage})")
    return float(min(max(eta, 0.0), 1.0))


def distinguishability(n_gauss: float, n_lg: float) -> float:
    """|N_G - N_LG| / (N_G + N_LG)."""
    if n_gauss < 0 or n_lg < 0:
        raise DomainError(f"counts must be nonnegative, got ({n_gauss}, {n_lg})")
    total = n_gauss + n_lg
    if total == 0:
        raise DomainError("distinguishability needs at least one count")
    return abs(n_gauss - n_lg) / total


def simulate_counts(
    gaussian: RadialField,
    helical: RadialField,
    fov: FOVField,
    photons: int,
    rng: np.random.Generator,
    leakage: float = 0.0,
    aperture: Optional[float] = COLLIMATOR_APERTURE / 2.0,
) -> Tuple[int, int]:
    """
    Poisson counts behind the fiber for the Gaussian path and the helical path.

    Each path is sent alone; the helical path couples through its (vanishing)
    projection plus the unconverted leakage riding on the Gaussian profile.
    """
    gauss_in = IncomingField(SuperpositionState(((0, 1.0 + 0j),)), {0: gaussian})
    helix_in = IncomingField(SuperpositionState(((helical.ell, 1.0 + 0j),)), {helical.ell: helical})
    eta_g = abs(component_overlaps(gauss_in, fov, aperture)[0]) ** 2
    eta_c = abs(component_overlaps(helix_in, fov, aperture)[helical.ell]) ** 2
    eta_lg = eta_c + leakage * eta_g
    n_g = int(rng.poisson(photons * eta_g))
    n_lg = int(rng.poisson(photons * eta_lg))
    logger.debug(f"simulated counts l={helical.ell}: N_G={n_g}, N_LG={n_lg}")
    return n_g, n_lg


def collapse_state(
    state: SuperpositionState,
    d: float,
    incoming: Optional[IncomingField] = None,
    fov: Optional[FOVField] = None,
    z_lens: Optional[float] = None,
) -> CollapseResult:
    """
    sqrt(D)|0> + sqrt(1-D)|l> after the Gaussian-mode projection.

    Without component profiles the efficiency is the ideal bound |alpha|^2.
    """
    ells = sorted(state.ells, key=abs)
    if len(ells) != 2 or ells[0] != 0 or ells[1] == 0:
        raise DomainError(f"collapse needs exactly the modes {{0, l}}, got {state.ells}")
    if not 0.0 <= d <= 1.0:
        raise DomainError(f"distinguishability must lie in [0, 1], got {d}")

    ell = ells[1]
    post = SuperpositionState.two_mode(d, ell)
    if incoming is not None and fov is not None:
        eta = coupling_efficiency(incoming, fov)
        epoch = fov.plane
    else:
        eta = abs(state.coefficient(0)) ** 2
        epoch = math.nan
    if z_lens is not None:
        epoch = z_lens
    return CollapseResult(post, eta, epoch)
