"""
Group delay module.
Transverse-wavevector expectation values, axial group velocity,
accumulated delay curves and the superposition delay law.

The analytic path writes the field as E = (s r)^l exp(-g r^2) F(f r^2),
F = 1F1(l/2; l+1; .), and assembles the full transverse Laplacian from
five terms:

    -4g(l+1) F
    -4gf l/(l+1) r^2 F(l/2+1; l+2)
    +2l f F(l/2+1; l+2)
    +f^2 l/(l+1) r^2 F(l/2+2; l+3)
    +4g^2 r^2 F

The azimuthal -l^2/r^2 part is already contained in these terms. Setting
f = 0 gives the pure LG_0^l mode.
"""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.integrate import cumulative_trapezoid, simpson, trapezoid

from .beam import BeamParams, RadialField, SuperpositionState, beam_radius, max_intensity_radius
from .errors import ConsistencyError, ConvergenceError, DomainError, MissingModeError, RangeError, ResolutionError
from .hologram import SLM_PITCH
from .quadrature import chirp_edges, panel_nodes, uniform_edges
from .specfun import kummer_1f1

logger = logging.getLogger(__name__)

RESIDUE_TOL = 1e-6
OSCILLATION_ZONE = 6.0
TAIL_WIDTH_FRACTION = 1.0 / 8.0
CORE_WIDTH_FRACTION = 1.0 / 16.0
NUMERIC_PHASE_STEP = 0.25 * math.pi
NODE_CHUNK = 200_000


class K2Method(str, Enum):
    ANALYTIC = "analytic-terms"
    NUMERIC = "numeric-laplacian"


class FieldFamily(str, Enum):
    HYGG = "hygg"
    LG = "lg"


@dataclass(frozen=True)
class DiffTerms:
    """Gaussian and hypergeometric exponents g, f (1/m^2) at distance z."""

    g: complex
    f: complex

    @classmethod
    def at(cls, params: BeamParams, z: float) -> "DiffTerms":
        if not z > 0:
            raise DomainError(f"DiffTerms need z > 0, got {z}")
        k, zr = params.k0, params.z_r
        denom = z**2 + zr**2
        g = 0.5 * k * (zr + 1j * z) / denom
        f = 0.5 * k * zr * (z - 1j * zr) / (z * denom)
        return cls(g, f)


@dataclass(frozen=True)
class TransverseK2:
    """Expectation value of k_perp^2 (rad^2/m^2) over a disk of radius r_max."""

    value: float
    method: K2Method
    r_max: float
    z: float
    ell: Optional[int] = None
    residue: float = 0.0

    def __post_init__(self):
        if not self.value > 0:
            raise ConsistencyError(
                "transverse k^2 must be positive", {"value": self.value, "z": self.z, "l": self.ell}
            )


@dataclass(frozen=True)
class Regularization:
    """
    Evaluation-domain and z-grid choices behind a delay curve.

    r_max(z) = r_max_factor * max(w(z), r1(z)) + z * wavelength / pixel_pitch,
    capped by ``aperture`` when set. The second term is the diffraction cone
    of one SLM pixel, out to the first zero of its envelope. pixel_pitch=None
    keeps the disk at the beam scale.
    """

    z_min: float = 1e-3
    r_max_factor: float = 4.0
    aperture: Optional[float] = None
    pixel_pitch: Optional[float] = SLM_PITCH
    log_end: float = 0.1
    per_decade: int = 48
    z_step: float = 0.02
    richardson_tol: float = 0.01

    def __post_init__(self):
        if not self.z_min > 0:
            raise DomainError(f"z_min must be positive, got {self.z_min}")
        if not self.r_max_factor > 0:
            raise DomainError(f"r_max_factor must be positive, got {self.r_max_factor}")
        if self.aperture is not None and not self.aperture > 0:
            raise DomainError(f"aperture radius must be positive, got {self.aperture}")
        if self.pixel_pitch is not None and not self.pixel_pitch > 0:
            raise DomainError(f"pixel pitch must be positive, got {self.pixel_pitch}")

    def r_max(self, params: BeamParams, ell: int, z: float) -> float:
        r = self.r_max_factor * max(beam_radius(params, z), max_intensity_radius(params, ell, z))
        if self.pixel_pitch is not None:
            r += z * params.wavelength / self.pixel_pitch
        if self.aperture is not None:
            r = min(r, self.aperture)
        return r

    def z_grid(self, z_end: float) -> np.ndarray:
        """Log-spaced from z_min to log_end, then linear steps to z_end."""
        if not z_end > self.z_min:
            raise DomainError(f"z_end must exceed z_min ({z_end} <= {self.z_min})")
        log_stop = min(self.log_end, z_end)
        decades = math.log10(log_stop / self.z_min)
        n_log = max(2, int(math.ceil(decades * self.per_decade)) + 1)
        zs = np.geomspace(self.z_min, log_stop, n_log)
        if z_end > log_stop:
            n_lin = max(1, int(math.ceil((z_end - log_stop) / self.z_step)))
            zs = np.concatenate([zs, np.linspace(log_stop, z_end, n_lin + 1)[1:]])
        return zs

    def record(self) -> Dict[str, object]:
        return {
            "z_min": self.z_min,
            "r_max_factor": self.r_max_factor,
            "aperture": self.aperture,
            "pixel_pitch": self.pixel_pitch,
            "r_max_rule": "r_max_factor*max(w(z), r1(z))"
            + (" + z*wavelength/pixel_pitch" if self.pixel_pitch else "")
            + (" capped by aperture" if self.aperture else ""),
            "per_decade": self.per_decade,
            "log_end": self.log_end,
            "z_step": self.z_step,
        }


@dataclass
class DelayCurve:
    """Excess path delay tau(z) in meters relative to the Gaussian reference."""

    z_grid: np.ndarray
    tau: np.ndarray
    label: str
    k2: np.ndarray
    k0: float
    ell: Optional[int] = None
    regularization: Dict[str, object] = field(default_factory=dict)

    @property
    def tau_um(self) -> np.ndarray:
        return self.tau * 1e6

    @property
    def velocity_deficit(self) -> np.ndarray:
        """1 - v/c at every z sample (absolute, not relative to the reference)."""
        ratio = self.k2 / (2.0 * self.k0**2)
        return ratio / (1.0 + ratio)

    def at(self, z: float) -> float:
        lo, hi = float(self.z_grid[0]), float(self.z_grid[-1])
        slack = 1e-12 * max(1.0, hi)
        if z < lo - slack or z > hi + slack:
            raise RangeError(f"z={z} outside curve '{self.label}' domain [{lo}, {hi}]")
        return float(np.interp(z, self.z_grid, self.tau))


def _hyper_terms(ell: int, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    a, b = ell / 2.0, ell + 1.0
    f0 = kummer_1f1(a, b, x, scaled=True)
    if ell == 0:
        zero = np.zeros_like(f0)
        return f0, zero, zero
    return f0, kummer_1f1(a + 1.0, b + 1.0, x, scaled=True), kummer_1f1(a + 2.0, b + 2.0, x, scaled=True)


def field_and_laplacian(
    g: complex, f: complex, scale: complex, ell: int, r: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    E, its radial derivative and its transverse Laplacian for E = (s r)^l e^{-g r^2} F(f r^2).

    Returns:
        (E, dE/dr, Laplacian of E) sampled at r
    """
    n = abs(ell)
    x = f * r**2
    # F values carry the e^{-x} factor; the envelope keeps e^{-(g-f) r^2}
    f0, f1, f2 = _hyper_terms(n, x)
    env = (scale * r) ** n * np.exp(-(g - f) * r**2)

    bracket = -4.0 * g * (n + 1) * f0 + 4.0 * g**2 * r**2 * f0
    if n > 0:
        ratio = n / (n + 1.0)
        bracket += -4.0 * g * f * ratio * r**2 * f1 + 2.0 * n * f * f1 + f**2 * ratio * r**2 * f2

    # E' = s^l (r^l h' + l r^(l-1) h) with h = e^{-g r^2} F
    radial = -2.0 * g * r * f0 + (f * r * n / (n + 1.0)) * f1
    deriv = env * (radial + (n / r) * f0)
    return env * f0, deriv, env * bracket


def _analytic_edges(params: BeamParams, ell: int, z: float, r_max: float, slope: float) -> np.ndarray:
    w = beam_radius(params, z)
    r_osc = min(r_max, OSCILLATION_ZONE * w)
    core = max(max_intensity_radius(params, ell, z), w)
    inner = chirp_edges(
        0.0,
        r_osc,
        slope=slope,
        max_width=CORE_WIDTH_FRACTION * core,
        zone=f"analytic k^2 at z={z:.4g} m, l={ell}",
    )
    if r_osc >= r_max:
        return inner
    tail = uniform_edges(r_osc, r_max, TAIL_WIDTH_FRACTION * w)
    return np.concatenate([inner, tail[1:]])


def _expectation(
    g: complex, f: complex, scale: complex, ell: int, nodes: np.ndarray, weights: np.ndarray
) -> Tuple[complex, float]:
    """-int E* Lap E dA and int |E|^2 dA, accumulated over node chunks."""
    num = 0j
    power = 0.0
    for start in range(0, nodes.size, NODE_CHUNK):
        r = nodes[start:start + NODE_CHUNK]
        w = weights[start:start + NODE_CHUNK] * r
        values, _, lap = field_and_laplacian(g, f, scale, ell, r)
        num += -2.0 * np.pi * complex(np.sum(np.conj(values) * lap * w))
        power += 2.0 * np.pi * float(np.sum(np.abs(values) ** 2 * w))
    return num, power


def transverse_k2_analytic(
    params: BeamParams,
    ell: int,
    z: float,
    r_max: float,
    family: FieldFamily = FieldFamily.HYGG,
) -> TransverseK2:
    """
    <k_perp^2> = -int E* Lap E dA / int |E|^2 dA over the disk r <= r_max.

    Args:
        params: Beam parameters
        ell: Azimuthal index (only |l| matters)
        z: Propagation distance (z > 0 for HYGG; z >= 0 for LG)
        r_max: Radius of the evaluation disk, larger than r1(l, z)
        family: HYGG for the helically phased Gaussian, LG for LG_0^l

    Returns:
        TransverseK2 with the real part as value and the Green's-identity
        defect as residue

    Raises:
        ConsistencyError: the imaginary part disagrees with the boundary flux
    """
    n = abs(ell)
    r1 = max_intensity_radius(params, n, z)
    if not r_max > r1:
        raise DomainError(f"r_max={r_max:.4g} m must exceed r1={r1:.4g} m for l={ell} at z={z} m")

    k, zr = params.k0, params.z_r
    if family is FieldFamily.HYGG:
        terms = DiffTerms.at(params, z)
        g, f = terms.g, terms.f
        eps = 1.0 / params.waist**2 + 1j * k / (2.0 * z)
        scale = k / (2.0 * z * np.sqrt(eps))
    else:
        g = 0.5 * k * (zr + 1j * z) / (z**2 + zr**2)
        f = 0j
        scale = 1.0 / beam_radius(params, z)

    chirp = k / z if family is FieldFamily.HYGG else 0.0
    edges = _analytic_edges(params, n, z, r_max, chirp)
    nodes, weights = panel_nodes(edges)
    num, power = _expectation(g, f, scale, n, nodes, weights)

    e_edge, d_edge, _ = field_and_laplacian(g, f, scale, n, np.array([r_max]))
    flux = 2.0 * np.pi * r_max * complex(np.conj(e_edge[0]) * d_edge[0])
    defect = abs(num.imag + flux.imag) / abs(num.real)
    if defect > RESIDUE_TOL:
        raise ConsistencyError(
            "imaginary residue of <k_perp^2> does not match the boundary flux",
            {"l": ell, "z": z, "defect": defect},
        )
    logger.debug(
        f"k2 analytic l={ell} z={z:.4g} m: {edges.size - 1} panels, "
        f"value {num.real / power:.6g}, defect {defect:.2e}"
    )
    return TransverseK2(num.real / power, K2Method.ANALYTIC, r_max, z, ell, defect)


def _fd_weights(grid: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Five-point first- and second-derivative weights on a nonuniform grid.

    Stencils are centred where possible and shifted at the ends. Weights
    solve the Taylor (Vandermonde) system per point.
    """
    n = grid.size
    start = np.clip(np.arange(n) - 2, 0, n - 5)
    idx = start[:, None] + np.arange(5)[None, :]
    dx = grid[idx] - grid[:, None]
    powers = np.arange(5)
    factorial = np.array([1.0, 1.0, 2.0, 6.0, 24.0])
    taylor = np.transpose(dx[:, :, None] ** powers[None, None, :] / factorial, (0, 2, 1))
    rhs = np.zeros((n, 5, 2))
    rhs[:, 1, 0] = 1.0
    rhs[:, 2, 1] = 1.0
    w = np.linalg.solve(taylor, rhs)
    return idx, w[:, :, 0], w[:, :, 1]


def transverse_k2_numeric(field: RadialField, r_max: float) -> TransverseK2:
    """
    <k_perp^2> from a finite-difference Laplacian of a sampled field.

    u'' + u'/r - l^2 u/r^2 with five-point nonuniform stencils, Simpson
    quadrature over the grid points with 0 < r <= r_max.
    """
    keep = (field.grid > 0) & (field.grid <= r_max * (1 + 1e-12))
    r = field.grid[keep]
    u = field.amp[keep]
    if r.size < 9:
        raise ResolutionError("too few grid points inside r_max", {"points": int(r.size), "r_max": r_max})

    mag = np.abs(u)
    significant = mag > 1e-6 * mag.max()
    steps = np.abs(np.angle(u[1:] * np.conj(u[:-1])))
    bad = significant[:-1] & significant[1:] & (steps > NUMERIC_PHASE_STEP)
    if np.any(bad):
        where = np.flatnonzero(bad)
        raise ResolutionError(
            "field phase varies too fast for finite differences",
            {"zone": f"r in [{r[where[0]]:.4g}, {r[where[-1] + 1]:.4g}] m", "max_step_rad": float(steps[bad].max())},
        )

    idx, w1, w2 = _fd_weights(r)
    d1 = np.sum(w1 * u[idx], axis=1)
    d2 = np.sum(w2 * u[idx], axis=1)
    n = abs(field.ell)
    lap = d2 + d1 / r - n**2 * u / r**2

    num = -2.0 * np.pi * simpson(np.conj(u) * lap * r, x=r)
    power = 2.0 * np.pi * simpson(np.abs(u) ** 2 * r, x=r)
    value = float(np.real(num) / power)
    logger.debug(f"k2 numeric l={field.ell} z={field.z:.4g} m: {value:.6g} on {r.size} points")
    return TransverseK2(value, K2Method.NUMERIC, r_max, field.z, field.ell)


def group_velocity(k2: Union[TransverseK2, float], params: BeamParams) -> float:
    """v = c / (1 + <k_perp^2> / 2k0^2)."""
    value = k2.value if isinstance(k2, TransverseK2) else float(k2)
    return SPEED_OF_LIGHT / (1.0 + value / (2.0 * params.k0**2))


def k2_profile(params: BeamParams, ell: int, zs: Iterable[float], reg: Regularization) -> np.ndarray:
    """Analytic <k_perp^2> on a z grid under one regularization."""
    return np.array(
        [transverse_k2_analytic(params, ell, float(z), reg.r_max(params, ell, float(z))).value for z in zs]
    )


def _richardson_check(zs: np.ndarray, integrand: np.ndarray, tol: float, label: str) -> float:
    fine = trapezoid(integrand, zs)
    coarse_idx = np.arange(0, zs.size, 2)
    if coarse_idx[-1] != zs.size - 1:
        coarse_idx = np.append(coarse_idx, zs.size - 1)
    coarse = trapezoid(integrand[coarse_idx], zs[coarse_idx])
    estimate = abs(fine - coarse) / 3.0
    if fine != 0 and estimate > tol * abs(fine):
        fine_cum = cumulative_trapezoid(integrand, zs, initial=0.0)[coarse_idx]
        coarse_cum = cumulative_trapezoid(integrand[coarse_idx], zs[coarse_idx], initial=0.0)
        worst = int(np.argmax(np.abs(np.diff(fine_cum - coarse_cum))))
        raise ConvergenceError(
            f"delay quadrature for {label} failed its Richardson check",
            {
                "z_interval": f"[{zs[coarse_idx[worst]]:.4g}, {zs[coarse_idx[worst + 1]]:.4g}] m",
                "relative_error": estimate / abs(fine),
            },
        )
    return estimate


def _curve_from_profiles(
    params: BeamParams,
    ell: int,
    zs: np.ndarray,
    k2: np.ndarray,
    k2_ref: np.ndarray,
    reg: Regularization,
) -> DelayCurve:
    k0 = params.k0
    integrand = (k2 - k2_ref) / (2.0 * k0**2)
    label = f"l={ell}"
    estimate = _richardson_check(zs, integrand, reg.richardson_tol, label) if ell != 0 else 0.0
    tau = cumulative_trapezoid(integrand, zs, initial=0.0)
    if np.any(np.diff(tau) < 0):
        logger.warning(f"delay curve {label} decreases somewhere on [{zs[0]:.4g}, {zs[-1]:.4g}] m")
    record = reg.record()
    record["richardson_estimate_m"] = estimate
    logger.info(f"delay curve {label}: tau({zs[-1]:.3g} m) = {tau[-1] * 1e6:.3f} um")
    return DelayCurve(zs, tau, label, k2, k0, ell, record)


def accumulated_delay(params: BeamParams, ell: int, z_end: float, reg: Regularization) -> DelayCurve:
    """
    Excess path delay of mode l relative to the Gaussian from z_min to z_end.

    Args:
        params: Beam parameters
        ell: Azimuthal index (delay depends on |l| only)
        z_end: Last propagation distance in meters
        reg: Regularization record, embedded in the result

    Returns:
        DelayCurve with tau in meters
    """
    zs = reg.z_grid(z_end)
    k2_ref = k2_profile(params, 0, zs, reg)
    k2 = k2_ref if ell == 0 else k2_profile(params, abs(ell), zs, reg)
    return _curve_from_profiles(params, ell, zs, k2, k2_ref, reg)


def delay_curves(
    params: BeamParams,
    ells: Iterable[int],
    z_end: float,
    reg: Regularization,
    workers: Optional[int] = None,
) -> Dict[int, DelayCurve]:
    """
    Delay curves for several modes sharing one Gaussian reference, keyed by |l|.

    Modes are evaluated in a process pool; workers=1 runs in-process.
    """
    wanted = sorted({abs(int(ell)) for ell in ells} | {0})
    zs = reg.z_grid(z_end)
    workers = workers or min(len(wanted), os.cpu_count() or 1)

    if workers <= 1:
        profiles = [k2_profile(params, ell, zs, reg) for ell in wanted]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(k2_profile, params, ell, zs, reg) for ell in wanted]
            profiles = [fut.result() for fut in futures]

    k2_by_ell = dict(zip(wanted, profiles))
    return {
        ell: _curve_from_profiles(params, ell, zs, k2_by_ell[ell], k2_by_ell[0], reg) for ell in wanted
    }


def _lookup(mapping: Mapping[int, object], ell: int):
    if ell in mapping:
        return mapping[ell]
    if abs(ell) in mapping:
        return mapping[abs(ell)]
    raise MissingModeError(ell)


def superposition_k2(state: SuperpositionState, per_mode_k2: Mapping[int, TransverseK2]) -> TransverseK2:
    """Sum_l |c_l|^2 <k_perp^2>_l; cross terms vanish by azimuthal orthogonality."""
    parts: List[Tuple[float, TransverseK2]] = []
    for ell, weight in state.weights().items():
        parts.append((weight, _lookup(per_mode_k2, ell)))
    value = sum(w * k2.value for w, k2 in parts)
    first = parts[0][1]
    return TransverseK2(value, first.method, max(k2.r_max for _, k2 in parts), first.z, None)


def superposition_delay(state: SuperpositionState, curves: Mapping[int, DelayCurve], z: float) -> float:
    """
    Sum_l |c_l|^2 tau_l(z) in meters.

    The Gaussian term contributes zero by the relative-delay convention, so
    a missing l=0 curve is not an error.
    """
    total = 0.0
    for ell, weight in state.weights().items():
        if ell == 0 and 0 not in curves:
            continue
        total += weight * _lookup(curves, ell).at(z)
    return total


def relative_delay(
    state_a: SuperpositionState,
    state_b: SuperpositionState,
    curves: Mapping[int, DelayCurve],
    z: float,
) -> float:
    """Delay of state_b minus delay of state_a at z, in meters."""
    return superposition_delay(state_b, curves, z) - superposition_delay(state_a, curves, z)


def curve_summary(curve: DelayCurve) -> Dict[str, object]:
    """Plain-dict view used for provenance headers."""
    return {"label": curve.label, "ell": curve.ell, **curve.regularization}
