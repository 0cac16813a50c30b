"""
HOM module.
Coincidence-scan simulation, dip fitting, arrival-delay extraction and the
two arrival-time hypotheses.

Positions and delays are optical path lengths in micrometers.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.optimize import OptimizeWarning, curve_fit

from .beam import SuperpositionState
from .errors import DomainError, FitError
from .groupdelay import DelayCurve, superposition_delay
from .io import read_csv, write_csv

logger = logging.getLogger(__name__)

MIN_SCAN_POINTS = 7
MIN_CONTRAST = 0.02
DEFAULT_HALF_WIDTH_UM = 150.0
DEFAULT_STEP_UM = 5.0
REFERENCE_DURATION = 160e-15
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class PhotonPair:
    """SPDC pair: center wavelength (m), duration sigma_t (s) and HOM visibility."""

    duration: float
    wavelength: float = 795e-9
    visibility: float = 0.9

    def __post_init__(self):
        if not self.duration > 0:
            raise DomainError(f"pair duration must be positive, got {self.duration}")
        if not 0.0 < self.visibility <= 1.0:
            raise DomainError(f"visibility must lie in (0, 1], got {self.visibility}")

    @property
    def coherence_length_um(self) -> float:
        """c * sigma_t in micrometers: the Gaussian width of the dip."""
        return SPEED_OF_LIGHT * self.duration * 1e6

    def with_visibility(self, visibility: float) -> "PhotonPair":
        return PhotonPair(self.duration, self.wavelength, visibility)


PAIR_PRESETS: Dict[str, PhotonPair] = {
    "160fs": PhotonPair(160e-15),
    "400fs": PhotonPair(400e-15),
}


@dataclass
class HOMScan:
    """Coincidences against air-gap position."""

    positions: np.ndarray
    rates: np.ndarray
    noise: str = "none"
    counts: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.rates = np.asarray(self.rates, dtype=float)
        if self.positions.shape != self.rates.shape:
            raise DomainError("positions and rates differ in length")
        if np.any(np.diff(self.positions) <= 0):
            raise DomainError("scan positions must be strictly increasing")
        if np.any(self.rates < 0):
            raise DomainError("coincidence rates must be nonnegative")

    def rescaled(self, factor: float) -> "HOMScan":
        counts = None if self.counts is None else self.counts * factor
        return HOMScan(self.positions, self.rates * factor, self.noise, counts, self.seed)


@dataclass
class DipFit:
    """Fitted Gaussian dip; width is the Gaussian sigma in micrometers."""

    center: float
    visibility: float
    width: float
    baseline: float
    covariance: np.ndarray
    residual_rms: float
    center_err: float = field(init=False)
    visibility_err: float = field(init=False)
    width_err: float = field(init=False)

    def __post_init__(self):
        errs = np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))
        self.visibility_err = float(errs[1])
        self.center_err = float(errs[2])
        self.width_err = float(errs[3])


class Hypothesis(str, Enum):
    COLLAPSED = "collapsed-history"
    WAVEFUNCTION = "wavefunction-history"


@dataclass(frozen=True)
class ReferenceMeasurement:
    panel: str
    label: str
    state_a: SuperpositionState
    state_b: SuperpositionState
    z: float
    delay_um: float
    sigma_um: float


@dataclass(frozen=True)
class ReferenceComparison:
    measurement: ReferenceMeasurement
    collapsed_um: float
    wavefunction_um: float

    @property
    def discrimination(self) -> float:
        """Separation of the two hypotheses in units of the measurement uncertainty."""
        return abs(self.wavefunction_um - self.collapsed_um) / self.measurement.sigma_um

    @property
    def distinguishable(self) -> bool:
        return self.discrimination > 3.0


def dip_model(x: np.ndarray, baseline: float, visibility: float, center: float, width: float) -> np.ndarray:
    return baseline * (1.0 - visibility * np.exp(-((x - center) ** 2) / (2.0 * width**2)))


def scan_grid(
    pair: PhotonPair,
    half_width_um: Optional[float] = None,
    step_um: Optional[float] = None,
    center_um: float = 0.0,
) -> np.ndarray:
    """Symmetric scan positions; defaults scale with the pair duration from +-150 um in 5 um steps."""
    stretch = max(1.0, pair.duration / REFERENCE_DURATION)
    half = DEFAULT_HALF_WIDTH_UM * stretch if half_width_um is None else half_width_um
    step = DEFAULT_STEP_UM * stretch if step_um is None else step_um
    n = int(round(half / step))
    return center_um + step * np.arange(-n, n + 1)


def coincidence_curve(
    pair: PhotonPair,
    true_delay: float,
    grid: ArrayLike,
    counts_per_point: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    seed: Optional[int] = None,
) -> HOMScan:
    """
    rate(x) = R0 [1 - V exp(-(x - delay)^2 / 2(c sigma_t)^2)], optionally Poisson sampled.

    Args:
        pair: Photon-pair description
        true_delay: Dip center in micrometers
        grid: Scan positions in micrometers
        counts_per_point: Baseline counts R0; None for a noiseless unit-baseline scan
        rng: Random generator for the Poisson draw
        seed: Seed recorded on the scan (and used when rng is None)

    Returns:
        HOMScan
    """
    grid = np.asarray(grid, dtype=float)
    width = pair.coherence_length_um
    if grid.min() > true_delay - 2.0 * width or grid.max() < true_delay + 2.0 * width:
        raise DomainError(
            f"scan [{grid.min():.1f}, {grid.max():.1f}] um does not cover the dip "
            f"{true_delay:.2f} +- {2.0 * width:.1f} um"
        )
    shape = dip_model(grid, 1.0, pair.visibility, true_delay, width)
    if not counts_per_point:
        return HOMScan(grid, shape, "none", None, seed)
    generator = rng if rng is not None else np.random.default_rng(seed)
    counts = generator.poisson(counts_per_point * shape)
    return HOMScan(grid, counts.astype(float), "poisson", counts, seed)


def _initial_guess(x: np.ndarray, y: np.ndarray) -> List[float]:
    baseline = float(np.median(y))
    i_min = int(np.argmin(y))
    depth = baseline - float(y[i_min])
    if baseline <= 0 or depth / baseline < MIN_CONTRAST:
        raise FitError("scan shows no visible dip", {"baseline": baseline, "depth": depth})
    visibility = min(max(depth / baseline, 0.05), 0.99)
    below = x[y <= baseline - 0.5 * depth]
    step = float(np.min(np.diff(x)))
    fwhm = float(below.max() - below.min()) if below.size >= 2 else 2.0 * step
    return [baseline, visibility, float(x[i_min]), max(fwhm / FWHM_PER_SIGMA, 0.5 * step)]


def _dip_jacobian(x: np.ndarray, baseline: float, visibility: float, center: float, width: float) -> np.ndarray:
    """Partial derivatives of dip_model with respect to (baseline, visibility, center, width)."""
    gauss = np.exp(-((x - center) ** 2) / (2.0 * width**2))
    depth = baseline * visibility * gauss
    return np.column_stack([
        1.0 - visibility * gauss,
        -baseline * gauss,
        -depth * (x - center) / width**2,
        -depth * (x - center) ** 2 / width**3,
    ])


def _jacobian_covariance(
    x: np.ndarray, y: np.ndarray, popt: np.ndarray, sigma: Optional[np.ndarray], absolute: bool
) -> np.ndarray:
    """(J^T J)^+ from the model Jacobian, scaled by the reduced chi^2 unless sigma is absolute."""
    weights = np.ones_like(x) if sigma is None else 1.0 / sigma
    jac = _dip_jacobian(x, *popt) * weights[:, None]
    cov = np.linalg.pinv(jac.T @ jac)
    if absolute:
        return cov
    resid = (y - dip_model(x, *popt)) * weights
    dof = max(x.size - popt.size, 1)
    return cov * float(np.sum(resid**2)) / dof


def fit_dip(scan: HOMScan) -> DipFit:
    """
    Nonlinear least squares of the Gaussian-dip model.

    Poisson scans are weighted by sqrt(counts) with absolute sigma. When the
    optimizer cannot estimate a covariance (an exact, noiseless fit), it is
    rebuilt from the model Jacobian; a zero residual gives zero errors.

    Raises:
        FitError: no visible dip, optimizer failure or unusable covariance
    """
    x, y = scan.positions, scan.rates
    if x.size < MIN_SCAN_POINTS:
        raise DomainError(f"fit_dip needs at least {MIN_SCAN_POINTS} points, got {x.size}")
    p0 = _initial_guess(x, y)

    sigma = None
    absolute = False
    if scan.counts is not None:
        sigma = np.sqrt(np.maximum(np.asarray(scan.counts, dtype=float), 1.0))
        absolute = True

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(
                dip_model, x, y, p0=p0, sigma=sigma, absolute_sigma=absolute, maxfev=20000
            )
    except (RuntimeError, ValueError) as e:
        raise FitError("HOM dip fit did not converge", {"reason": str(e), "p0": p0}) from e

    if pcov is None or not np.all(np.isfinite(pcov)):
        logger.debug("curve_fit gave no covariance; using the Jacobian estimate")
        pcov = _jacobian_covariance(x, y, popt, sigma, absolute)
    if not np.all(np.isfinite(pcov)):
        raise FitError("HOM dip fit returned an undefined covariance", {"params": popt.tolist()})

    baseline, visibility, center, width = popt
    residual = y - dip_model(x, *popt)
    fit = DipFit(
        center=float(center),
        visibility=float(visibility),
        width=float(abs(width)),
        baseline=float(baseline),
        covariance=pcov,
        residual_rms=float(np.sqrt(np.mean(residual**2))),
    )
    logger.debug(f"dip fit: center {fit.center:.4f} +- {fit.center_err:.4f} um, V {fit.visibility:.3f}")
    return fit


def arrival_delay_shift(reference: HOMScan, signal: HOMScan) -> float:
    """fit_dip(signal).center - fit_dip(reference).center in micrometers."""
    return fit_dip(signal).center - fit_dip(reference).center


def shift_with_error(reference: HOMScan, signal: HOMScan) -> Tuple[float, float]:
    """Shift and its 1-sigma uncertainty from the two fit covariances."""
    ref, sig = fit_dip(reference), fit_dip(signal)
    return sig.center - ref.center, math.hypot(sig.center_err, ref.center_err)


def predict_delay(
    hypothesis: Hypothesis,
    state: SuperpositionState,
    z: float,
    curves: Mapping[int, DelayCurve],
) -> float:
    """Arrival delay in micrometers: zero if the history is the collapsed |0>, the weighted mode delay otherwise."""
    if Hypothesis(hypothesis) is Hypothesis.COLLAPSED:
        return 0.0
    return superposition_delay(state, curves, z) * 1e6


def delay_to_fs(delay_um: float) -> float:
    return delay_um * 1e-6 / SPEED_OF_LIGHT * 1e15


def _parse_state(text: str) -> SuperpositionState:
    modes, weights = [], []
    for item in text.split(";"):
        ell, _, weight = item.partition(":")
        modes.append(int(ell))
        weights.append(float(weight))
    return SuperpositionState.from_weights(modes, weights)


def reference_measurements(path: Optional[Union[str, Path]] = None) -> List[ReferenceMeasurement]:
    """Measured HOM delays bundled with the package (or read from ``path``)."""
    if path is None:
        source = resources.files("twisted_slit").joinpath("data/reference_delays.csv")
        with resources.as_file(source) as tmp:
            _, header, rows = read_csv(tmp)
    else:
        _, header, rows = read_csv(path)
    records = [dict(zip(header, row)) for row in rows]
    return [
        ReferenceMeasurement(
            panel=rec["panel"],
            label=rec["label"],
            state_a=_parse_state(rec["state_a"]),
            state_b=_parse_state(rec["state_b"]),
            z=float(rec["z_m"]),
            delay_um=float(rec["delay_um"]),
            sigma_um=float(rec["sigma_um"]),
        )
        for rec in records
    ]


def compare_to_reference(
    curves: Mapping[int, DelayCurve],
    reference: Optional[Sequence[ReferenceMeasurement]] = None,
) -> List[ReferenceComparison]:
    """Both hypotheses' predictions for every measured configuration."""
    reference = reference_measurements() if reference is None else reference
    out = []
    for meas in reference:
        predictions = []
        for hyp in (Hypothesis.COLLAPSED, Hypothesis.WAVEFUNCTION):
            predictions.append(
                predict_delay(hyp, meas.state_b, meas.z, curves) - predict_delay(hyp, meas.state_a, meas.z, curves)
            )
        comparison = ReferenceComparison(meas, predictions[0], predictions[1])
        if not comparison.distinguishable:
            logger.warning(f"configuration '{meas.label}' separates the hypotheses by only {comparison.discrimination:.2f} sigma")
        out.append(comparison)
    return out


def monte_carlo_coverage(
    pair: PhotonPair,
    delay_um: float,
    grid: ArrayLike,
    counts_per_point: int,
    trials: int,
    seed: int,
) -> float:
    """Fraction of Poisson trials whose fitted center lies within its 1-sigma error of the truth."""
    if trials < 1:
        raise DomainError(f"need at least one trial, got {trials}")
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(trials):
        scan = coincidence_curve(pair, delay_um, grid, counts_per_point, rng=rng, seed=seed)
        fit = fit_dip(scan)
        if abs(fit.center - delay_um) <= fit.center_err:
            hits += 1
    coverage = hits / trials
    logger.info(f"Monte-Carlo coverage {coverage:.3f} over {trials} trials")
    return coverage


def write_scan_csv(path: Union[str, Path], scan: HOMScan, provenance: Optional[Mapping[str, object]] = None) -> Path:
    """position_um,rate[,counts] with a '# seed=' line for synthetic scans."""
    meta: Dict[str, object] = {}
    if scan.seed is not None:
        meta["seed"] = scan.seed
    meta["noise"] = scan.noise
    meta.update(provenance or {})
    if scan.counts is not None:
        header = ["position_um", "rate", "counts"]
        rows = zip(scan.positions, scan.rates, (int(c) for c in scan.counts))
    else:
        header = ["position_um", "rate"]
        rows = zip(scan.positions, scan.rates)
    return write_csv(path, header, rows, meta, separator="=")


def read_scan_csv(path: Union[str, Path]) -> HOMScan:
    meta, header, rows = read_csv(path)
    data = np.array([[float(v) for v in row] for row in rows])
    counts = data[:, 2].astype(np.int64) if "counts" in header else None
    seed = int(meta["seed"]) if meta.get("seed") else None
    return HOMScan(data[:, 0], data[:, 1], meta.get("noise", "none"), counts, seed)
