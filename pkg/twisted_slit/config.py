"""
Configuration for the twisted double-slit simulator.

Two layers:
- Settings: runtime knobs (logging, workers, output directory) from code
  defaults, a .env file and TWISTED_SLIT_* environment variables.
- RunConfig: the experiment description, parsed from a TOML document with
  [beam], [state], [distances], [regularization], [hom], [coupling],
  [output] and [grid] sections.

Numbers in the run configuration are read in the unit noted per key (nm for
wavelength, mm for waists and apertures, m for distances, um for scan
positions). Any value may instead be a string with an explicit unit, such
as "795 nm" or "1.5 mm". Models hold SI values.
"""

import logging
import os
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, field_validator, model_validator

from .beam import BeamParams, SuperpositionState
from .errors import ConfigError
from .groupdelay import Regularization
from .hologram import SlitSpec, mode_weights
from .hom import PAIR_PRESETS, PhotonPair

logger = logging.getLogger(__name__)

ENV_PREFIX = "TWISTED_SLIT_"

UNIT_SCALE = {
    "nm": 1e-9,
    "um": 1e-6,
    "µm": 1e-6,
    "μm": 1e-6,
    "mm": 1e-3,
    "cm": 1e-2,
    "m": 1.0,
    "fs": 1e-15,
    "ps": 1e-12,
    "s": 1.0,
}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s\d]+)?\s*$")


class Settings:
    """Runtime settings; environment variables override the defaults."""

    def __init__(self):
        self.log_level = os.getenv(f"{ENV_PREFIX}LOG_LEVEL", "INFO").upper()
        self.log_config = os.getenv(f"{ENV_PREFIX}LOG_CONFIG", "config/logging.yaml")
        self.workers = int(os.getenv(f"{ENV_PREFIX}WORKERS", "0")) or None
        self.output_dir = os.getenv(f"{ENV_PREFIX}OUTPUT_DIR", "results")


def get_settings(dotenv_path: Optional[str] = None) -> Settings:
    """Load a .env file (if any) and read the current environment."""
    load_dotenv(dotenv_path, override=False)
    return Settings()


def to_si(value: Any, unit: str) -> Any:
    """Convert a number in ``unit`` or a "<number> <unit>" string to SI."""
    if value is None or isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return float(value) * UNIT_SCALE[unit]
    if isinstance(value, str):
        match = _QUANTITY.match(value)
        if not match:
            raise ValueError(f"cannot read quantity {value!r}")
        number, suffix = match.groups()
        suffix = suffix or unit
        if suffix not in UNIT_SCALE:
            raise ValueError(f"unknown unit {suffix!r} in {value!r}")
        return float(number) * UNIT_SCALE[suffix]
    return value


def _unit(unit: str):
    return BeforeValidator(lambda v: to_si(v, unit))


Nanometers = Annotated[float, _unit("nm")]
Millimeters = Annotated[float, _unit("mm")]
Meters = Annotated[float, _unit("m")]
Micrometers = Annotated[float, _unit("um")]
MeterList = Annotated[List[float], BeforeValidator(lambda v: [to_si(x, "m") for x in v] if isinstance(v, list) else v)]


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class BeamSection(Section):
    wavelength: Nanometers = Field(gt=0)
    waist: Millimeters = Field(default=1.5e-3, gt=0)

    def params(self) -> BeamParams:
        return BeamParams(self.wavelength, self.waist)


class StateSection(Section):
    modes: List[int] = Field(default_factory=lambda: [0, 10], min_length=1)
    weights: Optional[List[float]] = None
    slit_diameter: Optional[float] = Field(default=None, ge=0)
    levels: int = Field(default=256, ge=2)

    @model_validator(mode="after")
    def check_weights(self):
        if len(set(self.modes)) != len(self.modes):
            raise ValueError(f"modes must be distinct, got {self.modes}")
        if self.weights is not None and self.slit_diameter is not None:
            raise ValueError("give either weights or slit_diameter, not both")
        if self.weights is not None:
            if len(self.weights) != len(self.modes):
                raise ValueError("weights and modes differ in length")
            if any(w < 0 for w in self.weights):
                raise ValueError("weights must be nonnegative")
            if abs(sum(self.weights) - 1.0) > 1e-9:
                raise ValueError(f"weights sum to {sum(self.weights)}, expected 1")
        if self.slit_diameter is not None:
            if len(self.modes) != 2 or 0 not in self.modes:
                raise ValueError("slit_diameter needs exactly two modes including 0")
        return self

    @property
    def helical_ell(self) -> int:
        return next((m for m in self.modes if m != 0), 0)

    def to_state(self, beam: BeamSection, pitch: float) -> SuperpositionState:
        if self.slit_diameter is not None:
            alpha2, _ = mode_weights(SlitSpec(self.helical_ell, self.slit_diameter), beam.waist, pitch)
            return SuperpositionState.two_mode(alpha2, self.helical_ell)
        weights = self.weights or [1.0 / len(self.modes)] * len(self.modes)
        return SuperpositionState.from_weights(self.modes, weights)


class DistancesSection(Section):
    z: MeterList = Field(default_factory=lambda: [1.2, 2.0], min_length=1)
    z_end: Meters = Field(default=2.0, gt=0)

    @field_validator("z")
    @classmethod
    def positive(cls, v: List[float]) -> List[float]:
        if any(z <= 0 for z in v):
            raise ValueError("distances must be positive")
        return v


class RegularizationSection(Section):
    z_min: Millimeters = Field(default=1e-3, gt=0)
    r_max_factor: float = Field(default=4.0, gt=0)
    aperture: Optional[Millimeters] = Field(default=None, gt=0)
    pixel_cone: bool = True

    def to_regularization(self, pitch: float) -> Regularization:
        return Regularization(
            z_min=self.z_min,
            r_max_factor=self.r_max_factor,
            aperture=self.aperture,
            pixel_pitch=pitch if self.pixel_cone else None,
        )


class HomSection(Section):
    pair: Literal["160fs", "400fs"] = "160fs"
    visibility: float = Field(default=0.9, gt=0, le=1)
    counts_per_point: int = Field(default=1000, ge=0)
    scan_half_width: Optional[Micrometers] = Field(default=None, gt=0)
    scan_step: Optional[Micrometers] = Field(default=None, gt=0)
    trials: int = Field(default=1000, ge=1)

    @model_validator(mode="after")
    def check_scan(self):
        if self.scan_half_width is not None:
            reach = 2.0 * self.photon_pair().coherence_length_um * 1e-6
            if self.scan_half_width < reach:
                raise ValueError(
                    f"scan_half_width {self.scan_half_width * 1e6:.1f} um does not cover the {self.pair} dip "
                    f"(+-{reach * 1e6:.1f} um)"
                )
            if self.scan_step is not None and self.scan_step >= self.scan_half_width:
                raise ValueError("scan_step must be smaller than scan_half_width")
        return self

    def photon_pair(self) -> PhotonPair:
        return PAIR_PRESETS[self.pair].with_visibility(self.visibility)


class CouplingSection(Section):
    collimator_aperture: Millimeters = Field(default=1.5e-3, gt=0)
    fov_waist: Optional[Millimeters] = Field(default=None, gt=0)
    leakage: float = Field(default=0.0, ge=0, lt=1)
    plane: Meters = Field(default=2.0, gt=0)
    photons: int = Field(default=100_000, ge=1)


class OutputSection(Section):
    directory: Optional[str] = None
    seed: int = 2017


class GridSection(Section):
    points: int = Field(default=4096, ge=528)
    ell_max: int = Field(default=12, ge=0)
    pitch: Micrometers = Field(default=6.4e-6, gt=0)


class RunConfig(Section):
    """Validated run configuration with defaults filled."""

    beam: BeamSection
    state: StateSection = Field(default_factory=StateSection)
    distances: DistancesSection = Field(default_factory=DistancesSection)
    regularization: RegularizationSection = Field(default_factory=RegularizationSection)
    hom: HomSection = Field(default_factory=HomSection)
    coupling: CouplingSection = Field(default_factory=CouplingSection)
    output: OutputSection = Field(default_factory=OutputSection)
    grid: GridSection = Field(default_factory=GridSection)

    @model_validator(mode="after")
    def check_distances(self):
        z_min = self.regularization.z_min
        for z in self.distances.z:
            if z <= z_min:
                raise ValueError(f"distance {z} m does not exceed regularization.z_min ({z_min} m)")
        if self.distances.z_end < max(self.distances.z):
            raise ValueError("distances.z_end must cover every distance in distances.z")
        if self.distances.z_end <= z_min:
            raise ValueError("distances.z_end must exceed regularization.z_min")
        return self

    def params(self) -> BeamParams:
        return self.beam.params()

    def superposition(self) -> SuperpositionState:
        return self.state.to_state(self.beam, self.grid.pitch)

    def to_regularization(self) -> Regularization:
        return self.regularization.to_regularization(self.grid.pitch)

    def provenance(self) -> Dict[str, Any]:
        """Resolved values (SI units) as a flat dotted-key mapping."""
        flat: Dict[str, Any] = {}
        for section, values in self.model_dump().items():
            for key, value in values.items():
                flat[f"{section}.{key}"] = value
        return flat


def key_lines(text: str) -> Dict[str, int]:
    """Map dotted keys (and section names) to their 1-based line numbers."""
    lines: Dict[str, int] = {}
    section = ""
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        header = re.match(r"^\[\s*([A-Za-z0-9_.-]+)\s*\]$", line)
        if header:
            section = header.group(1)
            lines.setdefault(section, number)
            continue
        key = re.match(r"^([A-Za-z0-9_-]+)\s*=", line)
        if key:
            dotted = f"{section}.{key.group(1)}" if section else key.group(1)
            lines.setdefault(dotted, number)
    return lines


def _locate(loc: Tuple[Union[str, int], ...], lines: Dict[str, int]) -> Tuple[str, Optional[int]]:
    parts = [str(p) for p in loc if not isinstance(p, int)]
    key = ".".join(parts)
    while parts:
        dotted = ".".join(parts)
        if dotted in lines:
            return key, lines[dotted]
        parts.pop()
    return key, None


def parse_config(text: str) -> RunConfig:
    """
    Parse and validate a TOML run configuration.

    Raises:
        ConfigError: syntax error, unknown or missing key, or an invalid value;
            the message names the dotted key and its line
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        found = re.search(r"line (\d+)", str(e))
        raise ConfigError(f"malformed configuration: {e}", line=int(found.group(1)) if found else None) from e

    data.setdefault("beam", {})
    lines = key_lines(text)
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        key, line = _locate(tuple(first["loc"]), lines)
        if first["type"] == "missing":
            message = f"missing required key '{key}'"
        elif first["type"] == "extra_forbidden":
            message = f"unknown key '{key}'"
        else:
            message = f"invalid value for '{key or 'configuration'}': {first['msg']}"
        raise ConfigError(message, key=key or None, line=line) from e
    logger.debug(f"parsed run configuration ({len(lines)} keys)")
    return config


def load_config(path: Optional[Union[str, Path]], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Read a TOML file; without a path only [beam] defaults for 795 nm are assumed."""
    text = Path(path).read_text(encoding="utf-8") if path else '[beam]\nwavelength = 795\n'
    config = parse_config(text)
    if overrides:
        data = config.model_dump()
        for dotted, value in overrides.items():
            section, key = dotted.split(".", 1)
            data[section][key] = value
        try:
            config = RunConfig.model_validate(_to_wire(data))
        except ValidationError as e:
            raise ConfigError(f"invalid override: {e.errors()[0]['msg']}") from e
    return config


def _to_wire(data: Dict[str, Any]) -> Dict[str, Any]:
    """Re-express SI values with explicit units so they validate again unchanged."""
    units = {
        ("beam", "wavelength"): "m",
        ("beam", "waist"): "m",
        ("regularization", "z_min"): "m",
        ("regularization", "aperture"): "m",
        ("hom", "scan_half_width"): "m",
        ("hom", "scan_step"): "m",
        ("coupling", "collimator_aperture"): "m",
        ("coupling", "fov_waist"): "m",
        ("grid", "pitch"): "m",
    }
    out = {section: dict(values) for section, values in data.items()}
    for (section, key), unit in units.items():
        value = out[section].get(key)
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            out[section][key] = f"{value!r} {unit}"
    return out
