#!/usr/bin/env python3
"""
Command-line interface for the twisted double-slit simulator.
Runs the experiment scenarios and writes figure data as CSV and PGM.
"""

import itertools
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import click
import numpy as np
import structlog

from .beam import BeamParams, RadialField, SuperpositionState, beam_radius, hygg_field, lg_mode, max_intensity_radius, radial_grid
from .config import RunConfig, Settings, get_settings, load_config
from .coupling import (
    FOVField,
    IncomingField,
    coupling_efficiency,
    distinguishability,
    gaussian_fov,
    simulate_counts,
)
from .errors import TwistedSlitError
from .groupdelay import DelayCurve, Regularization, delay_curves, superposition_delay
from .hologram import (
    SLIT_PRESETS_400FS,
    SlitSpec,
    inner_diameter,
    make_superposition_mask,
    mask_to_image,
    mode_weights,
    phase_step_levels,
    render_intensity,
)
from .hom import (
    PAIR_PRESETS,
    Hypothesis,
    compare_to_reference,
    coincidence_curve,
    delay_to_fs,
    monte_carlo_coverage,
    predict_delay,
    reference_measurements,
    scan_grid,
    shift_with_error,
    write_scan_csv,
)
from .io import write_csv, write_pgm
from .logging_setup import setup_logging

logger = logging.getLogger(__name__)
events = structlog.get_logger("twisted_slit.cli")

# Inset values of the delay-versus-distance figure, um at (1.2 m, 2 m)
FIG1_INSET_UM = {6: (3.8, 6.0), 10: (10.0, 15.6), 12: (14.0, 21.9)}
FIG1_DISTANCES = (1.2, 2.0)
FIG1_ELLS = (0, 1, 2, 4, 6, 8, 10, 12)
PROFILE_ELLS = (6, 8, 10, 12)
PROFILE_PIXELS = 256
INNER_THRESHOLD = 0.5
SENSITIVITY_ELLS = (6, 10, 12)
SENSITIVITY_KNOBS = {
    "r_max_factor": (3.0, 4.0, 5.0, 6.0),
    "z_min": (0.1e-3, 1e-3, 10e-3),
    "aperture": (None, 3.5e-3),
    "pixel_cone": (True, False),
    "waist": (1.5e-3, 0.75e-3),
}


@dataclass
class RunContext:
    config: RunConfig
    settings: Settings
    output_dir: Path
    workers: Optional[int]

    def provenance(self, **extra: Any) -> Dict[str, Any]:
        block: Dict[str, Any] = dict(self.config.provenance())
        for key, value in extra.items():
            if isinstance(value, Mapping):
                block.update({f"{key}.{k}": v for k, v in value.items()})
            else:
                block[key] = value
        return block

    def path(self, name: str) -> Path:
        return self.output_dir / name


def _parse_ells(text: Optional[str], default: Sequence[int]) -> List[int]:
    if not text:
        return list(default)
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}") from e


def fig1_ells(ell_max: int) -> List[int]:
    """Default fig1 modes: the standard set up to ell_max, ell_max itself included."""
    return sorted({ell for ell in FIG1_ELLS if ell <= ell_max} | {0, ell_max})


def _curves(ctx: RunContext, ells: Iterable[int], z_end: float, params: Optional[BeamParams] = None,
            reg: Optional[Regularization] = None) -> Dict[int, DelayCurve]:
    params = params or ctx.config.params()
    reg = reg or ctx.config.to_regularization()
    return delay_curves(params, ells, z_end, reg, ctx.workers)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="TOML run configuration")
@click.option("--output-dir", default=None, help="Directory for CSV and PGM outputs")
@click.option("--seed", type=int, default=None, help="Seed for every random draw")
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
@click.option("--workers", type=int, default=None, help="Processes for per-mode work")
@click.pass_context
def cli(ctx, config_path, output_dir, seed, log_level, workers):
    """Twisted double-slit simulator."""
    settings = get_settings()
    setup_logging(log_level or settings.log_level, settings.log_config)

    overrides: Dict[str, Any] = {}
    if seed is not None:
        overrides["output.seed"] = seed
    if output_dir is not None:
        overrides["output.directory"] = output_dir
    config = load_config(config_path, overrides)

    out = Path(config.output.directory or settings.output_dir)
    ctx.obj = RunContext(config, settings, out, workers or settings.workers)
    events.info("run.start", command=ctx.invoked_subcommand, output_dir=str(out), seed=config.output.seed)


@cli.command("fig1")
@click.option("--ells", default=None, help="Comma-separated azimuthal indices")
@click.pass_obj
def fig1_command(ctx: RunContext, ells):
    """Delay and group-velocity curves against distance, with the inset table."""
    ell_list = _parse_ells(ells, fig1_ells(ctx.config.grid.ell_max))
    distances = sorted(set(ctx.config.distances.z) | set(FIG1_DISTANCES))
    z_end = max(ctx.config.distances.z_end, max(distances))
    curves = _curves(ctx, ell_list, z_end)
    keys = sorted(curves)
    reference = curves[0]
    meta = ctx.provenance(regularization=reference.regularization)

    rows = [[z] + [curves[k].tau_um[i] for k in keys] for i, z in enumerate(reference.z_grid)]
    write_csv(ctx.path("fig1_delay.csv"), ["z_m"] + [f"tau_um_l{k}" for k in keys], rows, meta)
    rows = [[z] + [curves[k].velocity_deficit[i] for k in keys] for i, z in enumerate(reference.z_grid)]
    write_csv(ctx.path("fig1_velocity.csv"), ["z_m"] + [f"one_minus_v_over_c_l{k}" for k in keys], rows, meta)

    inset = []
    for k in keys:
        taus = [curves[k].at(z) * 1e6 for z in FIG1_DISTANCES]
        reference_um = FIG1_INSET_UM.get(k, (None, None))
        ratio = taus[1] / taus[0] if taus[0] > 0 else None
        inset.append([k, taus[0], taus[1], reference_um[0], reference_um[1], ratio])
    write_csv(ctx.path("fig1_inset.csv"),
              ["ell", "tau_um_1.2m", "tau_um_2m", "reference_um_1.2m", "reference_um_2m", "ratio_2m_over_1.2m"],
              inset, meta)

    click.echo(f"{'l':>3} {'1.2 m (um)':>12} {'2 m (um)':>10} {'reference':>14}")
    for k, t1, t2, p1, p2, _ in inset:
        shown = f"{p1}/{p2}" if p1 is not None else "-"
        click.echo(f"{k:>3} {t1:>12.3f} {t2:>10.3f} {shown:>14}")
    events.info("run.output", files=["fig1_delay.csv", "fig1_velocity.csv", "fig1_inset.csv"])


@cli.command("delay-curve")
@click.option("--ells", default=None, help="Modes to compute instead of the configured state")
@click.pass_obj
def delay_curve_command(ctx: RunContext, ells):
    """tau(z) for each mode and for the configured superposition state."""
    state = ctx.config.superposition()
    ell_list = _parse_ells(ells, state.ells)
    curves = _curves(ctx, set(ell_list) | set(state.ells), ctx.config.distances.z_end)
    keys = sorted(curves)
    grid = curves[0].z_grid
    header = ["z_m"] + [f"tau_um_l{k}" for k in keys] + ["tau_um_state"]
    rows = []
    for i, z in enumerate(grid):
        rows.append([z] + [curves[k].tau_um[i] for k in keys] + [superposition_delay(state, curves, z) * 1e6])
    meta = ctx.provenance(state=state.label(), regularization=curves[0].regularization)
    write_csv(ctx.path("delay_curve.csv"), header, rows, meta)

    for z in ctx.config.distances.z:
        click.echo(f"{state.label()} at {z:g} m: {superposition_delay(state, curves, z) * 1e6:.3f} um")
    events.info("run.output", files=["delay_curve.csv"])


def _hom_configurations(ctx: RunContext, pair_name: str):
    """(label, state_a, state_b, z) for every simulated configuration."""
    configs = [(m.label, m.state_a, m.state_b, m.z) for m in reference_measurements()]
    if pair_name == "400fs":
        ell = ctx.config.state.helical_ell or 10
        for diameter in SLIT_PRESETS_400FS:
            alpha2, _ = mode_weights(SlitSpec(ell, diameter), ctx.config.beam.waist, ctx.config.grid.pitch)
            configs.append((f"slit {diameter} px l={ell}", SuperpositionState(((0, 1.0 + 0j),)),
                            SuperpositionState.two_mode(alpha2, ell), ctx.config.distances.z_end))
    return configs


@cli.command("hom-sim")
@click.option("--pair", "pair_name", type=click.Choice(sorted(PAIR_PRESETS)), default=None)
@click.option("--coverage/--no-coverage", default=False, help="Also run the Monte-Carlo coverage check")
@click.pass_obj
def hom_sim_command(ctx: RunContext, pair_name, coverage):
    """Synthetic HOM scans, fitted shifts and the comparison with measured delays."""
    hom = ctx.config.hom
    pair_name = pair_name or hom.pair
    pair = PAIR_PRESETS[pair_name].with_visibility(hom.visibility)
    configs = _hom_configurations(ctx, pair_name)
    ells = {abs(m) for _, a, b, _ in configs for m in a.ells + b.ells}
    z_end = max([ctx.config.distances.z_end] + [z for *_, z in configs])
    curves = _curves(ctx, ells, z_end)
    rng = np.random.default_rng(ctx.config.output.seed)
    counts = hom.counts_per_point or None
    meta = ctx.provenance(pair=pair_name, regularization=curves[0].regularization)

    shift_rows = []
    for index, (label, state_a, state_b, z) in enumerate(configs):
        delays = [predict_delay(Hypothesis.WAVEFUNCTION, s, z, curves) for s in (state_a, state_b)]
        grid = scan_grid(pair, hom.scan_half_width and hom.scan_half_width * 1e6,
                         hom.scan_step and hom.scan_step * 1e6)
        scans = [coincidence_curve(pair, d, grid, counts, rng=rng, seed=ctx.config.output.seed) for d in delays]
        for role, scan, delay in zip(("reference", "signal"), scans, delays):
            write_scan_csv(ctx.path(f"hom_{index}_{role}.csv"), scan, {**meta, "label": label, "true_delay_um": delay})
        shift, err = shift_with_error(scans[0], scans[1])
        injected = delays[1] - delays[0]
        shift_rows.append([label, z, injected, shift, err, delay_to_fs(shift)])
    write_csv(ctx.path("hom_shifts.csv"),
              ["label", "z_m", "injected_um", "fitted_shift_um", "fitted_sigma_um", "fitted_shift_fs"],
              shift_rows, meta)

    comparison = compare_to_reference(curves)
    rows = [[c.measurement.panel, c.measurement.label, c.measurement.z, c.measurement.delay_um,
             c.measurement.sigma_um, c.collapsed_um, c.wavefunction_um, c.discrimination, c.distinguishable]
            for c in comparison]
    write_csv(ctx.path("reference_comparison.csv"),
              ["panel", "label", "z_m", "measured_um", "sigma_um", "collapsed_um", "wavefunction_um",
               "separation_sigma", "distinguishable"], rows, meta)

    click.echo(f"{'configuration':<34} {'measured':>14} {'wavefunction':>13} {'collapsed':>10}")
    for c in comparison:
        m = c.measurement
        click.echo(f"{m.label:<34} {m.delay_um:>7.2f} +- {m.sigma_um:<4.2f} {c.wavefunction_um:>13.3f} {c.collapsed_um:>10.1f}")

    files = ["hom_shifts.csv", "reference_comparison.csv"]
    if coverage:
        grid = scan_grid(pair)
        fraction = monte_carlo_coverage(pair, 0.0, grid, hom.counts_per_point or 1000, hom.trials,
                                        ctx.config.output.seed)
        write_csv(ctx.path("hom_coverage.csv"), ["trials", "counts_per_point", "coverage"],
                  [[hom.trials, hom.counts_per_point or 1000, fraction]], meta)
        click.echo(f"1-sigma coverage over {hom.trials} trials: {fraction:.3f}")
        files.append("hom_coverage.csv")
    events.info("run.output", files=files)


def _profile_field(params: BeamParams, ell: int, z: float, points: int) -> RadialField:
    grid = radial_grid(params, ell, z, points=points)
    return hygg_field(params, ell, z, grid)


def _mode_fce(params: BeamParams, field: RadialField, aperture: float, leakage: float) -> float:
    """Fiber coupling efficiency of the pure |l> path, fiber mode matched to the Gaussian at the same plane."""
    gaussian = hygg_field(params, 0, field.z, field.grid)
    fov = FOVField(RadialField(field.z, 0, field.grid, np.conj(gaussian.amp)))
    state = SuperpositionState(((field.ell, 1.0 + 0j),))
    return coupling_efficiency(IncomingField(state, {field.ell: field, 0: gaussian}), fov, aperture, leakage)


@cli.command("profile")
@click.option("--ells", default=None, help="Comma-separated azimuthal indices")
@click.option("--threshold", type=float, default=INNER_THRESHOLD, help="Inner-diameter intensity fraction")
@click.pass_obj
def profile_command(ctx: RunContext, ells, threshold):
    """Transverse intensity images and the inner-diameter table."""
    params = ctx.config.params()
    ell_list = _parse_ells(ells, PROFILE_ELLS)
    distances = sorted(set(ctx.config.distances.z) | {0.5})
    coupling = ctx.config.coupling
    aperture = coupling.collimator_aperture
    rows, files = [], []
    for ell, z in itertools.product(ell_list, distances):
        field = _profile_field(params, ell, z, ctx.config.grid.points)
        extent = 3.0 * max(beam_radius(params, z), max_intensity_radius(params, ell, z))
        image = render_intensity(field, (PROFILE_PIXELS, PROFILE_PIXELS), 2.0 * extent / PROFILE_PIXELS)
        name = f"profile_l{ell}_z{z:g}m.pgm"
        write_pgm(ctx.path(name), image)
        files.append(name)
        d = inner_diameter(field, threshold)
        fce = _mode_fce(params, field, aperture / 2.0, coupling.leakage)
        rows.append([ell, z, d * 1e3, max_intensity_radius(params, ell, z) * 1e3, field.peak_radius() * 1e3,
                     d > aperture, fce, field.diagnostics.get("raw_power")])
    write_csv(ctx.path("profile.csv"),
              ["ell", "z_m", "inner_diameter_mm", "r1_mm", "peak_radius_mm", "exceeds_aperture", "fce", "raw_power"],
              rows, ctx.provenance(threshold=threshold))
    for ell, z, d, _, _, _, fce, _ in rows:
        click.echo(f"l={ell:>2} z={z:>4g} m: inner diameter {d:.3f} mm, FCE {fce:.2e}")
    events.info("run.output", files=files + ["profile.csv"])


@cli.command("mask")
@click.option("--diameters", default="100,200", help="Gaussian-slit diameters in pixels")
@click.option("--height", type=int, default=1152)
@click.option("--width", type=int, default=1920)
@click.pass_obj
def mask_command(ctx: RunContext, diameters, height, width):
    """Phase masks of the twisted double slit and their disk-partition weights."""
    state = ctx.config.state
    ell = state.helical_ell or 10
    pitch = ctx.config.grid.pitch
    waist = ctx.config.beam.waist
    rows, files = [], []
    for diameter in _parse_ells(diameters, (100,)):
        spec = SlitSpec(ell, diameter)
        mask = make_superposition_mask(spec, (height, width), state.levels, pitch)
        name = f"mask_l{ell}_d{diameter}.pgm"
        write_pgm(ctx.path(name), mask_to_image(mask))
        files.append(name)
        alpha2, beta2 = mode_weights(spec, waist, pitch)
        r1_px = max_intensity_radius(ctx.config.params(), ell, 0.0) / pitch
        ring = min(max(r1_px, diameter / 2.0 + 2.0), min(height, width) / 2.0 - 1.0)
        distinct, per_cycle = phase_step_levels(mask, ring, ell)
        rows.append([ell, diameter, waist * 1e3, alpha2, beta2, round(ring, 1), distinct, per_cycle])
    write_csv(ctx.path("mask_weights.csv"),
              ["ell", "diameter_px", "waist_mm", "alpha2", "beta2", "ring_px", "distinct_levels", "levels_per_cycle"],
              rows, ctx.provenance())
    for ell, diameter, _, alpha2, beta2, *_ in rows:
        click.echo(f"l={ell} slit {diameter} px: alpha^2={alpha2:.4f} beta^2={beta2:.4f}")
    events.info("run.output", files=files + ["mask_weights.csv"])


@cli.command("coupling")
@click.option("--ells", default=None, help="Helical modes for the distinguishability table")
@click.pass_obj
def coupling_command(ctx: RunContext, ells):
    """Coupling efficiency, waist-mismatch efficiency and distinguishability."""
    params = ctx.config.params()
    cfg = ctx.config.coupling
    plane = cfg.plane
    state = ctx.config.superposition()
    ell_list = sorted(set(_parse_ells(ells, PROFILE_ELLS)) | {abs(m) for m in state.ells if m != 0})
    grid = radial_grid(params, max(ell_list), plane, points=ctx.config.grid.points)
    gaussian = hygg_field(params, 0, plane, grid)
    fov = FOVField(RadialField(plane, 0, grid, np.conj(gaussian.amp)))
    fields = {ell: hygg_field(params, ell, plane, grid) for ell in ell_list}
    aperture = cfg.collimator_aperture / 2.0
    rng = np.random.default_rng(ctx.config.output.seed)

    profiles = {0: gaussian}
    profiles.update({m: fields[abs(m)] for m in state.ells if m != 0})
    eta = coupling_efficiency(IncomingField(state, profiles), fov, aperture, cfg.leakage)

    w_in = beam_radius(params, plane)
    w_fov = cfg.fov_waist or w_in
    incoming = lg_mode(params.with_waist(w_in), 0, 0, 0.0, grid)
    incoming = RadialField(plane, 0, grid, incoming.amp)
    mismatch = coupling_efficiency(
        IncomingField(SuperpositionState(((0, 1.0 + 0j),)), {0: incoming}),
        gaussian_fov(params, w_fov, plane, grid),
    )
    closed_form = (2.0 * w_in * w_fov / (w_in**2 + w_fov**2)) ** 2

    rows = []
    for ell in ell_list:
        n_g, n_lg = simulate_counts(gaussian, fields[ell], fov, cfg.photons, rng, cfg.leakage, aperture)
        d = distinguishability(n_g, n_lg)
        fce = _mode_fce(params, fields[ell], aperture, cfg.leakage)
        rows.append([ell, plane, inner_diameter(fields[ell], INNER_THRESHOLD) * 1e3, fce, n_g, n_lg, d])
    meta = ctx.provenance(state=state.label(), eta_state=eta, eta_mismatch=mismatch,
                          eta_mismatch_closed_form=closed_form)
    write_csv(ctx.path("coupling.csv"), ["ell", "plane_m", "inner_diameter_mm", "fce", "n_gauss", "n_lg", "distinguishability"],
              rows, meta)

    click.echo(f"coupling efficiency of {state.label()}: {eta:.4f}")
    click.echo(f"waist mismatch {w_in * 1e3:.3f} mm vs {w_fov * 1e3:.3f} mm: {mismatch:.6f} (closed form {closed_form:.6f})")
    for ell, _, d_mm, fce, n_g, n_lg, d in rows:
        click.echo(f"l={ell:>2}: inner diameter {d_mm:.3f} mm, FCE {fce:.2e}, N_G={n_g}, N_LG={n_lg}, D={d:.4f}")
    events.info("run.output", files=["coupling.csv"])


def _sensitivity_cases(full_grid: bool) -> List[Dict[str, Any]]:
    defaults = {"r_max_factor": 4.0, "z_min": 1e-3, "aperture": None, "pixel_cone": True, "waist": 1.5e-3}
    if full_grid:
        keys = list(SENSITIVITY_KNOBS)
        return [dict(zip(keys, values)) for values in itertools.product(*SENSITIVITY_KNOBS.values())]
    cases = [dict(defaults)]
    for knob, values in SENSITIVITY_KNOBS.items():
        for value in values:
            if value != defaults[knob]:
                cases.append({**defaults, knob: value})
    return cases


@cli.command("sensitivity")
@click.option("--ells", default=None, help="Comma-separated azimuthal indices")
@click.option("--full-grid/--one-at-a-time", default=False, help="Cartesian product of all knob values")
@click.pass_obj
def sensitivity_command(ctx: RunContext, ells, full_grid):
    """Delay at the inset distances as the regularization knobs vary."""
    ell_list = _parse_ells(ells, SENSITIVITY_ELLS)
    base = ctx.config.params()
    rows = []
    for case in _sensitivity_cases(full_grid):
        params = base.with_waist(case["waist"])
        reg = Regularization(z_min=case["z_min"], r_max_factor=case["r_max_factor"], aperture=case["aperture"],
                             pixel_pitch=ctx.config.grid.pitch if case["pixel_cone"] else None)
        knobs = [case["r_max_factor"], case["z_min"] * 1e3,
                 None if case["aperture"] is None else case["aperture"] * 1e3, case["pixel_cone"], case["waist"] * 1e3]
        try:
            curves = _curves(ctx, ell_list, max(FIG1_DISTANCES), params, reg)
        except TwistedSlitError as e:
            logger.warning(f"sensitivity case {case} skipped: {e}")
            rows.extend(knobs + [ell, None, None, "failed"] for ell in ell_list)
            continue
        for ell in ell_list:
            taus = [curves[ell].at(z) * 1e6 for z in FIG1_DISTANCES]
            reference = FIG1_INSET_UM.get(ell)
            within = reference is not None and all(abs(t - p) <= 0.3 * p for t, p in zip(taus, reference))
            rows.append(knobs + [ell, taus[0], taus[1], "within_30pct" if within else "outside"])
    write_csv(ctx.path("sensitivity.csv"),
              ["r_max_factor", "z_min_mm", "aperture_mm", "pixel_cone", "waist_mm", "ell", "tau_um_1.2m", "tau_um_2m", "status"],
              rows, ctx.provenance())
    for row in rows:
        click.echo(", ".join("-" if v is None else (f"{v:.3f}" if isinstance(v, float) else str(v)) for v in row))
    events.info("run.output", files=["sensitivity.csv"])


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Console entry point; maps failures onto exit codes."""
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="twisted-slit",
                          standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except TwistedSlitError as e:
        logger.error(f"{type(e).__name__}: {e}")
        click.echo(f"error: {e}", err=True)
        return e.exit_code
    except OSError as e:
        logger.error(f"I/O failure: {e}")
        click.echo(f"error: {e}", err=True)
        return 4
    events.info("run.done")
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
