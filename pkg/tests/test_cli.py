"""
Test the command-line entry point end to end.
"""

import pytest

from twisted_slit.cli import FIG1_ELLS, fig1_ells, main
from twisted_slit.io import read_csv, read_pgm

pytestmark = pytest.mark.integration


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    """Run from an empty directory so no stray .env or logging config is picked up."""
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_mask_outputs_are_reproducible(workdir):
    """Same inputs, same bytes."""
    out = workdir / "out"
    args = ["--output-dir", str(out), "mask", "--diameters", "20,40", "--height", "64", "--width", "80"]
    assert main(args) == 0
    files = ["mask_l10_d20.pgm", "mask_l10_d40.pgm", "mask_weights.csv"]
    first = {name: (out / name).read_bytes() for name in files}

    assert main(args) == 0
    assert {name: (out / name).read_bytes() for name in files} == first

    assert read_pgm(out / "mask_l10_d20.pgm").shape == (64, 80)
    meta, header, rows = read_csv(out / "mask_weights.csv")
    assert meta["output.seed"] == "2017"
    assert header[:5] == ["ell", "diameter_px", "waist_mm", "alpha2", "beta2"]
    assert [row[1] for row in rows] == ["20", "40"]
    assert float(rows[0][3]) < float(rows[1][3])


def test_profile_command(workdir):
    out = workdir / "out"
    assert main(["--output-dir", str(out), "profile", "--ells", "6"]) == 0
    for z in ("0.5", "1.2", "2"):
        assert (out / f"profile_l6_z{z}m.pgm").exists()
    _, header, rows = read_csv(out / "profile.csv")
    assert header[0] == "ell" and len(rows) == 3
    diameters = [float(row[2]) for row in rows]
    assert diameters == sorted(diameters)
    assert diameters[0] > 0
    assert header[6] == "fce"
    assert all(float(row[6]) == 0.0 for row in rows)


def test_coupling_command(workdir):
    out = workdir / "out"
    assert main(["--output-dir", str(out), "--seed", "5", "coupling", "--ells", "10"]) == 0
    meta, header, rows = read_csv(out / "coupling.csv")
    assert meta["output.seed"] == "5"
    assert 0.0 < float(meta["eta_state"]) <= 1.0
    assert float(meta["eta_mismatch"]) == pytest.approx(float(meta["eta_mismatch_closed_form"]), abs=1e-3)
    assert header[-1] == "distinguishability"
    assert header[3] == "fce"
    assert [row[0] for row in rows] == ["10"]
    assert 0.0 <= float(rows[0][-1]) <= 1.0


def test_profile_fce_follows_leakage(workdir):
    """Only the unconverted fraction of the helical path reaches the fiber."""
    path = workdir / "run.toml"
    path.write_text("[beam]\nwavelength = 795\n\n[coupling]\nleakage = 0.01\n", encoding="utf-8")
    out = workdir / "out"
    assert main(["--config", str(path), "--output-dir", str(out), "profile", "--ells", "10"]) == 0
    _, header, rows = read_csv(out / "profile.csv")
    fce = [float(row[header.index("fce")]) for row in rows]
    assert len(fce) == 3
    assert all(0.0 < value < 0.01 for value in fce)


def test_fig1_default_modes_respect_ell_max():
    assert fig1_ells(12) == list(FIG1_ELLS)
    assert fig1_ells(4) == [0, 1, 2, 4]
    assert fig1_ells(7) == [0, 1, 2, 4, 6, 7]
    assert fig1_ells(0) == [0]


def test_unknown_config_key_exits_2(workdir, capsys):
    path = workdir / "run.toml"
    path.write_text("[beam]\nwavelength = 795\nflavour = 'strange'\n", encoding="utf-8")
    assert main(["--config", str(path), "mask", "--height", "64", "--width", "64", "--diameters", "20"]) == 2
    assert "beam.flavour" in capsys.readouterr().err


def test_missing_config_file_exits_2(workdir):
    assert main(["--config", str(workdir / "absent.toml"), "mask"]) == 2


def test_bad_arguments_exit_2(workdir):
    out = str(workdir / "out")
    assert main(["--output-dir", out, "profile", "--ells", "six"]) == 2
    assert main(["--output-dir", out, "mask", "--diameters", "200", "--height", "64", "--width", "64"]) == 2


def test_narrow_hom_scan_exits_2_before_running(workdir, capsys):
    path = workdir / "run.toml"
    path.write_text("[beam]\nwavelength = 795\n\n[hom]\nscan_half_width = 60\n", encoding="utf-8")
    out = workdir / "out"
    assert main(["--config", str(path), "--output-dir", str(out), "hom-sim"]) == 2
    assert "does not cover" in capsys.readouterr().err
    assert not out.exists()


@pytest.mark.slow
def test_fig1_command(workdir):
    out = workdir / "out"
    assert main(["--output-dir", str(out), "--workers", "1", "fig1", "--ells", "0,6,10"]) == 0
    _, header, rows = read_csv(out / "fig1_inset.csv")
    assert header[0] == "ell"
    by_ell = {row[0]: row for row in rows}
    assert float(by_ell["0"][1]) == 0.0
    assert float(by_ell["10"][2]) == pytest.approx(15.6, rel=0.3)
    assert (out / "fig1_delay.csv").exists() and (out / "fig1_velocity.csv").exists()


@pytest.mark.slow
def test_hom_sim_command(workdir):
    out = workdir / "out"
    assert main(["--output-dir", str(out), "--workers", "1", "hom-sim", "--pair", "160fs"]) == 0
    _, _, shifts = read_csv(out / "hom_shifts.csv")
    assert len(shifts) == 6
    for row in shifts:
        injected, fitted, sigma = (float(v) for v in row[2:5])
        assert abs(fitted - injected) < 5.0 * sigma + 0.1
    _, header, comparison = read_csv(out / "reference_comparison.csv")
    assert header[-1] == "distinguishable"
    assert len(comparison) == 6
    assert all(float(row[5]) == 0.0 for row in comparison)
    assert (out / "hom_0_reference.csv").exists()


@pytest.mark.slow
def test_seeded_hom_sim_is_byte_identical(workdir):
    """Two Poisson runs with one seed write the same files, each scan carrying the full run record."""
    out = workdir / "out"
    args = ["--output-dir", str(out), "--workers", "1", "--seed", "9", "hom-sim", "--pair", "160fs"]
    files = ["hom_0_reference.csv", "hom_0_signal.csv", "hom_5_signal.csv", "hom_shifts.csv",
             "reference_comparison.csv"]
    assert main(args) == 0
    first = {name: (out / name).read_bytes() for name in files}
    assert main(args) == 0
    assert {name: (out / name).read_bytes() for name in files} == first

    meta, header, _ = read_csv(out / "hom_0_reference.csv")
    assert first["hom_0_reference.csv"].startswith(b"# seed=9\n")
    assert header == ["position_um", "rate", "counts"]
    for key in ("beam.wavelength", "regularization.z_min", "regularization.pixel_pitch", "pair", "label"):
        assert key in meta
    assert meta["output.seed"] == "9"


@pytest.mark.slow
def test_delay_curve_command(workdir):
    path = workdir / "run.toml"
    path.write_text(
        "[beam]\nwavelength = 795\n\n[state]\nmodes = [0, 6]\nweights = [0.5, 0.5]\n\n"
        "[distances]\nz = [0.2]\nz_end = 0.3\n",
        encoding="utf-8",
    )
    out = workdir / "out"
    assert main(["--config", str(path), "--output-dir", str(out), "--workers", "1", "delay-curve"]) == 0
    meta, header, rows = read_csv(out / "delay_curve.csv")
    assert header == ["z_m", "tau_um_l0", "tau_um_l6", "tau_um_state"]
    assert all(float(row[1]) == 0.0 for row in rows)
    last = rows[-1]
    assert float(last[0]) == pytest.approx(0.3)
    assert float(last[3]) == pytest.approx(0.5 * float(last[2]))
    assert float(last[2]) > 0
    assert "pixel_pitch" in meta["regularization.r_max_rule"]


@pytest.mark.slow
def test_sensitivity_command(workdir):
    out = workdir / "out"
    assert main(["--output-dir", str(out), "--workers", "1", "sensitivity", "--ells", "6"]) == 0
    _, header, rows = read_csv(out / "sensitivity.csv")
    assert header[:6] == ["r_max_factor", "z_min_mm", "aperture_mm", "pixel_cone", "waist_mm", "ell"]
    assert header[-1] == "status"
    assert len(rows) == 9
    baseline = rows[0]
    assert baseline[3] == "true"
    assert baseline[-1] == "within_30pct"
    assert any(row[3] == "false" for row in rows)
