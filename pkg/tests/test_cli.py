import json
import math
import subprocess
import sys

import numpy as np
import pytest

from thz_reflection import PhaseCorrectionModel, predict_phase, read_model, read_sweeps
from thz_reflection.cli import main
from thz_reflection.dataio import read_report_csv
from thz_reflection.estimation import fit_dataset_magnitude
from thz_reflection.synth import frequency_grid
from test_synth import window_bias_cm


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def parse_kv(out):
    values = {}
    for line in out.splitlines():
        key, sep, value = line.partition(" = ")
        if sep:
            values[key] = value
    return values


def error_line(err):
    lines = err.strip().splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])


@pytest.fixture
def dense_synth(tmp_path, capsys):
    # lambda/8 spacing of the generating k
    k = 23.49 * math.pi
    step = (2 * math.pi / k) / 8
    path = tmp_path / "dense.csv"
    code, _, _ = run(
        capsys, "synth", "--out", path, "--alpha", 68.0, "--beta", 2.3, "--gamma-mag", 0.08,
        "--gamma-phase", 1.1, "--k", k, "--distances", f"30.4:{30.4 + 39 * step}:{step}",
        "--freq-start", 339, "--freq-stop", 341,
    )
    assert code == 0
    return path, k


def test_fit_mag_recovers_generator(tmp_path, capsys, dense_synth):
    path, k = dense_synth
    code, out, _ = run(capsys, "fit-mag", "--input", path, "--freq", 340, "--out", tmp_path / "m.txt")
    assert code == 0
    v = parse_kv(out)
    assert abs(float(v["alpha_db"]) - 68.0) < 0.01
    assert abs(float(v["beta"]) - 2.3) < 0.005
    assert abs(float(v["|Gamma|"]) - 0.08) < 0.005
    assert abs(float(v["angle_Gamma"].split()[0]) * math.pi - 1.1) < 0.05
    assert abs(float(v["k"].split()[0]) * math.pi / k - 1) < 1e-3
    assert float(v["rms_after_db"]) <= float(v["rms_before_db"])
    assert v["los_|Gamma|_reference"] == "0.05"


def test_fit_mag_matches_library(tmp_path, capsys, dense_synth):
    path, _ = dense_synth
    run(capsys, "fit-mag", "--input", path, "--freq", 340, "--out", tmp_path / "m.txt")
    lib = fit_dataset_magnitude(read_sweeps(path), 340.0, 30.4)
    assert read_model(tmp_path / "m.txt") == lib.model


def test_fit_mag_one_distance(tmp_path, capsys):
    run(capsys, "synth", "--out", tmp_path / "one.csv", "--distances", "30.4", "--freq-start", 339, "--freq-stop", 341)
    out = tmp_path / "m.txt"
    code, _, err = run(capsys, "fit-mag", "--input", tmp_path / "one.csv", "--freq", 340, "--out", out)
    assert code == 4
    assert error_line(err)["error"] == "insufficient_data"
    assert not out.exists()


def test_fit_mag_missing_frequency(tmp_path, capsys, dense_synth):
    path, _ = dense_synth
    code, _, err = run(capsys, "fit-mag", "--input", path, "--freq", 400, "--out", tmp_path / "m.txt")
    assert code == 3
    assert "not present" in error_line(err)["message"]


def test_fit_phase_round_trip(tmp_path, capsys):
    data = tmp_path / "phase.csv"
    run(capsys, "synth", "--out", data, "--delta-d-slope", -0.17, "--delta-d-intercept", 107.18)
    code, out, _ = run(capsys, "fit-phase", "--input", data, "--out", tmp_path / "p.txt")
    assert code == 0
    pcm = read_model(tmp_path / "p.txt")

    # oracle: generator delta_d plus the analytic windowed-fit bias, refitted
    f = frequency_grid()
    centers = np.array([340.0, 410.0, 460.0])
    generator = PhaseCorrectionModel(-0.17, 107.18)
    excess = np.array([float(generator.delta_d_cm(c)) + window_bias_cm(-0.17, f, c, 2.0) for c in centers])
    product = excess * 10 * (299.792458 / centers)
    slope, intercept = np.polyfit(centers, product, 1)
    assert abs(pcm.slope - slope) < 1e-6
    assert abs(pcm.intercept - intercept) < 1e-6
    # the bias itself is well below anything the published line resolves
    assert abs(pcm.slope + 0.17) < 1e-5
    assert abs(pcm.intercept - 107.18) < 2e-3

    table = [line.split("\t") for line in out.splitlines() if line and line[0].isdigit()]
    assert len(table) == 12
    delta_340 = np.array([float(row[2]) for row in table])
    assert np.std(delta_340) < 1e-3


def test_fit_phase_narrow_window(tmp_path, capsys):
    data = tmp_path / "phase.csv"
    run(capsys, "synth", "--out", data, "--freq-start", 335, "--freq-stop", 345)
    code, _, err = run(capsys, "fit-phase", "--input", data, "--centers", 340, "--window", 0.1,
                       "--out", tmp_path / "p.txt")
    assert code == 4
    assert error_line(err)["error"] == "insufficient_data"
    assert not (tmp_path / "p.txt").exists()


def test_fit_phase_plot_failure_removes_model(tmp_path, capsys):
    data = tmp_path / "phase.csv"
    run(capsys, "synth", "--out", data, "--delta-d-slope", -0.17, "--delta-d-intercept", 107.18)
    code, _, err = run(capsys, "fit-phase", "--input", data, "--out", tmp_path / "p.txt",
                       "--plot", tmp_path / "missing" / "p.svg")
    assert code != 0
    assert error_line(err)["error"] == "io"
    assert not (tmp_path / "p.txt").exists()


def test_predict_mag_at_reference(tmp_path, capsys):
    model = tmp_path / "m.txt"
    model.write_text(
        "format_version = 1\nmodel_type = magnitude\nalpha_db = 71.25\nbeta = 2\nd0_cm = 30.4\n"
        "sigma_db = 0\ngamma_magnitude = 0\ngamma_phase_rad = 0\nk_rad_per_cm = 70\n"
        "forward_amplitude_db = 0\n"
    )
    code, out, _ = run(capsys, "predict-mag", "--model", model, "--distance", 30.4)
    assert code == 0 and out.strip() == "71.25 dB"
    code, _, err = run(capsys, "predict-mag", "--model", model, "--distance", 20)
    assert code == 5
    assert error_line(err)["error"] == "domain"


def test_predict_phase_matches_library(tmp_path, capsys):
    model = tmp_path / "p.txt"
    model.write_text("format_version = 1\nmodel_type = phase_correction\nslope_mm2_per_ghz = -0.17\n"
                     "intercept_mm2 = 107.18\nf_min_ghz = 320\nf_max_ghz = 480\n")
    code, out, _ = run(capsys, "predict-phase", "--phase-model", model, "--freq", 340, "--distance", 52)
    assert code == 0
    value, unit = out.split()
    assert unit == "rad"
    assert value == format(predict_phase(52.0, 340.0, PhaseCorrectionModel(-0.17, 107.18)), ".12g")

    code, _, err = run(capsys, "predict-phase", "--phase-model", model, "--freq", 495, "--distance", 52)
    assert code == 5
    assert "validity" in error_line(err)["message"]


def test_report_without_ripple(tmp_path, capsys):
    data = tmp_path / "flat.csv"
    run(capsys, "synth", "--out", data, "--freq-start", 339, "--freq-stop", 341)
    model = tmp_path / "m.txt"
    model.write_text(
        "format_version = 1\nmodel_type = magnitude\nalpha_db = 70\nbeta = 2\nd0_cm = 30.4\n"
        "sigma_db = 0\ngamma_magnitude = 0\ngamma_phase_rad = 0\nk_rad_per_cm = 70\n"
        "forward_amplitude_db = 0\nfrequency_ghz = 340\n"
    )
    code, _, _ = run(capsys, "report", "--input", data, "--model", model, "--emit", "csv",
                     "--out", tmp_path / "r.csv")
    assert code == 0
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "distance_cm,measured_db,floating_db,combined_db"
    table = read_report_csv(tmp_path / "r.csv")
    assert np.array_equal(table[:, 2], table[:, 3])


def test_report_tracks_measurements(tmp_path, capsys):
    k = 23.49 * math.pi
    step = (2 * math.pi / k) / 8
    distances = f"30.4:{30.4 + 39 * step}:{step}"
    common = ("--gamma-mag", 0.06, "--gamma-phase", 1.2, "--k", k, "--distances", distances,
              "--freq-start", 339, "--freq-stop", 341)
    run(capsys, "synth", "--out", tmp_path / "noisy.csv", "--noise-db", 0.05, "--seed", 11, *common)
    run(capsys, "synth", "--out", tmp_path / "clean.csv", *common)
    run(capsys, "fit-mag", "--input", tmp_path / "noisy.csv", "--freq", 340, "--out", tmp_path / "m.txt")
    run(capsys, "report", "--input", tmp_path / "noisy.csv", "--model", tmp_path / "m.txt",
        "--out", tmp_path / "r.csv")
    table = read_report_csv(tmp_path / "r.csv")
    # the generating parameters are feasible, so the fit can be no further
    # from the data than the realized noise
    noise_rms = np.sqrt(np.mean((table[:, 1] - read_sweeps(tmp_path / "clean.csv").path_loss_db(340.0)) ** 2))
    assert np.sqrt(np.mean((table[:, 1] - table[:, 3]) ** 2)) <= noise_rms
    assert np.sqrt(np.mean((table[:, 1] - table[:, 2]) ** 2)) > 4 * noise_rms


def test_report_svg_with_csv_alongside(tmp_path, capsys, dense_synth):
    path, _ = dense_synth
    run(capsys, "fit-mag", "--input", path, "--freq", 340, "--out", tmp_path / "m.txt")
    for name in ("a", "b"):
        code, _, _ = run(capsys, "report", "--input", path, "--model", tmp_path / "m.txt", "--emit", "svg",
                         "--out", tmp_path / f"{name}.svg")
        assert code == 0
    svg = (tmp_path / "a.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    assert read_report_csv(tmp_path / "a.csv").shape == (40, 4)


def test_report_material_offset(tmp_path, capsys):
    for material, alpha in (("metal", 70.0), ("wood", 80.0)):
        run(capsys, "synth", "--out", tmp_path / f"{material}.csv", "--alpha", alpha, "--gamma-mag", 0.05,
            "--k", 73.8, "--material", material, "--freq-start", 339, "--freq-stop", 341)
        run(capsys, "fit-mag", "--input", tmp_path / f"{material}.csv", "--freq", 340,
            "--out", tmp_path / f"{material}.txt")
    code, out, _ = run(capsys, "report", "--input", tmp_path / "metal.csv", "--model", tmp_path / "metal.txt",
                       "--against", tmp_path / "wood.txt", "--out", tmp_path / "r.csv")
    assert code == 0
    assert float(parse_kv(out)["offset_vs_against_db"]) == pytest.approx(10.0, abs=1e-6)


def test_synth_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "synth", "--out", tmp_path / f"{name}.csv", "--noise-db", 0.5, "--phase-noise", 0.01,
            "--seed", 42, "--freq-start", 339, "--freq-stop", 341)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_synth_rejects_bad_gamma(tmp_path, capsys):
    code, _, err = run(capsys, "synth", "--out", tmp_path / "s.csv", "--gamma-mag", 1.2)
    assert code == 5
    assert not (tmp_path / "s.csv").exists()


def test_usage_error_is_one_json_line(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit-mag", "--freq", "340"])
    assert exc.value.code == 2
    assert error_line(capsys.readouterr().err)["error"] == "usage"


def test_console_script(tmp_path):
    out = tmp_path / "s.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "thz_reflection.cli", "synth", "--out", str(out), "--freq-start", "339",
         "--freq-stop", "341"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert len(read_sweeps(out)) == 12 * 21
