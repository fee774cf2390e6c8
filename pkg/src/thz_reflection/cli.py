"""Command-line front end.

Failures print one JSON line ``{"error": <kind>, "message": <text>}`` on
stderr and exit non-zero; any output file written by the failing command is
removed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dataio, estimation, reference, synth
from .errors import ChannelModelError, DataError, DomainError
from .model import (
    MagnitudeModel,
    PhaseCorrectionModel,
    ReflectionCoefficient,
    combined_magnitude_db,
    free_space_wavenumber,
    measurement_distances_cm,
    REFERENCE_D0_CM,
)

EXIT_USAGE = 2
EXIT_IO = 6
DEFAULT_CENTERS = "340,410,460"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("usage", message)
        sys.exit(EXIT_USAGE)


def _emit_error(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": " ".join(str(message).split())}), file=sys.stderr)


def _num(x: float) -> str:
    return format(float(x), ".12g")


def _positive(name: str, value: float) -> float:
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"--{name} must be positive, got {value}")
    return value


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise DataError(f"cannot parse number list {text!r}") from None


def _distance_list(text: str | None) -> np.ndarray:
    if text is None:
        return measurement_distances_cm()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise DataError("distance range must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        _positive("distances step", step)
        n = int(round((stop - start) / step))
        return np.round(start + step * np.arange(n + 1), 10)
    return np.array(_float_list(text))


class _Outputs:
    """Tracks files written by a command so a failure can remove them."""

    def __init__(self):
        self.paths: list[Path] = []

    def add(self, path) -> Path:
        path = Path(path)
        self.paths.append(path)
        return path

    def discard(self) -> None:
        for p in self.paths:
            if p.exists():
                p.unlink()


def cmd_fit_mag(args, outputs: _Outputs) -> None:
    _positive("freq", args.freq)
    _positive("d0", args.d0)
    if args.k_prior is not None:
        _positive("k-prior", args.k_prior)
    dataset = dataio.read_sweeps(args.input)
    report = estimation.fit_dataset_magnitude(dataset, args.freq, args.d0, args.k_prior)
    dataio.write_model(report.model, outputs.add(args.out))
    m = report.model
    print(f"# fit-mag {dataset.material} at {_num(m.frequency)} GHz, d0 = {_num(m.d0)} cm")
    print(f"rms_before_db = {_num(report.rms_before)}")
    print(f"rms_after_db = {_num(report.rms_after)}")
    print(f"alpha_db = {_num(m.alpha)}")
    print(f"beta = {_num(m.beta)}")
    print(f"sigma_db = {_num(m.sigma)}")
    print(f"|Gamma| = {_num(m.gamma.magnitude)}")
    print(f"angle_Gamma = {_num(m.gamma.phase / math.pi)} pi")
    print(f"k = {_num(m.k / math.pi)} pi rad/cm")
    if report.flags:
        print(f"flags = {','.join(report.flags)}")
    los = reference.LOS_GAMMA_MAGNITUDE.get(round(m.frequency, 6))
    if los is not None:
        print(f"los_|Gamma|_reference = {_num(los)}")


def cmd_fit_phase(args, outputs: _Outputs) -> None:
    centers = _float_list(args.centers)
    if not centers:
        raise DataError("--centers is empty")
    for c in centers:
        _positive("centers", c)
    _positive("window", args.window)
    dataset = dataio.read_sweeps(args.input)
    samples = estimation.delta_d_samples(dataset, centers, args.window)
    pcm = estimation.fit_delta_d_line(samples)
    dataio.write_model(pcm, outputs.add(args.out))
    if args.plot:
        from .plotting import plot_delta_d_line

        plot_delta_d_line(outputs.add(args.plot), samples, pcm)

    by_key = {(s.frequency, s.measured_distance): s for s in samples}
    print("d_meas_cm\t" + "\t".join(f"d_fit@{_num(c)}\tdelta_d@{_num(c)}" for c in centers))
    for d in dataset.distances:
        cells = []
        for c in centers:
            s = by_key[(float(c), float(d))]
            cells += [f"{s.fitted_distance:.4f}", f"{s.delta_d:.4f}"]
        print(f"{d:.2f}\t" + "\t".join(cells))
    print(f"slope_mm2_per_ghz = {_num(pcm.slope)}")
    print(f"intercept_mm2 = {_num(pcm.intercept)}")


def cmd_predict_mag(args, outputs: _Outputs) -> None:
    model = dataio.read_model(args.model)
    if not isinstance(model, MagnitudeModel):
        raise DataError(f"{args.model} is not a magnitude model")
    print(f"{_num(combined_magnitude_db(args.distance, model))} dB")


def cmd_predict_phase(args, outputs: _Outputs) -> None:
    pcm = dataio.read_model(args.phase_model)
    if not isinstance(pcm, PhaseCorrectionModel):
        raise DataError(f"{args.phase_model} is not a phase-correction model")
    print(f"{_num(estimation.predict_phase(args.distance, args.freq, pcm))} rad")


def cmd_synth(args, outputs: _Outputs) -> None:
    frequencies = synth.frequency_grid(args.freq_start, args.freq_stop, args.freq_step)
    distances = _distance_list(args.distances)
    k = args.k if args.k is not None else free_space_wavenumber(float(np.median(frequencies)))
    model = MagnitudeModel(
        alpha=args.alpha,
        beta=args.beta,
        d0=args.d0,
        gamma=ReflectionCoefficient(args.gamma_mag, args.gamma_phase),
        k=k,
    )
    if (args.delta_d_slope is None) != (args.delta_d_intercept is None):
        raise DataError("--delta-d-slope and --delta-d-intercept go together")
    pcm = None
    if args.delta_d_slope is not None:
        pcm = PhaseCorrectionModel(args.delta_d_slope, args.delta_d_intercept)
    spec = synth.SynthSpec(
        model=model,
        distances=distances,
        frequencies=frequencies,
        noise_sigma_db=args.noise_db,
        phase_noise_rad=args.phase_noise,
        delta_d_model=pcm,
        seed=args.seed,
        material=args.material,
    )
    dataset = synth.generate(spec)
    dataio.write_sweeps(dataset, outputs.add(args.out), args.format)
    print(f"wrote {len(dataset)} records ({dataset.distances.size} distances x "
          f"{dataset.frequencies.size} frequencies) to {args.out}")


def cmd_report(args, outputs: _Outputs) -> None:
    dataset = dataio.read_sweeps(args.input)
    model = dataio.read_model(args.model)
    if not isinstance(model, MagnitudeModel):
        raise DataError(f"{args.model} is not a magnitude model")
    freq = args.freq if args.freq is not None else model.frequency
    if freq is None:
        raise DataError("model carries no frequency_ghz; pass --freq")
    d, measured, floating, combined = estimation.combined_predictions(dataset, model, freq)
    out = Path(args.out)
    if args.emit == "csv":
        dataio.write_report_csv(outputs.add(out), d, measured, floating, combined)
    else:
        from .plotting import plot_magnitude_report

        dataio.write_report_csv(outputs.add(out.with_suffix(".csv")), d, measured, floating, combined)
        title = f"{dataset.material}, {_num(freq)} GHz"
        plot_magnitude_report(outputs.add(out), d, measured, floating, combined, title)
    rms_floating = estimation.rms_residual(measured, floating)
    rms_combined = estimation.rms_residual(measured, combined)
    print(f"rms_floating_db = {_num(rms_floating)}")
    print(f"rms_combined_db = {_num(rms_combined)}")
    if args.against:
        other = dataio.read_model(args.against)
        if not isinstance(other, MagnitudeModel):
            raise DataError(f"{args.against} is not a magnitude model")
        offset = estimation.material_offset_db(model, other, d)
        print(f"offset_vs_against_db = {_num(offset)}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thz-reflection", description="Terahertz single-reflection channel model tools.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit-mag", help="fit path loss + standing wave at one frequency")
    p.add_argument("--input", required=True)
    p.add_argument("--freq", type=float, required=True, help="GHz")
    p.add_argument("--d0", type=float, default=REFERENCE_D0_CM, help="reference distance, cm")
    p.add_argument("--k-prior", type=float, default=None, help="rad/cm; default free-space 2*pi/lambda")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_mag)

    p = sub.add_parser("fit-phase", help="fit the delta_d * lambda correction line")
    p.add_argument("--input", required=True)
    p.add_argument("--centers", default=DEFAULT_CENTERS, help="comma-separated GHz")
    p.add_argument("--window", type=float, default=estimation.DEFAULT_WINDOW_HALFWIDTH_GHZ,
                   help="phase-fit window halfwidth, GHz")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", default=None, help="optional figure of the correction line")
    p.set_defaults(func=cmd_fit_phase)

    p = sub.add_parser("predict-mag", help="predicted path loss in dB")
    p.add_argument("--model", required=True)
    p.add_argument("--distance", type=float, required=True, help="cm")
    p.set_defaults(func=cmd_predict_mag)

    p = sub.add_parser("predict-phase", help="predicted received phase in rad")
    p.add_argument("--phase-model", required=True)
    p.add_argument("--freq", type=float, required=True, help="GHz")
    p.add_argument("--distance", type=float, required=True, help="cm")
    p.set_defaults(func=cmd_predict_phase)

    p = sub.add_parser("synth", help="generate a synthetic sweep CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=70.0, help="dB")
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--d0", type=float, default=REFERENCE_D0_CM, help="cm")
    p.add_argument("--gamma-mag", type=float, default=0.0)
    p.add_argument("--gamma-phase", type=float, default=0.0, help="rad")
    p.add_argument("--k", type=float, default=None, help="rad/cm; default free-space at mid-band")
    p.add_argument("--distances", default=None, help="start:stop:step or comma list, cm")
    p.add_argument("--freq-start", type=float, default=325.0)
    p.add_argument("--freq-stop", type=float, default=500.0)
    p.add_argument("--freq-step", type=float, default=0.1)
    p.add_argument("--noise-db", type=float, default=0.0)
    p.add_argument("--phase-noise", type=float, default=0.0, help="rad")
    p.add_argument("--delta-d-slope", type=float, default=None, help="mm*mm/GHz")
    p.add_argument("--delta-d-intercept", type=float, default=None, help="mm*mm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--material", default="synthetic")
    p.add_argument("--format", choices=sorted(dataio.SCHEMAS), default="complex")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="measured vs fitted magnitude per distance")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--emit", choices=("csv", "svg"), default="csv")
    p.add_argument("--out", required=True)
    p.add_argument("--freq", type=float, default=None, help="GHz; default the model's frequency")
    p.add_argument("--against", default=None,
                   help="second magnitude model; prints its mean offset from --model in dB")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    outputs = _Outputs()
    try:
        args.func(args, outputs)
    except ChannelModelError as exc:
        outputs.discard()
        _emit_error(exc.kind, exc)
        return exc.exit_code
    except OSError as exc:
        outputs.discard()
        _emit_error("io", exc)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
