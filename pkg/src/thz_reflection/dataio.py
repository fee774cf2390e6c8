"""Sweep CSV and model text formats.

Sweep files are CSV with one of two fixed headers::

    distance_cm,freq_ghz,s21_re,s21_im      (complex)
    distance_cm,freq_ghz,mag_db,phase_rad   (polar, mag_db = 20*log10|s21|)

Lines starting with ``#`` before the header carry metadata as
``# key: value``; only ``material`` is recognised.

Model files are ``key = value`` lines with the unit in each key name and a
mandatory ``format_version``.
"""

from __future__ import annotations

import csv
import math
import os
from pathlib import Path

import numpy as np

from .errors import DataError, DomainError, FormatError, VersionError
from .model import (
    Dataset,
    MagnitudeModel,
    PhaseCorrectionModel,
    ReflectionCoefficient,
    SweepRecord,
)

COMPLEX_HEADER = ("distance_cm", "freq_ghz", "s21_re", "s21_im")
POLAR_HEADER = ("distance_cm", "freq_ghz", "mag_db", "phase_rad")
SCHEMAS = {"complex": COMPLEX_HEADER, "polar": POLAR_HEADER}

MODEL_FORMAT_VERSION = 1

MAGNITUDE_KEYS = (
    "alpha_db",
    "beta",
    "d0_cm",
    "sigma_db",
    "gamma_magnitude",
    "gamma_phase_rad",
    "k_rad_per_cm",
    "forward_amplitude_db",
)
PHASE_KEYS = ("slope_mm2_per_ghz", "intercept_mm2", "f_min_ghz", "f_max_ghz")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _split_metadata(lines):
    meta = {}
    body_start = 0
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped.startswith("#"):
            body_start = i
            break
        key, sep, value = stripped[1:].partition(":")
        if sep:
            meta[key.strip()] = value.strip()
    else:
        body_start = len(lines)
    return meta, body_start


def read_sweeps(path, material: str | None = None) -> Dataset:
    """Parse and validate a sweep CSV into a ``Dataset``."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    meta, start = _split_metadata(lines)
    if start >= len(lines):
        raise FormatError(f"{path}: missing header row")
    header = tuple(h.strip() for h in lines[start].split(","))
    fmt = next((name for name, cols in SCHEMAS.items() if header == cols), None)
    if fmt is None:
        raise FormatError(
            f"{path}:{start + 1}: header {','.join(header)!r} matches neither "
            f"{','.join(COMPLEX_HEADER)!r} nor {','.join(POLAR_HEADER)!r}"
        )

    records = []
    seen: dict[tuple[float, float], int] = {}
    for offset, row in enumerate(csv.reader(lines[start + 1 :])):
        lineno = start + 2 + offset
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise DataError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
        try:
            d, f, a, b = (float(c) for c in row)
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric field") from None
        if not all(math.isfinite(v) for v in (d, f, a, b)):
            raise DataError(f"{path}:{lineno}: non-finite field")
        key = (d, f)
        if key in seen:
            raise DataError(
                f"{path}:{lineno}: duplicate (distance, frequency) = ({d}, {f}), "
                f"first seen on line {seen[key]}"
            )
        seen[key] = lineno
        if fmt == "complex":
            s21 = complex(a, b)
        else:
            s21 = 10.0 ** (a / 20.0) * complex(math.cos(b), math.sin(b))
        if s21 == 0:
            raise DataError(f"{path}:{lineno}: zero |s21| cannot be admitted")
        try:
            records.append(SweepRecord(d, f, s21))
        except DataError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    if not records:
        raise DataError(f"{path}: no data rows")
    label = material or meta.get("material", "unknown")
    try:
        return Dataset.from_records(records, material=label)
    except DataError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def write_sweeps(dataset: Dataset, path, fmt: str = "complex") -> None:
    if fmt not in SCHEMAS:
        raise FormatError(f"unknown sweep format {fmt!r}")
    rows = [f"# material: {dataset.material}", ",".join(SCHEMAS[fmt])]
    for i, d in enumerate(dataset.distances):
        for j, f in enumerate(dataset.frequencies):
            s = dataset.s21[i, j]
            if fmt == "complex":
                a, b = s.real, s.imag
            else:
                a, b = 20.0 * math.log10(abs(s)), math.atan2(s.imag, s.real)
            rows.append(",".join(_fmt(v) for v in (d, f, a, b)))
    _atomic_write(path, "\n".join(rows) + "\n")


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def model_to_text(model) -> str:
    if isinstance(model, MagnitudeModel):
        fields = {
            "model_type": "magnitude",
            "alpha_db": model.alpha,
            "beta": model.beta,
            "d0_cm": model.d0,
            "sigma_db": model.sigma,
            "gamma_magnitude": model.gamma.magnitude,
            "gamma_phase_rad": model.gamma.phase,
            "k_rad_per_cm": model.k,
            "forward_amplitude_db": model.forward_amplitude,
        }
        if model.frequency is not None:
            fields["frequency_ghz"] = model.frequency
    elif isinstance(model, PhaseCorrectionModel):
        fields = {
            "model_type": "phase_correction",
            "slope_mm2_per_ghz": model.slope,
            "intercept_mm2": model.intercept,
            "f_min_ghz": model.f_min,
            "f_max_ghz": model.f_max,
        }
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    lines = ["# thz-reflection model file", f"format_version = {MODEL_FORMAT_VERSION}"]
    for key, value in fields.items():
        if isinstance(value, str):
            lines.append(f"{key} = {value}")
            continue
        if not math.isfinite(value):
            raise DomainError(f"refusing to write non-finite {key}")
        lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def write_model(model, path) -> None:
    _atomic_write(path, model_to_text(model))


def model_from_text(text: str, source: str = "<string>"):
    fields: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise FormatError(f"{source}:{lineno}: expected 'key = value'")
        key = key.strip()
        if key in fields:
            raise FormatError(f"{source}:{lineno}: duplicate key {key!r}")
        fields[key] = value.strip()

    version = fields.pop("format_version", None)
    if version is None:
        raise VersionError(f"{source}: missing format_version")
    if version != str(MODEL_FORMAT_VERSION):
        raise VersionError(f"{source}: unsupported format_version {version!r} (expected {MODEL_FORMAT_VERSION})")
    kind = fields.pop("model_type", None)
    if kind == "magnitude":
        required, optional = MAGNITUDE_KEYS, ("frequency_ghz",)
    elif kind == "phase_correction":
        required, optional = PHASE_KEYS, ()
    else:
        raise FormatError(f"{source}: unknown model_type {kind!r}")

    unknown = set(fields) - set(required) - set(optional)
    if unknown:
        raise FormatError(f"{source}: unknown or non-canonical keys {sorted(unknown)}")
    missing = [k for k in required if k not in fields]
    if missing:
        raise FormatError(f"{source}: missing keys {missing}")
    try:
        values = {k: float(v) for k, v in fields.items()}
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from None

    if kind == "phase_correction":
        return PhaseCorrectionModel(
            values["slope_mm2_per_ghz"], values["intercept_mm2"], values["f_min_ghz"], values["f_max_ghz"]
        )
    return MagnitudeModel(
        alpha=values["alpha_db"],
        beta=values["beta"],
        d0=values["d0_cm"],
        sigma=values["sigma_db"],
        gamma=ReflectionCoefficient(values["gamma_magnitude"], values["gamma_phase_rad"]),
        k=values["k_rad_per_cm"],
        forward_amplitude=values["forward_amplitude_db"],
        frequency=values.get("frequency_ghz"),
    )


def read_model(path):
    path = Path(path)
    return model_from_text(path.read_text(encoding="utf-8"), str(path))


def write_report_csv(path, distances, measured, floating, combined) -> None:
    rows = ["distance_cm,measured_db,floating_db,combined_db"]
    for row in zip(distances, measured, floating, combined):
        rows.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(rows) + "\n")


def read_report_csv(path) -> np.ndarray:
    """Load a report CSV back as an (n, 4) array."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != ("distance_cm", "measured_db", "floating_db", "combined_db"):
            raise FormatError(f"{path}: not a magnitude report")
        return np.array([[float(c) for c in row] for row in reader if row])
