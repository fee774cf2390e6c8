"""Domain types and closed-form forward models for the single-reflection channel.

External units are centimetres and gigahertz; arithmetic that involves the
speed of light is done in SI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import DataError, DomainError, GridError

C_M_PER_S = 299_792_458.0
REFERENCE_D0_CM = 30.4
DISTANCE_STEP_CM = 3.6
N_DISTANCES = 12
VALIDITY_RANGE_GHZ = (320.0, 480.0)
GRID_TOL_GHZ = 1e-9

# 20/ln(10): dB per unit of small-|Gamma| ripple amplitude
DB_PER_NEPER_AMPLITUDE = 20.0 / math.log(10.0)


def wrap_phase(x):
    """Wrap angles to [-pi, pi)."""
    x = np.asarray(x, dtype=float)
    wrapped = np.mod(x + np.pi, 2.0 * np.pi) - np.pi
    # np.mod can round a tiny negative up to exactly 2*pi
    wrapped = np.where(wrapped >= np.pi, wrapped - 2.0 * np.pi, wrapped)
    # in-range values pass through untouched so wrapping is idempotent
    wrapped = np.where((x >= -np.pi) & (x < np.pi), x, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def wavelength_mm(freq_ghz):
    """Free-space wavelength in mm for a frequency in GHz."""
    return C_M_PER_S * 1e3 / (np.asarray(freq_ghz, dtype=float) * 1e9)


def free_space_wavenumber(freq_ghz: float) -> float:
    """Angular wavenumber 2*pi/lambda in rad/cm."""
    if freq_ghz <= 0:
        raise DomainError("frequency must be positive")
    return 2.0 * math.pi * freq_ghz * 1e9 / (C_M_PER_S * 100.0)


def measurement_distances_cm() -> np.ndarray:
    """The twelve total path lengths of the 45 degree measurement geometry."""
    return np.round(REFERENCE_D0_CM + DISTANCE_STEP_CM * np.arange(N_DISTANCES), 10)


@dataclass(frozen=True)
class SweepRecord:
    distance: float  # cm, total Tx -> plate -> Rx path
    frequency: float  # GHz
    s21: complex

    def __post_init__(self):
        if not self.distance > 0:
            raise DataError(f"distance must be positive, got {self.distance}")
        if not self.frequency > 0:
            raise DataError(f"frequency must be positive, got {self.frequency}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Complete (distance x frequency) grid of S21 samples.

    ``s21`` has shape ``(len(distances), len(frequencies))``.
    """

    distances: np.ndarray
    frequencies: np.ndarray
    s21: np.ndarray
    material: str = "unknown"

    def __post_init__(self):
        d = np.array(self.distances, dtype=float)
        f = np.array(self.frequencies, dtype=float)
        s = np.array(self.s21, dtype=complex)
        if d.ndim != 1 or f.ndim != 1 or d.size == 0 or f.size == 0:
            raise DataError("distances and frequencies must be non-empty 1-D arrays")
        if s.shape != (d.size, f.size):
            raise GridError(f"s21 shape {s.shape} does not match grid {(d.size, f.size)}")
        if np.any(d <= 0) or np.any(f <= 0):
            raise DataError("distances and frequencies must be positive")
        if np.any(np.diff(d) <= 0):
            raise GridError("distances must be strictly increasing")
        if f.size > 1:
            steps = np.diff(f)
            if np.any(steps <= 0):
                raise GridError("frequencies must be strictly increasing")
            bad = np.flatnonzero(np.abs(steps - steps[0]) > GRID_TOL_GHZ)
            if bad.size:
                i = bad[0]
                raise GridError(
                    f"non-uniform frequency grid: gap {f[i]:.10g} -> {f[i + 1]:.10g} GHz "
                    f"({steps[i]:.10g} GHz, expected {steps[0]:.10g})"
                )
        for name, arr in (("distances", d), ("frequencies", f), ("s21", s)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def from_records(cls, records, material: str = "unknown") -> "Dataset":
        records = list(records)
        if not records:
            raise DataError("no records")
        distances = np.array(sorted({r.distance for r in records}))
        frequencies = np.array(sorted({r.frequency for r in records}))
        d_index = {v: i for i, v in enumerate(distances)}
        f_index = {v: i for i, v in enumerate(frequencies)}
        s21 = np.full((distances.size, frequencies.size), np.nan + 0j)
        seen = np.zeros(s21.shape, dtype=bool)
        for r in records:
            key = (d_index[r.distance], f_index[r.frequency])
            if seen[key]:
                raise DataError(f"duplicate record at distance={r.distance} frequency={r.frequency}")
            seen[key] = True
            s21[key] = r.s21
        if not seen.all():
            i, j = np.argwhere(~seen)[0]
            raise GridError(f"incomplete grid: missing distance={distances[i]} frequency={frequencies[j]}")
        return cls(distances, frequencies, s21, material)

    @property
    def frequency_step(self) -> float:
        if self.frequencies.size < 2:
            return 0.0
        return float(self.frequencies[1] - self.frequencies[0])

    @property
    def records(self) -> Iterator[SweepRecord]:
        for i, d in enumerate(self.distances):
            for j, f in enumerate(self.frequencies):
                yield SweepRecord(float(d), float(f), complex(self.s21[i, j]))

    def __len__(self) -> int:
        return self.s21.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.material == other.material
            and np.array_equal(self.distances, other.distances)
            and np.array_equal(self.frequencies, other.frequencies)
            and np.array_equal(self.s21, other.s21)
        )

    def frequency_index(self, freq_ghz: float) -> int:
        j = int(np.argmin(np.abs(self.frequencies - freq_ghz)))
        if abs(self.frequencies[j] - freq_ghz) > 1e-6:
            raise DataError(f"frequency {freq_ghz} GHz not present in dataset")
        return j

    def path_loss_db(self, freq_ghz: float) -> np.ndarray:
        """Measured path loss (positive dB) per distance at one frequency."""
        mag = np.abs(self.s21[:, self.frequency_index(freq_ghz)])
        if np.any(mag == 0):
            raise DataError("zero |s21| cannot be converted to path loss")
        return -20.0 * np.log10(mag)

    def phase_rad(self, distance_cm: float) -> np.ndarray:
        """Wrapped measured phase over frequency at one distance."""
        i = int(np.argmin(np.abs(self.distances - distance_cm)))
        if abs(self.distances[i] - distance_cm) > 1e-9:
            raise DataError(f"distance {distance_cm} cm not present in dataset")
        return np.angle(self.s21[i])


@dataclass(frozen=True)
class ReflectionCoefficient:
    magnitude: float
    phase: float = 0.0  # rad, canonicalized to [-pi, pi)

    def __post_init__(self):
        if not (0.0 <= self.magnitude < 1.0):
            raise DomainError(f"|Gamma| must lie in [0, 1), got {self.magnitude}")
        if not math.isfinite(self.phase):
            raise DomainError("Gamma phase must be finite")
        object.__setattr__(self, "magnitude", float(self.magnitude))
        object.__setattr__(self, "phase", wrap_phase(self.phase))

    @classmethod
    def from_pi_multiple(cls, magnitude: float, phase_over_pi: float) -> "ReflectionCoefficient":
        """Build from a phase quoted as a multiple of pi (e.g. 1.47 -> 1.47*pi)."""
        return cls(magnitude, phase_over_pi * math.pi)

    @property
    def complex(self) -> complex:
        return self.magnitude * complex(math.cos(self.phase), math.sin(self.phase))


@dataclass(frozen=True)
class MagnitudeModel:
    alpha: float  # dB at d0
    beta: float
    d0: float = REFERENCE_D0_CM  # cm
    sigma: float = 0.0  # dB, RMS residual of the fit that produced the model
    gamma: ReflectionCoefficient = field(default_factory=lambda: ReflectionCoefficient(0.0))
    k: float = 1.0  # rad/cm
    forward_amplitude: float = 0.0  # dB, absorbed into alpha
    frequency: float | None = None  # GHz the model was fitted at, metadata only

    def __post_init__(self):
        for name in ("alpha", "beta", "d0", "sigma", "k", "forward_amplitude"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.d0 <= 0:
            raise DomainError("d0 must be positive")
        if self.sigma < 0:
            raise DomainError("sigma must be non-negative")
        if self.k <= 0:
            raise DomainError("k must be positive")
        if self.forward_amplitude != 0.0:
            raise DomainError("forward_amplitude is fixed at 0 dB")
        if self.frequency is not None and not (math.isfinite(self.frequency) and self.frequency > 0):
            raise DomainError("frequency must be positive")


@dataclass(frozen=True)
class PhaseSlopeFit:
    center_frequency: float  # GHz
    window_halfwidth: float  # GHz
    fitted_distance: float  # cm
    rms_residual: float  # rad

    def __post_init__(self):
        if not self.fitted_distance > 0:
            raise DomainError("fitted distance must be positive")
        if self.rms_residual < 0:
            raise DomainError("rms residual must be non-negative")


@dataclass(frozen=True)
class PhaseCorrectionModel:
    """Line ``delta_d * lambda = slope * f + intercept`` (mm*mm vs GHz)."""

    slope: float  # mm*mm / GHz
    intercept: float  # mm*mm
    f_min: float = VALIDITY_RANGE_GHZ[0]
    f_max: float = VALIDITY_RANGE_GHZ[1]

    def __post_init__(self):
        for name in ("slope", "intercept", "f_min", "f_max"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not 0 < self.f_min < self.f_max:
            raise DomainError("validity range must satisfy 0 < f_min < f_max")
        # linear, so checking the endpoints covers the whole range
        if min(self.product_mm2(self.f_min), self.product_mm2(self.f_max)) <= 0:
            raise DomainError(
                "delta_d * lambda must stay positive over "
                f"[{self.f_min}, {self.f_max}] GHz"
            )

    def product_mm2(self, freq_ghz):
        return self.slope * freq_ghz + self.intercept

    def delta_d_cm(self, freq_ghz):
        """Distance correction in cm at a frequency in GHz."""
        return self.product_mm2(freq_ghz) / wavelength_mm(freq_ghz) / 10.0


def _check_distance(d, d0: float):
    d = np.asarray(d, dtype=float)
    if np.any(d < d0):
        raise DomainError(f"distance below reference distance d0={d0} cm")
    return d


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def path_loss_db(d, m: MagnitudeModel):
    """Floating-intercept path loss ``alpha + 10*beta*log10(d/d0)`` in dB."""
    d = _check_distance(d, m.d0)
    return _scalar(m.alpha + 10.0 * m.beta * np.log10(d / m.d0))


def standing_wave_gain(d, d0: float, gamma: ReflectionCoefficient, k: float):
    """dB gain of |V_net|^2 / |A|^2 for the forward wave plus one reflection."""
    if not 0 <= gamma.magnitude < 1:
        raise DomainError("|Gamma| >= 1 is non-physical")
    d = _check_distance(d, d0)
    g = gamma.magnitude
    u = 1.0 + g * g + 2.0 * g * np.cos(gamma.phase + 2.0 * k * (d - d0))
    return _scalar(10.0 * np.log10(u))


def combined_magnitude_db(d, m: MagnitudeModel):
    """Predicted path loss with the standing-wave ripple subtracted."""
    return _scalar(
        np.asarray(path_loss_db(d, m)) - np.asarray(standing_wave_gain(d, m.d0, m.gamma, m.k))
    )


def phase_shift_rad(d, delta_f):
    """Phase shift ``2*pi*d*delta_f/c`` for d in cm and delta_f in GHz."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    return _scalar(2.0 * np.pi * (d * 1e-2) * (np.asarray(delta_f, dtype=float) * 1e9) / C_M_PER_S)
