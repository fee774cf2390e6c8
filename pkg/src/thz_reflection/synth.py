"""Synthetic sweep generator built from the forward models.

Noise comes from numpy's PCG64 generator (``numpy.random.default_rng``)
seeded with SynthSpec.seed (64-bit); magnitude noise is drawn first, then
phase noise, each as one ``(n_distances, n_frequencies)`` block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .model import (
    C_M_PER_S,
    Dataset,
    MagnitudeModel,
    PhaseCorrectionModel,
    combined_magnitude_db,
    wrap_phase,
)

_C_MM_GHZ = C_M_PER_S * 1e-6  # mm * GHz


@dataclass(frozen=True)
class SynthSpec:
    model: MagnitudeModel
    distances: Sequence[float]  # cm
    frequencies: Sequence[float]  # GHz
    noise_sigma_db: float = 0.0
    phase_noise_rad: float = 0.0
    delta_d_model: Optional[PhaseCorrectionModel] = None
    seed: int = 0
    material: str = "synthetic"

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float)
        f = np.asarray(self.frequencies, dtype=float)
        if d.size == 0 or f.size == 0:
            raise DataError("distances and frequencies must be non-empty")
        if np.any(np.diff(d) <= 0) or np.any(np.diff(f) <= 0):
            raise DataError("distances and frequencies must be sorted ascending")
        if self.noise_sigma_db < 0 or self.phase_noise_rad < 0:
            raise DataError("noise magnitudes must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise DataError("seed must be an unsigned 64-bit integer")


def excess_path_integral(delta_d_model: PhaseCorrectionModel, freq_ghz):
    """Integral of delta_d(f) df from 0 to f, in cm*GHz.

    With delta_d = (slope*f + intercept) * f / c, the phase built from this
    integral has a local slope that corresponds to ``d + delta_d(f)`` at
    every frequency.
    """
    f = np.asarray(freq_ghz, dtype=float)
    s, b = delta_d_model.slope, delta_d_model.intercept
    return (s * f**3 / 3.0 + b * f**2 / 2.0) / _C_MM_GHZ / 10.0


def synthetic_phase(distance_cm, freq_ghz, delta_d_model: Optional[PhaseCorrectionModel] = None):
    """Unwrapped (continuous) phase in rad, decreasing with frequency."""
    d = np.asarray(distance_cm, dtype=float)[..., None]
    f = np.asarray(freq_ghz, dtype=float)
    path = d * f  # cm*GHz
    if delta_d_model is not None:
        path = path + excess_path_integral(delta_d_model, f)
    return -2.0 * math.pi * path * 1e7 / C_M_PER_S


def generate(spec: SynthSpec) -> Dataset:
    d = np.asarray(spec.distances, dtype=float)
    f = np.asarray(spec.frequencies, dtype=float)
    rng = np.random.default_rng(spec.seed)
    mag_noise = rng.standard_normal((d.size, f.size)) * spec.noise_sigma_db
    phase_noise = rng.standard_normal((d.size, f.size)) * spec.phase_noise_rad

    mag_db = -np.asarray(combined_magnitude_db(d, spec.model), dtype=float)[:, None] + mag_noise
    phase = wrap_phase(synthetic_phase(d, f, spec.delta_d_model)) + phase_noise
    s21 = 10.0 ** (mag_db / 20.0) * np.exp(1j * phase)
    return Dataset(d, f, s21, spec.material)


def frequency_grid(start: float = 325.0, stop: float = 500.0, step: float = 0.1) -> np.ndarray:
    """Uniform grid including both ends, built from integer steps to avoid drift."""
    n = int(round((stop - start) / step))
    return np.round(start + step * np.arange(n + 1), 9)
