"""Published reference values used for reproduction checks.

Distances in cm, frequencies in GHz, phases as multiples of pi.
"""

from __future__ import annotations

import numpy as np

from .model import ReflectionCoefficient

# measured distance, apparent distance at 340 GHz, apparent distance at 480 GHz
PHASE_FIT_DISTANCES = np.array([
    [30.40, 35.90, 33.92],
    [34.00, 39.50, 37.49],
    [37.60, 43.28, 41.24],
    [41.20, 46.67, 44.52],
    [44.80, 50.34, 48.07],
    [48.40, 53.62, 51.64],
    [52.00, 57.55, 55.50],
    [55.60, 61.02, 58.81],
    [59.20, 64.62, 62.45],
    [62.80, 68.26, 66.27],
    [66.40, 72.02, 69.90],
    [70.00, 75.26, 73.37],
])
PHASE_FIT_FREQUENCIES = (340.0, 480.0)
# printed delta_d column, apparent minus measured
PHASE_FIT_DELTA_D = np.array([
    [5.50, 3.52], [5.50, 3.49], [5.68, 3.64], [5.47, 3.32], [5.54, 3.27], [5.22, 3.24],
    [5.55, 3.50], [5.42, 3.21], [5.42, 3.25], [5.46, 3.47], [5.62, 3.50], [5.26, 3.37],
])

# (|Gamma|, angle/pi, k/pi in rad/cm) per material and frequency
MAGNITUDE_FITS = {
    "metal": {340.0: (0.06, 1.47, 23.49), 410.0: (0.06, -0.23, 33.85), 460.0: (0.04, -0.18, 36.75)},
    "wood": {340.0: (0.05, 1.37, 25.42), 410.0: (0.03, -0.35, 31.49), 460.0: (0.06, 1.19, 35.47)},
}

# |Gamma| of the direct line-of-sight link at the same frequencies
LOS_GAMMA_MAGNITUDE = {340.0: 0.05, 410.0: 0.09, 460.0: 0.06}

# delta_d * lambda = slope * f + intercept, mm*mm vs GHz
CORRECTION_LINES = {"metal": (-0.17, 107.18), "wood": (-0.18, 106.68)}

# wood reflections lose about this much more than metal, dB
METAL_WOOD_OFFSET_DB = 10.0


def reference_gamma(material: str, freq_ghz: float) -> tuple[ReflectionCoefficient, float]:
    """(Gamma, k in rad/cm) for a tabulated material and frequency."""
    mag, phase_pi, k_pi = MAGNITUDE_FITS[material][float(freq_ghz)]
    return ReflectionCoefficient.from_pi_multiple(mag, phase_pi), k_pi * np.pi


def gamma_comparison(nlos_magnitudes: dict) -> list[tuple[float, float, float]]:
    """Rows of (frequency, LoS |Gamma|, NLoS |Gamma|) for tabulated frequencies."""
    rows = []
    for f in sorted(nlos_magnitudes):
        if float(f) in LOS_GAMMA_MAGNITUDE:
            rows.append((float(f), LOS_GAMMA_MAGNITUDE[float(f)], float(nlos_magnitudes[f])))
    return rows


def format_gamma_comparison(rows) -> str:
    lines = ["f_ghz\tlos_gamma\tnlos_gamma"]
    lines += [f"{f:g}\t{los:.2f}\t{nlos:.2f}" for f, los, nlos in rows]
    return "\n".join(lines)
