"""Terahertz NLoS single-reflection channel model.

Magnitude: floating-intercept path loss with a standing-wave ripple.
Phase: distance inferred from the phase slope, corrected by a line in
``delta_d * lambda`` against frequency.
"""

from .errors import (
    ChannelModelError,
    DataError,
    DomainError,
    FormatError,
    GridError,
    InsufficientDataError,
    VersionError,
)
from .model import (
    C_M_PER_S,
    Dataset,
    MagnitudeModel,
    PhaseCorrectionModel,
    PhaseSlopeFit,
    ReflectionCoefficient,
    SweepRecord,
    combined_magnitude_db,
    free_space_wavenumber,
    path_loss_db,
    phase_shift_rad,
    standing_wave_gain,
    wavelength_mm,
    wrap_phase,
)
from .estimation import (
    DeltaDSample,
    MagnitudeFitReport,
    fit_delta_d_line,
    fit_floating_intercept,
    fit_magnitude,
    fit_phase_slope,
    initialize_standing_wave,
    predict_phase,
    refine_magnitude_fit,
    rms_residual,
    unwrap_phase,
)
from .synth import SynthSpec, generate
from .dataio import read_model, read_sweeps, write_model, write_sweeps

__version__ = "0.1.0"
