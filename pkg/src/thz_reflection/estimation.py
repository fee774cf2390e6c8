"""Parameter estimation for the magnitude and phase models.

Magnitude: ordinary least squares on the floating-intercept line, a k-grid
search over a linearized ripple for the starting point, then a bounded
Levenberg-Marquardt refinement of all five parameters.

Phase: local linear fits of unwrapped phase against frequency give an
apparent distance; the excess over the measured distance times the
wavelength is fitted as a line in frequency and used for prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError, DomainError, InsufficientDataError
from .model import (
    C_M_PER_S,
    DB_PER_NEPER_AMPLITUDE,
    Dataset,
    MagnitudeModel,
    PhaseCorrectionModel,
    PhaseSlopeFit,
    ReflectionCoefficient,
    combined_magnitude_db,
    free_space_wavenumber,
    wavelength_mm,
    wrap_phase,
)

DEFAULT_K_GRID_POINTS = 2001
DEFAULT_K_SPAN = 0.2
DEFAULT_WINDOW_HALFWIDTH_GHZ = 2.0
GAMMA_UPPER_BOUND = 0.5
OBJECTIVE_TOL = 1e-10  # dB^2
MAX_ITERATIONS = 500
MIN_PHASE_SAMPLES = 5
MIN_BASIS_EIGEN_FRACTION = 0.05

_DB_PER_LN = 10.0 / math.log(10.0)


class FloatingFit(NamedTuple):
    alpha: float
    beta: float
    rms: float


class StandingWaveInit(NamedTuple):
    gamma: ReflectionCoefficient
    k: float
    ripple_detected: bool = True


@dataclass(frozen=True)
class MagnitudeFitReport:
    model: MagnitudeModel
    rms_before: float  # dB, floating-intercept only
    rms_after: float  # dB, including the standing wave
    per_distance_residuals: list  # (distance cm, measured - predicted dB)
    iterations: int = 0
    flags: tuple = ()

    def __post_init__(self):
        if self.rms_after > self.rms_before + 1e-9:
            raise AssertionError("refinement worsened the objective")

    @property
    def converged(self) -> bool:
        return "max-iterations" not in self.flags


@dataclass(frozen=True)
class DeltaDSample:
    frequency: float  # GHz
    measured_distance: float  # cm
    fitted_distance: float  # cm
    delta_d: float = field(init=False)  # cm

    def __post_init__(self):
        object.__setattr__(self, "delta_d", self.fitted_distance - self.measured_distance)


def _as_points(points):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DataError("points must be a sequence of (distance, value) pairs")
    return arr[:, 0], arr[:, 1]


def rms_residual(measured, predicted) -> float:
    measured = np.asarray(measured, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if measured.shape != predicted.shape:
        raise ValueError(f"length mismatch: {measured.shape} vs {predicted.shape}")
    if measured.size == 0:
        raise InsufficientDataError("rms of an empty residual set")
    return float(np.sqrt(np.mean((measured - predicted) ** 2)))


def fit_floating_intercept(points, d0: float) -> FloatingFit:
    """OLS of path loss against ``10*log10(d/d0)``; returns (alpha, beta, rms)."""
    d, pl = _as_points(points)
    if np.unique(d).size < 2:
        raise InsufficientDataError("floating-intercept fit needs at least 2 distinct distances")
    if np.any(d < d0):
        raise DomainError(f"distance below reference distance d0={d0} cm")
    x = 10.0 * np.log10(d / d0)
    design = np.column_stack([np.ones_like(x), x])
    (alpha, beta), *_ = np.linalg.lstsq(design, pl, rcond=None)
    rms = rms_residual(pl, alpha + beta * x)
    return FloatingFit(float(alpha), float(beta), rms)


def initialize_standing_wave(
    residuals,
    k_prior: float,
    d0: float,
    n_grid: int = DEFAULT_K_GRID_POINTS,
    span: float = DEFAULT_K_SPAN,
) -> StandingWaveInit:
    """Grid search for (Gamma, k) from the ripple left by the line fit.

    ``residuals`` are (distance, gain dB) pairs where gain is the line fit
    minus the measured path loss, i.e. the ripple as a dB gain. Each grid k
    gets a cos/sin regression of the small-|Gamma| linearization; the k with
    the lowest residual RMS wins, the smallest k on exact ties.
    """
    d, r = _as_points(residuals)
    if d.size < 4:
        raise InsufficientDataError("standing-wave initialization needs at least 4 points")
    if not k_prior > 0:
        raise DomainError("k_prior must be positive")
    if not np.any(r):
        return StandingWaveInit(ReflectionCoefficient(0.0), float(k_prior), False)

    ks = np.linspace((1.0 - span) * k_prior, (1.0 + span) * k_prior, n_grid)
    theta = 2.0 * ks[:, None] * (d - d0)[None, :]
    cos, sin = np.cos(theta), np.sin(theta)
    gram = np.empty((ks.size, 2, 2))
    gram[:, 0, 0] = np.einsum("ij,ij->i", cos, cos)
    gram[:, 0, 1] = gram[:, 1, 0] = np.einsum("ij,ij->i", cos, sin)
    gram[:, 1, 1] = np.einsum("ij,ij->i", sin, sin)
    rhs = np.stack([cos @ r, sin @ r], axis=1)
    coef = np.einsum("kij,kj->ki", np.linalg.pinv(gram), rhs)
    # near-degenerate sampled bases yield huge amplitudes; hold every k to the
    # same |Gamma| bound the refinement uses
    amp_cap = GAMMA_UPPER_BOUND * DB_PER_NEPER_AMPLITUDE
    amp = np.hypot(coef[:, 0], coef[:, 1])
    coef *= np.minimum(1.0, amp_cap / np.maximum(amp, 1e-300))[:, None]
    fitted = coef[:, :1] * cos + coef[:, 1:] * sin
    sse = np.sum((r[None, :] - fitted) ** 2, axis=1)
    # skip k where the sampled cos/sin pair is close to collinear (aliased
    # onto a near-linear trend); keep them only if nothing else is left
    min_eig = np.linalg.eigvalsh(gram)[:, 0]
    identifiable = min_eig >= MIN_BASIS_EIGEN_FRACTION * d.size
    if identifiable.any():
        sse = np.where(identifiable, sse, np.inf)
    best = int(np.argmin(sse))  # first minimum -> smallest k

    # amp*cos(phi + theta) = amp*cos(phi)*cos(theta) - amp*sin(phi)*sin(theta)
    a, b = coef[best]
    magnitude = min(math.hypot(a, b) / DB_PER_NEPER_AMPLITUDE, GAMMA_UPPER_BOUND)
    phase = math.atan2(-b, a)
    return StandingWaveInit(ReflectionCoefficient(magnitude, phase), float(ks[best]), True)


def _magnitude_model_db(params, d, d0):
    alpha, beta, g, phi, k = params
    theta = phi + 2.0 * k * (d - d0)
    u = 1.0 + g * g + 2.0 * g * np.cos(theta)
    return alpha + beta * 10.0 * np.log10(d / d0) - _DB_PER_LN * np.log(u)


def _magnitude_jacobian(params, d, d0):
    _, _, g, phi, k = params
    theta = phi + 2.0 * k * (d - d0)
    u = 1.0 + g * g + 2.0 * g * np.cos(theta)
    jac = np.empty((d.size, 5))
    jac[:, 0] = 1.0
    jac[:, 1] = 10.0 * np.log10(d / d0)
    jac[:, 2] = -_DB_PER_LN * (2.0 * g + 2.0 * np.cos(theta)) / u
    jac[:, 3] = _DB_PER_LN * 2.0 * g * np.sin(theta) / u
    jac[:, 4] = jac[:, 3] * 2.0 * (d - d0)
    return jac


def _project(params, k_lo, k_hi):
    alpha, beta, g, phi, k = params
    if g < 0:
        # (-g, phi) and (g, phi + pi) describe the same ripple
        g, phi = -g, phi + math.pi
    g = min(g, GAMMA_UPPER_BOUND)
    k = min(max(k, k_lo), k_hi)
    return np.array([alpha, beta, g, phi, k])


def _levenberg_marquardt(d, pl, d0, p0, k_lo, k_hi, tol=OBJECTIVE_TOL, max_iter=MAX_ITERATIONS):
    """Projected LM on the squared-dB objective; returns (params, cost, iterations, hit_cap)."""
    p = _project(np.asarray(p0, dtype=float), k_lo, k_hi)
    r = pl - _magnitude_model_db(p, d, d0)
    cost = float(r @ r)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        jac = _magnitude_jacobian(p, d, d0)
        grad = jac.T @ r
        hess = jac.T @ jac
        scale = np.diag(hess).copy()
        scale = np.maximum(scale, 1e-12 * max(scale.max(), 1.0))
        while True:
            try:
                step = np.linalg.solve(hess + lam * np.diag(scale), grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(hess + lam * np.diag(scale), grad, rcond=None)[0]
            trial = _project(p + step, k_lo, k_hi)
            r_trial = pl - _magnitude_model_db(trial, d, d0)
            cost_trial = float(r_trial @ r_trial)
            if cost_trial < cost:
                break
            lam *= 4.0
            if lam > 1e16:
                return p, cost, it, False
        improvement = cost - cost_trial
        p, r, cost = trial, r_trial, cost_trial
        lam = max(lam / 3.0, 1e-12)
        if improvement < tol:
            return p, cost, it, False
    return p, cost, max_iter, True


def refine_magnitude_fit(points, d0: float, init) -> MagnitudeFitReport:
    """Jointly refine (alpha, beta, |Gamma|, angle Gamma, k) from a starting point.

    ``init`` is ``(alpha, beta, ReflectionCoefficient, k)``. Bounds are
    |Gamma| in [0, 0.5] and k within 20% of the starting k. The returned
    fit is never worse than the floating-intercept line alone.
    """
    d, pl = _as_points(points)
    if d.size < 5:
        raise InsufficientDataError("magnitude refinement needs at least 5 points (5 free parameters)")
    alpha0, beta0, gamma0, k0 = init
    if not k0 > 0:
        raise DomainError("initial k must be positive")
    line = fit_floating_intercept(points, d0)
    k_lo, k_hi = (1.0 - DEFAULT_K_SPAN) * k0, (1.0 + DEFAULT_K_SPAN) * k0

    p0 = [alpha0, beta0, gamma0.magnitude, gamma0.phase, k0]
    params, cost, iterations, hit_cap = _levenberg_marquardt(
        d, pl, d0, p0, k_lo, k_hi, tol=OBJECTIVE_TOL, max_iter=MAX_ITERATIONS
    )

    flags = ("max-iterations",) if hit_cap else ()
    line_cost = line.rms**2 * d.size
    if not cost < line_cost:
        params = np.array([line.alpha, line.beta, 0.0, 0.0, k0])
        flags += ("no-ripple-improvement",)

    alpha, beta, g, phi, k = (float(v) for v in params)
    predicted = _magnitude_model_db(params, d, d0)
    rms_after = rms_residual(pl, predicted)
    model = MagnitudeModel(
        alpha=alpha,
        beta=beta,
        d0=d0,
        sigma=rms_after,
        gamma=ReflectionCoefficient(g, phi),
        k=k,
    )
    residuals = [(float(di), float(ri)) for di, ri in zip(d, pl - predicted)]
    return MagnitudeFitReport(model, line.rms, rms_after, residuals, iterations, flags)


def fit_magnitude(
    points,
    d0: float,
    k_prior: float,
    n_grid: int = DEFAULT_K_GRID_POINTS,
    frequency: float | None = None,
) -> MagnitudeFitReport:
    """Full magnitude procedure: line fit, ripple initialization, joint refinement."""
    d, pl = _as_points(points)
    line = fit_floating_intercept(points, d0)
    gain = line.alpha + line.beta * 10.0 * np.log10(d / d0) - pl
    init = initialize_standing_wave(np.column_stack([d, gain]), k_prior, d0, n_grid=n_grid)
    report = refine_magnitude_fit(points, d0, (line.alpha, line.beta, init.gamma, init.k))
    flags = report.flags if init.ripple_detected else report.flags + ("no-ripple-detected",)
    model = report.model
    if frequency is not None:
        model = MagnitudeModel(
            model.alpha, model.beta, model.d0, model.sigma, model.gamma, model.k, frequency=frequency
        )
    return MagnitudeFitReport(
        model, report.rms_before, report.rms_after, report.per_distance_residuals, report.iterations, flags
    )


def fit_dataset_magnitude(dataset: Dataset, freq_ghz: float, d0: float, k_prior: float | None = None):
    if k_prior is None:
        k_prior = free_space_wavenumber(freq_ghz)
    j = dataset.frequency_index(freq_ghz)
    pl = dataset.path_loss_db(freq_ghz)
    points = np.column_stack([dataset.distances, pl])
    return fit_magnitude(points, d0, k_prior, frequency=float(dataset.frequencies[j]))


def unwrap_phase(wrapped) -> np.ndarray:
    """Remove 2*pi jumps so adjacent differences fall in (-pi, pi]."""
    x = np.asarray(wrapped, dtype=float)
    if x.size == 0:
        raise InsufficientDataError("cannot unwrap an empty sequence")
    dd = np.diff(x)
    dd_mod = -(np.mod(-dd + np.pi, 2.0 * np.pi) - np.pi)
    # integer turn counts keep already-continuous samples bit-identical
    turns = np.round((dd_mod - dd) / (2.0 * np.pi))
    return x + 2.0 * np.pi * np.concatenate([[0.0], np.cumsum(turns)])


def fit_phase_slope(frequencies, phase, center: float, halfwidth: float = DEFAULT_WINDOW_HALFWIDTH_GHZ) -> PhaseSlopeFit:
    """Apparent distance from the local slope of unwrapped phase vs frequency."""
    f = np.asarray(frequencies, dtype=float)
    phi = np.asarray(phase, dtype=float)
    if f.shape != phi.shape:
        raise ValueError("frequencies and phase must have the same length")
    if not halfwidth > 0:
        raise DomainError("window halfwidth must be positive")
    inside = np.abs(f - center) <= halfwidth + 1e-9
    if np.count_nonzero(inside) < MIN_PHASE_SAMPLES:
        raise InsufficientDataError(
            f"phase window {center}+/-{halfwidth} GHz holds {np.count_nonzero(inside)} samples, "
            f"need {MIN_PHASE_SAMPLES}"
        )
    x = f[inside] - center
    y = phi[inside]
    design = np.column_stack([np.ones_like(x), x])
    (offset, slope), *_ = np.linalg.lstsq(design, y, rcond=None)
    rms = rms_residual(y, offset + slope * x)
    # slope in rad/GHz; d = |slope| * c / (2*pi)
    distance_cm = abs(slope) / 1e9 * C_M_PER_S / (2.0 * math.pi) * 100.0
    return PhaseSlopeFit(float(center), float(halfwidth), float(distance_cm), rms)


def delta_d_samples(
    dataset: Dataset, centers: Sequence[float], halfwidth: float = DEFAULT_WINDOW_HALFWIDTH_GHZ
) -> list[DeltaDSample]:
    """Phase-slope fit at every (distance, center); ordered by center then distance."""
    for c in centers:
        if c - halfwidth < dataset.frequencies[0] - 1e-9 or c + halfwidth > dataset.frequencies[-1] + 1e-9:
            raise DataError(f"window {c}+/-{halfwidth} GHz is not fully inside the dataset")
    unwrapped = [unwrap_phase(np.angle(row)) for row in dataset.s21]
    samples = []
    for c in centers:
        for d, phi in zip(dataset.distances, unwrapped):
            fit = fit_phase_slope(dataset.frequencies, phi, c, halfwidth)
            samples.append(DeltaDSample(float(c), float(d), fit.fitted_distance))
    return samples


def fit_delta_d_line(samples: Sequence[DeltaDSample]) -> PhaseCorrectionModel:
    """OLS line of delta_d * lambda (mm*mm) against frequency (GHz)."""
    ordered = sorted(samples, key=lambda s: (s.frequency, s.measured_distance, s.fitted_distance))
    f = np.array([s.frequency for s in ordered], dtype=float)
    if np.unique(f).size < 2:
        raise InsufficientDataError("delta_d line needs samples at 2 or more distinct frequencies")
    product = np.array([s.delta_d for s in ordered]) * 10.0 * wavelength_mm(f)
    design = np.column_stack([f, np.ones_like(f)])
    (slope, intercept), *_ = np.linalg.lstsq(design, product, rcond=None)
    return PhaseCorrectionModel(float(slope), float(intercept))


def predict_phase(d: float, f: float, pcm: PhaseCorrectionModel) -> float:
    """Wrapped received phase at distance ``d`` (cm) and frequency ``f`` (GHz).

    The distance is first corrected by the delta_d the line predicts at
    ``f``; phase then falls with frequency as ``-2*pi*d_corr*f/c``.
    """
    if not d > 0:
        raise DomainError("distance must be positive")
    if not pcm.f_min <= f <= pcm.f_max:
        raise DomainError(
            f"frequency {f} GHz outside correction validity range [{pcm.f_min}, {pcm.f_max}]"
        )
    delta_d = float(pcm.delta_d_cm(f))
    if delta_d <= 0:
        raise DomainError("correction model extrapolated out of validity")
    d_corr = d + delta_d
    return wrap_phase(-2.0 * math.pi * (d_corr * 1e-2) * (f * 1e9) / C_M_PER_S)


def combined_predictions(dataset: Dataset, model: MagnitudeModel, freq_ghz: float):
    """(distances, measured, floating, combined) arrays in dB for reports."""
    measured = dataset.path_loss_db(freq_ghz)
    d = dataset.distances
    floating = model.alpha + 10.0 * model.beta * np.log10(d / model.d0)
    combined = np.asarray(combined_magnitude_db(d, model))
    return d, measured, floating, combined


def material_offset_db(reference: MagnitudeModel, other: MagnitudeModel, distances) -> float:
    """Mean of ``other - reference`` combined path loss over ``distances``."""
    d = np.asarray(distances, dtype=float)
    return float(np.mean(np.asarray(combined_magnitude_db(d, other)) - np.asarray(combined_magnitude_db(d, reference))))
