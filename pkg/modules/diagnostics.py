"""
Post-processing of trajectories: decay rate, analyticity strip, conservation
residuals and the drift velocity of the relaxed circle.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd
from scipy import stats

from modules.errors import DiagnosticError
from modules.geometry import area, centroid_offset, zero_mode_residual
from modules.spectral_core import NormSpec, norm_f11

logger = logging.getLogger(__name__)

DECAY_WINDOW_START = 0.5
MIN_DECAY_SAMPLES = 10
ANALYTICITY_FLOOR = 1e-13
ANALYTICITY_MIN_MODES = 3
DRIFT_TAIL_NORM = 1e-6
# Slowest linear decay rate a_1
LINEAR_RATE_FLOOR = 1.0


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    window: Tuple[float, float]
    samples: int
    intercept: float = 0.0

    @property
    def meets_linear_floor(self):
        """Fitted rate at least 0.9 a_1 (an expectation from linear theory, not a theorem)."""
        return self.rate >= 0.9 * LINEAR_RATE_FLOOR


@dataclass(frozen=True)
class AnalyticityFit:
    t: float
    rho: float
    intercept: float
    active_modes: int
    floor: float = ANALYTICITY_FLOOR
    flagged: bool = False


@dataclass(frozen=True)
class ConservationReport:
    max_area_drift: float
    max_vorticity_mean: float
    max_zero_mode_residual: float
    pole_centroid: pd.DataFrame

    def as_dict(self):
        return {
            "max_area_drift": self.max_area_drift,
            "max_vorticity_mean": self.max_vorticity_mean,
            "max_zero_mode_residual": self.max_zero_mode_residual,
            "max_pole_centroid_offset": float(self.pole_centroid["offset"].max()) if len(self.pole_centroid) else 0.0,
        }


def decay_fit_series(times, norms, window=(DECAY_WINDOW_START, None)):
    """
    Least-squares line through log(norm) against t over the window.

    Args:
        times: sample times
        norms: positive norm values
        window: (t_start, t_end); None for t_end means the last sample

    Raises:
        DiagnosticError: fewer than MIN_DECAY_SAMPLES samples or a non-positive norm
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    start = window[0]
    stop = times[-1] if window[1] is None else window[1]
    inside = (times >= start - 1e-12) & (times <= stop + 1e-12)
    if np.count_nonzero(inside) < MIN_DECAY_SAMPLES:
        raise DiagnosticError(
            f"decay fit needs >= {MIN_DECAY_SAMPLES} samples in [{start}, {stop}], got {np.count_nonzero(inside)}"
        )
    if np.any(norms[inside] <= 0):
        raise DiagnosticError("decay fit requires positive norms")
    fit = stats.linregress(times[inside], np.log(norms[inside]))
    return DecayFit(-fit.slope, fit.rvalue ** 2, (float(start), float(stop)), int(np.count_nonzero(inside)),
                    fit.intercept)


def decay_fit(traj, norm_spec=None, window=(DECAY_WINDOW_START, None)):
    """Exponential decay fit of ||f(t)|| (F^{1,1} by default) along a trajectory."""
    spec = norm_spec or NormSpec(1.0)
    result = decay_fit_series(traj.times, traj.norms(spec), window)
    logger.info("decay fit on [%.3g, %.3g]: rate %.6f, R^2 %.6f", *result.window, result.rate, result.r_squared)
    return result


def spectrum_slope(t, f, floor=ANALYTICITY_FLOOR, k_min=2):
    """Fit log|f^(k)| = c - rho k over the modes k >= k_min above floor."""
    k = np.arange(1, f.n_max + 1)
    magnitudes = np.abs(f.positive_modes)
    active = (k >= k_min) & (magnitudes > floor)
    count = int(np.count_nonzero(active))
    if count < ANALYTICITY_MIN_MODES:
        return AnalyticityFit(float(t), float("nan"), float("nan"), count, floor, True)
    fit = stats.linregress(k[active], np.log(magnitudes[active]))
    return AnalyticityFit(float(t), -fit.slope, fit.intercept, count, floor)


def analyticity_fit(traj, floor=ANALYTICITY_FLOOR, k_min=2):
    """Decay slope rho(t) of the Fourier spectrum at every snapshot (flagged where too few modes are active)."""
    fits = [spectrum_slope(state.t, state.f, floor, k_min) for state in traj.snapshots]
    skipped = sum(fit.flagged for fit in fits)
    if skipped:
        logger.info("analyticity fit skipped at %d of %d snapshots (fewer than %d active modes)",
                    skipped, len(fits), ANALYTICITY_MIN_MODES)
    return fits


def analyticity_frame(fits):
    return pd.DataFrame([fit.__dict__ for fit in fits])


def conservation_report(traj):
    """Worst area drift, vorticity mean and zero-mode residual, plus the pole-centroid offsets."""
    area_drift = max(abs(area(state.f) - np.pi) for state in traj.snapshots)
    vorticity_mean = max((abs(omega.mean) for omega in traj.vorticity if omega is not None), default=0.0)
    residual = max(zero_mode_residual(state.f) for state in traj.snapshots)
    offsets = np.array([centroid_offset(state.f) for state in traj.snapshots])
    pole_centroid = pd.DataFrame({
        "t": traj.times,
        "dx": offsets[:, 0],
        "dy": offsets[:, 1],
        "offset": np.hypot(offsets[:, 0], offsets[:, 1]),
    })
    return ConservationReport(area_drift, vorticity_mean, residual, pole_centroid)


def drift_velocity(traj, tail_norm=DRIFT_TAIL_NORM, min_samples=2):
    """
    Mean velocity of the pole over the trailing part of the trajectory where
    ||f||_{F^{1,1}} stays below tail_norm.

    Raises:
        DiagnosticError: tail shorter than min_samples snapshots or of zero duration
    """
    below = np.array([norm_f11(state.f) < tail_norm for state in traj.snapshots])
    if not below.size or not below[-1]:
        raise DiagnosticError(f"trajectory does not end below ||f||_F11 = {tail_norm:g}")
    start = len(below) - int(np.argmin(below[::-1])) if not below.all() else 0
    tail = traj.snapshots[start:]
    if len(tail) < min_samples or tail[-1].t <= tail[0].t:
        raise DiagnosticError(f"tail below {tail_norm:g} too short ({len(tail)} snapshots)")
    return (tail[-1].c - tail[0].c) / (tail[-1].t - tail[0].t)


def summary(traj, window=(DECAY_WINDOW_START, None), nu=0.1) -> dict:
    """Diagnostics document written at the end of a run; failing fits are reported, not raised."""
    document = {"conservation": conservation_report(traj).as_dict()}
    try:
        fit = decay_fit(traj, window=window)
        document["decay"] = {"rate": fit.rate, "r_squared": fit.r_squared, "window": list(fit.window),
                             "samples": fit.samples, "meets_linear_floor": fit.meets_linear_floor}
    except DiagnosticError as exc:
        document["decay"] = {"error": str(exc)}
    try:
        document["drift_velocity"] = drift_velocity(traj).tolist()
    except DiagnosticError as exc:
        document["drift_velocity"] = {"error": str(exc)}
    try:
        fit_nu = decay_fit_series(traj.times, [record.norm_f11_nu for record in traj.records], window)
        document["decay_nu"] = {"nu": nu, "rate": fit_nu.rate}
    except DiagnosticError as exc:
        document["decay_nu"] = {"error": str(exc)}
    fits = analyticity_fit(traj)
    document["analyticity"] = [
        {"t": fit.t, "rho": None if fit.flagged else fit.rho, "active_modes": fit.active_modes}
        for fit in fits
    ]
    return document

