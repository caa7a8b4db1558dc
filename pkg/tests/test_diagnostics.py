import numpy as np
import pytest

from modules.diagnostics import (
    analyticity_fit,
    analyticity_frame,
    conservation_report,
    decay_fit,
    decay_fit_series,
    drift_velocity,
    spectrum_slope,
    summary,
)
from modules.errors import DiagnosticError
from modules.geometry import BubbleState
from modules.spectral_core import SpectralFunction
from modules.time_integrator import IntegratorConfig, Trajectory, make_record, run


def synthetic_trajectory(rate, times, amplitude=0.01):
    trajectory = Trajectory()
    shape = SpectralFunction.from_cosines(8, [(2, amplitude, 0.0)])
    for t in times:
        state = BubbleState.from_projection(shape * np.exp(-rate * t), t=t)
        trajectory.append(state, make_record(state, np.zeros(2), 0.1))
    return trajectory


@pytest.fixture
def translating_circle(gravity_only):
    return run(BubbleState.circle(8), IntegratorConfig(n_max=8, dt=0.05, t_end=1.0), gravity_only)


def test_decay_fit_recovers_rate():
    trajectory = synthetic_trajectory(3.0, np.linspace(0.0, 2.0, 41))
    fit = decay_fit(trajectory)
    assert fit.rate == pytest.approx(3.0, rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.window == (0.5, 2.0)
    assert fit.meets_linear_floor


def test_decay_fit_window():
    times = np.linspace(0.0, 2.0, 41)
    fit = decay_fit_series(times, np.exp(-2.0 * times), window=(1.0, 1.5))
    assert fit.samples == 11
    assert fit.rate == pytest.approx(2.0)


def test_decay_fit_errors():
    times = np.linspace(0.0, 1.0, 5)
    with pytest.raises(DiagnosticError):
        decay_fit_series(times, np.exp(-times), window=(0.0, None))
    times = np.linspace(0.0, 1.0, 20)
    with pytest.raises(DiagnosticError):
        decay_fit_series(times, np.zeros(20), window=(0.0, None))


def test_spectrum_slope():
    k = np.arange(1, 17)
    f = SpectralFunction.from_positive(16, np.exp(-0.5 * k))
    fit = spectrum_slope(0.0, f)
    assert fit.rho == pytest.approx(0.5, abs=1e-12)
    assert fit.active_modes == 15
    assert not fit.flagged


def test_spectrum_slope_flags_sparse_spectra():
    fit = spectrum_slope(1.0, SpectralFunction.from_cosines(8, [(2, 0.1, 0.0)]))
    assert fit.flagged
    assert np.isnan(fit.rho)


def test_analyticity_frame():
    trajectory = synthetic_trajectory(1.0, np.linspace(0.0, 1.0, 5))
    frame = analyticity_frame(analyticity_fit(trajectory))
    assert len(frame) == 5
    assert frame["flagged"].all()


def test_drift_velocity(translating_circle):
    assert drift_velocity(translating_circle) == pytest.approx([0.0, 1.0], abs=1e-12)


def test_drift_velocity_needs_relaxed_tail():
    trajectory = synthetic_trajectory(0.1, np.linspace(0.0, 1.0, 5))
    with pytest.raises(DiagnosticError):
        drift_velocity(trajectory)


def test_conservation_report(translating_circle):
    report = conservation_report(translating_circle)
    assert report.max_area_drift < 1e-14
    assert report.max_vorticity_mean == 0.0
    assert len(report.pole_centroid) == len(translating_circle)
    assert report.as_dict()["max_pole_centroid_offset"] < 1e-14


def test_summary_reports_failed_fits(translating_circle):
    document = summary(translating_circle)
    assert "error" in document["decay"]
    assert document["drift_velocity"] == pytest.approx([0.0, 1.0], abs=1e-12)
    assert len(document["analyticity"]) == len(translating_circle)
    assert set(document["conservation"]) >= {"max_area_drift", "max_zero_mode_residual"}
