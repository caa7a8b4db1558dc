import numpy as np
import pytest

from modules.errors import ConstraintViolationError, DegenerateCurveError, ParameterError
from modules.geometry import (
    BubbleState,
    PhysicalParams,
    area,
    centroid_moment,
    curvature,
    normalize_initial_data,
    polygon_area,
    reconstruct_curve,
    total_curvature,
    zero_mode_from_projection,
)
from modules.spectral_core import SpectralFunction, derivative, norm_f11


def cosines(n, *terms):
    return SpectralFunction.from_cosines(n, terms)


def test_physical_params_validation():
    assert PhysicalParams(0.5, 2.0).coupling == pytest.approx(1.0)
    with pytest.raises(ParameterError, match=r"A_mu outside \[-1,1\]"):
        PhysicalParams(1.5, 1.0)
    with pytest.raises(ParameterError):
        PhysicalParams(0.0, np.inf)


def test_curvature_of_circles():
    zero = SpectralFunction.zeros(8)
    assert curvature(zero).max_abs_difference(zero.with_mean(1.0)) < 1e-14
    gamma = 0.25
    scaled = curvature(zero.with_mean(gamma))
    assert scaled.max_abs_difference(zero.with_mean(1.0 / (1.0 + gamma))) < 1e-14


def test_curvature_linearization():
    f = cosines(8, (2, 1.0, 0.0))
    eps = 1e-6
    one = SpectralFunction.zeros(8).with_mean(1.0)
    quotient = (curvature(f * eps) - one) / eps
    expected = -derivative(f, 2) - f
    assert norm_f11(quotient - expected) < 1e-4


def test_area_known_values():
    assert area(SpectralFunction.zeros(4)) == pytest.approx(np.pi)
    assert area(cosines(4, (1, 1.0, 0.0))) == pytest.approx(1.5 * np.pi)
    state = BubbleState.from_projection(cosines(8, (2, 0.1, 0.0), (3, 0.05, 0.4)))
    assert area(state.f) == pytest.approx(np.pi, abs=1e-12)


def test_area_matches_inscribed_polygon():
    state = BubbleState.from_projection(cosines(8, (2, 0.1, 0.0)))
    errors = [abs(polygon_area(reconstruct_curve(state, m)) - np.pi) for m in (64, 128)]
    assert errors[1] < errors[0] / 3
    assert errors[1] < 5e-3


def test_centroid_moment_known_values():
    assert np.allclose(centroid_moment(SpectralFunction.zeros(4)), 0.0, atol=1e-15)
    assert np.allclose(centroid_moment(cosines(4, (2, 0.3, 0.0))), 0.0, atol=1e-14)
    eps = 1e-4
    assert centroid_moment(cosines(4, (1, eps, 0.0))) == pytest.approx([3 * np.pi * eps, 0.0], abs=1e-10)


def test_zero_mode_known_values():
    assert zero_mode_from_projection(SpectralFunction.zeros(4)) == 0.0
    pf = cosines(4, (1, np.sqrt(1.5), 0.0))
    assert zero_mode_from_projection(pf) == pytest.approx(-0.5)
    small = cosines(4, (3, 1e-4, 0.0))
    expected = -np.pi * 1e-8 / (4 * np.pi)
    assert zero_mode_from_projection(small) == pytest.approx(expected, rel=1e-6)


def test_zero_mode_rejects_large_projection():
    with pytest.raises(ConstraintViolationError):
        zero_mode_from_projection(cosines(4, (1, np.sqrt(2.0), 0.0)))


def test_state_invariants():
    with pytest.raises(DegenerateCurveError):
        BubbleState(cosines(8, (3, 1.2, 0.0)))
    with pytest.raises(ConstraintViolationError):
        BubbleState(cosines(8, (2, 0.1, 0.0)))
    state = BubbleState.circle(8, c=(1.0, 2.0), t=0.5)
    with pytest.raises(ValueError):
        state.c[0] = 3.0
    assert state.with_time(1.0).t == 1.0


def test_reconstruction_of_translated_circle():
    state = BubbleState.circle(4, c=(0.5, -2.0))
    points = reconstruct_curve(state, 32)
    assert np.allclose(np.hypot(points[:, 0] - 0.5, points[:, 1] + 2.0), 1.0)


def test_gauss_bonnet():
    f = cosines(16, (2, 0.1, 0.0), (3, 0.05, 1.0))
    assert total_curvature(f, 256) == pytest.approx(2 * np.pi, abs=1e-10)


def test_normalization_of_normalized_data_is_identity():
    circle = SpectralFunction.zeros(8)
    f0, shift, scale = normalize_initial_data(circle)
    assert f0.max_abs_difference(circle) == 0.0
    assert np.array_equal(shift, np.zeros(2)) and scale == 1.0


def test_normalization_of_shifted_circle():
    eps = 1e-3
    f0, shift, scale = normalize_initial_data(cosines(16, (1, eps, 0.0)))
    assert shift == pytest.approx([eps, 0.0], abs=1e-7)
    assert norm_f11(f0) < 10 * eps ** 2
    assert scale == pytest.approx(1.0, abs=10 * eps ** 2)


def test_normalization_constraints_and_idempotence():
    shape = cosines(32, (1, 0.02, 0.0), (2, 0.03, -0.5 * np.pi), (3, 0.05, 0.0))
    f0, _, _ = normalize_initial_data(shape)
    assert np.max(np.abs(centroid_moment(f0))) < 1e-12
    assert area(f0) == pytest.approx(np.pi, abs=1e-12)
    again, _, _ = normalize_initial_data(f0)
    assert again.max_abs_difference(f0) < 1e-12


def test_normalization_rejects_degenerate_shape():
    with pytest.raises(DegenerateCurveError):
        normalize_initial_data(cosines(8, (2, 0.95, 0.0)))
