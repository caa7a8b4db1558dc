import json
import os
from pathlib import Path

import numpy as np
import pytest

from modules import contour_evolution
from modules.contour_evolution import (
    c_dot,
    evaluate_N,
    evaluate_N1,
    evaluate_N_remainder,
    full_rhs,
    projected_velocity_field,
    vorticity_with_fallback,
    weighted_mean_identity,
)
from modules.errors import VorticityDivergenceError
from modules.geometry import BubbleState, PhysicalParams
from modules.spectral_core import SpectralFunction, norm_f11, wiener_norm
from modules.vorticity_solver import solve_vorticity, steady_vorticity


def cosines(n, *terms):
    return SpectralFunction.from_cosines(n, terms)


def norm(f):
    return wiener_norm(f, homogeneous=False)


def test_pole_velocity_known_values(gravity_only):
    eps = 1e-3
    assert c_dot(SpectralFunction.zeros(4), gravity_only) == pytest.approx([0.0, 1.0])
    assert c_dot(cosines(4, (1, eps, 0.0)), gravity_only) == pytest.approx([eps, 1.0])
    assert c_dot(cosines(4, (1, eps, -0.5 * np.pi)), gravity_only) == pytest.approx([0.0, 1.0 + eps])


def test_pole_velocity_matches_quadrature(gravity_only):
    f = cosines(6, (1, 0.02, 0.7), (2, 0.01, 0.0))
    alpha = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    samples = f(alpha)
    direct = [np.mean(samples * np.cos(alpha)) * 2, 1.0 + np.mean(samples * np.sin(alpha)) * 2]
    assert c_dot(f, gravity_only) == pytest.approx(direct, abs=1e-15)


@pytest.mark.parametrize("params", [PhysicalParams(0.0, 1.0), PhysicalParams(0.5, 2.0), PhysicalParams(-1.0, 0.3)])
def test_circle_is_stationary(params):
    zero = SpectralFunction.zeros(8)
    velocity = evaluate_N(zero, steady_vorticity(8, params), c_dot(zero, params))
    assert norm(velocity) < 1e-13


def test_weighted_mean_identity(coupled):
    state = BubbleState.from_projection(cosines(16, (2, 0.05, 0.0)))
    rhs, _ = full_rhs(state, coupled)
    assert abs(weighted_mean_identity(state.f, rhs.n_full)) < 1e-9


def test_linear_velocity_is_pure_dissipation_without_gravity():
    params = PhysicalParams(0.0, 0.0)
    for k in (2, 3):
        f = cosines(6, (k, 1.0, 0.0))
        linear = evaluate_N1(f, c_dot(f, params), params)
        assert linear.max_abs_difference(f * -(k ** 3 - k)) < 1e-13


def test_linear_velocity_on_first_mode():
    params = PhysicalParams(0.0, 0.0)
    f = cosines(4, (1, 1.0, 0.0))
    linear = evaluate_N1(f, c_dot(f, params), params)
    assert linear.max_abs_difference(-f) < 1e-14


def test_linear_velocity_couples_neighbouring_modes():
    params = PhysicalParams(0.5, 1.0)
    f = cosines(6, (3, 1.0, 0.0))
    linear = evaluate_N1(f, c_dot(f, params), params)
    assert linear.mode(2) == pytest.approx(1j * params.coupling * 2 * 0.5)
    assert linear.mode(3) == pytest.approx(-24 * 0.5)
    assert linear.mode(4) == pytest.approx(0.0, abs=1e-14)


def test_finite_difference_linearization(coupled):
    f = cosines(8, (2, 1.0, 0.0), (3, 1.0, -0.5 * np.pi))
    linear = evaluate_N1(f, c_dot(f, coupled), coupled)
    errors = []
    for eps in (1e-3, 1e-4, 1e-5):
        g = f * eps
        velocity = evaluate_N(g, solve_vorticity(g, coupled), c_dot(g, coupled))
        errors.append(norm(velocity / eps - linear))
    assert errors[1] < errors[0] / 5
    assert errors[2] < errors[1] / 5


def test_remainder_is_quadratic(coupled):
    f = cosines(8, (2, 1.0, 0.0), (4, 0.5, 1.0))
    sizes = []
    for eps in (1e-2, 1e-3):
        rhs, _ = full_rhs(BubbleState.from_projection(f * eps), coupled)
        sizes.append(norm(rhs.n_remainder))
    assert 50 < sizes[0] / sizes[1] < 200


def test_rhs_splitting(coupled):
    state = BubbleState.from_projection(cosines(8, (2, 0.02, 0.0), (3, 0.01, 0.4)))
    rhs, omega = full_rhs(state, coupled)
    assert norm(rhs.n_full - rhs.n_linear - rhs.n_remainder) < 1e-12
    remainder = evaluate_N_remainder(state.f, omega, rhs.c_dot, coupled)
    assert remainder.max_abs_difference(rhs.n_remainder) < 1e-14
    assert rhs.projected_remainder.mean == 0.0


def test_dense_fallback(coupled, monkeypatch):
    def diverging(*args, **kwargs):
        raise VorticityDivergenceError("forced")

    monkeypatch.setattr(contour_evolution, "solve_vorticity", diverging)
    omega = vorticity_with_fallback(cosines(8, (2, 0.02, 0.0)), coupled)
    assert omega.method == "dense"


def test_projected_velocity_field_is_mean_zero(coupled):
    pf = cosines(8, (2, 0.02, 0.0))
    velocity, cdot, omega = projected_velocity_field(pf, coupled)
    assert velocity.mean == 0.0
    assert cdot == pytest.approx([0.0, coupled.A_rhosigma])
    assert norm_f11(velocity) > 0.0


GOLDEN_RHS = Path(__file__).parent / "data" / "full_rhs_golden.json"
REGENERATE_ENV = "MUSKAT_REGENERATE_GOLDEN"


def golden_state():
    return BubbleState.from_projection(cosines(16, (2, 0.05, 0.0), (3, 0.02, 0.4), (5, 0.005, -1.1)))


def _encode(values):
    return [[float(v.real).hex(), float(v.imag).hex()] for v in np.ravel(values)]


def _decode(pairs):
    return np.array([complex(float.fromhex(re), float.fromhex(im)) for re, im in pairs])


def test_full_rhs_matches_recorded_values(coupled):
    rhs, _ = full_rhs(golden_state(), coupled)
    if os.environ.get(REGENERATE_ENV) or not GOLDEN_RHS.exists():
        GOLDEN_RHS.parent.mkdir(exist_ok=True)
        GOLDEN_RHS.write_text(json.dumps({
            "params": [coupled.A_mu, coupled.A_rhosigma],
            "n_full": _encode(rhs.n_full.coeffs),
            "c_dot": [float(v).hex() for v in rhs.c_dot],
        }, indent=1))
        pytest.skip(f"recorded {GOLDEN_RHS.name}")
    golden = json.loads(GOLDEN_RHS.read_text())
    assert golden["params"] == [coupled.A_mu, coupled.A_rhosigma]
    assert np.max(np.abs(rhs.n_full.coeffs.ravel() - _decode(golden["n_full"]))) < 1e-12
    assert np.array_equal(rhs.c_dot, [float.fromhex(v) for v in golden["c_dot"]])


def test_rhs_is_stable_under_mode_doubling(coupled):
    pf = cosines(16, (2, 0.02, 0.0), (3, 0.01, 0.4))
    velocities = [full_rhs(BubbleState.from_projection(pf.resized(n)), coupled)[0].n_full for n in (16, 32, 64)]
    coarse = norm(velocities[1] - velocities[0].resized(32))
    fine = norm(velocities[2] - velocities[1].resized(64))
    assert coarse < 1e-5
    assert fine < 1e-10
    assert fine < coarse
