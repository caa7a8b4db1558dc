import numpy as np
import pytest

from modules.errors import ParameterError
from modules.geometry import PhysicalParams
from modules.linear_theory import (
    DuhamelPropagator,
    build_diagonalizer,
    build_system,
    diagonalization_residual,
    duhamel_propagate,
    eigenvalues,
    inverse_defect,
    matrix_exponential_oracle,
    operator_norms,
    phi_functions,
    semigroup_apply,
    semigroup_smoothing_constant,
)
from modules.spectral_core import NormSpec, SpectralFunction, random_function


def cosines(n, *terms):
    return SpectralFunction.from_cosines(n, terms)


def test_eigenvalues():
    assert eigenvalues([1, 2, 3]) == pytest.approx([1.0, 6.0, 24.0])
    assert eigenvalues([0, -2]) == pytest.approx([0.0, 6.0])


def test_system_coefficients(coupled):
    system = build_system(8, coupled)
    assert system.b[1] == pytest.approx(1j * coupled.coupling * 2)
    assert system.matrix[1, 2] == system.b[1]
    assert system.matrix[2, 2] == -24.0
    assert build_system(8, PhysicalParams(1.0, 3.0)).decoupled
    with pytest.raises(ParameterError):
        build_system(1, coupled)


def test_left_eigenvector_entry():
    pair = build_diagonalizer(build_system(6, PhysicalParams(0.0, 1.0)))
    assert pair.s_inv[1, 2] == pytest.approx(1j / 9)


@pytest.mark.parametrize("coupling", [0.5, 2.0, 4.0])
def test_diagonalization(coupling):
    system = build_system(32, PhysicalParams(0.0, coupling))
    pair = build_diagonalizer(system)
    assert inverse_defect(pair) < 1e-12
    assert diagonalization_residual(system, pair) < 1e-10


def test_published_variant_misses_first_row(coupled):
    system = build_system(16, coupled)
    pair = build_diagonalizer(system, "published")
    assert diagonalization_residual(system, pair, first_row=2) < 1e-10
    assert diagonalization_residual(system, pair, first_row=1) >= coupled.coupling * (1 - 1e-12)


def test_unknown_variant_is_rejected(coupled):
    with pytest.raises(ParameterError):
        build_diagonalizer(build_system(4, coupled), "other")


def test_extended_precision_above_threshold():
    system = build_system(128, PhysicalParams(0.0, 4.0))
    pair = build_diagonalizer(system)
    assert pair.s_mat.dtype == np.complex128
    assert inverse_defect(pair) < 1e-12


def test_operator_norms_are_stable_in_n():
    params = PhysicalParams(0.0, 2.0)
    small = operator_norms(build_diagonalizer(build_system(32, params)))
    large = operator_norms(build_diagonalizer(build_system(64, params)))
    assert min(small) >= 1.0
    for a, b in zip(small, large):
        assert b == pytest.approx(a, rel=0.01)
    weighted = operator_norms(build_diagonalizer(build_system(32, params)), NormSpec(1.0, 0.1, 1.0))
    assert all(np.isfinite(weighted))


def test_semigroup_known_values():
    f = cosines(4, (2, 1.0, 0.0)).with_mean(0.3)
    decayed = semigroup_apply(f, 1.0)
    assert decayed.max_abs_difference((f.with_mean(0.0) * np.exp(-6.0)).with_mean(0.3)) < 1e-15
    modes = semigroup_apply(np.array([1.0, 1.0]), 0.5)
    assert modes == pytest.approx([np.exp(-0.5), np.exp(-3.0)])
    with pytest.raises(ParameterError):
        semigroup_apply(f, -1.0)


def test_smoothing_constant():
    g0 = cosines(4, (2, 1.0, 0.0))
    assert semigroup_smoothing_constant(g0, 0.0, 50.0) == pytest.approx(4.0 / 3.0)
    with pytest.raises(ParameterError):
        semigroup_smoothing_constant(g0, 2.0, 1.0)


def test_propagation_matches_matrix_exponential(coupled, rng):
    system = build_system(32, coupled)
    pf = random_function(32, rng, decay=0.2)
    propagated = duhamel_propagate(pf, (), 0.01, system)
    assert propagated.max_abs_difference(matrix_exponential_oracle(pf, 0.01, system)) < 1e-9


def test_constant_forcing_is_integrated_exactly():
    system = build_system(4, PhysicalParams(0.0, 0.0))
    forcing = cosines(4, (2, 1.0, 0.0))
    dt = 0.1
    result = duhamel_propagate(SpectralFunction.zeros(4), (forcing,), dt, system)
    assert result.mode(2) == pytest.approx(0.5 * (1 - np.exp(-6 * dt)) / 6)
    with pytest.raises(ParameterError):
        duhamel_propagate(SpectralFunction.zeros(4), (forcing,) * 3, dt, system)


def test_phi_series_matches_closed_form():
    a, dt = 1.0, 0.005
    x = a * dt
    phi1, phi2 = phi_functions(a, dt)
    assert phi1 == pytest.approx(-np.expm1(-x) / a, rel=1e-13)
    assert phi2 == pytest.approx((np.expm1(-x) + x) / (a ** 2 * dt), rel=1e-10)
    zero1, zero2 = phi_functions(0.0, dt)
    assert zero1 == pytest.approx(dt) and zero2 == pytest.approx(dt / 2)


def test_phi_is_continuous_at_series_switch():
    below = phi_functions(1.0, 0.01 * (1 - 1e-9))
    above = phi_functions(1.0, 0.01 * (1 + 1e-9))
    for lo, hi in zip(below, above):
        assert hi == pytest.approx(lo, rel=1e-8)


def test_propagator_rejects_bad_input(coupled):
    system = build_system(4, coupled)
    with pytest.raises(ParameterError):
        DuhamelPropagator(system, 0.0)
    with pytest.raises(ParameterError):
        DuhamelPropagator(system, 0.1).to_diagonal(np.zeros(3))
