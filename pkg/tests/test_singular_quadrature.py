import numpy as np
import pytest

from modules.errors import ParameterError, QuadratureError, SingularNodeError
from modules.singular_quadrature import (
    ORACLE_I1_BOUND,
    ORACLE_I2_BOUND,
    OracleIndex,
    delta_beta,
    delta_beta_multiplier,
    nonlinear_fourier_check,
    nonlinear_term,
    nonlinear_term_bound_check,
    oracle_I1,
    oracle_I2,
    oracle_pair_I1,
    oracle_pair_table,
    product_distribution,
    pv_integral,
    quadrature_I1,
    quadrature_I2,
    quadrature_rule,
    translation_table,
)
from modules.spectral_core import SpectralFunction, derivative, grid_points, random_function


def test_nodes_are_symmetric_and_avoid_zero():
    rule = quadrature_rule(64)
    assert np.allclose(rule.nodes, -rule.nodes[::-1], atol=1e-15)
    assert np.min(np.abs(rule.nodes)) == pytest.approx(np.pi / 64)
    assert rule.weights.sum() == pytest.approx(2 * np.pi)


def test_odd_node_count_is_rejected():
    with pytest.raises(QuadratureError):
        quadrature_rule(7)


def test_pv_of_constant_and_odd_kernel():
    rule = quadrature_rule(256)
    assert pv_integral(np.full(256, 0.5), rule) == pytest.approx(np.pi, abs=1e-13)
    odd = 1.0 / (2.0 * np.tan(0.5 * rule.nodes))
    assert abs(pv_integral(odd, rule)) < 1e-12


def test_pv_rejects_bad_samples():
    rule = quadrature_rule(16)
    with pytest.raises(QuadratureError):
        pv_integral(np.ones(8), rule)
    samples = np.ones(16)
    samples[3] = np.nan
    with pytest.raises(QuadratureError):
        pv_integral(samples, rule)


def test_translation_table_matches_direct_evaluation(rng):
    f = random_function(6, rng, amplitude=0.1)
    m = 32
    table = translation_table(f, m)
    alpha = grid_points(m)[:, None]
    beta = quadrature_rule(m).nodes[None, :]
    assert np.max(np.abs(table - f(alpha - beta))) < 1e-13


def test_delta_beta_of_constant_vanishes():
    f = SpectralFunction.zeros(4).with_mean(2.5)
    assert delta_beta(f, np.linspace(0, 6, 7), 0.3) == pytest.approx(np.zeros(7), abs=1e-15)


def test_delta_beta_multiplier():
    f = SpectralFunction.from_cosines(4, [(3, 1.0, 0.0)])
    alpha = np.linspace(0, 2 * np.pi, 9)
    for beta in (0.2, -1.1, 2.9):
        multiplier = delta_beta_multiplier(3, beta)
        expected = (multiplier * np.exp(3j * alpha)).real
        assert np.allclose(delta_beta(f, alpha, beta), expected, atol=1e-14)
        closed = 1j * np.exp(-1.5j * beta) * np.sin(1.5 * beta) / np.sin(0.5 * beta)
        assert multiplier == pytest.approx(closed)


def test_delta_beta_small_angle_limit(rng):
    f = random_function(5, rng, amplitude=0.2)
    slope = derivative(f, 1)
    for alpha in (0.0, 0.7, 4.0):
        assert abs(delta_beta(f, alpha, 1e-6) - slope(alpha)) < 1e-5


def test_delta_beta_rejects_zero_angle():
    f = SpectralFunction.from_cosines(4, [(1, 1.0, 0.0)])
    for beta in (0.0, 2 * np.pi, -2 * np.pi, 4 * np.pi, 6 * np.pi + 1e-13):
        with pytest.raises(SingularNodeError):
            delta_beta(f, 0.3, beta)
    with pytest.raises(SingularNodeError):
        delta_beta(f, 0.3, np.array([0.5, 2 * np.pi]))
    assert np.isfinite(delta_beta(f, 0.3, 2 * np.pi - 1e-6))


def test_delta_beta_is_antiperiodic_and_tends_to_derivative():
    f = SpectralFunction.from_cosines(4, [(1, 1.0, 0.0)])
    alpha = np.linspace(0, 6, 7)
    assert np.allclose(delta_beta(f, alpha, 0.4 + 2 * np.pi), -delta_beta(f, alpha, 0.4), atol=1e-13)
    assert np.allclose(delta_beta(f, alpha, 1e-7), -np.sin(alpha), atol=1e-6)


def test_oracle_closed_forms():
    assert oracle_I1(OracleIndex(1)) == pytest.approx(np.pi, abs=1e-15)
    assert oracle_I1(OracleIndex(0)) == 0.0
    assert oracle_I1(OracleIndex(2)) == pytest.approx(4.0, abs=1e-15)
    assert oracle_I2(OracleIndex(3)) == pytest.approx(10.0 / 3.0, abs=1e-14)


def test_oracle_rejects_zero_factor():
    with pytest.raises(ParameterError):
        OracleIndex(3, (2, 0))


def test_pair_table_matches_recursion():
    k = np.arange(-12, 13)
    for shift in (0, 1, 4, 9):
        table = oracle_pair_table(k, np.full(k.size, shift))
        recursion = [oracle_pair_I1(kk, shift) for kk in k]
        assert np.allclose(table, recursion, atol=1e-13)


def test_product_distribution_is_symmetric_probability():
    shifts, weights = product_distribution((2, 3, -4))
    assert weights.sum() == pytest.approx(1.0)
    assert np.allclose(weights, weights[::-1])
    assert np.array_equal(shifts, -shifts[::-1])


@pytest.mark.parametrize(
    "idx",
    [
        OracleIndex(4, (1,)),
        OracleIndex(5, (2, 3)),
        OracleIndex(-3, (2, -2)),
        OracleIndex(7, (4, 5, 1)),
        OracleIndex(12, (9,)),
    ],
)
def test_quadrature_matches_oracle(idx):
    assert quadrature_I1(idx) == pytest.approx(oracle_I1(idx), abs=1e-10)
    assert quadrature_I2(idx) == pytest.approx(oracle_I2(idx), abs=1e-10)


def test_oracle_bounds_on_pairs():
    k, shift = np.meshgrid(np.arange(-40, 41), np.arange(-40, 41))
    k, shift = k.ravel(), shift.ravel()
    first = np.abs(oracle_pair_table(k, shift))
    second = np.abs(0.5 * (oracle_pair_table(k, shift + 1) + oracle_pair_table(k, shift - 1)))
    assert first.max() <= ORACLE_I1_BOUND * (1 + 1e-12)
    assert second.max() <= ORACLE_I2_BOUND * (1 + 1e-12)


def test_translated_cosine_against_sine_kernel():
    f = SpectralFunction.from_cosines(1, [(1, 1.0, 0.0)])
    result = nonlinear_term([f], 1)
    expected = SpectralFunction.from_cosines(1, [(1, 4.0, -0.5 * np.pi)])
    assert result.max_abs_difference(expected) < 1e-12


def test_difference_quotient_against_sine_kernel():
    f = SpectralFunction.from_cosines(1, [(1, 1.0, 0.0)])
    result = nonlinear_term([f], 0)
    assert result.max_abs_difference(f * np.pi) < 1e-12


@pytest.mark.parametrize("l", [0, 1, 2])
@pytest.mark.parametrize("kernel, constant", [("sin", ORACLE_I1_BOUND), ("tan", ORACLE_I2_BOUND)])
def test_convolution_estimate_per_mode(rng, l, kernel, constant):
    f_list = [random_function(4, rng, amplitude=0.1, decay=0.3) for _ in range(2)]
    observed, bound = nonlinear_fourier_check(f_list, l, kernel)
    assert np.all(observed <= constant * bound * (1 + 1e-10) + 1e-14)


def test_norm_estimate(rng):
    f_list = [random_function(4, rng, amplitude=0.1) for _ in range(3)]
    for s in (0.0, 0.5, 1.0):
        lhs, rhs = nonlinear_term_bound_check(f_list, 1, s=s)
        assert lhs <= ORACLE_I1_BOUND * rhs * (1 + 1e-10)


def test_nonlinear_term_rejects_bad_arguments():
    f = SpectralFunction.from_cosines(2, [(1, 1.0, 0.0)])
    with pytest.raises(ParameterError):
        nonlinear_term([f], 2)
    with pytest.raises(ParameterError):
        nonlinear_term([f], 0, kernel="cot")
    with pytest.raises(ParameterError):
        nonlinear_term_bound_check([f], 0, s=1.5)
