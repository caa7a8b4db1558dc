"""
Normal velocity of the interface in the polar parametrization.

N(f) = I1 + I2 + I3 where I1 carries the pole motion and I2, I3 are the
Birkhoff-Rott contributions of the vortex sheet. N1 is the exact linear
part, assembled from Fourier multipliers, and the remainder N_{>=2} is what
the exponential integrator treats explicitly.
"""

import logging
from dataclasses import dataclass

import numpy as np

from modules.errors import SingularSystemError, VorticityDivergenceError
from modules.geometry import zero_mode_from_projection
from modules.singular_quadrature import translation_table
from modules.spectral_core import (
    SpectralFunction,
    derivative,
    from_grid,
    grid_points,
    grid_size,
    lambda_op,
    multiply_by_cos,
    multiply_by_sin,
    project_mean_zero,
    to_grid,
)
from modules.vorticity_solver import (
    DEFAULT_TOLERANCE,
    VorticityField,
    contour_kernel,
    dense_solve_oracle,
    solve_vorticity,
)

logger = logging.getLogger(__name__)

# Largest cutoff for which the dense solve is an acceptable fallback
DENSE_FALLBACK_MAX_MODES = 128


@dataclass(frozen=True)
class EvolutionRHS:
    n_full: SpectralFunction
    n_linear: SpectralFunction
    n_remainder: SpectralFunction
    c_dot: np.ndarray

    @property
    def projected_remainder(self):
        return project_mean_zero(self.n_remainder)


def c_dot(f, params):
    """
    Pole velocity (1/pi) int f (cos, sin) + (0, A_rhosigma).

    Only the first Fourier mode contributes: (2 Re f^(1), A_rhosigma - 2 Im f^(1)).
    """
    first = f.mode(1)
    return np.array([2.0 * first.real, params.A_rhosigma - 2.0 * first.imag])


def _birkhoff_rott_terms(f, omega, kernel):
    """I2 + I3 at the collocation angles, before division by (1 + f)."""
    m = kernel.m
    shifted_omega = translation_table(omega, m)
    slope = kernel.slope
    # I2: Hilbert-type kernel cos(beta/2) / (2 sin(beta/2)) plus the Delta_beta correction
    i2_kernel = (slope * kernel.delta + kernel.radius * kernel.shifted_radius * kernel.cos_half) / kernel.denominator
    i2 = -np.sum(i2_kernel / kernel.half_sine * shifted_omega, axis=1) / m
    # I3 has a bounded kernel, plain trapezoid with weight 2pi/m and prefactor 1/4pi
    i3_kernel = slope * kernel.shifted_radius / kernel.denominator
    i3 = -0.5 * np.sum(i3_kernel * shifted_omega, axis=1) / m
    return i2 + i3


def evaluate_N(f, omega, cdot, m=None):
    """
    Full nonlinear velocity I1 + I2 + I3.

    The division by (1 + f) is done on the grid before transforming back.

    Args:
        f: admissible interface perturbation
        omega: VorticityField solved at f
        cdot: pole velocity from c_dot(f, params)
        m: grid size (default grid_size(n_max))
    """
    omega = omega.omega if isinstance(omega, VorticityField) else omega
    m = m or grid_size(f.n_max)
    kernel = contour_kernel(f, m)
    alpha = grid_points(m)
    radius = kernel.radius[:, 0]
    slope = kernel.slope[:, 0]

    # q = cdot . tau with tau = (-sin, cos)
    q = -cdot[0] * np.sin(alpha) + cdot[1] * np.cos(alpha)
    dq = -cdot[0] * np.cos(alpha) - cdot[1] * np.sin(alpha)
    i1 = slope * q / radius + dq

    values = i1 + _birkhoff_rott_terms(f, omega, kernel) / radius
    return from_grid(values, f.n_max)


def evaluate_N1(f, cdot, params):
    """
    Linear velocity
    A_rhosigma (1 - A_mu) (|d|(f sin) + d(f cos)) - (|d|^3 f - |d| f)
    - cdot_1 cos - (cdot_2 - A_rhosigma) sin.
    """
    n = f.n_max
    transfer = params.coupling * (lambda_op(multiply_by_sin(f)) + derivative(multiply_by_cos(f), 1))
    dissipation = lambda_op(lambda_op(lambda_op(f))) - lambda_op(f)
    pole = SpectralFunction.from_cosines(
        n, [(1, cdot[0], 0.0), (1, cdot[1] - params.A_rhosigma, -0.5 * np.pi)]
    )
    return transfer - dissipation - pole


def evaluate_N_remainder(f, omega, cdot, params, m=None):
    """N(f) - N1(f), quadratic and higher in f."""
    return evaluate_N(f, omega, cdot, m) - evaluate_N1(f, cdot, params)


def vorticity_with_fallback(f, params, tol=DEFAULT_TOLERANCE, m=None):
    """Neumann solve, falling back to the dense solve when the series diverges at small n_max."""
    try:
        return solve_vorticity(f, params, tol, m)
    except VorticityDivergenceError as exc:
        if f.n_max > DENSE_FALLBACK_MAX_MODES:
            raise
        logger.warning("Neumann series diverged (%s), falling back to dense solve", exc)
        try:
            return dense_solve_oracle(f, params, m)
        except SingularSystemError:
            raise exc


def full_rhs(state, params, tol=DEFAULT_TOLERANCE, m=None):
    """
    Right-hand side of the evolution for a constrained state.

    Returns:
        tuple: (EvolutionRHS, VorticityField)
    """
    f = state.f
    omega = vorticity_with_fallback(f, params, tol, m)
    cdot = c_dot(f, params)
    n_full = evaluate_N(f, omega, cdot, m)
    n_linear = evaluate_N1(f, cdot, params)
    rhs = EvolutionRHS(n_full, n_linear, n_full - n_linear, cdot)
    return rhs, omega


def weighted_mean_identity(f, velocity, m=None):
    """int (1 + f) N dalpha, zero when N conserves the enclosed area."""
    n = max(f.n_max, velocity.n_max)
    m = m or grid_size(n)
    samples = (1.0 + to_grid(f, m)) * to_grid(velocity, m)
    return float(np.sum(samples) * 2.0 * np.pi / m)


def projected_velocity_field(pf, params, tol=DEFAULT_TOLERANCE, m=None):
    """
    Mean-zero velocity of the constrained state with mean-zero part pf.

    Used by the explicit reference scheme, which evolves Pf directly.

    Returns:
        tuple: (velocity, cdot, VorticityField)
    """
    f = pf.with_mean(zero_mode_from_projection(pf))
    omega = vorticity_with_fallback(f, params, tol, m)
    cdot = c_dot(f, params)
    return project_mean_zero(evaluate_N(f, omega, cdot, m)), cdot, omega
