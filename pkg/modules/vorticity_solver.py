"""
Vorticity amplitude on the interface.

Solves omega = 2 A_mu D[f](omega) + F[f] where F is the capillary and
gravity forcing and D[f] is the double-layer type operator of the polar
curve. The production path is the Neumann series; a dense collocation solve
is kept as an independent check and as a fallback when the series stalls.

All beta integrals use the half-shifted trapezoid rule of
singular_quadrature on an (m x m) table alpha_j x beta_l.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import fft as sp_fft
from scipy import linalg as sp_linalg

from modules.cache_utils import cache_contour_kernel
from modules.errors import QuadratureError, SingularSystemError, VorticityDivergenceError
from modules.geometry import curvature
from modules.singular_quadrature import quadrature_rule, translation_table
from modules.spectral_core import (
    SpectralFunction,
    derivative,
    from_grid,
    grid_points,
    grid_size,
    lambda_op,
    multiply_by_cos,
    multiply_by_sin,
    norm_f11,
    NormSpec,
    project_mean_zero,
    to_grid,
    wiener_norm,
)

logger = logging.getLogger(__name__)

# ||f||_{F^{1,1}} < ADMISSIBILITY_GATE / (2 |A_mu|) is the heuristic contraction regime
ADMISSIBILITY_GATE = 0.1
DENOMINATOR_FLOOR = 1e-8
DEFAULT_TOLERANCE = 1e-13
MAX_NEUMANN_TERMS = 200
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class VorticityField:
    """Mean-zero vorticity amplitude with the bookkeeping of the solve that produced it."""

    omega: SpectralFunction
    residual: float = 0.0
    iterations: int = 0
    method: str = "direct"
    condition: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "omega", project_mean_zero(self.omega))

    @property
    def mean(self):
        return self.omega.mean


@dataclass(frozen=True)
class ContourKernel:
    """
    Tables of one interface on the alpha x beta grid.

    Rows are collocation angles alpha_j = 2 pi j / m, columns the quadrature
    nodes beta_l. Every array is read-only.
    """

    m: int
    radius: np.ndarray = field(repr=False)            # 1 + f(alpha_j), shape (m, 1)
    shifted_radius: np.ndarray = field(repr=False)    # 1 + f(alpha_j - beta_l)
    slope: np.ndarray = field(repr=False)             # f'(alpha_j), shape (m, 1)
    delta: np.ndarray = field(repr=False)             # Delta_beta f(alpha_j)
    denominator: np.ndarray = field(repr=False)       # Delta^2 + (1+f)(1+f(. - beta))
    sin_half: np.ndarray = field(repr=False)
    cos_half: np.ndarray = field(repr=False)
    half_sine: np.ndarray = field(repr=False)
    d_kernel: np.ndarray = field(repr=False)          # full integrand factor of D[f]

    @property
    def nodes(self):
        return quadrature_rule(self.m).nodes


@cache_contour_kernel
def contour_kernel(f, m):
    """
    Build the kernel tables of f on an m-point grid.

    Raises:
        QuadratureError: if the denominator drops below DENOMINATOR_FLOOR
            or a table entry is not finite
    """
    rule = quadrature_rule(m)
    sin_half = rule.sin_half[None, :]
    cos_half = rule.cos_half[None, :]
    half_sine = rule.half_sine[None, :]

    radius = (1.0 + to_grid(f, m))[:, None]
    shifted_radius = 1.0 + translation_table(f, m)
    slope = to_grid(derivative(f, 1), m)[:, None]
    delta = (radius - shifted_radius) / half_sine
    denominator = delta ** 2 + radius * shifted_radius

    floor = float(np.min(denominator))
    if floor < DENOMINATOR_FLOOR:
        raise QuadratureError(f"kernel denominator {floor:.3e} below {DENOMINATOR_FLOOR:g}")

    numerator = radius * shifted_radius * sin_half + radius * delta - shifted_radius * slope * cos_half
    d_kernel = numerator / denominator / half_sine
    if not np.all(np.isfinite(d_kernel)):
        raise QuadratureError("non-finite entries in the D[f] kernel")

    tables = (radius, shifted_radius, slope, delta, denominator, sin_half, cos_half, half_sine, d_kernel)
    for table in tables:
        table.setflags(write=False)
    return ContourKernel(m, *tables)


def _field_grid(f, g, m):
    n = max(f.n_max, g.n_max)
    return n, (m or grid_size(n))


def _operator_resolution(f, m):
    return m or grid_size(f.n_max)


def apply_D(f, g, kernel=None, m=None):
    """
    D[f](g) at the collocation angles, returned mean-zero.

    Args:
        f: interface perturbation
        g: mean-zero SpectralFunction or VorticityField
        kernel: precomputed ContourKernel of f (built if omitted)
        m: grid size (defaults to grid_size of the larger cutoff)

    Returns:
        VorticityField
    """
    g = g.omega if isinstance(g, VorticityField) else g
    n, m = _field_grid(f, g, kernel.m if kernel is not None else m)
    kernel = kernel or contour_kernel(f, m)
    values = np.sum(kernel.d_kernel * translation_table(g, m), axis=1) / m
    return VorticityField(from_grid(values, n))


def apply_D1(f, g, m=None):
    """
    First variation of D at the circle:
    (1/2pi) pv int (Delta_beta f - f' cos(beta/2)) g(alpha - beta) / (2 sin(beta/2)) dbeta.
    """
    g = g.omega if isinstance(g, VorticityField) else g
    n, m = _field_grid(f, g, m)
    rule = quadrature_rule(m)
    half_sine = rule.half_sine[None, :]
    delta = (to_grid(f, m)[:, None] - translation_table(f, m)) / half_sine
    slope = to_grid(derivative(f, 1), m)[:, None]
    kernel = (delta - slope * rule.cos_half[None, :]) / half_sine
    values = np.sum(kernel * translation_table(g, m), axis=1) / m
    return VorticityField(from_grid(values, n))


def _unit_sine(n_max):
    return SpectralFunction.from_cosines(n_max, [(1, 1.0, -0.5 * np.pi)])


def steady_vorticity(n_max, params):
    """Vorticity of the translating circle, -2 A_rhosigma cos(alpha)."""
    return VorticityField(SpectralFunction.from_cosines(n_max, [(1, -2.0 * params.A_rhosigma, 0.0)]))


def forcing_F(f, params, m=None):
    """F[f] = 2 d/dalpha K(f) - 2 A_rhosigma d/dalpha ((1 + f) sin alpha)."""
    kappa = curvature(f, m)
    lifted_sine = _unit_sine(f.n_max) + multiply_by_sin(f)
    forcing = 2.0 * derivative(kappa, 1) - 2.0 * params.A_rhosigma * derivative(lifted_sine, 1)
    return VorticityField(forcing)


def linear_vorticity(f, params):
    """
    Linear part of omega in f:
    2 A_mu A_rhosigma (d(f sin) - |d|(f cos)) - 2 (d^3 f + d f) - 2 A_rhosigma d(f sin).
    """
    f_sin = multiply_by_sin(f)
    f_cos = multiply_by_cos(f)
    coupling = 2.0 * params.A_mu * params.A_rhosigma * (derivative(f_sin, 1) - lambda_op(f_cos))
    capillary = -2.0 * (derivative(f, 3) + derivative(f, 1))
    gravity = -2.0 * params.A_rhosigma * derivative(f_sin, 1)
    return VorticityField(coupling + capillary + gravity)


def contraction_estimate(f, params):
    return 2.0 * abs(params.A_mu) * norm_f11(f)


def _check_gate(f, params):
    estimate = contraction_estimate(f, params)
    if estimate >= ADMISSIBILITY_GATE:
        logger.warning(
            "2|A_mu| ||f||_F11 = %.3e above the admissibility gate %.2f, Neumann series may diverge",
            estimate, ADMISSIBILITY_GATE,
        )


def vorticity_residual(f, omega, params, kernel=None, forcing=None):
    """||omega - 2 A_mu D[f](omega) - F[f]||_{F^{0,1}} (mean included)."""
    omega = omega.omega if isinstance(omega, VorticityField) else omega
    forcing = forcing or forcing_F(f, params)
    defect = omega - forcing.omega
    if params.A_mu != 0.0:
        defect = defect - 2.0 * params.A_mu * apply_D(f, omega, kernel).omega
    return wiener_norm(defect, homogeneous=False)


def solve_vorticity(f, params, tol=DEFAULT_TOLERANCE, m=None, max_terms=MAX_NEUMANN_TERMS):
    """
    Neumann series sum_n (2 A_mu D[f])^n F[f], truncated once a term is below tol.

    Returns:
        VorticityField with residual and the number of series terms used

    Raises:
        VorticityDivergenceError: the term norm grows three times in a row
            or the series does not settle within max_terms
    """
    forcing = forcing_F(f, params, m)
    if params.A_mu == 0.0:
        return VorticityField(forcing.omega, 0.0, 1, "neumann")

    _check_gate(f, params)
    kernel = contour_kernel(f, _operator_resolution(f, m))
    factor = 2.0 * params.A_mu
    omega = forcing.omega
    term = forcing.omega
    previous = None
    growth = 0
    for count in range(1, max_terms + 1):
        term = factor * apply_D(f, term, kernel).omega
        increment = wiener_norm(term, homogeneous=False)
        omega = omega + term
        if increment < tol:
            break
        growth = growth + 1 if previous is not None and increment > previous else 0
        if growth >= 3:
            raise VorticityDivergenceError(
                f"Neumann terms grew three times in a row (last {increment:.3e}) at 2A_mu={factor:g}"
            )
        previous = increment
    else:
        raise VorticityDivergenceError(f"Neumann series not below {tol:g} after {max_terms} terms")

    residual = vorticity_residual(f, omega, params, kernel, forcing)
    logger.debug("Neumann solve: %d terms, residual %.3e", count + 1, residual)
    return VorticityField(omega, residual, count + 1, "neumann")


def _collocation_matrix(f, kernel):
    """
    Matrix of D[f] on the real basis (Re g^(k), Im g^(k)), k = 1..n.

    D[f](e^{ik.})(alpha_j) = e^{ik alpha_j} (1/m) sum_l K_jl e^{-ik beta_l},
    so one (m x m) by (m x n) product gives every column.
    """
    n, m = f.n_max, kernel.m
    k = np.arange(1, n + 1)
    moments = kernel.d_kernel @ np.exp(-1j * np.outer(kernel.nodes, k)) / m
    images = np.exp(1j * np.outer(grid_points(m), k)) * moments
    # e^{ik} + e^{-ik} and i (e^{ik} - e^{-ik}) are the two real basis functions of mode k
    samples = np.hstack((2.0 * images.real, -2.0 * images.imag))
    spectrum = sp_fft.fft(samples, axis=0)[1:n + 1] / m
    return np.vstack((spectrum.real, spectrum.imag))


def dense_solve_oracle(f, params, m=None, max_condition=MAX_CONDITION):
    """
    Solve (I - 2 A_mu D[f]) omega = F[f] as a dense real system of size 2 n_max.

    Raises:
        SingularSystemError: condition number above max_condition
    """
    forcing = forcing_F(f, params, m)
    if params.A_mu == 0.0:
        return VorticityField(forcing.omega, 0.0, 0, "dense", 1.0)

    n = f.n_max
    kernel = contour_kernel(f, _operator_resolution(f, m))
    system = np.eye(2 * n) - 2.0 * params.A_mu * _collocation_matrix(f, kernel)
    condition = float(np.linalg.cond(system))
    if not np.isfinite(condition) or condition > max_condition:
        raise SingularSystemError(f"collocation matrix condition number {condition:.3e}", condition)

    positive = forcing.omega.positive_modes
    solution = sp_linalg.solve(system, np.concatenate((positive.real, positive.imag)))
    omega = SpectralFunction.from_positive(n, solution[:n] + 1j * solution[n:])
    residual = vorticity_residual(f, omega, params, kernel, forcing)
    logger.debug("dense vorticity solve: n=%d, cond=%.3e, residual %.3e", n, condition, residual)
    return VorticityField(omega, residual, 0, "dense", condition)


def vorticity_bound_ratio(f, omega, params):
    """
    ||omega - omega_0||_{F^{0,1}} / (|A_rhosigma| (1 + A_mu) ||f||_{F^{1,1}} + ||f||_{F^{3,1}}).

    Returns NaN for f = 0.
    """
    omega = omega.omega if isinstance(omega, VorticityField) else omega
    excess = wiener_norm(omega - steady_vorticity(omega.n_max, params).omega)
    scale = abs(params.A_rhosigma) * (1.0 + params.A_mu) * norm_f11(f) + wiener_norm(f, NormSpec(3.0))
    if scale == 0.0:
        return float("nan")
    return excess / scale
