"""
Geometry of the polar-parametrized bubble.

The interface is z(alpha) = (1 + f(alpha)) (cos alpha, sin alpha) + c in units
where the rest radius is R = 1 and time is rescaled by R^3 / A_sigma. In
these units the pole prefactor A_rho / A_rhosigma equals A_sigma / R^2 = 1,
so c(t) is used as is.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from modules.errors import (
    ConstraintViolationError,
    DegenerateCurveError,
    NormalizationError,
    ParameterError,
)
from modules.spectral_core import (
    SpectralFunction,
    derivative,
    from_grid,
    grid_points,
    grid_size,
    l2_norm_squared,
    project_mean_zero,
    to_grid,
)

logger = logging.getLogger(__name__)

# Shapes with min(1 + f) below this are far outside the small-data regime
STAR_SHAPE_FLOOR = 0.1
ZERO_MODE_TOLERANCE = 1e-10
NORMALIZATION_TOLERANCE = 1e-13
NORMALIZATION_MAX_ITER = 50


@dataclass(frozen=True)
class PhysicalParams:
    """Viscosity contrast A_mu in [-1, 1] and gravity/capillarity ratio A_rhosigma."""

    A_mu: float = 0.0
    A_rhosigma: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.A_mu) or abs(self.A_mu) > 1.0:
            raise ParameterError("A_mu outside [-1,1]")
        if not np.isfinite(self.A_rhosigma):
            raise ParameterError("A_rhosigma must be finite")

    @property
    def coupling(self):
        """(1 - A_mu) A_rhosigma, the strength of the mode k+1 -> k transfer."""
        return (1.0 - self.A_mu) * self.A_rhosigma


def zero_mode_from_projection(pf):
    """
    Zero mode -1 + sqrt(1 - ||Pf||^2 / 2pi) that keeps the area equal to pi.

    Raises:
        ConstraintViolationError: when ||Pf||^2 / 2pi >= 1
    """
    ratio = l2_norm_squared(project_mean_zero(pf)) / (2.0 * np.pi)
    if ratio >= 1.0:
        raise ConstraintViolationError(f"||Pf||^2/2pi = {ratio:.6g} >= 1, no admissible zero mode")
    # -ratio / (1 + sqrt(1 - ratio)) is the cancellation-free form of -1 + sqrt(1 - ratio)
    return -ratio / (1.0 + np.sqrt(1.0 - ratio))


def zero_mode_residual(f):
    return abs(f.mean - zero_mode_from_projection(f))


def min_radius(f, m=None):
    m = m or grid_size(f.n_max)
    return float(np.min(1.0 + to_grid(f, m)))


@dataclass(frozen=True)
class BubbleState:
    """
    Radial perturbation f, pole position c and time t.

    Construction checks that the curve is a graph over the pole and that the
    zero mode satisfies the area constraint.
    """

    f: SpectralFunction
    c: np.ndarray = field(default_factory=lambda: np.zeros(2))
    t: float = 0.0

    def __post_init__(self):
        c = np.array(self.c, dtype=float).reshape(2)
        c.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "t", float(self.t))
        radius = min_radius(self.f)
        if radius <= 0.0:
            raise DegenerateCurveError(f"min(1+f) = {radius:.3e}, curve is not a graph over the pole")
        residual = zero_mode_residual(self.f)
        if residual > ZERO_MODE_TOLERANCE:
            raise ConstraintViolationError(f"zero-mode constraint violated by {residual:.3e}")

    @classmethod
    def from_projection(cls, pf, c=(0.0, 0.0), t=0.0):
        """State whose zero mode is reconstructed from the mean-zero part pf."""
        pf = project_mean_zero(pf)
        return cls(pf.with_mean(zero_mode_from_projection(pf)), np.asarray(c, dtype=float), t)

    @classmethod
    def circle(cls, n_max, c=(0.0, 0.0), t=0.0):
        return cls(SpectralFunction.zeros(n_max), np.asarray(c, dtype=float), t)

    def with_time(self, t):
        return BubbleState(self.f, self.c, t)


def curvature(f, m=None):
    """
    Dimensionless curvature
    K = [-(1+f) f'' + 2 f'^2 + (1+f)^2] / [f'^2 + (1+f)^2]^{3/2}
    on a dealiased grid, truncated back to n_max modes.

    Raises:
        DegenerateCurveError: if min(1+f) <= 0 or the metric underflows
    """
    samples = curvature_samples(f, m)
    return from_grid(samples, f.n_max)


def curvature_samples(f, m=None):
    m = m or grid_size(f.n_max)
    r = 1.0 + to_grid(f, m)
    if np.min(r) <= 0.0:
        raise DegenerateCurveError(f"min(1+f) = {np.min(r):.3e} on the curvature grid")
    fp = to_grid(derivative(f, 1), m)
    fpp = to_grid(derivative(f, 2), m)
    metric = fp ** 2 + r ** 2
    if np.min(metric) < 1e-300:
        raise DegenerateCurveError("arclength metric underflow")
    return (-r * fpp + 2.0 * fp ** 2 + r ** 2) / metric ** 1.5


def arclength_density(f, m=None):
    m = m or grid_size(f.n_max)
    r = 1.0 + to_grid(f, m)
    fp = to_grid(derivative(f, 1), m)
    return np.sqrt(fp ** 2 + r ** 2)


def total_curvature(f, m=None):
    """Integral of K |z'| d alpha, 2 pi for a simple closed curve."""
    m = m or grid_size(f.n_max)
    return float(np.sum(curvature_samples(f, m) * arclength_density(f, m)) * 2.0 * np.pi / m)


def area(f):
    """(1/2) int (1+f)^2 = pi (1 + f^(0))^2 + (1/2) ||Pf||^2, by Parseval."""
    return float(np.pi * (1.0 + f.mean) ** 2 + 0.5 * l2_norm_squared(project_mean_zero(f)))


def centroid_moment(f, m=None):
    """int (1+f)^3 (cos alpha, sin alpha) d alpha, three times the first area moment."""
    m = m or grid_size(f.n_max)
    cubed = (1.0 + to_grid(f, m)) ** 3
    first = np.fft.fft(cubed)[1] / m
    # int g cos = 2 pi Re g^(1), int g sin = -2 pi Im g^(1)
    return np.array([2.0 * np.pi * first.real, -2.0 * np.pi * first.imag])


def centroid_offset(f, m=None):
    """Centroid of the enclosed region relative to the pole."""
    return centroid_moment(f, m) / (3.0 * area(f))


def reconstruct_curve(state, m):
    """Points z(alpha_j) = (1 + f(alpha_j)) (cos, sin) + c on m uniform angles."""
    alpha = grid_points(m)
    radius = 1.0 + state.f(alpha)
    return np.column_stack((radius * np.cos(alpha), radius * np.sin(alpha))) + state.c


def polygon_area(points):
    """Shoelace area of a closed polygon given as an (m, 2) array."""
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _repolarize(f, shift, m, max_iter=60):
    """
    Polar function of the same curve about the pole moved by `shift`.

    For each target angle theta_j, Newton on alpha solves
    arg(z(alpha) - shift) = theta_j, then the radius is |z(alpha) - shift|.
    """
    fp = derivative(f, 1)
    fine = grid_points(4 * m)
    r_fine = 1.0 + f(fine)
    x = r_fine * np.cos(fine) - shift[0]
    y = r_fine * np.sin(fine) - shift[1]
    fp_fine = fp(fine)
    dx = fp_fine * np.cos(fine) - r_fine * np.sin(fine)
    dy = fp_fine * np.sin(fine) + r_fine * np.cos(fine)
    if np.min(x * dy - y * dx) <= 0.0:
        raise DegenerateCurveError("curve is not star-shaped about the shifted pole")

    theta = grid_points(m)
    alpha = theta.copy()
    for _ in range(max_iter):
        r = 1.0 + f(alpha)
        rp = fp(alpha)
        x = r * np.cos(alpha) - shift[0]
        y = r * np.sin(alpha) - shift[1]
        dx = rp * np.cos(alpha) - r * np.sin(alpha)
        dy = rp * np.sin(alpha) + r * np.cos(alpha)
        mismatch = np.angle(np.exp(1j * (np.arctan2(y, x) - theta)))
        alpha = alpha - mismatch * (x ** 2 + y ** 2) / (x * dy - y * dx)
        if np.max(np.abs(mismatch)) < 1e-15:
            break
    r = 1.0 + f(alpha)
    radius = np.hypot(r * np.cos(alpha) - shift[0], r * np.sin(alpha) - shift[1])
    return from_grid(radius - 1.0, f.n_max)


def normalize_initial_data(shape, m=None, tol=NORMALIZATION_TOLERANCE, max_iter=NORMALIZATION_MAX_ITER):
    """
    Move the pole to the centroid and rescale to unit-circle area.

    The pole update is a Newton step on the first area moment with the
    analytic Jacobian d(moment)/d(pole) = -3 area I; the scale is the exact
    root of the quadratic area functional. Steps are halved when the
    moment residual grows.

    Returns:
        tuple: (f0, applied_shift, applied_scale)

    Raises:
        DegenerateCurveError: shape with min(1+shape) <= 0.1 or a non-star-shaped intermediate
        NormalizationError: no convergence within max_iter Newton steps
    """
    m = m or grid_size(shape.n_max)
    radius = min_radius(shape, m)
    if radius <= STAR_SHAPE_FLOOR:
        raise DegenerateCurveError(f"min(1+f) = {radius:.3e} <= {STAR_SHAPE_FLOOR}, rejected as degenerate")

    moment = centroid_moment(shape, m)
    if np.max(np.abs(moment)) < tol and abs(area(shape) - np.pi) < tol:
        return shape, np.zeros(2), 1.0

    f = shape
    total_shift = np.zeros(2)
    converged = False
    for iteration in range(max_iter):
        moment = centroid_moment(f, m)
        residual = float(np.max(np.abs(moment)))
        if residual < tol:
            converged = True
            break
        step = moment / (3.0 * area(f))
        for _ in range(30):
            candidate = _repolarize(f, step, m)
            if float(np.max(np.abs(centroid_moment(candidate, m)))) < residual:
                break
            step = 0.5 * step
        else:
            raise NormalizationError(f"moment residual {residual:.3e} cannot be reduced at iteration {iteration}")
        f = candidate
        total_shift = total_shift + step
        logger.debug("normalization step %d: moment residual %.3e", iteration, residual)
    if not converged:
        raise NormalizationError(f"Newton normalization did not converge in {max_iter} iterations")

    scale = float(np.sqrt(np.pi / area(f)))
    pf = project_mean_zero(f) * scale
    f0 = pf.with_mean(zero_mode_from_projection(pf))
    if min_radius(f0, m) <= 0.0:
        raise DegenerateCurveError("normalized curve is not a graph over the pole")
    logger.info("initial data normalized: shift=(%.3e, %.3e), scale=%.12f", total_shift[0], total_shift[1], scale)
    return f0, total_shift, scale
