"""
Principal-value quadrature on the circle and the closed-form oracle integrals.

The beta integrals are discretized with the half-shifted trapezoid rule
beta_l = 2 pi (l + 1/2) / m - pi, weights 2 pi / m. No node hits beta = 0 and
nodes come in +/- pairs, so odd singular parts cancel exactly and smooth
periodic parts converge spectrally.

Integrands that change sign under beta -> beta + 2 pi (half-integer
frequencies) are integrated by product integration against
1 / (2 sin(beta/2)): the regular factor is expanded with an FFT and each
exponential is integrated exactly.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sp_fft

from modules.cache_utils import cache_quadrature_table
from modules.errors import ParameterError, QuadratureError, SingularNodeError
from modules.spectral_core import (
    NormSpec,
    from_grid,
    grid_size,
    to_grid,
    wiener_norm,
)

logger = logging.getLogger(__name__)

ORACLE_I1_BOUND = 4.0
ORACLE_I2_BOUND = 10.0 / 3.0
DEFAULT_ORACLE_NODES = 4096
SINGULAR_ANGLE_TOL = 1e-12


@dataclass(frozen=True)
class QuadratureRule:
    """Half-shifted trapezoid rule on (-pi, pi)."""

    m: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def half_sine(self):
        """2 sin(beta/2) at the nodes, never zero."""
        return 2.0 * np.sin(0.5 * self.nodes)

    @property
    def sin_half(self):
        return np.sin(0.5 * self.nodes)

    @property
    def cos_half(self):
        return np.cos(0.5 * self.nodes)


@cache_quadrature_table
def quadrature_rule(m):
    if m < 2 or m % 2:
        raise QuadratureError(f"node count must be even and positive, got {m}")
    nodes = 2.0 * np.pi * (np.arange(m) + 0.5) / m - np.pi
    weights = np.full(m, 2.0 * np.pi / m)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(m, nodes, weights)


@cache_quadrature_table
def translation_indices(m):
    """Index table p[j, l] with f(alpha_j - beta_l) = h[p] on the half-shifted grid."""
    j = np.arange(m)[:, None]
    l = np.arange(m)[None, :]
    return (j - l + m // 2) % m


def translation_table(f, m):
    """
    Matrix of f(alpha_j - beta_l) for collocation alpha_j and quadrature beta_l.

    alpha_j - beta_l lands on the grid 2 pi p / m - pi / m, so one shifted
    synthesis plus an index gather gives the whole table.
    """
    shifted = to_grid(f, m, shift=-np.pi / m)
    return shifted[translation_indices(m)]


def delta_beta(f, alpha, beta):
    """
    Difference quotient (f(alpha) - f(alpha - beta)) / (2 sin(beta/2)).

    The backward difference is taken against alpha - beta, so the quotient
    tends to +f'(alpha) as beta -> 0 (for f = cos this is -sin(alpha)).
    It is antiperiodic in beta with period 2 pi.

    Raises:
        SingularNodeError: if some beta lies within 1e-12 of 0 mod 2 pi
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    reduced = np.remainder(beta, 2.0 * np.pi)
    if np.any(np.minimum(reduced, 2.0 * np.pi - reduced) < SINGULAR_ANGLE_TOL):
        raise SingularNodeError("delta_beta evaluated at beta = 0 mod 2pi")
    return (f(alpha) - f(alpha - beta)) / (2.0 * np.sin(0.5 * beta))


def delta_beta_multiplier(k, beta):
    """
    Fourier multiplier of delta_beta: (1 - e^{-i k beta}) / (2 sin(beta/2)),
    equal to i e^{-i k beta/2} sin(k beta/2) / sin(beta/2).
    """
    k = np.asarray(k, dtype=float)
    return (1.0 - np.exp(-1j * k * beta)) / (2.0 * np.sin(0.5 * beta))


def _half_sine_moment(q):
    """pv integral of e^{i q beta} / (2 sin(beta/2)) over (-pi, pi)."""
    q = np.asarray(q)
    top = int(np.max(np.abs(q))) if q.size else 0
    terms = 4.0 * (-1.0) ** np.arange(top) / (2.0 * np.arange(1, top + 1) - 1.0)
    partial = np.concatenate(([0.0], np.cumsum(terms)))
    return 1j * np.sign(q) * partial[np.abs(q)]


@cache_quadrature_table
def _antiperiodic_weights(m):
    q = np.rint(sp_fft.fftfreq(m, 1.0 / m)).astype(int)
    weights = _half_sine_moment(q) * np.exp(-1j * q * (np.pi / m - np.pi)) / m
    # Nyquist mode is not resolved symmetrically
    weights[q == -m // 2] = 0.0
    return weights


def pv_integral(samples, rule=None, antiperiodic=False):
    """
    Principal-value integral over (-pi, pi) of node samples (last axis).

    Args:
        samples: values at the half-shifted nodes
        rule: QuadratureRule matching the last axis (built if omitted)
        antiperiodic: integrand changes sign under beta -> beta + 2 pi

    Returns:
        float or ndarray reduced over the last axis
    """
    samples = np.asarray(samples, dtype=float)
    m = samples.shape[-1]
    rule = rule or quadrature_rule(m)
    if rule.m != m:
        raise QuadratureError(f"rule has {rule.m} nodes, samples have {m}")
    if not np.all(np.isfinite(samples)):
        raise QuadratureError("non-finite integrand sample")
    if not antiperiodic:
        return samples.sum(axis=-1) * (2.0 * np.pi / m)
    regular = samples * rule.half_sine
    spectrum = sp_fft.fft(regular, axis=-1)
    return (spectrum @ _antiperiodic_weights(m)).real


# Oracle integrals

@dataclass(frozen=True)
class OracleIndex:
    k: int
    ks: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "ks", tuple(int(v) for v in self.ks))
        if any(v == 0 for v in self.ks):
            raise ParameterError(f"oracle indices k_j must be nonzero, got {self.ks}")


def _quarter_sine(p):
    # sin(p pi / 2) for integer p without round-off
    return (0.0, 1.0, 0.0, -1.0)[p % 4]


def _base_I1(j):
    """I1(j, 0) = integral of sin(j beta/2) / (2 sin(beta/2))."""
    if j == 0:
        return 0.0
    if j < 0:
        return -_base_I1(-j)
    if j % 2:
        return np.pi
    return 4.0 * sum((-1.0) ** (i + 1) / (2 * i - 1) for i in range(1, j // 2 + 1))


def oracle_pair_I1(k, shift):
    """
    I1(k, A) = integral of sin(k beta/2) cos(A beta/2) / (2 sin(beta/2)).

    Evaluated by the telescoping recursion
    I1(k, A) = I1(k + A, 0) - sum_{n<A} C(A - k - 2n - 1), C(p) = 2 sin(p pi/2)/p, C(0) = pi.
    """
    shift = abs(int(shift))
    k = int(k)
    if k == 0:
        return 0.0
    if k < 0:
        return -oracle_pair_I1(-k, shift)
    total = _base_I1(k + shift)
    for n in range(shift):
        p = shift - k - 2 * n - 1
        total -= np.pi if p == 0 else 2.0 * _quarter_sine(p) / p
    return total


def _base_table(top):
    """I1(j, 0) for j = 0..top."""
    j = np.arange(top + 1)
    even_terms = 4.0 * (-1.0) ** np.arange(top // 2 + 1) / (2.0 * np.arange(1, top // 2 + 2) - 1.0)
    even_partial = np.concatenate(([0.0], np.cumsum(even_terms)))
    return np.where(j % 2 == 1, np.pi, even_partial[j // 2])


def oracle_pair_table(k, shift):
    """Vectorized I1(k, A) via I1(k, A) = (I1(k + A, 0) + I1(k - A, 0)) / 2."""
    k = np.asarray(k, dtype=int)
    shift = np.abs(np.asarray(shift, dtype=int))
    plus = k + shift
    minus = k - shift
    table = _base_table(int(max(np.max(np.abs(plus)), np.max(np.abs(minus)), 1)))
    return 0.5 * (np.sign(plus) * table[np.abs(plus)] + np.sign(minus) * table[np.abs(minus)])


def product_distribution(ks):
    """
    Expand prod_j sin(k_j beta/2) / (k_j sin(beta/2)) into sum_A w_A e^{i A beta/2}.

    Returns:
        tuple: (A values, weights w_A), symmetric in A and summing to 1
    """
    weights = np.array([1.0])
    for kj in ks:
        q = abs(int(kj))
        factor = np.zeros(2 * q - 1)
        factor[::2] = 1.0 / q
        weights = np.convolve(weights, factor)
    half = (weights.size - 1) // 2
    return np.arange(-half, half + 1), weights


def oracle_I1(idx):
    """Closed form of integral sin(k beta/2)/(2 sin(beta/2)) prod_j sin(k_j beta/2)/(k_j sin(beta/2))."""
    shifts, weights = product_distribution(idx.ks)
    live = weights != 0.0
    values = oracle_pair_table(np.full(np.count_nonzero(live), idx.k), shifts[live])
    return float(np.dot(weights[live], values))


def oracle_I2(idx):
    """Same as oracle_I1 with the extra factor cos(beta/2)."""
    shifts, weights = product_distribution(idx.ks)
    live = weights != 0.0
    k = np.full(np.count_nonzero(live), idx.k)
    values = 0.5 * (oracle_pair_table(k, shifts[live] + 1) + oracle_pair_table(k, shifts[live] - 1))
    return float(np.dot(weights[live], values))


def oracle_integrand(idx, beta, with_cosine=False):
    beta = np.asarray(beta, dtype=float)
    half = np.sin(0.5 * beta)
    value = np.sin(0.5 * idx.k * beta) / (2.0 * half)
    for kj in idx.ks:
        value = value * np.sin(0.5 * kj * beta) / (kj * half)
    if with_cosine:
        value = value * np.cos(0.5 * beta)
    return value


def oracle_is_antiperiodic(idx, with_cosine=False):
    flips = (idx.k + 1) + sum(kj + 1 for kj in idx.ks) + (1 if with_cosine else 0)
    return flips % 2 == 1


def quadrature_I1(idx, m=DEFAULT_ORACLE_NODES):
    rule = quadrature_rule(m)
    return float(pv_integral(oracle_integrand(idx, rule.nodes), rule, oracle_is_antiperiodic(idx)))


def quadrature_I2(idx, m=DEFAULT_ORACLE_NODES):
    rule = quadrature_rule(m)
    samples = oracle_integrand(idx, rule.nodes, with_cosine=True)
    return float(pv_integral(samples, rule, oracle_is_antiperiodic(idx, with_cosine=True)))


# Nonlinear estimates

def _kernel_samples(rule, kernel):
    if kernel == "sin":
        return 1.0 / rule.half_sine
    if kernel == "tan":
        return rule.cos_half / rule.half_sine
    raise ParameterError(f"unknown kernel {kernel!r}, expected 'sin' or 'tan'")


def nonlinear_term(f_list, l, kernel="sin", m=None):
    """
    pv integral of prod_{j<l} f_j(alpha-beta) prod_{j>=l} Delta_beta f_j(alpha) K(beta).

    K is 1/(2 sin(beta/2)) for kernel='sin' and 1/(2 tan(beta/2)) for kernel='tan'.
    """
    n = len(f_list)
    if n == 0 or not 0 <= l <= n:
        raise ParameterError(f"need n >= 1 functions and 0 <= l <= n, got n={n}, l={l}")
    n_out = sum(f.n_max for f in f_list)
    m = m or grid_size(n_out)
    rule = quadrature_rule(m)
    integrand = np.ones((m, m))
    for j, fj in enumerate(f_list):
        table = translation_table(fj, m)
        if j < l:
            integrand *= table
        else:
            integrand *= (to_grid(fj, m)[:, None] - table) / rule.half_sine[None, :]
    integrand *= _kernel_samples(rule, kernel)[None, :]
    flips = (n - l) + (1 if kernel == "sin" else 0)
    values = pv_integral(integrand, rule, antiperiodic=bool(flips % 2))
    return from_grid(values, n_out)


def nonlinear_fourier_check(f_list, l, kernel="sin", m=None):
    """
    Per-mode comparison for the convolution estimate.

    Returns:
        tuple: (|I^(k)|, (conv_{j<l} |f_j^| * conv_{j>=l} |k||f_j^|)(k)), k = -n_out..n_out
    """
    result = nonlinear_term(f_list, l, kernel, m)
    bound = np.array([1.0])
    for j, fj in enumerate(f_list):
        magnitude = np.abs(fj.coeffs)
        if j >= l:
            magnitude = magnitude * np.abs(fj.wavenumbers)
        bound = np.convolve(bound, magnitude)
    return np.abs(result.coeffs), bound


def nonlinear_term_bound_check(f_list, l, s=0.0, nu=0.0, t=0.0, kernel="sin", m=None):
    """
    Norm of the nonlinear term against the product-of-norms estimate.

    Returns:
        tuple: (lhs, rhs) with the absolute constant left out of rhs; the
        estimate reads lhs <= 4 rhs for kernel='sin', 10/3 rhs for 'tan'
    """
    if not 0.0 <= s <= 1.0:
        raise ParameterError(f"s={s} outside [0, 1]")
    result = nonlinear_term(f_list, l, kernel, m)
    base = NormSpec(0.0, nu, t)
    one = NormSpec(1.0, nu, t)
    low = [wiener_norm(f, base, homogeneous=False) for f in f_list[:l]]
    high = [wiener_norm(f, one) for f in f_list[l:]]
    if s == 0.0:
        lhs = wiener_norm(result, base, homogeneous=False)
        return lhs, float(np.prod(low) * np.prod(high))

    lhs = wiener_norm(result, NormSpec(s, nu, t))
    rhs = 0.0
    for i, fi in enumerate(f_list[:l]):
        rest = np.prod([v for j, v in enumerate(low) if j != i]) * np.prod(high)
        rhs += wiener_norm(fi, NormSpec(s, nu, t)) * rest
    for i, fi in enumerate(f_list[l:]):
        rest = np.prod(low) * np.prod([v for j, v in enumerate(high) if j != i])
        rhs += wiener_norm(fi, NormSpec(s + 1.0, nu, t)) * rest
    return lhs, float(rhs)
