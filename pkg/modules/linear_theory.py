"""
Linear dynamics around the translating circle in frequency space.

For k >= 1 the linearized equation reads
    d/dt g(k) = -a_k g(k) + b_k g(k+1),
    a_k = k (k^2 - 1 + delta_{1k}),  b_k = i (1 - A_mu) A_rhosigma k,
an upper-bidiagonal system with distinct real diagonal. It is diagonalized
explicitly by its eigenvector matrix S (columns) and S^{-1} (rows of left
eigenvectors), both upper triangular with unit diagonal.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sp_linalg

from modules.cache_utils import cache_linear_operator
from modules.errors import ParameterError
from modules.spectral_core import NormSpec, SpectralFunction

logger = logging.getLogger(__name__)

EXTENDED_PRECISION_THRESHOLD = 64
# phi functions switch to their Taylor series for a * dt below this
PHI_SERIES_THRESHOLD = 1e-2


def eigenvalues(k):
    """a_k = k (k^2 - 1 + delta_{1k}) for k >= 1, mirrored in |k|; a_0 = 0."""
    k = np.abs(np.asarray(k, dtype=float))
    return k * (k ** 2 - 1.0 + (k == 1))


def _coupling(params):
    return params.coupling


@dataclass(frozen=True)
class BidiagonalSystem:
    """Diagonal a_k and superdiagonal b_k, k = 1..n (index k - 1)."""

    n: int
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    coupling: float = 0.0

    @property
    def matrix(self):
        """Upper-bidiagonal M with M_kk = -a_k and M_{k,k+1} = b_k."""
        return np.diag(-self.a.astype(complex)) + np.diag(self.b[:-1], 1)

    @property
    def decoupled(self):
        return self.coupling == 0.0


def build_system(n, params):
    if n < 2:
        raise ParameterError(f"linear system needs n >= 2, got {n}")
    k = np.arange(1, n + 1)
    coupling = _coupling(params)
    a = eigenvalues(k)
    b = 1j * coupling * k
    a.setflags(write=False)
    b.setflags(write=False)
    return BidiagonalSystem(n, a, b, float(coupling))


@dataclass(frozen=True)
class DiagonalizerPair:
    s_mat: np.ndarray = field(repr=False)
    s_inv: np.ndarray = field(repr=False)
    variant: str = "repaired"

    @property
    def n(self):
        return self.s_mat.shape[0]


def _right_eigenvectors(a, b, dtype):
    """S_{k,j} = prod_{l=k}^{j-1} b_l / (a_l - a_j) by a reversed cumulative product per column."""
    n = a.size
    s_mat = np.eye(n, dtype=dtype)
    for j in range(1, n):
        gaps = a[:j] - a[j]
        if np.any(gaps == 0):
            raise ZeroDivisionError("repeated eigenvalue in the bidiagonal system")
        ratios = b[:j] / gaps
        s_mat[:j, j] = np.cumprod(ratios[::-1])[::-1]
    return s_mat


def _left_eigenvectors(a, b, dtype):
    """S^{-1}_{k,j} = prod_{l=k+1}^{j} b_{l-1} / (a_l - a_k) by a cumulative product per row."""
    n = a.size
    s_inv = np.eye(n, dtype=dtype)
    for k in range(n - 1):
        gaps = a[k + 1:] - a[k]
        if np.any(gaps == 0):
            raise ZeroDivisionError("repeated eigenvalue in the bidiagonal system")
        s_inv[k, k + 1:] = np.cumprod(b[k:n - 1] / gaps)
    return s_inv


@cache_linear_operator
def build_diagonalizer(system, variant="repaired"):
    """
    Eigenvector matrices of the bidiagonal system.

    Args:
        system: BidiagonalSystem
        variant: "repaired" uses the eigenvector formulas on every row;
            "published" zeroes the first row beyond the diagonal in both
            matrices, which leaves the k = 1 coupling b_1 g(2) undiagonalized

    Returns:
        DiagonalizerPair (complex128)
    """
    if variant not in ("repaired", "published"):
        raise ParameterError(f"unknown diagonalizer variant {variant!r}")
    dtype = np.clongdouble if system.n > EXTENDED_PRECISION_THRESHOLD else complex
    a = system.a.astype(np.longdouble if dtype is np.clongdouble else float)
    b = system.b.astype(dtype)
    s_mat = _right_eigenvectors(a, b, dtype).astype(complex)
    s_inv = _left_eigenvectors(a, b, dtype).astype(complex)
    if variant == "published":
        s_mat[0, 1:] = 0.0
        s_inv[0, 1:] = 0.0
    s_mat.setflags(write=False)
    s_inv.setflags(write=False)
    return DiagonalizerPair(s_mat, s_inv, variant)


def inverse_defect(pair):
    """max |S S^{-1} - I|."""
    return float(np.max(np.abs(pair.s_mat @ pair.s_inv - np.eye(pair.n))))


def diagonalization_residual(system, pair, first_row=1, matrix=None):
    """
    max |S^{-1} M S - diag(-a)| over rows k >= first_row (1-based).

    Args:
        matrix: operator to diagonalize, defaults to system.matrix; an
            independently assembled matrix catches inconsistent coefficients
    """
    matrix = system.matrix if matrix is None else matrix
    defect = pair.s_inv @ matrix @ pair.s_mat - np.diag(-system.a)
    return float(np.max(np.abs(defect[first_row - 1:])))


def operator_norms(pair, spec=None):
    """
    l1 -> l1 norms (max weighted column sums) of S and S^{-1}.

    With a NormSpec the norm is taken in the weighted l1 space with weights
    e^{nu k t} k^s, i.e. max_j sum_k w_k |S_kj| / w_j.
    """
    k = np.arange(1, pair.n + 1)
    weights = (spec or NormSpec()).weights(k)
    scale = weights[:, None] / weights[None, :]
    s_norm = float(np.max(np.sum(np.abs(pair.s_mat) * scale, axis=0)))
    inv_norm = float(np.max(np.sum(np.abs(pair.s_inv) * scale, axis=0)))
    return s_norm, inv_norm


def semigroup_apply(g, dt):
    """
    Multiply mode k by exp(-a_|k| dt); the mean is left untouched.

    Args:
        g: SpectralFunction or array of positive modes k = 1..len(g)
        dt: non-negative time
    """
    if dt < 0:
        raise ParameterError(f"semigroup time must be non-negative, got {dt}")
    if isinstance(g, SpectralFunction):
        return SpectralFunction(g.coeffs * np.exp(-eigenvalues(g.wavenumbers) * dt), hermitian=False)
    g = np.asarray(g, dtype=complex)
    return g * np.exp(-eigenvalues(np.arange(1, g.size + 1)) * dt)


def semigroup_smoothing_constant(g0, nu, horizon):
    """
    int_0^T ||e^{-tau A} g0||_{F^{4,1}_nu(tau)} dtau / ||g0||_{F^{1,1}}.

    Per mode the tau integral of exp((nu k - a_k) tau) is done exactly.
    """
    k = np.arange(1, g0.n_max + 1)
    modes = np.abs(g0.positive_modes)
    rate = eigenvalues(k) - nu * k
    if np.any(rate <= 0):
        raise ParameterError(f"nu={nu} too large for the dissipation of mode 1")
    time_integral = -np.expm1(-rate * horizon) / rate
    smoothed = 2.0 * np.sum(k ** 4 * modes * time_integral)
    base = 2.0 * np.sum(k * modes)
    return float(smoothed / base) if base else 0.0


def phi_functions(a, dt):
    """
    ETD weights for a linear-in-time forcing over one step:
    phi1 = (1 - e^{-a dt}) / a,  phi2 = (e^{-a dt} - 1 + a dt) / (a^2 dt).
    """
    a = np.asarray(a, dtype=float)
    x = a * dt
    small = x < PHI_SERIES_THRESHOLD
    safe = np.where(small, 1.0, a)
    phi1 = np.where(small, dt * (1.0 - x / 2.0 + x ** 2 / 6.0 - x ** 3 / 24.0 + x ** 4 / 120.0), -np.expm1(-x) / safe)
    phi2 = np.where(
        small,
        dt * (0.5 - x / 6.0 + x ** 2 / 24.0 - x ** 3 / 120.0 + x ** 4 / 720.0),
        (np.expm1(-x) + x) / (safe ** 2 * dt),
    )
    return phi1, phi2


class DuhamelPropagator:
    """
    Exact linear propagation over dt in the diagonal frame y = S^{-1} Pf (k >= 1).

    Args:
        system: BidiagonalSystem of size n_max
        dt: step
        pair: DiagonalizerPair (repaired by default)
    """

    def __init__(self, system, dt, pair=None):
        if dt <= 0:
            raise ParameterError(f"step must be positive, got {dt}")
        self.system = system
        self.dt = float(dt)
        self.pair = pair or build_diagonalizer(system)
        self.decay = np.exp(-system.a * dt)
        self.phi1, self.phi2 = phi_functions(system.a, dt)

    @property
    def n(self):
        return self.system.n

    def to_diagonal(self, g):
        """Positive modes of g in the eigenvector frame."""
        positive = g.positive_modes if isinstance(g, SpectralFunction) else np.asarray(g, dtype=complex)
        if positive.size != self.n:
            raise ParameterError(f"expected {self.n} positive modes, got {positive.size}")
        return self.pair.s_inv @ positive

    def from_diagonal(self, y, mean=0.0):
        return SpectralFunction.from_positive(self.n, self.pair.s_mat @ y, mean)

    def advance(self, y, start=None, end=None):
        """
        One step of y' = -a y + n(t) with n interpolated linearly between
        start and end (constant if end is None, absent if start is None).
        """
        out = self.decay * y
        if start is not None:
            out = out + self.phi1 * start
            if end is not None:
                out = out + self.phi2 * (end - start)
        return out


def duhamel_propagate(pf, nonlinear_history, dt, system, pair=None):
    """
    S e^{-A dt} S^{-1} Pf plus the Duhamel integral of the mean-zero
    nonlinear samples, interpolated linearly in time.

    Args:
        pf: mean-zero SpectralFunction
        nonlinear_history: () for the pure semigroup, (N0,) for a constant
            forcing or (N0, N1) for values at the two ends of the step
        dt: step
        system: BidiagonalSystem with n = pf.n_max
    """
    if len(nonlinear_history) > 2:
        raise ParameterError("at most two nonlinear samples per step")
    propagator = DuhamelPropagator(system, dt, pair)
    y = propagator.to_diagonal(pf)
    samples = [propagator.to_diagonal(term) for term in nonlinear_history]
    y = propagator.advance(y, *samples)
    return propagator.from_diagonal(y)


def matrix_exponential_oracle(pf, dt, system):
    """Positive modes propagated by the dense scaling-and-squaring exponential of M dt."""
    return SpectralFunction.from_positive(system.n, sp_linalg.expm(system.matrix * dt) @ pf.positive_modes)
