"""
Fourier representation of real 2pi-periodic functions.

A SpectralFunction stores the coefficients f^(k) for k = -N..N with the
convention f(alpha) = sum_k f^(k) exp(i k alpha). Hermitian symmetry is kept
explicitly so that every operator can be written as a plain multiplier on the
full coefficient vector.

Grids are uniform, alpha_j = 2 pi j / m, j = 0..m-1. Nonlinear products are
formed on a grid with m > 3N points and truncated back to N modes.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from modules.errors import AliasingError, ParameterError

logger = logging.getLogger(__name__)

DEFAULT_N_MAX = 128
DEFAULT_DEALIAS_FACTOR = 4


class SpectralFunction:
    """
    Immutable Hermitian coefficient vector of a real periodic function.

    Args:
        coeffs: complex array of length 2 * n_max + 1, index k + n_max holds f^(k)
        hermitian: symmetrize on construction (discards the anti-Hermitian part)
    """

    __slots__ = ("_coeffs", "n_max")
    # numpy scalars defer to __rmul__ instead of broadcasting
    __array_ufunc__ = None

    def __init__(self, coeffs, hermitian=True):
        data = np.array(coeffs, dtype=complex)
        if data.ndim != 1 or data.size % 2 != 1:
            raise ValueError("coefficient vector must have odd length 2*n_max+1")
        if not np.all(np.isfinite(data)):
            raise ValueError("coefficients must be finite")
        if hermitian:
            data = 0.5 * (data + np.conj(data[::-1]))
        data.setflags(write=False)
        self._coeffs = data
        self.n_max = (data.size - 1) // 2

    # Constructors

    @classmethod
    def zeros(cls, n_max):
        return cls(np.zeros(2 * n_max + 1, dtype=complex), hermitian=False)

    @classmethod
    def from_positive(cls, n_max, positive, mean=0.0):
        """Build from f^(0) and the modes k = 1..len(positive)."""
        positive = np.asarray(positive, dtype=complex)
        if positive.size > n_max:
            raise ValueError("more positive modes than n_max")
        data = np.zeros(2 * n_max + 1, dtype=complex)
        data[n_max] = float(np.real(mean))
        data[n_max + 1:n_max + 1 + positive.size] = positive
        data[n_max - positive.size:n_max] = np.conj(positive[::-1])
        return cls(data, hermitian=False)

    @classmethod
    def from_modes(cls, n_max, modes):
        """Build from a {k: f^(k)} mapping with k >= 0."""
        positive = np.zeros(n_max, dtype=complex)
        mean = 0.0
        for k, value in modes.items():
            k = int(k)
            if k < 0 or k > n_max:
                raise ValueError(f"mode {k} outside 0..{n_max}")
            if k == 0:
                mean = float(np.real(value))
            else:
                positive[k - 1] = value
        return cls.from_positive(n_max, positive, mean)

    @classmethod
    def from_cosines(cls, n_max, terms, mean=0.0):
        """Sum of amplitude * cos(k alpha + phase) over (k, amplitude, phase) triples."""
        positive = np.zeros(n_max, dtype=complex)
        for k, amplitude, phase in terms:
            k = int(k)
            if k < 1 or k > n_max:
                raise ValueError(f"mode {k} outside 1..{n_max}")
            positive[k - 1] += 0.5 * amplitude * np.exp(1j * phase)
        return cls.from_positive(n_max, positive, mean)

    # Accessors

    @property
    def coeffs(self):
        return self._coeffs

    @property
    def wavenumbers(self):
        return np.arange(-self.n_max, self.n_max + 1)

    @property
    def mean(self):
        return float(self._coeffs[self.n_max].real)

    @property
    def positive_modes(self):
        return self._coeffs[self.n_max + 1:].copy()

    def mode(self, k):
        if abs(k) > self.n_max:
            return 0j
        return complex(self._coeffs[k + self.n_max])

    def with_mean(self, value):
        data = self._coeffs.copy()
        data[self.n_max] = float(value)
        return SpectralFunction(data, hermitian=False)

    def with_coeffs(self, data):
        return SpectralFunction(data)

    def resized(self, n_max):
        """Truncate or zero-pad to a new mode cutoff."""
        if n_max == self.n_max:
            return self
        data = np.zeros(2 * n_max + 1, dtype=complex)
        keep = min(n_max, self.n_max)
        data[n_max - keep:n_max + keep + 1] = self._coeffs[self.n_max - keep:self.n_max + keep + 1]
        return SpectralFunction(data, hermitian=False)

    def __call__(self, alpha):
        """Evaluate by direct synthesis at arbitrary angles."""
        alpha = np.asarray(alpha, dtype=float)
        phases = np.exp(1j * np.multiply.outer(alpha, self.wavenumbers))
        return (phases @ self._coeffs).real

    # Arithmetic

    def _aligned(self, other):
        if not isinstance(other, SpectralFunction):
            return NotImplemented
        n = max(self.n_max, other.n_max)
        return self.resized(n)._coeffs, other.resized(n)._coeffs

    def __add__(self, other):
        pair = self._aligned(other)
        if pair is NotImplemented:
            return pair
        return SpectralFunction(pair[0] + pair[1], hermitian=False)

    def __sub__(self, other):
        pair = self._aligned(other)
        if pair is NotImplemented:
            return pair
        return SpectralFunction(pair[0] - pair[1], hermitian=False)

    def __mul__(self, scalar):
        if not np.isscalar(scalar) or np.iscomplexobj(scalar):
            return NotImplemented
        return SpectralFunction(self._coeffs * float(scalar), hermitian=False)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def __neg__(self):
        return SpectralFunction(-self._coeffs, hermitian=False)

    def __repr__(self):
        return f"SpectralFunction(n_max={self.n_max}, mean={self.mean:.3e})"

    def max_abs_difference(self, other):
        a, b = self._aligned(other)
        return float(np.max(np.abs(a - b)))


@dataclass(frozen=True)
class NormSpec:
    """Weight e^{nu |k| t} |k|^s of the Wiener norm."""

    s: float = 0.0
    nu: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        if self.s < 0 or self.nu < 0 or self.t < 0:
            raise ParameterError(f"norm parameters must be non-negative, got {self}")

    def weights(self, k):
        k = np.abs(np.asarray(k, dtype=float))
        return np.exp(self.nu * k * self.t) * k ** self.s


def wiener_norm(f, spec=None, homogeneous=True):
    """
    Weighted l1 norm of the Fourier coefficients.

    Args:
        f: SpectralFunction
        spec: NormSpec (defaults to s = 0, nu = 0)
        homogeneous: drop |f^(0)| when True

    Returns:
        float: sum_{k != 0} e^{nu|k|t} |k|^s |f^(k)| (+ |f^(0)|)
    """
    spec = spec or NormSpec()
    k = f.wavenumbers
    nonzero = k != 0
    total = float(np.sum(spec.weights(k[nonzero]) * np.abs(f.coeffs[nonzero])))
    if not homogeneous:
        total += abs(f.coeffs[f.n_max])
    return total


def norm_f11(f, nu=0.0, t=0.0):
    return wiener_norm(f, NormSpec(1.0, nu, t))


def _apply_multiplier(f, multiplier):
    return SpectralFunction(f.coeffs * multiplier, hermitian=False)


def hilbert(f):
    """Hilbert transform, multiplier -i sgn(k)."""
    return _apply_multiplier(f, -1j * np.sign(f.wavenumbers))


def lambda_op(f):
    """|d/dalpha|, multiplier |k|."""
    return _apply_multiplier(f, np.abs(f.wavenumbers).astype(complex))


def derivative(f, order=1):
    if order < 1:
        raise ParameterError("derivative order must be >= 1")
    return _apply_multiplier(f, (1j * f.wavenumbers) ** order)


def project_mean_zero(f):
    return f.with_mean(0.0)


def multiply_by_cos(f):
    """Exact product with cos(alpha), truncated to the same cutoff."""
    padded = np.concatenate(([0j], f.coeffs, [0j]))
    return SpectralFunction(0.5 * (padded[:-2] + padded[2:]), hermitian=False)


def multiply_by_sin(f):
    """Exact product with sin(alpha), truncated to the same cutoff."""
    padded = np.concatenate(([0j], f.coeffs, [0j]))
    return SpectralFunction((padded[:-2] - padded[2:]) / 2j, hermitian=False)


# Grids

def grid_size(n_max, factor=DEFAULT_DEALIAS_FACTOR):
    """Even collocation size with m > 3 n_max (dealiased quadratic products)."""
    m = max(int(np.ceil(factor * n_max)), 3 * n_max + 2, 16)
    return m + (m % 2)


def grid_points(m):
    return 2.0 * np.pi * np.arange(m) / m


def _check_resolution(n_max, m):
    if m < 2 * n_max + 1:
        raise AliasingError(f"grid of {m} points cannot resolve {n_max} modes (need >= {2 * n_max + 1})")


def to_grid(f, m, shift=0.0):
    """
    Samples f(2 pi j / m + shift), j = 0..m-1.

    Raises:
        AliasingError: when m < 2 n_max + 1
    """
    _check_resolution(f.n_max, m)
    k = f.wavenumbers
    spectrum = np.zeros(m, dtype=complex)
    coeffs = f.coeffs if shift == 0.0 else f.coeffs * np.exp(1j * k * shift)
    spectrum[k % m] = coeffs
    return (sp_fft.ifft(spectrum) * m).real


def from_grid(samples, n_max):
    """Coefficients |k| <= n_max of real samples on the uniform grid."""
    samples = np.asarray(samples, dtype=float)
    m = samples.shape[-1]
    _check_resolution(n_max, m)
    spectrum = sp_fft.fft(samples) / m
    k = np.arange(-n_max, n_max + 1)
    return SpectralFunction(spectrum[k % m])


def product(f, g, m=None):
    """Dealiased product of two functions, truncated to the larger cutoff."""
    n = max(f.n_max, g.n_max)
    m = m or grid_size(n)
    if m <= 3 * n:
        raise AliasingError(f"product grid of {m} points aliases {n} modes (need > {3 * n})")
    return from_grid(to_grid(f, m) * to_grid(g, m), n)


def interpolation_check(f, s1, s2, theta, nu=0.0, t=0.0):
    """
    Both sides of the Wiener interpolation inequality.

    Returns:
        tuple: (||f||_{s}, ||f||_{s1}^theta ||f||_{s2}^(1-theta)) with
        s = theta s1 + (1 - theta) s2
    """
    if not 0.0 <= theta <= 1.0:
        raise ParameterError(f"theta={theta} outside [0, 1]")
    if not 0.0 <= s1 <= s2:
        raise ParameterError(f"need 0 <= s1 <= s2, got s1={s1}, s2={s2}")
    s = theta * s1 + (1.0 - theta) * s2
    lhs = wiener_norm(f, NormSpec(s, nu, t))
    rhs = wiener_norm(f, NormSpec(s1, nu, t)) ** theta * wiener_norm(f, NormSpec(s2, nu, t)) ** (1.0 - theta)
    return lhs, rhs


def l2_norm_squared(f):
    """||f||^2 in L2(T) by Parseval."""
    return float(2.0 * np.pi * np.sum(np.abs(f.coeffs) ** 2))


def random_function(n_max, rng, amplitude=1.0, decay=0.0, mean=0.0):
    """Random real function with |f^(k)| ~ amplitude * exp(-decay k)."""
    k = np.arange(1, n_max + 1)
    positive = (rng.standard_normal(n_max) + 1j * rng.standard_normal(n_max)) * amplitude * np.exp(-decay * k)
    return SpectralFunction.from_positive(n_max, positive, mean)
