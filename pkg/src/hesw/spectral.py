"""Periodic grid, Fourier multipliers, dyadic blocks, and norms.

Everything downstream (the strip solver, the surface operator G, the
paraproducts, the time steppers) is assembled from the pieces in this
module: a uniform periodic grid standing in for the real line, multiplier
application through the real FFT, a fixed smooth dyadic partition of
unity, and grid-point norms that are exact for trigonometric polynomials.

A real field is a 1-D float64 array of length grid.n sampled at grid.x;
a complex field is the same with complex128 values.  All operations are
pure functions of immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TAU = 2.0 * math.pi


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with n points on an interval of the given length.

    n must be even and at least 8 (powers of two recommended: the FFT is
    fastest and the dyadic shells line up with whole bins).  Wavenumbers
    are 2*pi*j/length; for even n the j = n/2 bin is shared between +-n/2
    (the Nyquist ambiguity handled by apply_multiplier).
    """

    n: int
    length: float = TAU

    def __post_init__(self):
        if self.n < 8 or self.n % 2 != 0:
            raise ValueError(f"grid needs even n >= 8, got n={self.n}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError(f"grid length must be positive, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @cached_property
    def k(self) -> np.ndarray:
        """Nonnegative wavenumbers matching numpy.fft.rfft layout."""
        return TAU / self.length * np.arange(self.n // 2 + 1).astype(float)

    @cached_property
    def k_signed(self) -> np.ndarray:
        """Signed wavenumbers matching numpy.fft.fft layout (Nyquist negative)."""
        return TAU * np.fft.fftfreq(self.n, d=self.dx)

    @property
    def kmax(self) -> float:
        return float(self.k[-1])

    def check(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape != (self.n,):
            raise ValueError(f"field shape {f.shape} does not match grid n={self.n}")
        return f


# ---------------------------------------------------------------------------
# the fixed cutoffs: smoothstep blends, reproducible bit for bit

def smoothstep(t):
    """Quintic smoothstep: 0 for t<=0, 1 for t>=1, C^2 monotone in between."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def cutoff_theta(xi):
    """Even low-frequency weight: 1/4 on |xi|<=1/2, |xi|/(1+|xi|) on |xi|>=1.

    The band 1/2<|xi|<1 is bridged by the smoothstep so that
    1/4 <= theta < 1 everywhere and theta is C^2 and nondecreasing in |xi|.
    """
    a = np.abs(np.asarray(xi, dtype=float))
    return 0.25 + (a / (1.0 + a) - 0.25) * smoothstep(2.0 * a - 1.0)


def symbol_p(xi):
    """Dispersion symbol p = theta^(1/2) (1+xi^4)^(1/2); p(0) = 1/2."""
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(cutoff_theta(xi) * (1.0 + xi**4))


def symbol_q(xi):
    """Packing symbol q = theta^(-1/2) (1+xi^4)^(1/2); q > 0, p*q = 1+xi^4."""
    xi = np.asarray(xi, dtype=float)
    return np.sqrt((1.0 + xi**4) / cutoff_theta(xi))


def hilbert_symbol(xi):
    """-i*sgn(xi) with sgn(0)=0."""
    return -1j * np.sign(np.asarray(xi, dtype=float))


def bracket(xi):
    """Japanese bracket <xi> = (1+xi^2)^(1/2)."""
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(1.0 + xi * xi)


# ---------------------------------------------------------------------------
# multiplier application

def _multiplier_values(grid: Grid, symbol, k: np.ndarray, nyquist: str) -> np.ndarray:
    with np.errstate(all="ignore"):
        m = np.asarray(symbol(k))
    if m.shape != k.shape:
        raise ValueError("symbol must evaluate elementwise on the wavenumber array")
    if not np.all(np.isfinite(m)):
        raise ValueError("symbol takes a non-finite value at a grid wavenumber")
    if nyquist not in ("auto", "zero", "keep"):
        raise ValueError(f"unknown nyquist policy {nyquist!r}")
    return m.astype(complex)


def _nyquist_ambiguous(grid: Grid, symbol) -> bool:
    kn = grid.kmax
    plus = complex(np.asarray(symbol(np.array([kn]))).reshape(-1)[0])
    minus = complex(np.asarray(symbol(np.array([-kn]))).reshape(-1)[0])
    scale = max(abs(plus), abs(minus), 1.0)
    return abs(plus - minus) > 1e-14 * scale


def apply_multiplier(grid: Grid, f: np.ndarray, symbol, nyquist: str = "auto") -> np.ndarray:
    """Apply the Fourier multiplier symbol(xi) to a field.

    Real input uses the half spectrum, which realizes m(-xi) = conj(m(xi))
    (real-to-real operators); complex input uses the full spectrum with the
    symbol evaluated at signed wavenumbers.  The shared Nyquist bin is
    zeroed when the symbol disagrees at +-kmax ("auto"), always ("zero"),
    or never ("keep"): differentiation-type symbols must not leave an
    asymmetric residue in the one bin that cannot tell +k from -k.
    """
    f = grid.check(f)
    if np.iscomplexobj(f):
        m = _multiplier_values(grid, symbol, grid.k_signed, nyquist)
        if nyquist == "zero" or (nyquist == "auto" and _nyquist_ambiguous(grid, symbol)):
            m[grid.n // 2] = 0.0
        return np.fft.ifft(np.fft.fft(f) * m)
    m = _multiplier_values(grid, symbol, grid.k, nyquist)
    if nyquist == "zero" or (nyquist == "auto" and _nyquist_ambiguous(grid, symbol)):
        m[-1] = 0.0
    return np.fft.irfft(np.fft.rfft(f) * m, grid.n)


def derivative(grid: Grid, f: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral d^order/dx^order; the Nyquist bin is always zeroed."""
    if order < 0:
        raise ValueError("derivative order must be >= 0")
    if order == 0:
        return np.array(grid.check(f), copy=True)
    return apply_multiplier(grid, f, lambda xi: (1j * xi) ** order, nyquist="zero")


def hilbert(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Hilbert transform, symbol -i*sgn(xi); annihilates the mean."""
    return apply_multiplier(grid, f, hilbert_symbol)


def abs_d(grid: Grid, f: np.ndarray) -> np.ndarray:
    """|D| f.  Nyquist zeroed so that |D| = H o d/dx holds bin for bin."""
    return apply_multiplier(grid, f, np.abs, nyquist="zero")


def bracket_power(grid: Grid, f: np.ndarray, s: float) -> np.ndarray:
    """<D>^s f, the Bessel-potential smoothing/roughening of order s."""
    return apply_multiplier(grid, f, lambda xi: bracket(xi) ** s)


def harmonic_extension(grid: Grid, psi: np.ndarray, z) -> np.ndarray:
    """e^{z|D|} psi for z <= 0: the decaying harmonic extension, level by level.

    z may be a scalar (returns one field) or a 1-D array of depths
    (returns an array of shape (len(z), n)).  The k=0 mode is unchanged
    at every depth.
    """
    psi = grid.check(psi)
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z_arr > 0):
        raise ValueError("harmonic extension is only defined for z <= 0")
    spec = np.fft.rfft(psi)
    levels = np.fft.irfft(np.exp(np.outer(z_arr, grid.k)) * spec, grid.n)
    return levels[0] if np.isscalar(z) or np.ndim(z) == 0 else levels


def dealias(grid: Grid, f: np.ndarray, fraction: float = 2.0 / 3.0) -> np.ndarray:
    """Zero all modes with |k| above fraction*kmax (2/3 rule by default)."""
    f = grid.check(f)
    cut = fraction * grid.kmax * (1.0 + 1e-12)
    if np.iscomplexobj(f):
        spec = np.fft.fft(f)
        spec[np.abs(grid.k_signed) > cut] = 0.0
        return np.fft.ifft(spec)
    spec = np.fft.rfft(f)
    spec[grid.k > cut] = 0.0
    return np.fft.irfft(spec, grid.n)


# ---------------------------------------------------------------------------
# smooth dyadic partition of unity

def cutoff_chi(xi):
    """Low-pass bump: 1 on |xi|<=1/2, 0 on |xi|>=1, smoothstep in between."""
    a = np.abs(np.asarray(xi, dtype=float))
    return 1.0 - smoothstep(2.0 * a - 1.0)


def shell_phi(xi):
    """Dyadic shell chi(xi/2) - chi(xi), supported on 1/2 < |xi| < 2."""
    xi = np.asarray(xi, dtype=float)
    return cutoff_chi(xi / 2.0) - cutoff_chi(xi)


def block_count(grid: Grid) -> int:
    """Number of dyadic blocks 0..J with sum_j block_j = identity on the grid.

    The telescoping sum chi(xi/2) + sum_{j=1..J} phi(xi/2^j) collapses to
    chi(xi/2^{J+1}), which equals 1 on the whole grid once 2^{J+1} is at
    least 2*kmax; blocks past J vanish identically on the grid.
    """
    return max(0, math.ceil(math.log2(grid.kmax))) + 1


def dyadic_block(grid: Grid, f: np.ndarray, j: int) -> np.ndarray:
    """Littlewood-Paley piece of f.

    Block 0 is the full low-frequency part chi(D/2) (support |xi| < 2);
    block j >= 1 is the shell phi(D/2^j) supported in the open annulus
    2^{j-1} < |xi| < 2^{j+1}.  The blocks sum to the identity exactly.
    """
    if j < 0:
        raise ValueError("block index must be >= 0")
    if j == 0:
        return apply_multiplier(grid, f, lambda xi: cutoff_chi(xi / 2.0))
    scale = 2.0**j
    return apply_multiplier(grid, f, lambda xi: shell_phi(xi / scale))


def low_pass(grid: Grid, f: np.ndarray, j: int) -> np.ndarray:
    """Partial sum of blocks 0..j as the single multiplier chi(D/2^{j+1})."""
    if j < 0:
        return np.zeros_like(f)
    scale = 2.0 ** (j + 1)
    return apply_multiplier(grid, f, lambda xi: cutoff_chi(xi / scale))


# ---------------------------------------------------------------------------
# norms and integrals (grid-point quadrature, exact for trig polynomials)

def integral(grid: Grid, f: np.ndarray):
    total = np.sum(grid.check(f)) * grid.dx
    return complex(total) if np.iscomplexobj(f) else float(total)


def mean(grid: Grid, f: np.ndarray) -> float:
    return integral(grid, f) / grid.length


def l2_norm(grid: Grid, f: np.ndarray) -> float:
    f = grid.check(f)
    return math.sqrt(float(np.sum(np.abs(f) ** 2)) * grid.dx)


def linf_norm(f: np.ndarray) -> float:
    return float(np.max(np.abs(f)))


def _spectral_weights(grid: Grid) -> np.ndarray:
    w = np.full(grid.n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


def sobolev_norm(grid: Grid, f: np.ndarray, s: float) -> float:
    """H^s norm with <k>^s weights; s=0 reproduces the L2 norm exactly."""
    f = grid.check(f)
    if np.iscomplexobj(f):
        spec = np.fft.fft(f)
        weight = bracket(grid.k_signed) ** (2.0 * s)
        total = float(np.sum(weight * np.abs(spec) ** 2))
    else:
        spec = np.fft.rfft(f)
        weight = bracket(grid.k) ** (2.0 * s)
        total = float(np.sum(_spectral_weights(grid) * weight * np.abs(spec) ** 2))
    return math.sqrt(total * grid.length) / grid.n


def ys_norm(grid: Grid, f: np.ndarray, s: float = 0.0) -> float:
    """sup|<D>^s f| + sup|H <D>^s f|: the Hardy-type substitute for W^{s,inf}."""
    g = bracket_power(grid, f, s) if s != 0.0 else grid.check(f)
    return linf_norm(g) + linf_norm(hilbert(grid, g))
