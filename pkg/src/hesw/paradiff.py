"""Paraproducts, the Bony decomposition, and paradifferential symbols.

Everything is built on the dyadic blocks of the spectral module with the
offset N = 2: the paraproduct keeps the coefficient at least two shells
below the data,

    T_a b = sum_{j >= 2} (S_{j-2} a) (Delta_j b),

and the remainder collects the diagonal pairs |j - j'| <= 1.  Regrouping
the double block sum of the plain product is then exact, so

    ab = T_a b + T_b a + R(a, b)

holds to roundoff, not merely to a paraproduct error estimate.  Symbols
a(x, xi) enter as finite sums of coefficient fields times multipliers,
which is every symbol this problem needs (alpha, beta, the factorization
pair); their quantization factors through the scalar paraproduct applied
to each multiplier image.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import (Grid, apply_multiplier, block_count, bracket, derivative,
                       dyadic_block, l2_norm, linf_norm, low_pass, sobolev_norm)

OFFSET = 2


def paraproduct(grid: Grid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """T_a b: low frequencies of a modulating each dyadic shell of b.

    The x-mean of every summand vanishes identically (the shells carry no
    zero mode and the products cannot alias back to it on this grid), so
    the k=0 bin is zeroed to keep that structure exact in floating point.
    """
    a = grid.check(a)
    b = grid.check(b)
    out = np.zeros_like(np.asarray(b, dtype=float))
    for j in range(OFFSET, block_count(grid)):
        out = out + low_pass(grid, a, j - OFFSET) * dyadic_block(grid, b, j)
    spec = np.fft.rfft(out)
    spec[0] = 0.0
    return np.fft.irfft(spec, grid.n)


def bony_remainder(grid: Grid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """R(a,b): the diagonal part sum_{|j-j'| <= 1} Delta_j a Delta_{j'} b."""
    a = grid.check(a)
    b = grid.check(b)
    count = block_count(grid)
    blocks_a = [dyadic_block(grid, a, j) for j in range(count)]
    blocks_b = [dyadic_block(grid, b, j) for j in range(count)]
    out = np.zeros(grid.n)
    for j in range(count):
        for jp in range(max(0, j - OFFSET + 1), min(count, j + OFFSET)):
            out = out + blocks_a[j] * blocks_b[jp]
    return out


@dataclass
class ParaSymbol:
    """Finite-sum symbol a(x, xi) = sum_r c_r(x) m_r(xi).

    order is the declared growth m in xi; regularity the declared x
    smoothness rho used by the seminorm.  Multipliers must be finite at
    every grid wavenumber (checked on first use).
    """

    grid: Grid
    terms: list = field(default_factory=list)   # (coefficient field, multiplier)
    order: float = 0.0
    regularity: int = 0

    def __post_init__(self):
        if not self.terms:
            raise ValueError("symbol needs at least one c_r(x) m_r(xi) term")
        self.terms = [(self.grid.check(np.asarray(c, dtype=float)), m)
                      for c, m in self.terms]

    def table(self) -> np.ndarray:
        """Dense evaluation a(x_i, k_j) on grid points x signed wavenumbers."""
        k = self.grid.k_signed
        out = np.zeros((self.grid.n, k.size), dtype=complex)
        for c, m in self.terms:
            with np.errstate(all="ignore"):
                vals = np.asarray(m(k), dtype=complex)
            if not np.all(np.isfinite(vals)):
                raise ValueError("multiplier takes a non-finite value on the grid")
            out += c[:, None] * vals[None, :]
        return out

    def seminorm(self) -> float:
        """sup_xi <xi>^{-order} ||a(., xi)||_{W^{rho,inf}} over grid wavenumbers.

        The xi-derivative sup of the symbol class is reported at alpha=0
        only: grid frequencies are bounded, so higher alpha terms are
        comparable and add nothing checkable.
        """
        k = self.grid.k
        weight = bracket(k) ** (-self.order)
        total = 0.0
        for c, m in self.terms:
            vals = np.abs(np.asarray(m(k), dtype=complex))
            w_norm = max(linf_norm(derivative(self.grid, c, i))
                         for i in range(self.regularity + 1))
            total = max(total, float(np.max(weight * vals)) * w_norm)
        if not np.isfinite(total):
            raise ValueError("symbol seminorm is not finite on the grid")
        return total


def paradiff_apply(a: ParaSymbol, u: np.ndarray) -> np.ndarray:
    """T_a u for a finite-sum symbol: paraproduct against each multiplier image.

    For x-independent a this reduces to the high-pass part of a(D)u; for
    xi-independent a it is exactly the scalar paraproduct.
    """
    if not isinstance(a, ParaSymbol):
        raise TypeError("paradiff_apply needs a finite-sum ParaSymbol")
    grid = a.grid
    out = None
    for c, m in a.terms:
        image = apply_multiplier(grid, u, m)
        piece = paraproduct(grid, c, image.real)
        if np.iscomplexobj(image):
            piece = piece + 1j * paraproduct(grid, c, image.imag)
        out = piece if out is None else out + piece
    return out


def factorization_symbols(grid: Grid, eta: np.ndarray):
    """First-order factorization pair for the flattened surface operator:

        a = |xi|/alpha + (beta/(2 alpha)) i xi,
        A = |xi|/alpha - (beta/(2 alpha)) i xi,

    with alpha = 1 + eta_x^2 and beta = -2 eta_x, so that pointwise
    a A = xi^2 / alpha and a - A = (beta/alpha) i xi.
    """
    eta = grid.check(np.asarray(eta, dtype=float))
    eta_x = derivative(grid, eta)
    alpha = 1.0 + eta_x**2
    beta = -2.0 * eta_x
    half = beta / (2.0 * alpha)
    sym_a = ParaSymbol(grid, [(1.0 / alpha, np.abs), (half, lambda xi: 1j * xi)],
                       order=1.0, regularity=1)
    sym_big = ParaSymbol(grid, [(1.0 / alpha, np.abs), (-half, lambda xi: 1j * xi)],
                         order=1.0, regularity=1)
    return sym_a, sym_big


def commutator_experiment(grid: Grid, n_trials: int = 200, seed: int = 0,
                          kmax_a: int | None = None,
                          kmax_f: int | None = None) -> dict:
    """Ratios ||[|D|, A] f||_{L2} / (||A||_{H1} |f|_{Linf}) over random trials.

    A acts by multiplication; the commutator trades one derivative of the
    rough factor f for one derivative of A, so the ratio should stay
    bounded as the grid refines.  Returns the max/mean ratios and the
    trial count; deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    nk = grid.n // 2 + 1
    top_a = kmax_a if kmax_a is not None else grid.n // 8
    top_f = kmax_f if kmax_f is not None else grid.n // 3
    ratios = np.empty(n_trials)
    for t in range(n_trials):
        a_field = _random_phase_field(grid, rng, top_a, decay=1.5)
        f_field = _random_phase_field(grid, rng, top_f, decay=0.75)
        comm = (apply_multiplier(grid, a_field * f_field, np.abs)
                - a_field * apply_multiplier(grid, f_field, np.abs))
        denom = sobolev_norm(grid, a_field, 1.0) * linf_norm(f_field)
        ratios[t] = l2_norm(grid, comm) / denom
    return {"n": grid.n, "trials": n_trials, "seed": seed,
            "max_ratio": float(np.max(ratios)), "mean_ratio": float(np.mean(ratios))}


def _random_phase_field(grid: Grid, rng, kmax: int, decay: float) -> np.ndarray:
    nk = grid.n // 2 + 1
    top = min(kmax, nk - 2)
    spec = np.zeros(nk, dtype=complex)
    ks = np.arange(1, top + 1)
    spec[1:top + 1] = ks**(-decay) * np.exp(1j * rng.uniform(0, 2 * np.pi, top))
    return np.fft.irfft(spec, grid.n) * grid.n
