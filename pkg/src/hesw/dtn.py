"""The surface (Dirichlet-to-Neumann) operator G(eta) and its relatives.

G(eta) maps surface data psi to the scaled normal fluid velocity through
the strip solve:

    G(eta) psi = [(1 + eta_x^2) v_z - eta_x v_x] at z = 0,

with the boundary velocities B (vertical) and V (horizontal) recovered
algebraically:

    B = (G psi + eta_x psi_x) / (1 + eta_x^2),   V = psi_x - eta_x B,

so that G psi = B - eta_x V and psi_x = V + eta_x B hold pointwise by
construction.  On the torus G annihilates constants and its output has
zero mean (flux balance); both are enforced exactly, as is the
annihilation of the shared Nyquist bin (the operator treats that bin as
unresolved, consistently with |D|).

Also here: the remainder R(eta) = G(eta) - |D|, two independent inverses
of (Id + G(eta)), the shape derivative of eta -> G(eta)psi, and a
randomized operator-norm probe.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .elliptic import StripField, make_strip_problem, solve_strip, trace_derivatives
from .spectral import Grid, abs_d, apply_multiplier, derivative, l2_norm, sobolev_norm

DEFAULT_DEPTH = 20.0
DEFAULT_NZ = 65


class DtnInversionError(Exception):
    """(Id+G) inversion failed to contract within the iteration budget."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals or [])


@dataclass
class DtnResult:
    g_psi: np.ndarray
    b: np.ndarray
    v: np.ndarray
    psi: np.ndarray
    strip: StripField
    residual: float
    iterations: int


@dataclass
class InversionResult:
    psi: np.ndarray
    g_psi: np.ndarray          # G(eta) applied to the returned psi
    residual: float            # ||psi + G psi - u|| / ||u||
    iterations: int
    dtn: DtnResult             # solve for the returned psi, reusable downstream


# last correction w per strip geometry: warm start for the next solve.
# Purely an accelerator; results change only below solver tolerance.
_WARM: OrderedDict = OrderedDict()
_WARM_MAX = 8


def _project(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Exact zero mean and empty Nyquist bin."""
    spec = np.fft.rfft(f)
    spec[0] = 0.0
    spec[-1] = 0.0
    return np.fft.irfft(spec, grid.n)


def dtn_apply(grid: Grid, eta: np.ndarray, psi: np.ndarray, *,
              depth: float = DEFAULT_DEPTH, nz: int = DEFAULT_NZ,
              tol: float = 1e-10, warm_start: bool = True) -> DtnResult:
    """Apply G(eta) to psi; returns G psi, B, V and the underlying strip field."""
    problem = make_strip_problem(grid, eta, psi, depth=depth, nz=nz)
    key = (grid.n, grid.length, nz, depth)
    x0 = _WARM.get(key) if warm_start else None
    fieldv = solve_strip(problem, tol=tol, x0=x0)
    if warm_start:
        _WARM[key] = fieldv.raw.copy()
        _WARM.move_to_end(key)
        if len(_WARM) > _WARM_MAX:
            _WARM.popitem(last=False)
    vz0, vx0 = trace_derivatives(fieldv)
    g_psi = _project(grid, (1.0 + problem.eta_x**2) * vz0 - problem.eta_x * vx0)
    psi_x = derivative(grid, psi)
    b = (g_psi + problem.eta_x * psi_x) / (1.0 + problem.eta_x**2)
    v = psi_x - problem.eta_x * b
    return DtnResult(g_psi, b, v, np.asarray(psi, dtype=float),
                     fieldv, fieldv.residual, fieldv.iterations)


def dtn_remainder(grid: Grid, eta: np.ndarray, psi: np.ndarray, **opts) -> np.ndarray:
    """R(eta) psi = G(eta) psi - |D| psi (order-zero paralinearization rest)."""
    return dtn_apply(grid, eta, psi, **opts).g_psi - abs_d(grid, psi)


def _inv_one_plus_absd(grid: Grid, f: np.ndarray) -> np.ndarray:
    return apply_multiplier(grid, f, lambda xi: 1.0 / (1.0 + np.abs(xi)))


def invert_id_plus_dtn(grid: Grid, eta: np.ndarray, u: np.ndarray, *,
                       tol: float = 1e-10, max_iter: int = 60,
                       depth: float = DEFAULT_DEPTH, nz: int = DEFAULT_NZ,
                       dtn_tol: float = 1e-10) -> InversionResult:
    """Solve (Id + G(eta)) psi = u by the smoothing fixed point.

    psi_{m+1} = (Id+|D|)^{-1} (u - R(eta) psi_m) starting from
    psi_0 = (Id+|D|)^{-1} u, declared converged once the iterate distance
    drops below tol * ||u||.  One strip solve per iteration; raises
    DtnInversionError when the budget is exhausted (the caller may fall
    back to invert_direct, which handles larger surface slopes).
    """
    u = grid.check(np.asarray(u, dtype=float))
    u_norm = l2_norm(grid, u)
    psi = _inv_one_plus_absd(grid, u)
    if u_norm == 0.0:
        zero = np.zeros(grid.n)
        dtn = dtn_apply(grid, eta, zero, depth=depth, nz=nz, tol=dtn_tol)
        return InversionResult(zero, zero.copy(), 0.0, 0, dtn)
    distances = []
    for it in range(1, max_iter + 1):
        res = dtn_apply(grid, eta, psi, depth=depth, nz=nz, tol=dtn_tol)
        remainder = res.g_psi - abs_d(grid, psi)
        psi_next = _inv_one_plus_absd(grid, u - remainder)
        dist = l2_norm(grid, psi_next - psi)
        distances.append(dist)
        psi = psi_next
        if dist <= tol * u_norm:
            final = dtn_apply(grid, eta, psi, depth=depth, nz=nz, tol=dtn_tol)
            resid = l2_norm(grid, psi + final.g_psi - u) / u_norm
            return InversionResult(psi, final.g_psi, resid, it, final)
    raise DtnInversionError(
        f"fixed point did not contract in {max_iter} iterations "
        f"(last distance {distances[-1]:.3e}, ||u||={u_norm:.3e})",
        residuals=distances)


def invert_direct(grid: Grid, eta: np.ndarray, u: np.ndarray, *,
                  tol: float = 1e-10, max_iter: int = 200,
                  depth: float = DEFAULT_DEPTH, nz: int = DEFAULT_NZ,
                  dtn_tol: float = 1e-10) -> InversionResult:
    """Solve (Id + G(eta)) psi = u by conjugate gradients.

    Id + G is symmetric positive definite; (Id+|D|)^{-1} is the natural
    preconditioner.  Independent of the fixed-point route on purpose: the
    two must agree to solver tolerance, and that agreement is a test.
    """
    u = grid.check(np.asarray(u, dtype=float))
    u_norm = l2_norm(grid, u)
    if u_norm == 0.0:
        zero = np.zeros(grid.n)
        dtn = dtn_apply(grid, eta, zero, depth=depth, nz=nz, tol=dtn_tol)
        return InversionResult(zero, zero.copy(), 0.0, 0, dtn)

    def apply_a(p):
        return p + dtn_apply(grid, eta, p, depth=depth, nz=nz, tol=dtn_tol).g_psi

    psi = _inv_one_plus_absd(grid, u)
    r = u - apply_a(psi)
    z = _inv_one_plus_absd(grid, r)
    p = z.copy()
    rz = float(np.dot(r, z))
    residuals = []
    for it in range(1, max_iter + 1):
        if l2_norm(grid, r) <= tol * u_norm:
            final = dtn_apply(grid, eta, psi, depth=depth, nz=nz, tol=dtn_tol)
            resid = l2_norm(grid, psi + final.g_psi - u) / u_norm
            return InversionResult(psi, final.g_psi, resid, it - 1, final)
        ap = apply_a(p)
        denom = float(np.dot(p, ap))
        if denom <= 0:
            raise DtnInversionError(
                f"cg curvature lost positivity at iteration {it}", residuals)
        alpha = rz / denom
        psi = psi + alpha * p
        r = r - alpha * ap
        residuals.append(l2_norm(grid, r))
        z = _inv_one_plus_absd(grid, r)
        rz_new = float(np.dot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise DtnInversionError(
        f"cg did not reach tol {tol:.1e} in {max_iter} iterations", residuals)


def shape_derivative(grid: Grid, eta: np.ndarray, delta: np.ndarray,
                     psi: np.ndarray, **opts) -> np.ndarray:
    """Derivative of eta -> G(eta)psi in the direction delta:

        dG(eta)[delta] psi = -G(eta)(delta * B) - d/dx (delta * V).
    """
    res = dtn_apply(grid, eta, psi, **opts)
    g_db = dtn_apply(grid, eta, delta * res.b, **opts).g_psi
    return -g_db - derivative(grid, delta * res.v)


def cancellation_check(grid: Grid, eta: np.ndarray, psi: np.ndarray, **opts) -> float:
    """Normalized residual of the structural identity G(eta)B = -V_x."""
    res = dtn_apply(grid, eta, psi, **opts)
    gb = dtn_apply(grid, eta, res.b, **opts).g_psi
    return l2_norm(grid, gb + derivative(grid, res.v)) / sobolev_norm(grid, psi, 1.0)


def estimate_operator_norm(grid: Grid, op, s_in: float, s_out: float,
                           n_samples: int = 20, seed: int = 0,
                           kmax: int | None = None) -> float:
    """Randomized lower bound for ||op||_{H^{s_in} -> H^{s_out}}.

    Band-limited random inputs (reproducible from the seed); this probes
    stability of operator norms under refinement, never sharp constants.
    """
    rng = np.random.default_rng(seed)
    nk = grid.n // 2 + 1
    top = (grid.n // 4) if kmax is None else min(kmax, nk - 1)
    best = 0.0
    for _ in range(n_samples):
        spec = np.zeros(nk, dtype=complex)
        ks = np.arange(1, top + 1)
        spec[1:top + 1] = (rng.standard_normal(top) / ks) * np.exp(
            1j * rng.uniform(0, 2 * np.pi, top))
        f = np.fft.irfft(spec, grid.n) * grid.n
        denom = sobolev_norm(grid, f, s_in)
        if denom == 0.0:
            continue
        best = max(best, sobolev_norm(grid, op(f), s_out) / denom)
    return best
