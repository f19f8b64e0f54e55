"""Time stepping for the surface system in its complex first-order form.

The surface pair (eta, u) evolves by

    d/dt eta = G(eta) (Id + G(eta))^{-1} u
    d/dt u   = -(1 + d_x^4) eta - N(eta, u)

and packs into the single complex unknown U = q(D) eta + i u, which solves

    d/dt U + i p(D) U = F(U),      F(U) = q(D) Q(eta, u) - i N(eta, u),

where p*q = 1 + xi^4 and p/q = theta make the linear parts match bin by
bin.  Q collects everything of G(Id+G)^{-1} beyond its flat-surface
multiplier theta(D):

    G(eta)(Id+G(eta))^{-1} u = theta(D) u + Q(eta, u).

Three steppers share one skeleton: an integrating-factor RK4 (exp-rk4),
Strang splitting with an RK2 substep (strang), and a trapezoid fixed
point on the Duhamel integral (picard).  The skeleton is generic over
the state carrier, so the same schemes run on U and, for cross-checks,
directly on (eta, u); the two routes are conjugate by an exact linear
change of variables and must agree to solver tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import dtn
from . import spectral as sp
from .spectral import Grid

SCHEMES = ("exp-rk4", "strang", "picard")
INVERSE_MODES = ("fixed_point", "direct")


class PicardError(Exception):
    """Fixed-point iteration failed to contract within its budget."""

    def __init__(self, message, distances=None):
        super().__init__(message)
        self.distances = list(distances) if distances is not None else []


class GuardError(Exception):
    """The L2 guard tripped: the packed state outgrew the configured bound."""

    def __init__(self, message, t=0.0, norm=0.0):
        super().__init__(message)
        self.t = t
        self.norm = norm


@dataclass
class SurfaceState:
    grid: Grid
    eta: np.ndarray
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.eta = np.asarray(self.grid.check(self.eta), dtype=float)
        self.u = np.asarray(self.grid.check(self.u), dtype=float)


@dataclass
class SchrodingerState:
    grid: Grid
    U: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.U = np.asarray(self.grid.check(self.U), dtype=complex)


@dataclass
class StepperConfig:
    """Scheme selection plus the solver knobs forwarded to every source
    evaluation.  linear_only empties F for propagator tests."""

    scheme: str = "exp-rk4"
    dt: float = 1e-3
    picard_tol: float = 1e-12
    picard_max_iter: int = 25
    depth: float = dtn.DEFAULT_DEPTH
    nz: int = dtn.DEFAULT_NZ
    dtn_tol: float = 1e-10
    inverse_mode: str = "fixed_point"
    inverse_tol: float = 1e-10
    dealias: bool = True
    debug: bool = False
    linear_only: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; pick from {SCHEMES}")
        if self.inverse_mode not in INVERSE_MODES:
            raise ValueError(
                f"unknown inverse mode {self.inverse_mode!r}; pick from {INVERSE_MODES}")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        for name in ("picard_tol", "dtn_tol", "inverse_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.picard_max_iter < 1:
            raise ValueError("picard_max_iter must be at least 1")

    def solver_options(self) -> dict:
        return {
            "depth": self.depth,
            "nz": self.nz,
            "tol": self.inverse_tol,
            "dtn_tol": self.dtn_tol,
            "inverse_mode": self.inverse_mode,
            "dealias": self.dealias,
            "debug": self.debug,
        }


# ---------------------------------------------------------------------------
# packing between the surface pair and the complex unknown

def pack(state: SurfaceState) -> SchrodingerState:
    """U = q(D) eta + i u."""
    q_eta = sp.apply_multiplier(state.grid, state.eta, sp.symbol_q)
    return SchrodingerState(state.grid, q_eta + 1j * state.u, state.t)


def unpack(state: SchrodingerState) -> SurfaceState:
    """Invert the packing: q > 0 everywhere, so q(D) is exactly invertible."""
    eta = sp.apply_multiplier(state.grid, np.real(state.U),
                              lambda xi: 1.0 / sp.symbol_q(xi))
    return SurfaceState(state.grid, eta, np.imag(state.U).copy(), state.t)


# ---------------------------------------------------------------------------
# source terms

@dataclass
class SourceTerms:
    """One full evaluation of the nonlinearity at a frozen state."""

    psi: np.ndarray
    g_psi: np.ndarray          # G(eta) psi for the computed psi
    b: np.ndarray
    v: np.ndarray
    n_field: np.ndarray
    n_alt: np.ndarray          # same quantity by the other printed formula
    q_field: np.ndarray
    f_field: np.ndarray
    residual: float            # inversion residual carried through
    strip: object = None       # subsurface solve backing g_psi, reusable


def _invert(grid: Grid, eta: np.ndarray, u: np.ndarray, *, depth, nz, tol,
            dtn_tol, inverse_mode) -> dtn.InversionResult:
    if inverse_mode == "direct":
        return dtn.invert_direct(grid, eta, u, tol=tol, depth=depth, nz=nz,
                                 dtn_tol=dtn_tol)
    return dtn.invert_id_plus_dtn(grid, eta, u, tol=tol, depth=depth, nz=nz,
                                  dtn_tol=dtn_tol)


def _velocity_traces(grid: Grid, eta, psi, g_psi, trim: bool):
    """B and V from the surface data, optionally from 2/3-truncated inputs.

    The products and the division are evaluated pointwise on the same
    primitive fields for both N formulas, which is what makes the two
    agree to roundoff rather than to aliasing error.
    """
    eta_x = sp.derivative(grid, eta)
    psi_x = sp.derivative(grid, psi)
    if trim:
        eta_x = sp.dealias(grid, eta_x)
        psi_x = sp.dealias(grid, psi_x)
        g_psi = sp.dealias(grid, g_psi)
    slope_sq = 1.0 + eta_x * eta_x
    b = (g_psi + eta_x * psi_x) / slope_sq
    v = psi_x - eta_x * b
    return eta_x, psi_x, g_psi, b, v, slope_sq


def evaluate_sources(grid: Grid, eta: np.ndarray, u: np.ndarray, *,
                     depth: float = dtn.DEFAULT_DEPTH, nz: int = dtn.DEFAULT_NZ,
                     tol: float = 1e-10, dtn_tol: float = 1e-10,
                     inverse_mode: str = "fixed_point",
                     dealias: bool = True, debug: bool = False) -> SourceTerms:
    """Compute N, Q and F at one state from a single (Id+G) inversion.

    In debug mode two exact identities are checked on the spot: the two
    printed forms of N agree pointwise, and theta(D)u + Q reproduces
    G(Id+G)^{-1}u up to the inversion residual.
    """
    inv = _invert(grid, eta, u, depth=depth, nz=nz, tol=tol, dtn_tol=dtn_tol,
                  inverse_mode=inverse_mode)
    psi, g_psi = inv.psi, inv.g_psi
    eta_x, psi_x, g_cut, b, v = _velocity_traces(grid, eta, psi, g_psi, dealias)[:5]

    n_alt = b * v * eta_x + 0.5 * (v * v - b * b)
    slope_sq = 1.0 + eta_x * eta_x
    n_csz = 0.5 * psi_x * psi_x - 0.5 * (eta_x * psi_x + g_cut) ** 2 / slope_sq
    if debug:
        scale = max(sp.l2_norm(grid, n_alt), 1e-30)
        gap = sp.l2_norm(grid, n_alt - n_csz) / scale
        if gap > 1e-10:
            raise AssertionError(
                f"the two N formulas disagree at relative {gap:.3e}")

    # Q = (|D|(Id+|D|)^{-1} - theta(D)) u + (Id+|D|)^{-1} R(eta) psi
    head = sp.apply_multiplier(
        grid, u, lambda xi: np.abs(xi) / (1.0 + np.abs(xi)) - sp.cutoff_theta(xi))
    remainder = g_psi - sp.abs_d(grid, psi)
    tail = sp.apply_multiplier(grid, remainder,
                               lambda xi: 1.0 / (1.0 + np.abs(xi)))
    q_exact = head + tail
    if debug:
        # theta u + Q == G(Id+G)^{-1} u, up to the inversion residual
        lhs = sp.apply_multiplier(grid, u, sp.cutoff_theta) + q_exact
        scale = max(sp.l2_norm(grid, u), 1e-30)
        gap = sp.l2_norm(grid, lhs - g_psi) / scale
        if gap > 1e-8:
            raise AssertionError(
                f"theta(D)u + Q misses G(Id+G)^{{-1}}u by relative {gap:.3e}")

    n_field = sp.dealias(grid, n_alt) if dealias else n_alt
    q_field = sp.dealias(grid, q_exact) if dealias else q_exact
    f_field = sp.apply_multiplier(grid, q_field, sp.symbol_q) - 1j * n_field
    return SourceTerms(psi=psi, g_psi=g_psi, b=b, v=v, n_field=n_field,
                       n_alt=sp.dealias(grid, n_csz) if dealias else n_csz,
                       q_field=q_field, f_field=f_field, residual=inv.residual,
                       strip=inv.dtn.strip)


def nonlinearity_forms(grid: Grid, eta: np.ndarray, u: np.ndarray,
                       **options) -> tuple[np.ndarray, np.ndarray]:
    """Both printed forms of N: (B V eta_x + (V^2-B^2)/2, the psi_x form)."""
    terms = evaluate_sources(grid, eta, u, **options)
    return terms.n_field, terms.n_alt


def nonlinearity_N(grid: Grid, eta: np.ndarray, u: np.ndarray,
                   **options) -> np.ndarray:
    """N(eta, u) = B V eta_x + (V^2 - B^2)/2 with psi = (Id+G)^{-1} u."""
    return evaluate_sources(grid, eta, u, **options).n_field


def source_Q(grid: Grid, eta: np.ndarray, u: np.ndarray, **options) -> np.ndarray:
    """Q(eta,u): the non-multiplier part of G(Id+G)^{-1} acting on u.

    Linear in u; debug mode spends two extra inversions to check that on
    a random split of the input.
    """
    terms = evaluate_sources(grid, eta, u, **options)
    if options.get("debug"):
        probe = dict(options, debug=False)
        rng = np.random.default_rng(7)
        u1 = u * rng.uniform(0.25, 0.75)
        q1 = evaluate_sources(grid, eta, u1, **probe).q_field
        q2 = evaluate_sources(grid, eta, u - u1, **probe).q_field
        scale = max(sp.l2_norm(grid, terms.q_field), 1e-30)
        gap = sp.l2_norm(grid, q1 + q2 - terms.q_field) / scale
        if gap > 1e-8:
            raise AssertionError(f"Q is not linear in u: relative gap {gap:.3e}")
    return terms.q_field


def source_F(state: SchrodingerState, **options) -> np.ndarray:
    """F(U) = q(D) Q(eta,u) - i N(eta,u) with (eta,u) unpacked from U."""
    surface = unpack(state)
    return evaluate_sources(state.grid, surface.eta, surface.u, **options).f_field


# ---------------------------------------------------------------------------
# linear flows

def propagate_linear(grid: Grid, U: np.ndarray, tau: float) -> np.ndarray:
    """e^{-i tau p(D)} U: the exact free flow of the packed unknown."""
    return sp.apply_multiplier(grid, np.asarray(U, dtype=complex),
                               lambda xi: np.exp(-1j * tau * sp.symbol_p(xi)))


def linear_rotation(grid: Grid, eta: np.ndarray, u: np.ndarray, tau: float):
    """Exact free flow in surface variables: each mode rotates at p(k).

    eta(tau) =  cos(p tau) eta + (theta/p) sin(p tau) u
    u(tau)   = -((1+xi^4)/p) sin(p tau) eta + cos(p tau) u

    Conjugating by the packing turns this into e^{-i tau p(D)}; the pair
    of routes is a standing cross-check.
    """
    cos_m = lambda xi: np.cos(tau * sp.symbol_p(xi))
    sin_over = lambda xi: np.sin(tau * sp.symbol_p(xi)) * sp.cutoff_theta(xi) / sp.symbol_p(xi)
    sin_times = lambda xi: np.sin(tau * sp.symbol_p(xi)) * (1.0 + np.asarray(xi, float) ** 4) / sp.symbol_p(xi)
    eta_new = (sp.apply_multiplier(grid, eta, cos_m)
               + sp.apply_multiplier(grid, u, sin_over))
    u_new = (sp.apply_multiplier(grid, u, cos_m)
             - sp.apply_multiplier(grid, eta, sin_times))
    return eta_new, u_new


# ---------------------------------------------------------------------------
# one generic step skeleton, two carriers

def _step_carrier(X, lin: Callable, F: Callable, norm: Callable,
                  cfg: StepperConfig):
    """Advance one dt in an abstract carrier.

    lin(X, tau) is the exact linear flow, F(X) the source, norm(X) the L2
    size.  Returns (X_next, picard_distances or None).
    """
    dt = cfg.dt
    if cfg.scheme == "exp-rk4":
        # classical RK4 on the integrating-factor variable e^{i t p} U
        if cfg.linear_only:
            return lin(X, dt), None
        half = 0.5 * dt
        EX = lin(X, half)
        k1 = F(X)
        k2 = F(lin(X + half * k1, half))
        k3 = F(EX + half * k2)
        k4 = F(lin(EX + dt * k3, half))
        X_next = lin(X, dt) + (dt / 6.0) * (
            lin(k1, dt) + 2.0 * lin(k2 + k3, half) + k4)
        return X_next, None

    if cfg.scheme == "strang":
        X1 = lin(X, 0.5 * dt)
        if not cfg.linear_only:
            mid = X1 + 0.5 * dt * F(X1)
            X1 = X1 + dt * F(mid)
        return lin(X1, 0.5 * dt), None

    # picard: trapezoid quadrature of the Duhamel integral, iterated
    EX = lin(X, dt)
    if cfg.linear_only:
        return EX, []
    base = EX + 0.5 * dt * lin(F(X), dt)
    V = EX
    size = max(1.0, norm(X))
    distances = []
    for _ in range(cfg.picard_max_iter):
        V_next = base + 0.5 * dt * F(V)
        dist = norm(V_next - V)
        distances.append(dist)
        V = V_next
        if dist <= cfg.picard_tol * size:
            return V, distances
    raise PicardError(
        f"picard iteration kept moving after {cfg.picard_max_iter} sweeps "
        f"(last distance {distances[-1]:.3e}, dt={dt:.3e})", distances)


def _carrier_for_packed(grid: Grid, cfg: StepperConfig):
    options = cfg.solver_options()

    def lin(U, tau):
        return propagate_linear(grid, U, tau)

    def F(U):
        surface = unpack(SchrodingerState(grid, U))
        return evaluate_sources(grid, surface.eta, surface.u, **options).f_field

    def norm(U):
        return sp.l2_norm(grid, U)

    return lin, F, norm


def _carrier_for_surface(grid: Grid, cfg: StepperConfig):
    options = cfg.solver_options()

    def lin(S, tau):
        eta_new, u_new = linear_rotation(grid, S[0], S[1], tau)
        return np.stack([eta_new, u_new])

    def F(S):
        terms = evaluate_sources(grid, S[0], S[1], **options)
        return np.stack([terms.q_field, -terms.n_field])

    def norm(S):
        return float(np.sqrt((np.sum(S[0] ** 2) + np.sum(S[1] ** 2)) * grid.dx))

    return lin, F, norm


def step(state: SchrodingerState, cfg: StepperConfig) -> SchrodingerState:
    """Advance the packed unknown by one dt with the configured scheme."""
    lin, F, norm = _carrier_for_packed(state.grid, cfg)
    U_next, _ = _step_carrier(state.U, lin, F, norm, cfg)
    return SchrodingerState(state.grid, U_next, state.t + cfg.dt)


def picard_step_trace(state: SchrodingerState, cfg: StepperConfig):
    """One picard step plus its iterate-distance trace.

    The sequence of distances is the empirical contraction record: for dt
    below the data-size threshold it decays geometrically.
    """
    picard_cfg = cfg if cfg.scheme == "picard" else replace(cfg, scheme="picard")
    lin, F, norm = _carrier_for_packed(state.grid, picard_cfg)
    U_next, distances = _step_carrier(state.U, lin, F, norm, picard_cfg)
    return SchrodingerState(state.grid, U_next, state.t + cfg.dt), distances


def step_surface(state: SurfaceState, cfg: StepperConfig) -> SurfaceState:
    """Advance (eta, u) directly with the same scheme as step.

    Packing is linear and commutes with every stage, so this must agree
    with stepping U and unpacking down to solver tolerance.
    """
    lin, F, norm = _carrier_for_surface(state.grid, cfg)
    S = np.stack([state.eta, state.u])
    S_next, _ = _step_carrier(S, lin, F, norm, cfg)
    return SurfaceState(state.grid, S_next[0], S_next[1], state.t + cfg.dt)


# ---------------------------------------------------------------------------
# whole trajectories

@dataclass
class Trajectory:
    """Snapshots plus the diagnostics series recorded while stepping."""

    states: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    final: SurfaceState | None = None
    aborted: bool = False


def initial_state(grid: Grid, config) -> SurfaceState:
    """Build the configured initial data on the given grid.

    kind=mode places cosine modes in eta (u starts at zero), kind=gaussian
    periodizes a bump via its exact Fourier samples, kind=file reloads a
    snapshot written by the cli.
    """
    if config.init_kind == "mode":
        eta = np.zeros(grid.n)
        for k, amp in zip(config.wavenumbers, config.amplitudes):
            if not 0 < k <= grid.kmax * grid.length / (2.0 * np.pi):
                raise ValueError(f"mode {k} does not fit on n={grid.n}")
            eta += amp * np.cos(2.0 * np.pi * k / grid.length * grid.x)
        return SurfaceState(grid, eta, np.zeros(grid.n))
    if config.init_kind == "gaussian":
        # coefficients of the periodized bump exp(-(x-x0)^2 / 2 width^2),
        # centered at midspan: c_k = (sqrt(2 pi) width / L) e^{-(width k)^2/2 - i k x0}
        amp = config.amplitudes[0] if config.amplitudes else 1.0
        width = config.width
        if not (width and width > 0):
            raise ValueError("gaussian initial data needs a positive width")
        x0 = 0.5 * grid.length
        coeff = (np.sqrt(2.0 * np.pi) * width / grid.length
                 * np.exp(-0.5 * (width * grid.k) ** 2)
                 * np.exp(-1j * grid.k * x0))
        spec = amp * grid.n * coeff
        spec[-1] = 0.0
        return SurfaceState(grid, np.fft.irfft(spec, grid.n), np.zeros(grid.n))
    if config.init_kind == "file":
        from . import formats

        t0, eta, u = formats.read_snapshot(config.path)
        if eta.size != grid.n:
            raise ValueError(
                f"snapshot holds n={eta.size} but the grid wants n={grid.n}")
        return SurfaceState(grid, eta, u, t0)
    raise ValueError(f"unknown initial data kind {config.init_kind!r}")


def simulate(config) -> Trajectory:
    """Run the configured trajectory, recording snapshots and diagnostics.

    Raises GuardError when the packed L2 norm exceeds the configured
    guard; solver failures propagate with their own context.
    """
    from . import diagnostics

    grid = Grid(config.n, config.length)
    cfg = StepperConfig(scheme=config.scheme, dt=config.dt,
                        picard_tol=config.picard_tol,
                        picard_max_iter=config.picard_max_iter,
                        depth=config.depth, nz=config.nz,
                        dtn_tol=config.dtn_tol,
                        inverse_mode=config.inverse_mode,
                        inverse_tol=config.inverse_tol)
    row_options = {"depth": cfg.depth, "nz": cfg.nz, "tol": cfg.inverse_tol,
                   "dtn_tol": cfg.dtn_tol, "inverse_mode": cfg.inverse_mode}

    state = initial_state(grid, config)
    n_steps = int(round(config.t_final / config.dt))
    if abs(n_steps * config.dt - config.t_final) > 1e-9 * max(1.0, config.t_final):
        raise ValueError("t_final must be an integer number of dt steps")

    traj = Trajectory()
    traj.states.append(state)
    traj.rows.append(diagnostics.compute_row(state, **row_options))

    packed = pack(state)
    t0 = state.t
    for i in range(1, n_steps + 1):
        packed = step(packed, cfg)
        packed.t = t0 + i * config.dt
        size = sp.l2_norm(grid, packed.U)
        if size > config.l2_guard:
            traj.aborted = True
            traj.final = unpack(packed)
            traj.states.append(traj.final)
            err = GuardError(
                f"L2 guard tripped at t={packed.t:.6g}: "
                f"||U|| = {size:.6g} > {config.l2_guard:.6g}",
                t=packed.t, norm=size)
            err.trajectory = traj
            raise err
        last = i == n_steps
        if last or i % config.snapshot_every == 0:
            traj.states.append(unpack(packed))
        if last or i % config.diagnostics_every == 0:
            traj.rows.append(diagnostics.compute_row(unpack(packed), **row_options))
    traj.final = unpack(packed)
    return traj
