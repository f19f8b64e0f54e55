"""Energy, residual reports, and the self-verification batteries.

The conserved energy

    E = 1/2 int u G(eta)(Id+G(eta))^{-1} u dx + 1/2 int ((eta_xx)^2 + eta^2) dx

is the one quantity every long run is judged against.  The rest of this
module turns exact identities of the operators into numbers: the depth
integral identities N = d/dx g and HN = d/dx w~ - R(eta) g, the measured
space-time (Strichartz) norm of a trajectory, and suites of seeded
checks runnable from the command line.

Inequality checks use fitted constants, not derived ones: each bound is
calibrated once on seeded data and frozen with 1.2x headroom in FITTED.
They test stability of the constant, never sharpness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dtn, elliptic, evolution
from . import spectral as sp
from .spectral import Grid

# Frozen calibration constants.  Refit deliberately (scripts in the test
# suite print the measured values); never loosened to make a run pass.
FITTED = {
    # sup-norm amplification of <D>^-1 on bounded band-limited data
    "multiplier_sup_order_minus1": 0.26,
    # int psi G psi  <=  C ||psi||_{H^{1/2}}^2 on smooth random states
    "trace_h_half": 0.90,
    # ||G(eta) psi||_{L2} <= C ||psi||_{H^1} on smooth random states
    "dtn_h1_l2": 0.95,
    # ||eta||_{W^{2,inf}} <= C ||q(D) eta||_{Y^0} on smooth random states
    "w2inf_over_y0": 0.91,
}


@dataclass
class DiagnosticsRow:
    """One sampling instant of the standard observable set."""

    t: float
    energy: float
    l2_eta: float
    h2_eta: float
    l2_u: float
    y0_U: float
    linf_eta_xx: float
    dtn_residual: float

    FIELDS = ("t", "energy", "l2_eta", "h2_eta", "l2_u", "y0_U",
              "linf_eta_xx", "dtn_residual")

    def as_tuple(self):
        return tuple(getattr(self, name) for name in self.FIELDS)


def _energy_pieces(grid: Grid, eta, u, *, depth=dtn.DEFAULT_DEPTH,
                   nz=dtn.DEFAULT_NZ, tol=1e-10, dtn_tol=1e-10,
                   inverse_mode="fixed_point"):
    kinetic_density = None
    if sp.l2_norm(grid, u) == 0.0:
        kinetic, residual = 0.0, 0.0
    else:
        inv = evolution._invert(grid, eta, u, depth=depth, nz=nz, tol=tol,
                                dtn_tol=dtn_tol, inverse_mode=inverse_mode)
        kinetic = 0.5 * sp.integral(grid, u * inv.g_psi)
        residual = inv.residual
    eta_xx = sp.derivative(grid, eta, 2)
    elastic = 0.5 * sp.integral(grid, eta_xx * eta_xx + eta * eta)
    return kinetic, elastic, residual


def energy(grid: Grid, eta: np.ndarray, u: np.ndarray, **options) -> float:
    """The conserved Hamiltonian; both quadratic forms are nonnegative."""
    kinetic, elastic, _ = _energy_pieces(grid, eta, u, **options)
    total = kinetic + elastic
    scale = max(1.0, abs(kinetic) + abs(elastic))
    if total < -1e-10 * scale:
        raise AssertionError(f"energy came out negative: {total:.3e}")
    return max(total, 0.0)


def compute_row(state: evolution.SurfaceState, **options) -> DiagnosticsRow:
    grid = state.grid
    kinetic, elastic, residual = _energy_pieces(grid, state.eta, state.u,
                                                **options)
    packed = evolution.pack(state)
    return DiagnosticsRow(
        t=state.t,
        energy=max(kinetic + elastic, 0.0),
        l2_eta=sp.l2_norm(grid, state.eta),
        h2_eta=sp.sobolev_norm(grid, state.eta, 2.0),
        l2_u=sp.l2_norm(grid, state.u),
        y0_U=sp.ys_norm(grid, packed.U, 0.0),
        linf_eta_xx=sp.linf_norm(sp.derivative(grid, state.eta, 2)),
        dtn_residual=residual,
    )


# ---------------------------------------------------------------------------
# depth-integral identities

@dataclass
class IdentityReport:
    """Residuals of the two depth-integral identities for N.

    r1 measures N - d/dx g, r2 measures HN - (d/dx w~ - R(eta) g); both
    relative unless N vanishes, in which case they are absolute and
    `relative` is False.
    """

    r1: float
    r2: float
    l1_n: float
    l1_hn: float
    mean_n: float
    relative: bool


def identities_report(grid: Grid, eta: np.ndarray, u: np.ndarray, *,
                      depth: float = dtn.DEFAULT_DEPTH, nz: int = dtn.DEFAULT_NZ,
                      tol: float = 1e-10, dtn_tol: float = 1e-10,
                      inverse_mode: str = "fixed_point") -> IdentityReport:
    """Check N against the depth quadratures of the subsurface velocity."""
    terms = evolution.evaluate_sources(grid, eta, u, depth=depth, nz=nz,
                                       tol=tol, dtn_tol=dtn_tol,
                                       inverse_mode=inverse_mode,
                                       dealias=False)
    n_field = terms.n_field
    hn = sp.hilbert(grid, n_field)
    g, w_tilde = elliptic.depth_quadrature_g_w(terms.strip)

    r_g = dtn.dtn_remainder(grid, eta, g, depth=depth, nz=nz, tol=dtn_tol)
    res1 = n_field - sp.derivative(grid, g)
    res2 = hn - (sp.derivative(grid, w_tilde) - r_g)

    n_scale = sp.l2_norm(grid, n_field)
    hn_scale = sp.l2_norm(grid, hn)
    relative = n_scale > 1e-14
    r1 = sp.l2_norm(grid, res1) / (n_scale if relative else 1.0)
    r2 = sp.l2_norm(grid, res2) / (hn_scale if relative and hn_scale > 1e-14 else 1.0)
    return IdentityReport(
        r1=r1, r2=r2,
        l1_n=sp.integral(grid, np.abs(n_field)),
        l1_hn=sp.integral(grid, np.abs(hn)),
        mean_n=sp.mean(grid, n_field),
        relative=relative)


# ---------------------------------------------------------------------------
# trajectory functionals

@dataclass
class StrichartzReport:
    value: float      # (int ||U||_{Y0}^4 dt)^{1/4} by trapezoid
    sup_l2: float     # sup_t ||U(t)||_{L2}


def strichartz_norm(traj: evolution.Trajectory) -> StrichartzReport:
    """Measured mixed space-time norm of the packed trajectory."""
    if len(traj.states) < 2:
        raise ValueError("need at least two snapshots to integrate in time")
    times, y0_fourth, sup_l2 = [], [], 0.0
    for state in traj.states:
        packed = evolution.pack(state)
        times.append(state.t)
        y0_fourth.append(sp.ys_norm(state.grid, packed.U, 0.0) ** 4)
        sup_l2 = max(sup_l2, sp.l2_norm(state.grid, packed.U))
    value = float(np.trapezoid(y0_fourth, x=times)) ** 0.25
    return StrichartzReport(value=value, sup_l2=sup_l2)


def conservation_drift(traj: evolution.Trajectory):
    """Max relative energy drift over the diagnostics series, plus the series."""
    energies = np.array([row.energy for row in traj.rows], dtype=float)
    if energies.size == 0:
        return 0.0, np.zeros(0)
    e0 = energies[0]
    if e0 <= 1e-300:
        return 0.0, np.zeros_like(energies)
    series = np.abs(energies - e0) / e0
    return float(np.max(series)), series


# ---------------------------------------------------------------------------
# seeded verification suites

@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool


@dataclass
class VerifyReport:
    suite: str
    n: int
    seed: int
    tol: float
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "n": self.n,
            "seed": self.seed,
            "tol": self.tol,
            "passed": self.passed,
            "checks": [
                {"name": c.name, "value": c.value,
                 "threshold": c.threshold, "passed": c.passed}
                for c in self.checks
            ],
        }


def _random_field(grid: Grid, rng, decay=2.0, kmax=None, amplitude=1.0):
    kmax = kmax or grid.n // 4
    spec = np.zeros(grid.n // 2 + 1, dtype=complex)
    modes = np.arange(1, kmax + 1)
    mags = modes.astype(float) ** -decay
    phases = np.exp(2j * np.pi * rng.uniform(size=kmax))
    spec[1:kmax + 1] = mags * phases
    f = np.fft.irfft(grid.n * spec, grid.n)
    peak = np.max(np.abs(f))
    return amplitude * f / peak if peak > 0 else f


def _smooth_state(grid: Grid, rng, amplitude=0.05, kmax=6):
    eta = _random_field(grid, rng, decay=2.5, kmax=kmax, amplitude=amplitude)
    u = _random_field(grid, rng, decay=2.0, kmax=kmax, amplitude=amplitude)
    return eta, u


def _suite_dtn(grid: Grid, rng, add) -> None:
    nz = 129
    # exact eigenmodes of the flat operator
    worst = 0.0
    for k in (1, 3):
        psi = np.cos(k * grid.x)
        got = dtn.dtn_apply(grid, np.zeros(grid.n), psi, nz=nz).g_psi
        worst = max(worst, sp.l2_norm(grid, got - k * psi) / sp.l2_norm(grid, psi))
    add("flat_eigenmode", worst, 1e-10)

    # manufactured curved solution
    eta = 0.1 * np.cos(grid.x)
    k = 2
    psi = np.exp(k * eta) * np.cos(k * grid.x)
    eta_x = sp.derivative(grid, eta)
    want = k * np.exp(k * eta) * (np.cos(k * grid.x) + eta_x * np.sin(k * grid.x))
    want = want - sp.mean(grid, want)
    got = dtn.dtn_apply(grid, eta, psi, nz=nz).g_psi
    add("manufactured_trace", sp.l2_norm(grid, got - want) / sp.l2_norm(grid, want),
        1e-5)

    # self-adjointness
    worst = 0.0
    for _ in range(5):
        eta_r = _random_field(grid, rng, decay=2.5, kmax=6, amplitude=0.1)
        phi = _random_field(grid, rng, decay=2.0, kmax=8)
        psi_r = _random_field(grid, rng, decay=2.0, kmax=8)
        g_phi = dtn.dtn_apply(grid, eta_r, phi, nz=nz).g_psi
        g_psi = dtn.dtn_apply(grid, eta_r, psi_r, nz=nz).g_psi
        gap = abs(sp.integral(grid, phi * g_psi) - sp.integral(grid, psi_r * g_phi))
        scale = sp.l2_norm(grid, phi) * sp.l2_norm(grid, psi_r)
        worst = max(worst, gap / scale)
    add("self_adjoint", worst, 1e-8)

    # structural cancellation G(eta)B = -dV/dx
    res = dtn.cancellation_check(grid, 0.1 * np.cos(grid.x),
                                 np.cos(2 * grid.x), nz=nz)
    add("cancellation", res, 1e-4)

    # the two (Id+G) inverters agree
    worst = 0.0
    for _ in range(3):
        eta_r, u_r = _smooth_state(grid, rng)
        a = dtn.invert_id_plus_dtn(grid, eta_r, u_r, nz=nz).psi
        b = dtn.invert_direct(grid, eta_r, u_r, nz=nz).psi
        worst = max(worst, sp.l2_norm(grid, a - b) / sp.l2_norm(grid, u_r))
    add("inversion_agreement", worst, 1e-8)

    # flat-surface increment formula against the closed form
    m, k = 3, 2
    delta = np.cos(m * grid.x)
    psi = np.cos(k * grid.x)
    got = dtn.shape_derivative(grid, np.zeros(grid.n), delta, psi, nz=nz)
    want = float(k * (k - m)) * np.cos((m - k) * grid.x)
    add("shape_derivative_flat",
        sp.l2_norm(grid, got - want) / max(sp.l2_norm(grid, want), 1.0), 1e-9)

    # fitted trace / Rellich bounds across 50 random states
    worst_trace, worst_rellich = 0.0, 0.0
    for _ in range(50):
        eta_r = _random_field(grid, rng, decay=2.5, kmax=6, amplitude=0.1)
        psi_r = _random_field(grid, rng, decay=2.0, kmax=grid.n // 8)
        res = dtn.dtn_apply(grid, eta_r, psi_r, nz=65)
        pairing = sp.integral(grid, psi_r * res.g_psi)
        worst_trace = max(worst_trace,
                          pairing / sp.sobolev_norm(grid, psi_r, 0.5) ** 2)
        worst_rellich = max(worst_rellich,
                            sp.l2_norm(grid, res.g_psi)
                            / sp.sobolev_norm(grid, psi_r, 1.0))
    add("trace_bound", worst_trace, FITTED["trace_h_half"])
    add("rellich_bound", worst_rellich, FITTED["dtn_h1_l2"])


def _suite_paradiff(grid: Grid, rng, add) -> None:
    from . import paradiff

    worst = 0.0
    for _ in range(10):
        a = _random_field(grid, rng, decay=1.5)
        b = _random_field(grid, rng, decay=1.5)
        total = (paradiff.paraproduct(grid, a, b)
                 + paradiff.paraproduct(grid, b, a)
                 + paradiff.bony_remainder(grid, a, b))
        low = sp.mean(grid, a) * sp.mean(grid, b)
        worst = max(worst, sp.l2_norm(grid, total + low - a * b)
                    / max(sp.l2_norm(grid, a * b), 1e-30))
    add("bony_identity", worst, 1e-12)

    # spectral support of one paraproduct stays in the dilated annulus
    j = int(math.log2(grid.kmax)) - 2
    a = _random_field(grid, rng, decay=1.0, kmax=3)
    b = np.cos(int(1.5 * 2 ** j) * grid.x)
    spec = np.fft.rfft(paradiff.paraproduct(grid, a, b))
    outside = (grid.k < 2.0 ** (j - 2)) | (grid.k > 3.0 * 2.0 ** j)
    add("support_containment",
        float(np.max(np.abs(spec[outside]))) / max(sp.l2_norm(grid, b), 1.0),
        1e-12)

    # commutator closed form and the constant-symbol annihilation
    f = np.cos(2 * grid.x)
    comm = sp.abs_d(grid, np.cos(grid.x) * f) - np.cos(grid.x) * sp.abs_d(grid, f)
    want = 0.5 * (np.cos(3 * grid.x) - np.cos(grid.x))
    add("commutator_closed_form",
        sp.l2_norm(grid, comm - want) / sp.l2_norm(grid, want), 1e-10)
    const_comm = sp.abs_d(grid, 2.5 * f) - 2.5 * sp.abs_d(grid, f)
    add("commutator_constant", sp.l2_norm(grid, const_comm), 1e-12)

    # the elliptic symbol factorization identities, pointwise
    eta = _random_field(grid, rng, decay=2.5, kmax=6, amplitude=0.2)
    sym_a, sym_big = paradiff.factorization_symbols(grid, eta)
    alpha = 1.0 + sp.derivative(grid, eta) ** 2
    beta = -2.0 * sp.derivative(grid, eta)
    xi = np.linspace(0.5, grid.kmax, 7)
    worst = 0.0
    for x_idx in (0, grid.n // 3):
        for xv in xi:
            a_val = sum(c[x_idx] * m(xv) for c, m in sym_a.terms)
            big_val = sum(c[x_idx] * m(xv) for c, m in sym_big.terms)
            prod = a_val * big_val
            want_prod = xv ** 2 / alpha[x_idx]
            diff = a_val - big_val
            want_diff = (beta[x_idx] / alpha[x_idx]) * 1j * xv
            worst = max(worst, abs(prod - want_prod) / abs(want_prod),
                        abs(diff - want_diff) / max(abs(want_diff), 1e-30))
    add("factorization_identity", worst, 1e-12)


def _suite_identities(grid: Grid, rng, add) -> None:
    nz = 129
    # flat-surface closed forms
    k = 2
    u = (1 + k) * np.cos(k * grid.x)
    rep = identities_report(grid, np.zeros(grid.n), u, nz=nz)
    add("flat_r1", rep.r1, 1e-8)
    add("flat_r2", rep.r2, 1e-8)

    # a smooth curved state
    eta, u = _smooth_state(grid, rng)
    rep = identities_report(grid, eta, u, nz=nz)
    add("smooth_r1", rep.r1, 1e-3)
    add("smooth_r2", rep.r2, 1e-3)
    add("mean_n", abs(rep.mean_n) / max(rep.l1_n / grid.length, 1e-30), 1e-10)

    # energy stability under joint refinement
    eta0, u0 = 0.05, 0.05
    fine = Grid(2 * grid.n, grid.length)
    e_coarse = energy(grid, eta0 * np.cos(grid.x), u0 * np.cos(2 * grid.x), nz=65)
    e_fine = energy(fine, eta0 * np.cos(fine.x), u0 * np.cos(2 * fine.x), nz=129)
    add("energy_refinement", abs(e_fine - e_coarse) / e_fine, 1e-6)


def _suite_evolution(grid: Grid, rng, add) -> None:
    # packing round trip
    eta, u = _smooth_state(grid, rng)
    state = evolution.SurfaceState(grid, eta, u)
    back = evolution.unpack(evolution.pack(state))
    add("pack_round_trip",
        max(sp.l2_norm(grid, back.eta - eta), sp.l2_norm(grid, back.u - u)),
        1e-12)

    # free flow against the exact phase, 20 steps
    U0 = np.exp(3j * grid.x)
    cfg = evolution.StepperConfig(scheme="exp-rk4", dt=1e-2, linear_only=True)
    S = evolution.SchrodingerState(grid, U0.copy())
    for _ in range(20):
        S = evolution.step(S, cfg)
    phase = np.exp(-1j * 0.2 * sp.symbol_p(3.0))
    add("propagator_free_flow", float(np.max(np.abs(S.U - phase * U0))), 1e-12)

    # closed-form linear oscillation in surface variables
    k, eta0, u0, t = 2, 0.05, 0.03, 0.7
    eta_t, u_t = evolution.linear_rotation(
        grid, eta0 * np.cos(k * grid.x), u0 * np.cos(k * grid.x), t)
    p = float(sp.symbol_p(float(k)))
    th = float(sp.cutoff_theta(float(k)))
    we = eta0 * math.cos(p * t) + (th / p) * u0 * math.sin(p * t)
    wu = u0 * math.cos(p * t) - ((1 + k ** 4) / p) * eta0 * math.sin(p * t)
    gap = max(sp.linf_norm(eta_t - we * np.cos(k * grid.x)),
              sp.linf_norm(u_t - wu * np.cos(k * grid.x)))
    add("linear_closed_form", gap, 1e-10)

    # the two printed N formulas
    worst = 0.0
    for _ in range(5):
        eta_r, u_r = _smooth_state(grid, rng)
        n1, n2 = evolution.nonlinearity_forms(grid, eta_r, u_r, nz=65)
        worst = max(worst, sp.l2_norm(grid, n1 - n2)
                    / max(sp.l2_norm(grid, n1), 1e-30))
    add("dual_n_forms", worst, 1e-10)

    # picard contraction at the reference state
    state = evolution.SurfaceState(grid, 0.05 * np.cos(grid.x),
                                   0.05 * np.cos(2 * grid.x))
    cfg = evolution.StepperConfig(scheme="picard", dt=1e-2, nz=65)
    _, distances = evolution.picard_step_trace(evolution.pack(state), cfg)
    ratios = [distances[i + 1] / distances[i]
              for i in range(min(len(distances) - 1, 5)) if distances[i] > 0]
    add("picard_contraction", max(ratios) if ratios else 0.0, 0.5)

    # stepping (eta, u) directly mirrors stepping U
    cfg = evolution.StepperConfig(scheme="exp-rk4", dt=1e-3, nz=33)
    s = evolution.SurfaceState(grid, 0.05 * np.cos(grid.x),
                               0.05 * np.cos(2 * grid.x))
    S = evolution.pack(s)
    for _ in range(5):
        s = evolution.step_surface(s, cfg)
        S = evolution.step(S, cfg)
    back = evolution.unpack(S)
    add("dual_formulation",
        max(sp.l2_norm(grid, back.eta - s.eta), sp.l2_norm(grid, back.u - s.u)),
        1e-8)

    # fitted regularity probe: W^{2,inf} against the packed Y^0 size
    worst = 0.0
    for _ in range(20):
        eta_r = _random_field(grid, rng, decay=2.5, kmax=grid.n // 8,
                              amplitude=0.1)
        w2inf = (sp.linf_norm(eta_r)
                 + sp.linf_norm(sp.derivative(grid, eta_r))
                 + sp.linf_norm(sp.derivative(grid, eta_r, 2)))
        packed = sp.apply_multiplier(grid, eta_r, sp.symbol_q)
        worst = max(worst, w2inf / sp.ys_norm(grid, packed, 0.0))
    add("regularity_probe", worst, FITTED["w2inf_over_y0"])


_SUITES = {
    "dtn": _suite_dtn,
    "paradiff": _suite_paradiff,
    "identities": _suite_identities,
    "evolution": _suite_evolution,
}


def verify_suite(suite: str, n: int = 128, seed: int = 0,
                 tol: float = 1.0) -> VerifyReport:
    """Run one named battery (or all) and report pass/fail per check.

    tol scales every threshold: 1.0 is the contract, 0.0 fails everything
    (a sanity switch), larger values loosen uniformly.
    """
    if suite not in _SUITES and suite != "all":
        raise ValueError(f"unknown suite {suite!r}; pick from "
                         f"{sorted(_SUITES) + ['all']}")
    grid = Grid(n)
    rng = np.random.default_rng(seed)
    report = VerifyReport(suite=suite, n=n, seed=seed, tol=tol)

    def add(name, value, threshold):
        scaled = threshold * tol
        report.checks.append(CheckResult(name=name, value=float(value),
                                         threshold=scaled,
                                         passed=bool(value <= scaled)))

    names = sorted(_SUITES) if suite == "all" else [suite]
    for name in names:
        _SUITES[name](grid, rng, add)
    return report
