"""Strip solver: flat closed forms, a manufactured curved solution,
convergence under refinement, and the depth functionals."""

import numpy as np
import pytest

import hesw.elliptic as el
from hesw.spectral import Grid, integral, l2_norm

import oracles
from fieldgen import random_field


def solve(grid, eta, psi, depth=20.0, nz=65, tol=1e-10):
    return el.solve_strip(el.make_strip_problem(grid, eta, psi, depth=depth, nz=nz), tol=tol)


class TestChebyshev:
    def test_nodes_descend_from_one(self):
        x, _ = el.chebyshev_lobatto(9)
        assert x[0] == 1.0 and x[-1] == -1.0
        assert np.all(np.diff(x) < 0)

    def test_differentiates_polynomials_exactly(self):
        x, D = el.chebyshev_lobatto(12)
        for c in range(5):
            assert np.max(np.abs(D @ x**(c + 1) - (c + 1) * x**c)) < 1e-10

    def test_weights_integrate_polynomials(self):
        w = el.clenshaw_curtis_weights(17)
        x, _ = el.chebyshev_lobatto(17)
        assert abs(w.sum() - 2.0) < 1e-14
        assert abs(w @ x**2 - 2.0 / 3.0) < 1e-14
        assert abs(w @ x**8 - 2.0 / 9.0) < 1e-13

    def test_weights_odd_node_count(self):
        w = el.clenshaw_curtis_weights(16)
        x, _ = el.chebyshev_lobatto(16)
        assert abs(w.sum() - 2.0) < 1e-14
        assert abs(w @ x**4 - 2.0 / 5.0) < 1e-13

    def test_too_few_nodes_rejected(self):
        with pytest.raises(ValueError):
            el.chebyshev_lobatto(1)


class TestValidation:
    def test_thin_vertical_grid_rejected(self, grid64):
        with pytest.raises(ValueError, match="nz"):
            el.make_strip_problem(grid64, np.zeros(64), np.cos(grid64.x), nz=4)

    def test_nonpositive_depth_rejected(self, grid64):
        with pytest.raises(ValueError, match="depth"):
            el.make_strip_problem(grid64, np.zeros(64), np.cos(grid64.x), depth=0.0)

    def test_nonfinite_data_rejected(self, grid64):
        bad = np.zeros(64)
        bad[3] = np.nan
        with pytest.raises(ValueError, match="finite"):
            el.make_strip_problem(grid64, bad, np.cos(grid64.x))

    def test_coefficient_fields(self, grid64):
        eta = 0.3 * np.sin(grid64.x)
        prob = el.make_strip_problem(grid64, eta, np.zeros(64))
        assert np.allclose(prob.alpha, 1.0 + 0.09 * np.cos(grid64.x) ** 2, atol=1e-12)
        assert np.allclose(prob.beta, -2.0 * prob.eta_x, atol=1e-15)
        (a11, a12), (a21, a22) = prob.a_matrix
        det = a11 * a22 - a12 * a21
        assert np.max(np.abs(det - 1.0)) < 1e-12


class TestFlatSurface:
    def test_single_mode_extension(self, grid128):
        # eta = 0: v(x,z) = e^{kz} cos(kx), solved without any iteration
        k = 3
        fieldv = solve(grid128, np.zeros(128), np.cos(k * grid128.x))
        z = el._geometry(grid128, 65, 20.0).z
        want = np.exp(k * z)[:, None] * np.cos(k * grid128.x)[None, :]
        assert np.max(np.abs(fieldv.values - want)) < np.exp(-k * 20.0) + 1e-13
        assert fieldv.iterations == 0
        assert fieldv.bottom_offset == 0.0

    def test_constant_data(self, grid64):
        fieldv = solve(grid64, np.zeros(64), np.full(64, 1.7))
        assert np.max(np.abs(fieldv.values - 1.7)) < 1e-14

    def test_trace_derivatives_flat(self, grid128):
        k = 2
        fieldv = solve(grid128, np.zeros(128), np.cos(k * grid128.x))
        vz0, vx0 = el.trace_derivatives(fieldv)
        assert np.max(np.abs(vz0 - k * np.cos(k * grid128.x))) < 1e-12
        assert np.max(np.abs(vx0 + k * np.sin(k * grid128.x))) < 1e-12

    def test_trace_of_constant_vanishes(self, grid64):
        fieldv = solve(grid64, np.zeros(64), np.full(64, 2.0))
        vz0, vx0 = el.trace_derivatives(fieldv)
        assert np.max(np.abs(vz0)) < 1e-14
        assert np.max(np.abs(vx0)) < 1e-14


class TestManufactured:
    """Psi(x,y) = e^{ky} cos(kx) is harmonic and decays downward, so its
    flattening v(x,z) = e^{k(z+eta)} cos(kx) solves the strip problem with
    data psi = e^{k eta} cos(kx) exactly (up to depth truncation)."""

    def exact(self, grid, k, nz, depth):
        eta = 0.1 * np.cos(grid.x)
        psi = np.exp(k * eta) * np.cos(k * grid.x)
        z = el._geometry(grid, nz, depth).z
        v = np.exp(k * (z[:, None] + eta[None, :])) * np.cos(k * grid.x)[None, :]
        return eta, psi, v

    def test_curved_surface_solution(self):
        grid = Grid(256)
        eta, psi, want = self.exact(grid, 2.0, 129, 20.0)
        fieldv = solve(grid, eta, psi, nz=129)
        assert np.max(np.abs(fieldv.values - want)) <= 1e-5

    def test_surface_flux(self):
        grid = Grid(256)
        k = 2.0
        eta, psi, _ = self.exact(grid, k, 129, 20.0)
        fieldv = solve(grid, eta, psi, nz=129)
        vz0, vx0 = el.trace_derivatives(fieldv)
        eta_x = el.make_strip_problem(grid, eta, psi).eta_x
        flux = (1.0 + eta_x**2) * vz0 - eta_x * vx0
        want = k * np.exp(k * eta) * (np.cos(k * grid.x) + eta_x * np.sin(k * grid.x))
        assert np.max(np.abs(flux - want)) <= 1e-8

    def test_nz_refinement_converges(self):
        # coarse vertical grids resolve the correction progressively;
        # the error floor at large nz is the solver tolerance, so the
        # order is fitted on the pre-floor section
        grid = Grid(128)
        errors = []
        for nz in (9, 11, 13, 17):
            eta, psi, want = self.exact(grid, 2.0, nz, 20.0)
            fieldv = solve(grid, eta, psi, nz=nz, tol=1e-12)
            errors.append(np.max(np.abs(fieldv.values - want)))
        assert errors[-1] < errors[0]
        order = np.polyfit(np.log([9, 11, 13, 17]), np.log(errors), 1)[0]
        assert order < -2.0

    def test_x_refinement_spectral(self):
        # steeper surface so the x-truncation error is visible above the
        # depth-truncation floor (~1e-9 for the slowest mode at depth 20)
        errs = []
        for n in (16, 24, 32):
            grid = Grid(n)
            eta = 0.3 * np.cos(grid.x)
            psi = np.exp(3.0 * eta) * np.cos(3.0 * grid.x)
            z = el._geometry(grid, 65, 20.0).z
            want = np.exp(3.0 * (z[:, None] + eta[None, :])) * np.cos(3.0 * grid.x)
            fieldv = solve(grid, eta, psi, nz=65)
            errs.append(np.max(np.abs(fieldv.values - want)))
        # analytic data: error falls faster than any power of n, then floors
        assert errs[1] < 1e-4 * errs[0]
        assert errs[2] < 5e-9

    def test_max_principle(self):
        grid = Grid(128)
        eta, psi, _ = self.exact(grid, 2.0, 65, 20.0)
        fieldv = solve(grid, eta, psi, nz=65)
        bound = np.max(np.abs(psi)) + np.abs(fieldv.bottom_offset + fieldv.psi_mean)
        assert np.max(np.abs(fieldv.values)) <= bound + 1e-3 * np.max(np.abs(psi))


class TestSolverContract:
    def test_failure_carries_residual(self, grid64):
        eta = 0.4 * np.cos(grid64.x)
        psi = np.cos(2 * grid64.x)
        prob = el.make_strip_problem(grid64, eta, psi, nz=33)
        with pytest.raises(el.EllipticError) as err:
            el.solve_strip(prob, tol=1e-10, maxiter=2)
        assert err.value.residual is not None
        assert err.value.residual > 1e-10

    def test_reported_residual_meets_contract(self, grid64):
        eta = 0.1 * np.cos(grid64.x) + 0.05 * np.sin(2 * grid64.x)
        fieldv = solve(grid64, eta, np.cos(3 * grid64.x))
        assert fieldv.residual <= 1e-10

    def test_warm_start_accepted(self, grid64):
        eta = 0.1 * np.cos(grid64.x)
        prob = el.make_strip_problem(grid64, eta, np.cos(2 * grid64.x))
        first = el.solve_strip(prob)
        again = el.solve_strip(prob, x0=first.raw)
        assert np.max(np.abs(again.values - first.values)) < 1e-9
        assert again.iterations <= first.iterations


class TestDepthFunctionals:
    def test_flat_g_and_w(self, grid128):
        # eta = 0, psi = cos(kx): the column integrals reduce to
        # int e^{2kz} dz = 1/(2k) against -k^2/2 sin, cos of 2kx
        for k in (1, 2, 3):
            fieldv = solve(grid128, np.zeros(128), np.cos(k * grid128.x), nz=129)
            g, w_tilde = el.depth_quadrature_g_w(fieldv)
            amp = oracles.flat_g_amplitude(k)
            assert np.max(np.abs(g - amp * np.sin(2 * k * grid128.x))) < 1e-10
            assert np.max(np.abs(w_tilde + amp * np.cos(2 * k * grid128.x))) < 1e-10

    def test_zero_data_gives_zero(self, grid64):
        fieldv = solve(grid64, 0.05 * np.cos(grid64.x), np.zeros(64))
        g, w_tilde = el.depth_quadrature_g_w(fieldv)
        assert np.max(np.abs(g)) < 1e-14
        assert np.max(np.abs(w_tilde)) < 1e-14

    def test_eta_mismatch_rejected(self, grid64):
        fieldv = solve(grid64, np.zeros(64), np.cos(grid64.x))
        with pytest.raises(ValueError, match="eta"):
            el.depth_quadrature_g_w(fieldv, eta=np.full(64, 0.1))

    def test_dirichlet_energy_matches_flat_closed_form(self, grid128):
        # int psi G psi dx = pi k for psi = cos kx at eta = 0
        for k in (1, 2):
            fieldv = solve(grid128, np.zeros(128), np.cos(k * grid128.x), nz=129)
            assert abs(el.dirichlet_energy(fieldv) - np.pi * k) < 1e-8

    def test_dirichlet_energy_matches_trace_pairing(self, grid128):
        rng = np.random.default_rng(5)
        eta = random_field(grid128, rng, kmax=6, amplitude=0.1)
        psi = random_field(grid128, rng, kmax=6)
        fieldv = solve(grid128, eta, psi, nz=129)
        vz0, vx0 = el.trace_derivatives(fieldv)
        eta_x = fieldv.problem.eta_x
        g_psi = (1.0 + eta_x**2) * vz0 - eta_x * vx0
        pairing = integral(grid128, psi * (g_psi - np.mean(g_psi)))
        assert abs(el.dirichlet_energy(fieldv) - pairing) < 1e-6 * max(1.0, abs(pairing))
