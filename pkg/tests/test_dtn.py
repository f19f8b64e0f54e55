"""Surface operator: flat closed forms, symmetry and positivity, the two
inverses of (Id+G), the shape derivative, and the structural identities."""

import numpy as np
import pytest

import hesw.dtn as dtn
from hesw.spectral import Grid, abs_d, derivative, integral, l2_norm, sobolev_norm

import oracles
from fieldgen import random_field


class TestFlatSurface:
    def test_eigenmodes(self, grid128):
        # G(0) = |D|: cos(kx) -> k cos(kx)
        eta = np.zeros(128)
        for k in (1, 2, 5):
            res = dtn.dtn_apply(grid128, eta, np.cos(k * grid128.x))
            assert np.max(np.abs(res.g_psi - k * np.cos(k * grid128.x))) < 1e-10

    def test_constants_annihilated(self, grid64):
        res = dtn.dtn_apply(grid64, np.zeros(64), np.full(64, 3.0))
        assert np.max(np.abs(res.g_psi)) < 1e-13

    def test_remainder_vanishes_identically(self, grid128):
        # R(0) = G(0) - |D| = 0, exactly: the correction short-circuits
        rng = np.random.default_rng(0)
        psi = random_field(grid128, rng)
        rem = dtn.dtn_remainder(grid128, np.zeros(128), psi)
        assert np.max(np.abs(rem)) < 1e-12

    def test_flat_b_and_v(self, grid128):
        k = 2
        res = dtn.dtn_apply(grid128, np.zeros(128), np.cos(k * grid128.x))
        assert np.max(np.abs(res.b - k * np.cos(k * grid128.x))) < 1e-10
        assert np.max(np.abs(res.v + k * np.sin(k * grid128.x))) < 1e-10


class TestCurvedSurface:
    def test_manufactured_flux(self):
        # harmonic e^{ky}cos(kx) under eta = 0.1 cos x, k = 2
        grid = Grid(256)
        k = 2.0
        eta = 0.1 * np.cos(grid.x)
        eta_x = -0.1 * np.sin(grid.x)
        psi = np.exp(k * eta) * np.cos(k * grid.x)
        want = k * np.exp(k * eta) * (np.cos(k * grid.x) + eta_x * np.sin(k * grid.x))
        want = want - np.mean(want)
        res = dtn.dtn_apply(grid, eta, psi, nz=129)
        assert np.max(np.abs(res.g_psi - want)) <= 1e-8

    def test_output_mean_is_zero(self, grid128):
        rng = np.random.default_rng(1)
        eta = random_field(grid128, rng, kmax=6, amplitude=0.1)
        psi = random_field(grid128, rng, kmax=8)
        res = dtn.dtn_apply(grid128, eta, psi)
        assert abs(integral(grid128, res.g_psi)) < 1e-10

    def test_bv_recover_flux_and_slope(self, grid128):
        # G psi = B - eta_x V and psi_x = V + eta_x B, pointwise
        rng = np.random.default_rng(2)
        eta = random_field(grid128, rng, kmax=6, amplitude=0.1)
        psi = random_field(grid128, rng, kmax=8)
        res = dtn.dtn_apply(grid128, eta, psi)
        eta_x = derivative(grid128, eta)
        assert np.max(np.abs(res.g_psi - (res.b - eta_x * res.v))) < 1e-10
        assert np.max(np.abs(derivative(grid128, psi) - (res.v + eta_x * res.b))) < 1e-10

    def test_self_adjoint(self, grid128):
        rng = np.random.default_rng(3)
        for _ in range(3):
            eta = random_field(grid128, rng, kmax=6, amplitude=0.1)
            phi = random_field(grid128, rng, kmax=8)
            psi = random_field(grid128, rng, kmax=8)
            lhs = integral(grid128, phi * dtn.dtn_apply(grid128, eta, psi).g_psi)
            rhs = integral(grid128, psi * dtn.dtn_apply(grid128, eta, phi).g_psi)
            scale = l2_norm(grid128, phi) * l2_norm(grid128, psi)
            assert abs(lhs - rhs) <= 1e-8 * scale

    def test_positive_semidefinite(self, grid128):
        rng = np.random.default_rng(4)
        for _ in range(3):
            eta = random_field(grid128, rng, kmax=6, amplitude=0.1)
            psi = random_field(grid128, rng, kmax=8)
            quad = integral(grid128, psi * dtn.dtn_apply(grid128, eta, psi).g_psi)
            assert quad > 0.0

    def test_warm_start_toggle_matches(self, grid64):
        eta = 0.1 * np.cos(grid64.x)
        psi = np.cos(2 * grid64.x)
        a = dtn.dtn_apply(grid64, eta, psi, warm_start=False)
        b = dtn.dtn_apply(grid64, eta, psi, warm_start=True)
        assert np.max(np.abs(a.g_psi - b.g_psi)) < 1e-9


class TestInversion:
    def setup_state(self, grid, seed=5):
        rng = np.random.default_rng(seed)
        eta = random_field(grid, rng, kmax=6, amplitude=0.1)
        u = random_field(grid, rng, kmax=8)
        return eta, u

    def test_fixed_point_residual_contract(self, grid128):
        eta, u = self.setup_state(grid128)
        inv = dtn.invert_id_plus_dtn(grid128, eta, u, tol=1e-10)
        assert inv.residual <= 10.0 * 1e-10
        check = u - inv.psi - dtn.dtn_apply(grid128, eta, inv.psi).g_psi
        assert l2_norm(grid128, check) <= 10.0 * 1e-10 * l2_norm(grid128, u)

    def test_round_trip(self, grid128):
        # build u = (Id+G)psi, invert, compare
        rng = np.random.default_rng(6)
        eta = random_field(grid128, rng, kmax=6, amplitude=0.1)
        psi = random_field(grid128, rng, kmax=6)
        psi = psi - np.mean(psi)
        u = psi + dtn.dtn_apply(grid128, eta, psi).g_psi
        inv = dtn.invert_id_plus_dtn(grid128, eta, u)
        assert np.max(np.abs(inv.psi - psi)) < 1e-8

    def test_two_routes_agree(self, grid128):
        eta, u = self.setup_state(grid128, seed=7)
        a = dtn.invert_id_plus_dtn(grid128, eta, u)
        b = dtn.invert_direct(grid128, eta, u)
        assert l2_norm(grid128, a.psi - b.psi) <= 1e-8 * l2_norm(grid128, u)

    def test_direct_handles_steeper_surface(self, grid64):
        # slope beyond the comfortable contraction regime
        eta = 0.4 * np.cos(grid64.x)
        u = np.cos(2 * grid64.x)
        inv = dtn.invert_direct(grid64, eta, u, tol=1e-9)
        check = u - inv.psi - dtn.dtn_apply(grid64, eta, inv.psi).g_psi
        assert l2_norm(grid64, check) <= 1e-8 * l2_norm(grid64, u)

    def test_zero_data(self, grid64):
        inv = dtn.invert_id_plus_dtn(grid64, 0.1 * np.cos(grid64.x), np.zeros(64))
        assert np.max(np.abs(inv.psi)) == 0.0
        assert inv.residual == 0.0

    def test_budget_exhaustion_raises(self, grid64):
        eta, u = 0.1 * np.cos(grid64.x), np.cos(2 * grid64.x)
        with pytest.raises(dtn.DtnInversionError) as err:
            dtn.invert_id_plus_dtn(grid64, eta, u, tol=1e-14, max_iter=1)
        assert len(err.value.residuals) == 1

    def test_inversion_result_reusable(self, grid64):
        eta, u = self.setup_state(grid64, seed=8)
        inv = dtn.invert_id_plus_dtn(grid64, eta, u)
        direct = dtn.dtn_apply(grid64, eta, inv.psi)
        assert np.max(np.abs(inv.g_psi - direct.g_psi)) < 1e-11


class TestShapeDerivative:
    def test_flat_closed_form(self, grid128):
        # at eta = 0: dG(0)[cos(mx)] cos(kx) = k(k-m) cos((m-k)x) for k < m,
        # zero for k >= m (the difference-frequency survives, the sum dies)
        eta0 = np.zeros(128)
        for k, m in [(1, 2), (2, 5), (3, 4)]:
            got = dtn.shape_derivative(grid128, eta0, np.cos(m * grid128.x),
                                       np.cos(k * grid128.x))
            coeff, freq = oracles.flat_shape_derivative_modes(m, k)
            want = coeff * np.cos(freq * grid128.x)
            assert np.max(np.abs(got - want)) <= 1e-9
        for k, m in [(3, 3), (4, 2)]:
            got = dtn.shape_derivative(grid128, eta0, np.cos(m * grid128.x),
                                       np.cos(k * grid128.x))
            assert np.max(np.abs(got)) <= 1e-9

    def test_matches_finite_difference(self, grid128):
        rng = np.random.default_rng(9)
        eta = random_field(grid128, rng, kmax=4, amplitude=0.08)
        delta = random_field(grid128, rng, kmax=4)
        psi = random_field(grid128, rng, kmax=6)
        got = dtn.shape_derivative(grid128, eta, delta, psi)
        h = 1e-5
        plus = dtn.dtn_apply(grid128, eta + h * delta, psi).g_psi
        minus = dtn.dtn_apply(grid128, eta - h * delta, psi).g_psi
        fd = (plus - minus) / (2.0 * h)
        assert np.max(np.abs(got - fd)) <= 1e-6

    def test_mean_zero(self, grid64):
        rng = np.random.default_rng(10)
        eta = random_field(grid64, rng, kmax=4, amplitude=0.1)
        delta = random_field(grid64, rng, kmax=4)
        psi = random_field(grid64, rng, kmax=6)
        out = dtn.shape_derivative(grid64, eta, delta, psi)
        assert abs(integral(grid64, out)) < 1e-10

    def test_symmetry_of_derivative_form(self, grid64):
        # <phi, dG[delta] psi> = <dG[delta] phi, psi>, inherited from
        # symmetry of G(eta) along the perturbation path
        rng = np.random.default_rng(11)
        eta = random_field(grid64, rng, kmax=4, amplitude=0.08)
        delta = random_field(grid64, rng, kmax=4)
        phi = random_field(grid64, rng, kmax=6)
        psi = random_field(grid64, rng, kmax=6)
        lhs = integral(grid64, phi * dtn.shape_derivative(grid64, eta, delta, psi))
        rhs = integral(grid64, psi * dtn.shape_derivative(grid64, eta, delta, phi))
        assert abs(lhs - rhs) <= 1e-6 * l2_norm(grid64, phi) * l2_norm(grid64, psi)


class TestStructuralIdentities:
    def test_cancellation(self, grid128):
        # G(eta) B = -d/dx V, the surface form of irrotationality.  B
        # doubles the data's bandwidth, so the column grid must resolve
        # e^{kz} layers twice as thin as the solve for G psi itself.
        rng = np.random.default_rng(12)
        eta = random_field(grid128, rng, kmax=6, amplitude=0.1)
        psi = random_field(grid128, rng, kmax=6)
        assert dtn.cancellation_check(grid128, eta, psi, nz=129) <= 1e-8

    def test_cancellation_improves_under_refinement(self, grid128):
        rng = np.random.default_rng(12)
        eta = random_field(grid128, rng, kmax=6, amplitude=0.1)
        psi = random_field(grid128, rng, kmax=6)
        coarse = dtn.cancellation_check(grid128, eta, psi, nz=65)
        fine = dtn.cancellation_check(grid128, eta, psi, nz=129)
        assert fine <= 0.5 * coarse

    def test_operator_norm_probe_flat(self, grid128):
        # G(0) = |D| maps H^1 -> L^2 with norm 1 on mean-free data
        est = dtn.estimate_operator_norm(
            grid128, lambda f: abs_d(grid128, f), 1.0, 0.0, n_samples=10, seed=1)
        assert est <= 1.0 + 1e-12
        assert est > 0.8

    def test_operator_norm_probe_is_deterministic(self, grid64):
        op = lambda f: abs_d(grid64, f)
        a = dtn.estimate_operator_norm(grid64, op, 1.0, 0.0, seed=3)
        b = dtn.estimate_operator_norm(grid64, op, 1.0, 0.0, seed=3)
        assert a == b

    def test_remainder_is_lower_order(self, grid128):
        # R(eta) = G(eta) - |D| stays bounded L^2 -> L^2 on smooth data
        rng = np.random.default_rng(13)
        eta = random_field(grid128, rng, kmax=4, amplitude=0.1)
        op = lambda f: dtn.dtn_remainder(grid128, eta, f)
        est = dtn.estimate_operator_norm(grid128, op, 0.0, 0.0,
                                         n_samples=6, seed=2, kmax=16)
        assert est < 1.0
