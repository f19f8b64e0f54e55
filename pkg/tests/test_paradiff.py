"""Paraproduct algebra: exact Bony regrouping, spectral containment,
symbol quantization, and the commutator ratio experiment."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import hesw.paradiff as pd
import hesw.spectral as sp
from hesw.spectral import Grid, apply_multiplier, integral, l2_norm

import oracles
from fieldgen import random_field, rel_l2

seeds = st.integers(min_value=0, max_value=2**32 - 1)


class TestParaproduct:
    def test_unit_coefficient_is_high_pass(self, grid256):
        rng = np.random.default_rng(0)
        b = random_field(grid256, rng, kmax=100)
        got = pd.paraproduct(grid256, np.ones(256), b)
        want = b - sp.low_pass(grid256, b, pd.OFFSET - 1)
        assert np.max(np.abs(got - want)) < 1e-12

    def test_constant_data_gives_zero(self, grid256):
        rng = np.random.default_rng(1)
        a = random_field(grid256, rng)
        out = pd.paraproduct(grid256, a, np.full(256, 3.0))
        assert np.max(np.abs(out)) == 0.0

    def test_output_mean_vanishes(self, grid256):
        # the k=0 bin is zeroed in spectrum; quadrature re-sums through
        # floats, so the check is at accumulation roundoff
        rng = np.random.default_rng(2)
        a = random_field(grid256, rng)
        b = random_field(grid256, rng)
        assert abs(integral(grid256, pd.paraproduct(grid256, a, b))) < 1e-14

    @given(seed=seeds)
    @settings(max_examples=25, deadline=None)
    def test_bony_identity(self, seed):
        grid = Grid(256)
        rng = np.random.default_rng(seed)
        a = random_field(grid, rng, kmax=100)
        b = random_field(grid, rng, kmax=100)
        total = (pd.paraproduct(grid, a, b) + pd.paraproduct(grid, b, a)
                 + pd.bony_remainder(grid, a, b))
        assert rel_l2(grid, total, a * b) <= 1e-12

    def test_remainder_of_constants(self, grid256):
        # constants live in block 0 alone, which the remainder keeps
        out = pd.bony_remainder(grid256, np.ones(256), np.ones(256))
        assert np.max(np.abs(out - 1.0)) < 1e-13

    def test_remainder_of_separated_supports_vanishes(self, grid256):
        # spectra two shells apart never meet the |j-j'| <= 1 diagonal;
        # the off-shell blocks are transform roundoff, hence the 1e-14
        a = np.cos(2 * grid256.x)
        b = np.cos(64 * grid256.x)
        assert np.max(np.abs(pd.bony_remainder(grid256, a, b))) < 1e-14

    def test_containment(self):
        # data in shell j: T_a u keeps exact spectral zeros below and
        # above the enlarged annulus (2^{j-2}, 3 * 2^j); alias-free at
        # this n, so zero means zero
        grid = Grid(256)
        rng = np.random.default_rng(3)
        a = random_field(grid, rng, kmax=100)
        for j, mode in ((4, 12), (5, 24), (5, 48)):
            u = np.cos(mode * grid.x)
            spec = np.fft.rfft(pd.paraproduct(grid, a, u))
            scale = np.max(np.abs(spec))
            low = grid.k <= 2.0 ** (j - 2)
            high = grid.k >= 3.0 * 2.0**j
            assert np.max(np.abs(spec[low | high])) <= 1e-13 * scale


class TestParaSymbol:
    def test_empty_terms_rejected(self, grid64):
        with pytest.raises(ValueError):
            pd.ParaSymbol(grid64, [])

    def test_table_shape_and_values(self, grid64):
        c = np.cos(grid64.x)
        sym = pd.ParaSymbol(grid64, [(c, np.abs)], order=1.0)
        table = sym.table()
        assert table.shape == (64, 64)
        assert abs(table[0, 1] - c[0] * 1.0) < 1e-14

    def test_nonfinite_multiplier_rejected(self, grid64):
        sym = pd.ParaSymbol(grid64, [(np.ones(64), lambda xi: 1.0 / xi)])
        with pytest.raises(ValueError, match="finite"):
            sym.table()

    def test_seminorm_of_pure_multiplier(self, grid64):
        sym = pd.ParaSymbol(grid64, [(np.ones(64), np.abs)],
                            order=1.0, regularity=0)
        k = grid64.kmax
        assert abs(sym.seminorm() - k / np.sqrt(1 + k * k)) < 1e-13

    def test_quantization_of_pure_multiplier(self, grid256):
        # single high shell: T_a u = a(D) u exactly
        sym = pd.ParaSymbol(grid256, [(np.ones(256), np.abs)], order=1.0)
        u = np.cos(16 * grid256.x)
        got = pd.paradiff_apply(sym, u)
        assert np.max(np.abs(got - 16.0 * np.cos(16 * grid256.x))) < 1e-11

    def test_quantization_of_pure_coefficient(self, grid256):
        rng = np.random.default_rng(4)
        c = random_field(grid256, rng, kmax=10)
        u = random_field(grid256, rng, kmax=100)
        sym = pd.ParaSymbol(grid256, [(c, lambda xi: np.ones_like(xi))])
        got = pd.paradiff_apply(sym, u)
        want = pd.paraproduct(grid256, c, u)
        assert np.max(np.abs(got - want)) < 1e-12

    def test_rejects_bare_field(self, grid64):
        with pytest.raises(TypeError):
            pd.paradiff_apply(np.ones(64), np.ones(64))


class TestFactorization:
    def test_flat_surface_collapses_to_abs(self, grid64):
        sym_a, sym_big = pd.factorization_symbols(grid64, np.zeros(64))
        k = grid64.k_signed
        assert np.max(np.abs(sym_a.table() - np.abs(k)[None, :])) < 1e-14
        assert np.max(np.abs(sym_big.table() - np.abs(k)[None, :])) < 1e-14

    def test_pointwise_identities(self, grid256):
        # a A = xi^2/alpha and a - A = (beta/alpha) i xi at random (x, xi)
        rng = np.random.default_rng(5)
        eta = 0.1 * np.cos(grid256.x)
        eta_x = -0.1 * np.sin(grid256.x)
        alpha = 1.0 + eta_x**2
        beta = -2.0 * eta_x
        sym_a, sym_big = pd.factorization_symbols(grid256, eta)
        ta, tb = sym_a.table(), sym_big.table()
        ix = rng.integers(0, 256, 64)
        jx = rng.integers(0, 256, 64)
        k = grid256.k_signed
        prod = ta[ix, jx] * tb[ix, jx]
        want = k[jx] ** 2 / alpha[ix]
        assert np.max(np.abs(prod - want) / np.maximum(1.0, np.abs(want))) <= 1e-12
        diff = ta[ix, jx] - tb[ix, jx]
        want2 = (beta[ix] / alpha[ix]) * 1j * k[jx]
        assert np.max(np.abs(diff - want2) / np.maximum(1.0, np.abs(want2))) <= 1e-12

    def test_real_part_lower_bound(self, grid128):
        eta = 0.2 * np.cos(grid128.x)
        sym_a, _ = pd.factorization_symbols(grid128, eta)
        table = sym_a.table()
        k = np.abs(grid128.k_signed)
        floor = k[None, :] / (1.0 + 0.04)
        assert np.all(table.real >= floor - 1e-12)

    def test_quantization_against_fine_grid_oracle(self):
        # same blockwise sum evaluated alias-free at double resolution
        grid = Grid(256)
        fine = Grid(512)
        eta = 0.1 * np.cos(grid.x)
        rng = np.random.default_rng(6)
        u = random_field(grid, rng, kmax=40)
        sym_a, _ = pd.factorization_symbols(grid, eta)
        got = pd.paradiff_apply(sym_a, u)

        def lift(f):
            spec = np.fft.rfft(f)
            wide = np.zeros(fine.n // 2 + 1, dtype=complex)
            wide[:spec.size] = spec
            wide[spec.size - 1] *= 0.5  # Nyquist bin splits when widened
            return np.fft.irfft(wide, fine.n) * 2.0

        sym_fine, _ = pd.factorization_symbols(fine, lift(eta))
        want = pd.paradiff_apply(sym_fine, lift(u))[::2]
        assert np.max(np.abs(got - want)) <= 1e-8


class TestCommutator:
    def test_constant_factor_commutes(self, grid256):
        f = np.cos(2 * grid256.x)
        a_field = np.full(256, 2.0)
        comm = (apply_multiplier(grid256, a_field * f, np.abs)
                - a_field * apply_multiplier(grid256, f, np.abs))
        assert np.max(np.abs(comm)) < 1e-12

    def test_two_mode_closed_form(self, grid256):
        # [|D|, cos x] cos 2x = (cos 3x - cos x)/2
        a_field = np.cos(grid256.x)
        f = np.cos(2 * grid256.x)
        comm = (apply_multiplier(grid256, a_field * f, np.abs)
                - a_field * apply_multiplier(grid256, f, np.abs))
        want = (np.cos(3 * grid256.x) - np.cos(grid256.x)) / 2.0
        assert np.max(np.abs(comm - want)) < 1e-10
        assert abs(l2_norm(grid256, comm) - oracles.COMMUTATOR_COS1_COS2_L2) < 1e-10

    def test_report_is_deterministic(self, grid128):
        a = pd.commutator_experiment(grid128, n_trials=10, seed=42)
        b = pd.commutator_experiment(grid128, n_trials=10, seed=42)
        assert a == b

    def test_ratio_stable_under_refinement(self):
        coarse = pd.commutator_experiment(Grid(256), n_trials=50, seed=0)
        fine = pd.commutator_experiment(Grid(512), n_trials=50, seed=0)
        assert fine["max_ratio"] <= 1.2 * coarse["max_ratio"]


class TestSymbolicCalculus:
    def test_composition_defect_bounded_under_refinement(self):
        # T_{1/alpha} T_alpha should behave like Id + smoothing; the probe
        # norm on H^1 must not grow with n
        import hesw.dtn as dtn
        norms = {}
        for n in (256, 512):
            grid = Grid(n)
            x = grid.x
            eta = 0.1 * np.cos(x) + 0.05 * np.sin(2 * x)
            eta_x = sp.derivative(grid, eta)
            alpha = 1.0 + eta_x**2

            def defect(f, grid=grid, alpha=alpha):
                inner = pd.paraproduct(grid, alpha, f)
                return pd.paraproduct(grid, 1.0 / alpha, inner) - f

            norms[n] = dtn.estimate_operator_norm(grid, defect, 1.0, 1.0,
                                                  n_samples=12, seed=9)
        assert norms[512] <= 1.2 * max(norms[256], 1e-6)
