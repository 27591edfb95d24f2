import math

import numpy as np
import pytest

from slip_lds.errors import InvalidHorizon, LambdaOutOfRange
from slip_lds.spectral import (
    FilterBank,
    _lanczos_eigenpairs,
    basis_filters,
    build_hankel,
    decay_bound,
    hankel_matvec,
    reconstruction_error,
    reconstruction_error_grid,
    spectral_filters,
    top_eigenpairs,
    uniform_error_bound,
    verify_spectral_decay,
    wave_filters,
)

from oracles import hankel_literal, power_iteration_deflation


class TestHankel:
    def test_entries(self):
        H = build_hankel(5)
        assert H[0, 0] == 1.0
        assert H[0, 1] == 0.0
        assert H[0, 2] == pytest.approx(1 / 3)
        assert H[1, 1] == pytest.approx(1 / 3)

    @pytest.mark.parametrize("T", [1, 2, 7, 40])
    def test_matches_definition(self, T):
        np.testing.assert_allclose(build_hankel(T), hankel_literal(T), rtol=0, atol=1e-16)

    def test_symmetric_psd(self):
        for T in (10, 100, 500):
            H = build_hankel(T)
            assert np.array_equal(H, H.T)
            w = np.linalg.eigvalsh(H)
            assert w[0] >= -1e-10 * w[-1]

    def test_invalid(self):
        with pytest.raises(InvalidHorizon):
            build_hankel(0)

    def test_fft_matvec(self, rng):
        T = 300
        v = rng.standard_normal((T, 3))
        np.testing.assert_allclose(hankel_matvec(T)(v), build_hankel(T) @ v, atol=1e-12)
        np.testing.assert_allclose(hankel_matvec(T)(v[:, 0]), build_hankel(T) @ v[:, 0], atol=1e-12)

    def test_top_eigenvalue_trace_bound(self):
        for T in (10, 100, 1000):
            assert spectral_filters(T, 1).sigma[0] <= math.log(T) + 1


class TestEigenpairs:
    def test_trivial_sizes(self):
        b = top_eigenpairs(build_hankel(1), 1)
        assert b.sigma[0] == 1.0 and b.filters[0, 0] == 1.0
        b = top_eigenpairs(build_hankel(2), 2)
        np.testing.assert_allclose(b.sigma, [1.0, 1 / 3])
        np.testing.assert_allclose(np.abs(b.filters), np.eye(2), atol=1e-15)
        np.testing.assert_allclose(b.filters, np.eye(2), atol=1e-15)

    def test_power_iteration_oracle(self):
        T = 100
        bank = spectral_filters(T, 10)
        vals, vecs = power_iteration_deflation(hankel_literal(T), 10)
        np.testing.assert_allclose(bank.sigma, vals, rtol=1e-6)
        # eigenvectors agree up to sign for the well separated leading pairs
        for j in range(5):
            assert abs(abs(vecs[:, j] @ bank.filters[:, j]) - 1) < 1e-6

    def test_bank_invariants(self):
        for T, k in ((50, 20), (400, 30), (1500, 25)):
            bank = spectral_filters(T, k)
            H = build_hankel(T)
            assert np.abs(bank.filters.T @ bank.filters - np.eye(k)).max() <= 1e-8
            res = np.linalg.norm(H @ bank.filters - bank.filters * bank.sigma, axis=0)
            assert res.max() <= 1e-8 * bank.sigma[0]
            assert np.all(np.diff(bank.sigma) <= 1e-12 * bank.sigma[0])
            assert bank.sigma[-1] >= -1e-12

    def test_sign_convention(self):
        bank = spectral_filters(300, 15)
        for j in range(15):
            col = bank.filters[:, j]
            first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
            assert first > 0

    def test_lanczos_matches_dense(self):
        T, k = 900, 20
        dense = top_eigenpairs(build_hankel(T), k)
        lan = _lanczos_eigenpairs(T, k)
        np.testing.assert_allclose(lan.sigma, dense.sigma, rtol=1e-9, atol=1e-14)
        # leading filters are well separated and must agree to high accuracy
        np.testing.assert_allclose(lan.filters[:, :10], dense.filters[:, :10], atol=1e-7)

    def test_readonly_cache(self):
        bank = spectral_filters(64, 4)
        with pytest.raises(ValueError):
            bank.filters[0, 0] = 1.0
        assert spectral_filters(64, 4) is bank

    def test_bad_k(self):
        with pytest.raises(ValueError):
            spectral_filters(10, 11)
        with pytest.raises(ValueError):
            top_eigenpairs(build_hankel(5), 0)

    def test_horizon_cap(self):
        with pytest.raises(InvalidHorizon):
            spectral_filters(20001, 5)

    def test_truncate(self):
        bank = spectral_filters(64, 8)
        t = bank.truncate(3)
        assert t.k == 3 and t.T == 64
        np.testing.assert_array_equal(t.filters, bank.filters[:, :3])


class TestReconstruction:
    def test_complete_basis(self):
        bank = spectral_filters(30, 30)
        lams = np.linspace(-1, 1, 41)
        assert reconstruction_error_grid(bank, lams).max() <= 1e-9

    def test_lambda_zero(self):
        bank = top_eigenpairs(build_hankel(2), 1)
        assert reconstruction_error(bank, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_out_of_range(self):
        with pytest.raises(LambdaOutOfRange):
            reconstruction_error(spectral_filters(10, 2), 1.01)

    def test_uniform_bound(self):
        T = 100
        lams = np.linspace(-1, 1, 2001)
        sups = []
        for k in (5, 10, 15):
            sup = reconstruction_error_grid(spectral_filters(T, k), lams).max()
            assert sup <= uniform_error_bound(T, k)
            sups.append(sup)
        assert sups[0] > sups[1] > sups[2]

    def test_monotone_in_k(self):
        T = 80
        lams = np.linspace(-1, 1, 301)
        prev = None
        for k in range(1, 16):
            err = reconstruction_error_grid(spectral_filters(T, 15).truncate(k), lams)
            if prev is not None:
                assert np.all(err <= prev + 1e-12)
            prev = err

    @pytest.mark.parametrize("T,k", [(40, 3), (100, 8), (120, 12)])
    def test_average_identity(self, T, k):
        full = spectral_filters(T, T)
        lams = np.linspace(-1, 1, 4001)
        err = reconstruction_error_grid(full.truncate(k), lams)
        avg = 0.5 * np.trapezoid(err, lams)
        assert avg == pytest.approx(float(np.sum(full.sigma[k:])), rel=0.01)


class TestDecay:
    def test_bound_arithmetic(self):
        s1 = 2.0
        assert decay_bound(s1, 1000, 10) == pytest.approx(1168 * s1 * math.exp(math.pi**2 / (4 * math.log(1000))) ** -20)

    def test_t10_first_index(self):
        rep = verify_spectral_decay(spectral_filters(10, 10))
        assert rep.sigma[0] <= 1168 * spectral_filters(10, 10).sigma[0]

    @pytest.mark.parametrize("T", [50, 200, 1000])
    def test_bound_holds(self, T):
        rep = verify_spectral_decay(spectral_filters(T, 30))
        assert rep.passed
        assert rep.j.max() == 14
        assert np.all(rep.margin > 0)

    def test_needs_t10(self):
        with pytest.raises(InvalidHorizon):
            verify_spectral_decay(spectral_filters(9, 5))


def test_basis_filters():
    b = basis_filters(10, 3)
    np.testing.assert_array_equal(b.filters, np.eye(10, 3))
    with pytest.raises(ValueError):
        basis_filters(3, 4)


def test_wave_filters_orthonormal():
    b = wave_filters(500, 10)
    np.testing.assert_allclose(b.filters.T @ b.filters, np.eye(10), atol=1e-10)
    i = np.arange(1, 501)
    Z = 2.0 / ((i[:, None] + i[None, :]) ** 3 - (i[:, None] + i[None, :]))
    np.testing.assert_allclose(Z @ b.filters, b.filters * b.sigma, atol=1e-10)
    assert isinstance(b, FilterBank)
