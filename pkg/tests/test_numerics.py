import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from misoqos.errors import DimensionMismatch, DomainError, NotPositiveDefinite
from misoqos.numerics import (SeededRng, digamma, from_db, hermitian_solve, psd_factor,
                              sample_complex_gaussian, to_db)


def random_pd(gen, n):
    A = gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n))
    return A @ A.conj().T + 0.1 * np.eye(n)


class TestHermitianSolve:
    def test_identity(self, gen):
        B = gen.standard_normal((2, 3)) + 1j * gen.standard_normal((2, 3))
        np.testing.assert_allclose(hermitian_solve(np.eye(2), B), B)

    def test_diagonal(self):
        np.testing.assert_allclose(hermitian_solve(np.diag([2.0, 4.0]), np.array([2.0, 4.0])), [1, 1])

    @pytest.mark.parametrize("n", range(1, 9))
    def test_residual(self, gen, n):
        for _ in range(100 // 8 + 1):
            A = random_pd(gen, n)
            B = gen.standard_normal((n, 2)) + 1j * gen.standard_normal((n, 2))
            X = hermitian_solve(A, B)
            assert np.linalg.norm(A @ X - B) <= 1e-10 * np.linalg.norm(B)

    def test_singular_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            hermitian_solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.ones(2))

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            hermitian_solve(np.diag([1.0, -1.0]), np.ones(2))


class TestSampling:
    def test_zero_covariance_returns_mean(self):
        mean = np.array([1 + 2j, -0.5j])
        out = sample_complex_gaussian(mean, np.zeros((2, 2)), SeededRng(3), size=5)
        assert np.array_equal(out, np.broadcast_to(mean, (5, 2)))

    def test_covariance_lln(self):
        z = sample_complex_gaussian(np.zeros(4), np.eye(4), SeededRng(11), size=100_000)
        cov = z.T @ z.conj() / z.shape[0]
        assert np.linalg.norm(cov - np.eye(4)) <= 0.05 * np.linalg.norm(np.eye(4))

    def test_circular(self):
        z = sample_complex_gaussian(np.zeros(1), np.eye(1), SeededRng(2), size=100_000)[:, 0]
        assert abs(np.mean(z * z)) < 0.02

    def test_deterministic(self):
        a = sample_complex_gaussian(np.zeros(2), np.eye(2), SeededRng(5, 9), size=10)
        b = sample_complex_gaussian(np.zeros(2), np.eye(2), SeededRng(5, 9), size=10)
        assert a.tobytes() == b.tobytes()

    def test_streams_differ(self):
        a = sample_complex_gaussian(np.zeros(2), np.eye(2), SeededRng(5, 0), size=4)
        b = sample_complex_gaussian(np.zeros(2), np.eye(2), SeededRng(5, 1), size=4)
        assert not np.allclose(a, b)

    def test_rank_deficient_covariance(self):
        v = np.array([1.0, 1j]) / np.sqrt(2)
        cov = np.outer(v, v.conj())
        L = psd_factor(cov)
        np.testing.assert_allclose(L @ L.conj().T, cov, atol=1e-12)
        z = sample_complex_gaussian(np.zeros(2), cov, SeededRng(0), size=1000)
        # every draw lies on span(v)
        resid = z - np.outer(z @ v.conj(), v)
        assert np.max(np.abs(resid)) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            sample_complex_gaussian(np.zeros(3), np.eye(2), SeededRng(0))

    def test_invalid_seed(self):
        with pytest.raises(DomainError):
            SeededRng(-1)


class TestDigamma:
    def test_euler_mascheroni(self):
        assert abs(digamma(1.0) + 0.5772156649015329) < 1e-10

    @pytest.mark.parametrize("x", [0.5, 2.0, 10.0])
    def test_recurrence(self, x):
        assert abs(digamma(x + 1) - digamma(x) - 1 / x) < 1e-10

    @given(st.floats(min_value=1e-3, max_value=1e4))
    @settings(max_examples=200)
    def test_matches_reference(self, x):
        assert abs(digamma(x) - scipy.special.digamma(x)) <= 1e-10 * max(1.0, abs(scipy.special.digamma(x)))

    def test_shifted_log_approximation(self):
        # psi(x) is close to ln(x - 1/2) for moderate x; ln(x + 1/2) is off by about 1/x.
        x = 7.04162
        assert abs(digamma(x) - math.log(x - 0.5)) < 1e-3
        assert abs(digamma(x) - math.log(x + 0.5)) > 0.1

    @pytest.mark.parametrize("x", [0.0, -1.0])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            digamma(x)


class TestDecibels:
    def test_values(self):
        assert to_db(1.0) == 0.0
        assert abs(to_db(2.0) - 3.0103) < 1e-4
        assert abs(from_db(3.0072) - 1.99867) < 2e-4
        assert abs(from_db(3.0072) - 10 ** 0.30072) < 1e-14

    @given(st.floats(min_value=1e-12, max_value=1e12))
    def test_round_trip(self, p):
        assert abs(from_db(to_db(p)) - p) <= 1e-12 * p

    @pytest.mark.parametrize("p", [0.0, -2.0])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            to_db(p)
