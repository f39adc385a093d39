import numpy as np
import pytest

from misoqos.bc_model import (BcFilterSet, avg_mmse_all, avg_mse_all, avg_mse_conditional,
                              avg_rate, avg_rates, bc_mmse, bc_mmse_receiver, bc_mmse_receivers,
                              bc_mse, instantaneous_rate, with_mmse_receivers)

from conftest import deterministic_ensemble, random_instance, scenario_ensemble

ONE = np.array([[1.0 + 0j]])
H1 = np.array([1.0 + 0j])


def random_single(gen, K=3, N=4):
    P = gen.standard_normal((K, N)) + 1j * gen.standard_normal((K, N))
    h = gen.standard_normal(N) + 1j * gen.standard_normal(N)
    return P, h, float(gen.uniform(0.1, 2.0))


class TestScalarExamples:
    def test_zero_receiver_mse(self, gen):
        P, h, s2 = random_single(gen)
        assert bc_mse(P, 0.0, h, s2, 1) == 1.0

    def test_hand_arithmetic(self):
        assert bc_mse(ONE, 0.5, H1, 1.0, 0) == pytest.approx(0.5)
        assert bc_mmse_receiver(ONE, H1, 1.0, 0) == pytest.approx(0.5)
        assert bc_mmse(ONE, H1, 1.0, 0) == pytest.approx(0.5)
        assert instantaneous_rate(ONE, H1, 1.0, 0) == pytest.approx(1.0)

    def test_zero_precoders(self, gen):
        _, h, s2 = random_single(gen)
        P = np.zeros((3, 4))
        assert bc_mmse_receiver(P, h, s2, 0) == 0
        assert bc_mmse(P, h, s2, 0) == 1.0
        assert instantaneous_rate(P, h, s2, 0) == 0.0

    def test_zero_own_precoder_rate(self, gen):
        P, h, s2 = random_single(gen)
        P[2] = 0
        assert instantaneous_rate(P, h, s2, 2) == 0.0


class TestReceiverOptimality:
    def test_perturbations(self, gen):
        for _ in range(20):
            P, h, s2 = random_single(gen)
            k = int(gen.integers(0, 3))
            f = bc_mmse_receiver(P, h, s2, k)
            best = bc_mse(P, f, h, s2, k)
            d = 0.1 * gen.uniform(0, 1, 100) * np.exp(2j * np.pi * gen.uniform(0, 1, 100))
            assert np.all(bc_mse(P, f + d, h, s2, k) >= best - 1e-14)

    def test_grid_argmin(self, gen):
        P, h, s2 = random_single(gen)
        f = bc_mmse_receiver(P, h, s2, 0)
        step = 1e-3
        re = f.real + step * np.arange(-50, 51)
        im = f.imag + step * np.arange(-50, 51)
        grid = re[:, None] + 1j * im[None, :]
        mse = bc_mse(P, grid, h, s2, 0)
        i, j = np.unravel_index(np.argmin(mse), mse.shape)
        assert abs(grid[i, j] - f) <= step

    def test_mmse_equals_mse_at_optimum(self, gen):
        for _ in range(20):
            P, h, s2 = random_single(gen)
            f = bc_mmse_receiver(P, h, s2, 1)
            assert abs(bc_mmse(P, h, s2, 1) - bc_mse(P, f, h, s2, 1)) <= 1e-12


class TestIdentities:
    def test_rate_mmse_identity(self, gen):
        for _ in range(50):
            P, h, s2 = random_single(gen)
            for k in range(3):
                assert abs(instantaneous_rate(P, h, s2, k) + np.log2(bc_mmse(P, h, s2, k))) <= 1e-10

    def test_mmse_range(self, gen):
        P, h, s2 = random_single(gen)
        H = gen.standard_normal((200, 4)) + 1j * gen.standard_normal((200, 4))
        v = bc_mmse(P, H, s2, 0)
        assert np.all((v > 0) & (v <= 1))

    def test_mmse_one_when_orthogonal(self):
        P = np.array([[1.0, 0.0], [0.0, 1.0]])
        h = np.array([0.0, 2.0 + 0j])
        assert bc_mmse(P, h, 1.0, 0) == 1.0

    def test_jensen_chain(self, gen):
        for _ in range(10):
            ens, P = random_instance(gen, M=256)
            rates = avg_rates(ens, P)
            mean_mmse = avg_mmse_all(ens, P)
            mse_at_mmse = avg_mse_all(ens, with_mmse_receivers(ens, P))
            assert np.all(rates >= -np.log2(mean_mmse) - 1e-12)
            assert np.all(-np.log2(mean_mmse) >= -np.log2(mse_at_mmse) - 1e-12)

    def test_ensemble_receivers_match_scalar(self, gen):
        ens, P = random_instance(gen, K=3, N=2, M=16)
        F = bc_mmse_receivers(ens, P)
        for k in range(3):
            ref = bc_mmse_receiver(P, ens.samples[k], ens.noise_vars[k], k)
            np.testing.assert_allclose(F[k], ref, rtol=1e-13)


class TestAverages:
    def test_zero_receivers_give_unit_mse(self, gen):
        ens, P = random_instance(gen, K=2, N=3, M=16)
        filters = BcFilterSet(P, np.zeros((2, 16)))
        np.testing.assert_array_equal(avg_mse_all(ens, filters), 1.0)

    def test_scalar_closed_form(self):
        xi, s2 = 2.5, 0.7
        ens = deterministic_ensemble([[1.0]], noise_vars=s2)
        filters = with_mmse_receivers(ens, [[np.sqrt(xi)]])
        assert avg_mse_conditional(ens, filters, 0) == pytest.approx(s2 / (xi + s2), rel=1e-14)

    def test_zero_precoders_rate(self, gen):
        ens, _ = random_instance(gen, K=2, N=2, M=16)
        assert avg_rate(ens, np.zeros((2, 2)), 0) == 0.0

    def test_deterministic_rate(self, gen):
        h = np.array([[1.0 + 0.5j, -0.3j]])
        ens = deterministic_ensemble(h)
        P = np.array([[0.4 - 1j, 2.0]])
        assert avg_rate(ens, P, 0) == pytest.approx(instantaneous_rate(P, h[0], 1.0, 0), rel=1e-14)

    def test_avg_rate_accepts_filters(self, gen):
        ens, P = random_instance(gen, K=2, N=2, M=16)
        assert avg_rate(ens, with_mmse_receivers(ens, P), 1) == avg_rate(ens, P, 1)

    def test_scenario_shape(self):
        ens = scenario_ensemble(0, M=50)
        P = np.eye(4, dtype=complex)
        assert avg_mse_all(ens, with_mmse_receivers(ens, P)).shape == (4,)
