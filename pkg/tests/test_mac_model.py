import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from misoqos.errors import DegenerateDirection, ZeroPowerUser
from misoqos.mac_model import (MacFilterSet, MacStatistics, interference, interference_vector,
                               mac_avg_mmse, mac_avg_mmse_all, mac_avg_mse, mac_mmse_receiver,
                               mac_mmse_receivers, mac_statistics, statistics_from_tau)

from conftest import deterministic_ensemble, random_instance

SCALAR = MacStatistics(np.array([[1.0 + 0j]]), np.array([[[1.0 + 0j]]]))


def random_stats(gen, K=None, N=None, M=None):
    ens, _ = random_instance(gen, K, N, M)
    tau = gen.standard_normal((ens.K, ens.M)) + 1j * gen.standard_normal((ens.K, ens.M))
    tau /= np.sqrt(np.mean(np.abs(tau) ** 2, axis=1))[:, None]
    return statistics_from_tau(ens, tau)


def cgauss(gen, *shape):
    return gen.standard_normal(shape) + 1j * gen.standard_normal(shape)


class TestStatistics:
    def test_deterministic_unit(self):
        ens = deterministic_ensemble([[1.0]])
        stats = mac_statistics(ens, MacFilterSet([[1.0]], [[np.sqrt(3.0)]]))
        assert stats.mus[0, 0] == pytest.approx(1.0)
        assert stats.thetas[0, 0, 0] == pytest.approx(1.0)

    def test_alternating_signs_cancel(self):
        from misoqos.channel import ChannelEnsemble, ChannelModel
        theta = 1.5 - 0.5j
        model = ChannelModel.iid([[theta]], error_scale=0.0)
        ens = ChannelEnsemble.from_samples(model, np.full((1, 4, 1), theta))
        stats = mac_statistics(ens, MacFilterSet([[1.0]], [[1.0, -1.0, 1.0, -1.0]]))
        assert abs(stats.mus[0, 0]) < 1e-15
        assert stats.thetas[0, 0, 0].real == pytest.approx(abs(theta) ** 2)

    def test_second_moment_dominance(self, gen):
        for _ in range(20):
            stats = random_stats(gen)
            for k in range(stats.K):
                assert np.real(np.trace(stats.thetas[k])) >= np.linalg.norm(stats.mus[k]) ** 2 - 1e-12
                # stronger: Theta_k - mu mu^H is PSD
                D = stats.thetas[k] - np.outer(stats.mus[k], stats.mus[k].conj())
                assert np.linalg.eigvalsh(D).min() >= -1e-10

    def test_zero_power_user(self):
        ens = deterministic_ensemble([[1.0], [2.0]])
        with pytest.raises(ZeroPowerUser):
            mac_statistics(ens, MacFilterSet([[1.0], [1.0]], [[1.0], [0.0]]))

    def test_powers_and_normalization(self, gen):
        T = cgauss(gen, 3, 16)
        mac = MacFilterSet(cgauss(gen, 3, 2), T)
        np.testing.assert_allclose(mac.powers, np.mean(np.abs(T) ** 2, axis=1), rtol=1e-12)
        np.testing.assert_allclose(np.mean(np.abs(mac.normalized()) ** 2, axis=1), 1.0, rtol=1e-12)


class TestMseAndReceivers:
    def test_zero_receiver(self, gen):
        stats = random_stats(gen, K=2, N=3)
        assert mac_avg_mse(np.zeros(3), stats, [1.0, 2.0], 0) == 1.0

    def test_hand_arithmetic(self):
        assert mac_avg_mse([0.5], SCALAR, [1.0], 0) == pytest.approx(0.5)
        np.testing.assert_allclose(mac_mmse_receiver(SCALAR, [1.0], 0), [0.5])

    def test_zero_power_receiver(self, gen):
        stats = random_stats(gen, K=2, N=3)
        assert np.all(mac_mmse_receiver(stats, [0.0, 0.0], 1) == 0)
        np.testing.assert_array_equal(mac_avg_mmse_all(stats, [0.0, 0.0]), 1.0)

    @pytest.mark.parametrize("xi", [0.0, 0.3, 1.0, 7.0])
    def test_scalar_mmse(self, xi):
        assert mac_avg_mmse(SCALAR, [xi], 0) == pytest.approx(1 / (1 + xi))

    def test_receiver_optimality(self, gen):
        for _ in range(10):
            stats = random_stats(gen)
            xi = gen.uniform(0.1, 3.0, stats.K)
            k = int(gen.integers(0, stats.K))
            g = mac_mmse_receiver(stats, xi, k)
            best = mac_avg_mse(g, stats, xi, k)
            assert abs(best - mac_avg_mmse(stats, xi, k)) <= 1e-12
            for _ in range(100):
                d = 0.1 * cgauss(gen, stats.N)
                assert mac_avg_mse(g + d, stats, xi, k) >= best - 1e-12

    def test_stacked_receivers(self, gen):
        stats = random_stats(gen, K=3, N=2)
        xi = np.array([0.5, 1.0, 2.0])
        G = mac_mmse_receivers(stats, xi)
        for k in range(3):
            np.testing.assert_allclose(G[k], mac_mmse_receiver(stats, xi, k), rtol=1e-12)

    def test_mmse_monotone_in_powers(self, gen):
        for _ in range(20):
            stats = random_stats(gen)
            xi = gen.uniform(0.1, 3.0, stats.K)
            base = mac_avg_mmse_all(stats, xi)
            for j in range(stats.K):
                bumped = xi.copy()
                bumped[j] *= 1.1
                new = mac_avg_mmse_all(stats, bumped)
                if np.linalg.norm(stats.mus[j]) > 1e-9:
                    assert new[j] < base[j]
                others = np.arange(stats.K) != j
                assert np.all(new[others] >= base[others] - 1e-12)


class TestInterference:
    @pytest.mark.parametrize("xi", [0.1, 1.0, 4.0])
    def test_scalar(self, xi):
        value = interference([xi], [1.0], SCALAR, 0)
        assert value == pytest.approx(xi / (1 + xi))
        assert value / xi == pytest.approx(mac_avg_mmse(SCALAR, [xi], 0))

    def test_scalability_instance(self):
        assert 2 * interference([1.0], [1.0], SCALAR, 0) == pytest.approx(1.0)
        assert interference([2.0], [1.0], SCALAR, 0) == pytest.approx(2 / 3)

    def test_decoupled_users(self):
        stats = MacStatistics(np.array([[2.0, 0], [0, 0.5]], dtype=complex),
                              np.array([np.diag([4.0, 0]), np.diag([0, 0.25])], dtype=complex))
        xi = np.array([1.5, 3.0])
        out = interference_vector(xi, np.eye(2), stats)
        gains = np.array([4.0, 0.25])
        np.testing.assert_allclose(out, xi / (1 + gains * xi))

    def test_mmse_receiver_substitution(self, gen):
        for _ in range(20):
            stats = random_stats(gen)
            xi = gen.uniform(0.1, 3.0, stats.K)
            G = mac_mmse_receivers(stats, xi)
            np.testing.assert_allclose(interference_vector(xi, G, stats),
                                       xi * mac_avg_mmse_all(stats, xi), rtol=1e-10)

    def test_mmse_direction_minimizes(self, gen):
        stats = random_stats(gen, K=3, N=3)
        xi = gen.uniform(0.1, 3.0, 3)
        best = interference_vector(xi, mac_mmse_receivers(stats, xi), stats)
        for _ in range(50):
            other = interference_vector(xi, cgauss(gen, 3, 3), stats)
            assert np.all(other >= best - 1e-12)

    def test_degenerate_direction(self):
        stats = MacStatistics(np.array([[1.0, 0.0]], dtype=complex), np.eye(2, dtype=complex)[None])
        with pytest.raises(DegenerateDirection):
            interference([1.0], [0.0, 1.0], stats, 0)
        with pytest.raises(DegenerateDirection):
            interference_vector([1.0], [[0.0, 1.0]], stats)
        assert interference_vector([2.0], [[0.0, 1.0]], stats, allow_degenerate=True)[0] == 2.0

    def test_scale_invariant_in_direction(self, gen):
        stats = random_stats(gen, K=2, N=3)
        xi = np.array([0.7, 1.3])
        g = cgauss(gen, 3)
        assert interference(xi, g, stats, 0) == pytest.approx(interference(xi, (2 - 1j) * g, stats, 0))


@st.composite
def axiom_instances(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    gen = np.random.default_rng(seed)
    stats = random_stats(gen)
    G = cgauss(gen, stats.K, stats.N)
    xi = gen.uniform(0.01, 10.0, stats.K)
    return stats, G, xi, gen


class TestAxioms:
    @given(axiom_instances())
    @settings(max_examples=100, deadline=None)
    def test_positivity(self, inst):
        stats, G, xi, _ = inst
        assert np.all(interference_vector(xi, G, stats) > 0)

    # a = 1 + ulp cannot be resolved in floating point; start just above it.
    @given(axiom_instances(), st.floats(min_value=1.0 + 1e-9, max_value=10.0))
    @settings(max_examples=100, deadline=None)
    def test_scalability(self, inst, a):
        stats, G, xi, _ = inst
        assert np.all(a * interference_vector(xi, G, stats) > interference_vector(a * xi, G, stats))

    @given(axiom_instances())
    @settings(max_examples=100, deadline=None)
    def test_monotonicity(self, inst):
        stats, G, xi, gen = inst
        bigger = xi * (1 + gen.uniform(0, 2, xi.size))
        assert np.all(interference_vector(bigger, G, stats) >= interference_vector(xi, G, stats) * (1 - 1e-12))
