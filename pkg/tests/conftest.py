import numpy as np
import pytest

from misoqos.channel import ChannelEnsemble, ChannelModel, build_ensemble
from misoqos.numerics import SeededRng

SCENARIO_RATES = np.array([0.5146, 0.737, 1.0, 0.2345])
SCENARIO_MMSE = np.array([0.7, 0.6, 0.5, 0.85])


def scenario_ensemble(seed, K=4, N=4, M=1000, error_scale=1.0):
    """Random-mean scenario used throughout: h_k ~ CN(hbar_k, c I), hbar_k ~ CN(0, I)."""
    rng = SeededRng(seed)
    model = ChannelModel.random(K, N, rng, error_scale=error_scale)
    return build_ensemble(model, M, rng)


def deterministic_ensemble(means, noise_vars=1.0):
    """Perfect-CSI ensemble with a single realization per user."""
    means = np.atleast_2d(np.asarray(means, dtype=complex))
    model = ChannelModel.iid(means, error_scale=0.0, noise_vars=noise_vars)
    return ChannelEnsemble.from_samples(model, means[:, None, :])


def random_instance(gen, K=None, N=None, M=None):
    """Random (ensemble, precoders) pair with K, N in 1..4 and M in {1, 16, 256}."""
    K = K or int(gen.integers(1, 5))
    N = N or int(gen.integers(1, 5))
    M = M or int(gen.choice([1, 16, 256]))
    seed = int(gen.integers(0, 2**32))
    noise = gen.uniform(0.2, 2.0, K)
    rng = SeededRng(seed)
    model = ChannelModel.random(K, N, rng, error_scale=float(gen.uniform(0.05, 1.0)), noise_vars=noise)
    ens = build_ensemble(model, M, rng)
    P = (gen.standard_normal((K, N)) + 1j * gen.standard_normal((K, N))) / np.sqrt(2)
    return ens, P


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line; the lines are repeated in the terminal summary."""
    def emit(number, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return passed
    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
