"""Imperfect-CSIT channel model and its Monte Carlo ensemble.

The transmitter knows, for every user k, the conditional distribution
``h_k ~ CN(mean_k, C_k)`` given its partial CSI. All conditional expectations
in the package are sample averages over one fixed :class:`ChannelEnsemble`.

Array layout: ``samples[k, m, :]`` is the m-th realization of user k.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError
from .numerics import SeededRng, sample_complex_gaussian

__all__ = ["ChannelModel", "ChannelEnsemble", "build_ensemble", "empirical_mean_outer"]

# Stream offsets so that means and per-user errors never share a Philox stream.
STREAM_MEANS = 1
STREAM_ERRORS = 1 << 20


@dataclass(frozen=True, eq=False)
class ChannelModel:
    means: np.ndarray        # (K, N) conditional means
    error_covs: np.ndarray   # (K, N, N) error covariances
    noise_vars: np.ndarray   # (K,) receiver noise variances

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=complex))
        covs = np.asarray(self.error_covs, dtype=complex)
        noise = np.atleast_1d(np.asarray(self.noise_vars, dtype=float))
        K, N = means.shape
        if K < 1 or N < 1:
            raise DimensionMismatch("need at least one user and one antenna")
        if covs.shape != (K, N, N):
            raise DimensionMismatch(f"error_covs must have shape {(K, N, N)}, got {covs.shape}")
        if noise.shape != (K,):
            raise DimensionMismatch(f"noise_vars must have shape {(K,)}, got {noise.shape}")
        if np.any(noise <= 0):
            raise DomainError("noise variances must be positive")
        for k in range(K):
            C = covs[k]
            if not np.allclose(C, C.conj().T, atol=1e-12 * max(1.0, np.abs(C).max())):
                raise DomainError(f"error covariance of user {k} is not Hermitian")
            if np.linalg.eigvalsh(C).min() < -1e-10 * max(1.0, np.abs(C).max()):
                raise DomainError(f"error covariance of user {k} is not PSD")
        for name, value in (("means", means), ("error_covs", covs), ("noise_vars", noise)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def K(self) -> int:
        return self.means.shape[0]

    @property
    def N(self) -> int:
        return self.means.shape[1]

    @classmethod
    def iid(cls, means, error_scale=1.0, noise_vars=1.0):
        """Model with ``C_k = error_scale * I`` for every user."""
        means = np.atleast_2d(np.asarray(means, dtype=complex))
        K, N = means.shape
        covs = np.broadcast_to(error_scale * np.eye(N), (K, N, N)).copy()
        noise = np.broadcast_to(np.asarray(noise_vars, dtype=float), (K,)).copy()
        return cls(means, covs, noise)

    @classmethod
    def random(cls, K, N, rng: SeededRng, error_scale=1.0, noise_vars=1.0):
        """Draw the conditional means once as ``CN(0, I_N)`` vectors."""
        means = sample_complex_gaussian(
            np.zeros(N), np.eye(N), rng.substream(STREAM_MEANS), size=K)
        return cls.iid(means, error_scale, noise_vars)


@dataclass(frozen=True, eq=False)
class ChannelEnsemble:
    model: ChannelModel
    samples: np.ndarray       # (K, M, N)
    dual_samples: np.ndarray  # (K, M, N), samples scaled by 1/sigma_k

    @property
    def K(self) -> int:
        return self.samples.shape[0]

    @property
    def M(self) -> int:
        return self.samples.shape[1]

    @property
    def N(self) -> int:
        return self.samples.shape[2]

    @property
    def noise_vars(self) -> np.ndarray:
        return self.model.noise_vars

    @classmethod
    def from_samples(cls, model: ChannelModel, samples):
        samples = np.array(samples, dtype=complex)
        if samples.ndim != 3 or samples.shape[0] != model.K or samples.shape[2] != model.N:
            raise DimensionMismatch(
                f"samples must have shape (K={model.K}, M, N={model.N}), got {samples.shape}")
        if samples.shape[1] < 1:
            raise DomainError("need at least one realization")
        dual = samples / np.sqrt(model.noise_vars)[:, None, None]
        samples.setflags(write=False)
        dual.setflags(write=False)
        return cls(model, samples, dual)


def build_ensemble(model: ChannelModel, M: int, rng: SeededRng) -> ChannelEnsemble:
    """Materialize ``M`` conditional channel realizations per user.

    User k draws from its own stream ``rng.substream(STREAM_ERRORS + k)``.
    """
    if M < 1:
        raise DomainError(f"M must be at least 1, got {M}")
    samples = np.empty((model.K, M, model.N), dtype=complex)
    for k in range(model.K):
        samples[k] = sample_complex_gaussian(
            model.means[k], model.error_covs[k], rng.substream(STREAM_ERRORS + k), size=M)
    return ChannelEnsemble.from_samples(model, samples)


def empirical_mean_outer(ensemble: ChannelEnsemble, k: int) -> np.ndarray:
    """Sample estimate of ``E[h_k h_k^H | v]``."""
    H = ensemble.samples[k]
    return (H.T @ H.conj()) / ensemble.M
