"""Broadcast-channel MSE, MMSE receivers and rates.

The scalar functions take a single channel ``h_k`` of shape ``(N,)`` or a
stack of realizations ``(M, N)``; results broadcast accordingly. Precoders are
stored row-wise: ``precoders[i]`` is ``p_i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelEnsemble
from .errors import DimensionMismatch

__all__ = [
    "BcFilterSet",
    "bc_mse",
    "bc_mmse_receiver",
    "bc_mmse",
    "instantaneous_rate",
    "bc_mmse_receivers",
    "with_mmse_receivers",
    "avg_rate",
    "avg_rates",
    "avg_mse_conditional",
    "avg_mse_all",
    "avg_mmse_all",
]


@dataclass(frozen=True, eq=False)
class BcFilterSet:
    precoders: np.ndarray  # (K, N)
    receivers: np.ndarray  # (K, M)

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.precoders, dtype=complex))
        F = np.atleast_2d(np.asarray(self.receivers, dtype=complex))
        if F.shape[0] != P.shape[0]:
            raise DimensionMismatch("one receiver row per precoder is required")
        if not np.all(np.isfinite(P)):
            raise ValueError("precoders must be finite")
        object.__setattr__(self, "precoders", P)
        object.__setattr__(self, "receivers", F)

    @property
    def total_power(self) -> float:
        return float(np.sum(np.abs(self.precoders) ** 2))


def _gains(precoders, h):
    # g[..., i] = h^H p_i
    return np.asarray(h).conj() @ np.asarray(precoders).T


def bc_mse(precoders, f, h_k, sigma2, k):
    """Instantaneous BC MSE of user ``k`` with receiver ``f``.

    ``1 - 2 Re{f* h^H p_k} + |f|^2 (sum_i |h^H p_i|^2 + sigma2)``
    """
    g = _gains(precoders, h_k)
    received = np.sum(np.abs(g) ** 2, axis=-1) + sigma2
    return 1.0 - 2.0 * np.real(np.conj(f) * g[..., k]) + np.abs(f) ** 2 * received


def bc_mmse_receiver(precoders, h_k, sigma2, k):
    g = _gains(precoders, h_k)
    return g[..., k] / (np.sum(np.abs(g) ** 2, axis=-1) + sigma2)


def bc_mmse(precoders, h_k, sigma2, k):
    g = _gains(precoders, h_k)
    f = g[..., k] / (np.sum(np.abs(g) ** 2, axis=-1) + sigma2)
    return np.real(1.0 - np.conj(f) * g[..., k])


def instantaneous_rate(precoders, h_k, sigma2, k):
    """Achievable rate ``log2(1 + |h^H p_k|^2 / x_k)``, x_k = interference + noise."""
    g = np.abs(_gains(precoders, h_k)) ** 2
    x_k = np.sum(g, axis=-1) - g[..., k] + sigma2
    return np.log2(1.0 + g[..., k] / x_k)


def _all_gains(ensemble: ChannelEnsemble, precoders):
    # G[k, m, i] = h_k^(m)H p_i
    return np.einsum("kmn,in->kmi", ensemble.samples.conj(), np.asarray(precoders))


def bc_mmse_receivers(ensemble: ChannelEnsemble, precoders) -> np.ndarray:
    """MMSE receivers ``f_k^(m)`` for every user and realization, shape (K, M)."""
    G = _all_gains(ensemble, precoders)
    K = ensemble.K
    own = G[np.arange(K), :, np.arange(K)]
    denom = np.sum(np.abs(G) ** 2, axis=2) + ensemble.noise_vars[:, None]
    return own / denom


def with_mmse_receivers(ensemble: ChannelEnsemble, precoders) -> BcFilterSet:
    return BcFilterSet(precoders, bc_mmse_receivers(ensemble, precoders))


def avg_mse_all(ensemble: ChannelEnsemble, filters: BcFilterSet) -> np.ndarray:
    """Conditional average MSE of every user under the given receivers, shape (K,)."""
    if filters.receivers.shape != (ensemble.K, ensemble.M):
        raise DimensionMismatch(
            f"receivers must have shape {(ensemble.K, ensemble.M)}, got {filters.receivers.shape}")
    G = _all_gains(ensemble, filters.precoders)
    K = ensemble.K
    own = G[np.arange(K), :, np.arange(K)]
    received = np.sum(np.abs(G) ** 2, axis=2) + ensemble.noise_vars[:, None]
    F = filters.receivers
    mse = 1.0 - 2.0 * np.real(F.conj() * own) + np.abs(F) ** 2 * received
    return mse.mean(axis=1)


def avg_mse_conditional(ensemble: ChannelEnsemble, filters: BcFilterSet, k: int) -> float:
    return float(avg_mse_all(ensemble, filters)[k])


def avg_mmse_all(ensemble: ChannelEnsemble, precoders) -> np.ndarray:
    """Conditional average MMSE (MMSE receivers per realization), shape (K,)."""
    return _per_sample_mmse(ensemble, precoders).mean(axis=1)


def _per_sample_mmse(ensemble, precoders):
    G = np.abs(_all_gains(ensemble, precoders)) ** 2
    K = ensemble.K
    own = G[np.arange(K), :, np.arange(K)]
    received = np.sum(G, axis=2) + ensemble.noise_vars[:, None]
    return 1.0 - own / received


def avg_rates(ensemble: ChannelEnsemble, precoders) -> np.ndarray:
    """Monte Carlo average rate of every user, shape (K,)."""
    G = np.abs(_all_gains(ensemble, precoders)) ** 2
    K = ensemble.K
    own = G[np.arange(K), :, np.arange(K)]
    x = np.sum(G, axis=2) - own + ensemble.noise_vars[:, None]
    return np.log2(1.0 + own / x).mean(axis=1)


def avg_rate(ensemble: ChannelEnsemble, filters, k: int) -> float:
    """Monte Carlo average rate of user ``k``.

    Rates do not depend on the receivers, so ``filters`` may be a
    :class:`BcFilterSet` or a bare precoder array.
    """
    precoders = filters.precoders if isinstance(filters, BcFilterSet) else filters
    return float(avg_rates(ensemble, precoders)[k])
