"""Dual MAC statistics, average MSE expressions and interference functions.

In the dual uplink user k sends with per-realization scalar precoders
``t_k^(m)`` over the effective channel ``theta_k = h_k / sigma_k`` to an
N-antenna receiver with unit noise. With the average powers
``xi_k = mean_m |t_k^(m)|^2`` and normalized precoders ``tau = t / sqrt(xi)``
the sample moments

    mu_k    = mean_m tau_k^(m) theta_k^(m)
    Theta_k = mean_m |tau_k^(m)|^2 theta_k^(m) theta_k^(m)^H

determine every average MSE through ``S(xi) = sum_i xi_i Theta_i + I``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelEnsemble
from .errors import DegenerateDirection, DimensionMismatch, ZeroPowerUser
from .numerics import hermitian_solve

__all__ = [
    "MacFilterSet",
    "MacStatistics",
    "mac_statistics",
    "statistics_from_tau",
    "covariance_sum",
    "mac_avg_mse",
    "mac_mmse_receiver",
    "mac_mmse_receivers",
    "mac_avg_mmse",
    "mac_avg_mmse_all",
    "interference",
    "interference_vector",
]

# Floor for y_k - xi_k |g^H mu_k|^2, analytically >= g^H g.
_RESIDUAL_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class MacFilterSet:
    receivers: np.ndarray         # (K, N) g_k
    precoder_samples: np.ndarray  # (K, M) t_k^(m)

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.receivers, dtype=complex))
        T = np.atleast_2d(np.asarray(self.precoder_samples, dtype=complex))
        if G.shape[0] != T.shape[0]:
            raise DimensionMismatch("one precoder row per receiver is required")
        object.__setattr__(self, "receivers", G)
        object.__setattr__(self, "precoder_samples", T)

    @property
    def powers(self) -> np.ndarray:
        return np.mean(np.abs(self.precoder_samples) ** 2, axis=1)

    def normalized(self) -> np.ndarray:
        """Normalized precoders ``tau_k^(m)`` with unit mean power per user."""
        xi = self.powers
        bad = np.flatnonzero(xi <= 0)
        if bad.size:
            raise ZeroPowerUser(f"users {bad.tolist()} have zero average power")
        return self.precoder_samples / np.sqrt(xi)[:, None]


@dataclass(frozen=True, eq=False)
class MacStatistics:
    mus: np.ndarray     # (K, N)
    thetas: np.ndarray  # (K, N, N)

    @property
    def K(self) -> int:
        return self.mus.shape[0]

    @property
    def N(self) -> int:
        return self.mus.shape[1]


def statistics_from_tau(ensemble: ChannelEnsemble, tau) -> MacStatistics:
    tau = np.asarray(tau)
    if tau.shape != (ensemble.K, ensemble.M):
        raise DimensionMismatch(f"tau must have shape {(ensemble.K, ensemble.M)}, got {tau.shape}")
    TH = ensemble.dual_samples
    M = ensemble.M
    mus = np.einsum("km,kmn->kn", tau, TH) / M
    weighted = TH * np.abs(tau)[:, :, None]
    thetas = np.einsum("kma,kmb->kab", weighted, weighted.conj()) / M
    thetas = 0.5 * (thetas + thetas.conj().transpose(0, 2, 1))
    return MacStatistics(mus, thetas)


def mac_statistics(ensemble: ChannelEnsemble, mac_filters: MacFilterSet) -> MacStatistics:
    """Sample moments of the normalized dual-MAC precoders.

    Raises ``ZeroPowerUser`` if some user has no power to normalize.
    """
    return statistics_from_tau(ensemble, mac_filters.normalized())


def covariance_sum(stats: MacStatistics, xi) -> np.ndarray:
    """``sum_i xi_i Theta_i + I_N``."""
    xi = np.asarray(xi, dtype=float)
    return np.einsum("k,kab->ab", xi, stats.thetas) + np.eye(stats.N)


def mac_avg_mse(g, stats: MacStatistics, xi, k: int) -> float:
    g = np.asarray(g, dtype=complex)
    xi = np.asarray(xi, dtype=float)
    S = covariance_sum(stats, xi)
    cross = np.real(np.vdot(g, stats.mus[k]))
    return float(1.0 - 2.0 * np.sqrt(xi[k]) * cross + np.real(np.vdot(g, S @ g)))


def mac_mmse_receivers(stats: MacStatistics, xi) -> np.ndarray:
    """All MMSE receivers ``S(xi)^{-1} sqrt(xi_k) mu_k`` as rows of a (K, N) array."""
    xi = np.asarray(xi, dtype=float)
    S = covariance_sum(stats, xi)
    rhs = (stats.mus * np.sqrt(xi)[:, None]).T
    return hermitian_solve(S, rhs).T


def mac_mmse_receiver(stats: MacStatistics, xi, k: int) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    S = covariance_sum(stats, xi)
    return hermitian_solve(S, np.sqrt(xi[k]) * stats.mus[k])


def mac_avg_mmse_all(stats: MacStatistics, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    S = covariance_sum(stats, xi)
    X = hermitian_solve(S, stats.mus.T)
    quad = np.real(np.einsum("nk,nk->k", stats.mus.T.conj(), X))
    return 1.0 - xi * quad


def mac_avg_mmse(stats: MacStatistics, xi, k: int) -> float:
    """``1 - xi_k mu_k^H S(xi)^{-1} mu_k``."""
    return float(mac_avg_mmse_all(stats, xi)[k])


def _interference_terms(xi, g_tilde, stats, k, S):
    proj = np.abs(np.vdot(g_tilde, stats.mus[k])) ** 2
    y = np.real(np.vdot(g_tilde, S @ g_tilde))
    return proj, y


def interference(xi, g_tilde, stats: MacStatistics, k: int) -> float:
    """Interference function of user ``k`` along receive direction ``g_tilde``.

    ``I_k = (1/xi_k + |g^H mu_k|^2 / (y_k - xi_k |g^H mu_k|^2))^{-1}`` with
    ``y_k = g^H S(xi) g``; equals ``xi_k`` times the minimum average MSE over the
    receiver scale. Requires ``xi_k > 0``.

    Raises
    ------
    DegenerateDirection
        If ``g_tilde`` is orthogonal to ``mu_k``.
    """
    xi = np.asarray(xi, dtype=float)
    if xi[k] <= 0:
        raise ValueError(f"interference needs xi_{k} > 0, got {xi[k]}")
    S = covariance_sum(stats, xi)
    proj, y = _interference_terms(xi, np.asarray(g_tilde, dtype=complex), stats, k, S)
    if proj == 0.0:
        raise DegenerateDirection(f"receive direction of user {k} is orthogonal to mu_{k}")
    residual = max(y - xi[k] * proj, _RESIDUAL_FLOOR)
    return float(1.0 / (1.0 / xi[k] + proj / residual))


def interference_vector(xi, G_tilde, stats: MacStatistics, allow_degenerate=False) -> np.ndarray:
    """Stack ``I_k(xi, g_tilde_k)`` over users.

    With ``allow_degenerate`` a user whose direction is orthogonal to its mean
    channel gets ``I_k = xi_k`` (unit MSE) instead of raising.
    """
    xi = np.asarray(xi, dtype=float)
    G_tilde = np.atleast_2d(np.asarray(G_tilde, dtype=complex))
    if G_tilde.shape != stats.mus.shape:
        raise DimensionMismatch(f"G_tilde must have shape {stats.mus.shape}, got {G_tilde.shape}")
    if np.any(xi <= 0):
        raise ValueError("interference needs strictly positive powers")
    S = covariance_sum(stats, xi)
    out = np.empty(stats.K)
    for k in range(stats.K):
        proj, y = _interference_terms(xi, G_tilde[k], stats, k, S)
        if proj == 0.0:
            if not allow_degenerate:
                raise DegenerateDirection(f"receive direction of user {k} is orthogonal to mu_{k}")
            out[k] = xi[k]
            continue
        residual = max(y - xi[k] * proj, _RESIDUAL_FLOOR)
        out[k] = 1.0 / (1.0 / xi[k] + proj / residual)
    return out
