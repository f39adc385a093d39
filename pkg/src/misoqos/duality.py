"""Conditional-average-MSE duality between the BC and the dual MAC.

The filters are related by ``p_k = alpha_k g_k`` and
``t_k^(m) = alpha_k sigma_k f_k^(m)``. Equating the per-user average MSEs on
both sides makes the cross terms cancel and leaves a K x K real linear system
in ``x = alpha^2``. Its matrix has a positive diagonal and non-positive
off-diagonal entries; summing the rows telescopes the off-diagonal parts,
which is why total power is preserved. Both facts are checked at runtime.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bc_model import BcFilterSet
from .channel import ChannelEnsemble
from .errors import DegenerateFilter, DimensionMismatch, DualityError
from .mac_model import MacFilterSet

__all__ = ["DualityScaling", "bc_to_mac", "mac_to_bc"]

_X_RTOL = 1e-14
_POWER_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class DualityScaling:
    alphas: np.ndarray  # (K,)


def _solve_scaling(A, rhs):
    try:
        x = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        raise DegenerateFilter("duality scaling system is singular") from None
    if not np.all(np.isfinite(x)) or np.any(x <= _X_RTOL * np.max(np.abs(x))):
        raise DegenerateFilter(f"duality scaling is not strictly positive: {x}")
    return x


def _check_power(before, after):
    if abs(before - after) > _POWER_RTOL * (1.0 + abs(before)):
        raise DualityError(f"total power not preserved: {before!r} -> {after!r}")


def _check_shapes(ensemble, rows, cols, what):
    if rows.shape != (ensemble.K, ensemble.N) or cols.shape != (ensemble.K, ensemble.M):
        raise DimensionMismatch(
            f"{what} shapes {rows.shape}, {cols.shape} do not match ensemble "
            f"(K={ensemble.K}, N={ensemble.N}, M={ensemble.M})")


def bc_to_mac(bc: BcFilterSet, ensemble: ChannelEnsemble):
    """Convert BC filters into dual MAC filters with identical average MSEs.

    Returns ``(MacFilterSet, DualityScaling)``. For each k the scaling solves

        x_k (sum_{i!=k} E|f_k|^2 |h_k^H p_i|^2 + sigma_k^2 E|f_k|^2)
            - sum_{i!=k} x_i E|f_i|^2 |p_k^H h_i|^2 = ||p_k||^2

    with E the sample average over the ensemble.
    """
    P, F = bc.precoders, bc.receivers
    _check_shapes(ensemble, P, F, "BC filter")
    K = ensemble.K
    sigma2 = ensemble.noise_vars
    # W[k, i] = E_m |f_k|^2 |h_k^H p_i|^2
    gains = np.abs(np.einsum("kmn,in->kmi", ensemble.samples.conj(), P)) ** 2
    W = np.einsum("km,kmi->ki", np.abs(F) ** 2, gains) / ensemble.M
    f_power = np.mean(np.abs(F) ** 2, axis=1)
    off = W.copy()
    np.fill_diagonal(off, 0.0)
    A = -off.T
    A[np.diag_indices(K)] = off.sum(axis=1) + sigma2 * f_power
    rhs = np.sum(np.abs(P) ** 2, axis=1)
    x = _solve_scaling(A, rhs)
    alphas = np.sqrt(x)
    G = P / alphas[:, None]
    T = (alphas * np.sqrt(sigma2))[:, None] * F
    mac = MacFilterSet(G, T)
    _check_power(float(rhs.sum()), float(mac.powers.sum()))
    return mac, DualityScaling(alphas)


def mac_to_bc(mac: MacFilterSet, ensemble: ChannelEnsemble):
    """Convert dual MAC filters back to BC filters with identical average MSEs.

    Returns ``(BcFilterSet, DualityScaling)``. For each k the scaling solves

        x_k (||g_k||^2 + sum_{i!=k} E|t_i|^2 |g_k^H h_i|^2 / sigma_i^2)
            - sum_{i!=k} x_i E|t_k|^2 |h_k^H g_i|^2 / sigma_k^2 = E|t_k|^2
    """
    G, T = mac.receivers, mac.precoder_samples
    _check_shapes(ensemble, G, T, "MAC filter")
    K = ensemble.K
    sigma2 = ensemble.noise_vars
    # V[i, k] = E_m |t_i|^2 |g_k^H theta_i|^2
    gains = np.abs(np.einsum("imn,kn->imk", ensemble.dual_samples.conj(), G)) ** 2
    V = np.einsum("im,imk->ik", np.abs(T) ** 2, gains) / ensemble.M
    off = V.copy()
    np.fill_diagonal(off, 0.0)
    A = -off
    A[np.diag_indices(K)] = np.sum(np.abs(G) ** 2, axis=1) + off.sum(axis=0)
    rhs = np.mean(np.abs(T) ** 2, axis=1)
    if np.any(np.sum(np.abs(G) ** 2, axis=1) == 0) or np.any(rhs <= 0):
        raise DegenerateFilter("zero MAC receiver or zero-power MAC precoder")
    x = _solve_scaling(A, rhs)
    alphas = np.sqrt(x)
    P = alphas[:, None] * G
    F = T / (alphas * np.sqrt(sigma2))[:, None]
    bc = BcFilterSet(P, F)
    _check_power(float(rhs.sum()), bc.total_power)
    return bc, DualityScaling(alphas)
