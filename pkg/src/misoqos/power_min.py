"""Power minimization under average-MMSE QoS targets by alternating optimization.

Each outer iteration performs one pass of

1. per-realization BC MMSE receivers,
2. BC -> MAC conversion and power/normalization extraction,
3. one interference-function power update ``xi_k <- 2^rho_k I_k(xi)``,
4. MAC MMSE receiver update for the new powers,
5. MAC -> BC conversion,

and stops when the L1 change of the power allocation falls below the
tolerance. There is deliberately no inner fixed-point loop on the powers.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .bc_model import BcFilterSet, avg_mse_all, avg_rates, bc_mmse_receivers
from .channel import ChannelEnsemble
from .duality import bc_to_mac, mac_to_bc
from .errors import Diverged, DomainError, MaxIterations
from .mac_model import (MacFilterSet, MacStatistics, interference_vector,
                        mac_mmse_receivers, statistics_from_tau)
from .numerics import SeededRng, sample_complex_gaussian, to_db

__all__ = [
    "QosTargets",
    "SolverOptions",
    "IterationRecord",
    "SolveTrajectory",
    "PowerMinResult",
    "power_update",
    "initial_precoders",
    "solve",
]

log = logging.getLogger(__name__)

CONVERGED = "converged"
DIVERGED = "diverged"
MAX_ITERATIONS = "max_iterations"

# Stream reserved for random precoder initialization.
STREAM_INIT = 7

# Worst-excess ratio over the growth window above which growth counts as stalled.
_STALL_RATIO = 0.9


@dataclass(frozen=True, eq=False)
class QosTargets:
    """Per-user rate targets and the equivalent MMSE ceilings ``2^-rate``."""

    rates: np.ndarray

    def __post_init__(self):
        rates = np.atleast_1d(np.asarray(self.rates, dtype=float))
        if np.any(~np.isfinite(rates)) or np.any(rates < 0):
            raise DomainError(f"rates must be finite and non-negative, got {rates}")
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def from_mmse(cls, mmse):
        mmse = np.atleast_1d(np.asarray(mmse, dtype=float))
        if np.any(mmse <= 0) or np.any(mmse > 1):
            raise DomainError(f"MMSE targets must lie in (0, 1], got {mmse}")
        return cls(-np.log2(mmse))

    @property
    def mmse_targets(self) -> np.ndarray:
        return np.exp2(-self.rates)

    @property
    def K(self) -> int:
        return self.rates.size


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-2
    max_iterations: int = 500
    power_cap: float | None = 1e6
    init_seed: int = 0
    growth_window: int = 50

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be at least 1")


@dataclass(frozen=True, eq=False)
class IterationRecord:
    iteration: int
    xi: np.ndarray         # power allocation after the update
    mmse: np.ndarray       # conditional average MMSE of the resulting BC precoders
    rate_mc: np.ndarray    # Monte Carlo average rates of the resulting BC precoders
    precoders: np.ndarray  # (K, N)

    @property
    def total_power(self) -> float:
        return float(np.sum(self.xi))

    @property
    def total_power_db(self) -> float:
        return to_db(self.total_power)


@dataclass(eq=False)
class SolveTrajectory:
    records: list = field(default_factory=list)
    status: str | None = None

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def total_power_db(self) -> np.ndarray:
        return np.array([r.total_power_db for r in self.records])


@dataclass(eq=False)
class PowerMinResult:
    filters: BcFilterSet
    xi: np.ndarray
    trajectory: SolveTrajectory
    mac: MacFilterSet | None = None

    @property
    def status(self) -> str:
        return self.trajectory.status

    @property
    def iterations(self) -> int:
        return len(self.trajectory)

    @property
    def total_power(self) -> float:
        return float(np.sum(self.xi))

    def __iter__(self):
        # Allows ``filters, xi, trajectory = solve(...)``.
        return iter((self.filters, self.xi, self.trajectory))


def power_update(xi_prev, G_tilde, stats: MacStatistics, targets: QosTargets,
                 allow_degenerate=False) -> np.ndarray:
    """One application of ``xi_k <- 2^rho_k I_k(xi_prev, g_tilde_k)``."""
    return np.exp2(targets.rates) * interference_vector(
        xi_prev, G_tilde, stats, allow_degenerate=allow_degenerate)


def initial_precoders(K, N, seed) -> np.ndarray:
    """Random unit-norm precoders with i.i.d. CN(0, 1) directions."""
    raw = sample_complex_gaussian(np.zeros(N), np.eye(N), SeededRng(seed, STREAM_INIT), size=K)
    norms = np.linalg.norm(raw, axis=1)
    norms[norms == 0] = 1.0
    return raw / norms[:, None]


def solve(ensemble: ChannelEnsemble, targets: QosTargets, opts: SolverOptions | None = None,
          initial=None) -> PowerMinResult:
    """Minimize total transmit power subject to ``avg MSE_k <= 2^-rho_k``.

    Parameters
    ----------
    ensemble : ChannelEnsemble
        Realizations standing in for the conditional channel distribution.
    targets : QosTargets
    opts : SolverOptions, optional
    initial : (K, N) array, optional
        Warm-start precoders; random unit-norm precoders drawn from
        ``opts.init_seed`` otherwise.

    Returns
    -------
    PowerMinResult
        BC precoders with MMSE receivers, the final power allocation and the
        per-iteration trajectory. Unpacks as ``(filters, xi, trajectory)``.

    Raises
    ------
    Diverged
        Total power exceeded ``power_cap``, or total power grew for
        ``growth_window`` consecutive iterations while some user stayed above
        its MMSE target by more than the tolerance and the worst excess shrank
        by less than 10% over that window (infeasible targets).
    MaxIterations
        Neither converged nor diverged within ``max_iterations``.
    """
    opts = opts or SolverOptions()
    if targets.K != ensemble.K:
        raise DomainError(f"{targets.K} targets for {ensemble.K} users")
    rho_scale = np.exp2(targets.rates)
    eps = targets.mmse_targets

    if initial is None:
        P = initial_precoders(ensemble.K, ensemble.N, opts.init_seed)
    else:
        P = np.array(initial, dtype=complex)
        if P.shape != (ensemble.K, ensemble.N):
            raise DomainError(f"initial precoders must have shape {(ensemble.K, ensemble.N)}")
    F = bc_mmse_receivers(ensemble, P)

    trajectory = SolveTrajectory()
    streak = 0
    excess = []
    mac = None
    xi = None
    for it in range(1, opts.max_iterations + 1):
        mac_converted, _ = bc_to_mac(BcFilterSet(P, F), ensemble)
        xi_prev = mac_converted.powers
        tau = mac_converted.precoder_samples / np.sqrt(xi_prev)[:, None]
        stats = statistics_from_tau(ensemble, tau)

        G_tilde = mac_converted.receivers
        xi = rho_scale * interference_vector(xi_prev, G_tilde, stats, allow_degenerate=True)
        G = mac_mmse_receivers(stats, xi)
        mac = MacFilterSet(G, np.sqrt(xi)[:, None] * tau)

        bc, _ = mac_to_bc(mac, ensemble)
        P = bc.precoders
        F = bc_mmse_receivers(ensemble, P)
        filters = BcFilterSet(P, F)
        mmse = avg_mse_all(ensemble, filters)
        record = IterationRecord(it, xi, mmse, avg_rates(ensemble, P), P)
        trajectory.records.append(record)
        log.debug("iter %d: power %.4f dB, mmse %s", it, record.total_power_db, mmse)

        result = PowerMinResult(filters, xi, trajectory, mac)
        if np.sum(np.abs(xi - xi_prev)) <= opts.tolerance:
            trajectory.status = CONVERGED
            return result

        if opts.power_cap is not None and xi.sum() > opts.power_cap:
            trajectory.status = DIVERGED
            raise Diverged(f"total power {xi.sum():.4g} exceeded cap {opts.power_cap:.4g}", result)
        excess.append(float(np.max(mmse - eps)))
        if xi.sum() > xi_prev.sum() and excess[-1] > opts.tolerance:
            streak += 1
        else:
            streak = 0
        # A feasible climb from low power also grows monotonically, but its
        # worst target excess keeps shrinking; infeasible targets stall it.
        if streak >= opts.growth_window \
                and excess[-1] > _STALL_RATIO * excess[-opts.growth_window]:
            trajectory.status = DIVERGED
            raise Diverged(
                f"power grew for {streak} consecutive iterations with targets unmet", result)

    trajectory.status = MAX_ITERATIONS
    raise MaxIterations(f"no convergence within {opts.max_iterations} iterations",
                        PowerMinResult(filters, xi, trajectory, mac))
