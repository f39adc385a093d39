"""Feasibility of MMSE targets: trace bound, polytope test and fixed-point checks.

With normalized dual-MAC precoders ``tau`` the effective uplink matrix is
``Upsilon = [theta_1 tau_1, ..., theta_K tau_K]``. Letting the MAC noise go to
zero gives the asymptotic sum-MMSE floor ``K - tr(X)`` with

    X = E[Upsilon]^H E[Upsilon Upsilon^H]^{-1} E[Upsilon],

and targets are feasible iff their sum exceeds that floor. The verdict is
relative to the supplied ``tau`` (``tau = 1`` by default).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelEnsemble
from .errors import (DegenerateUser, DimensionMismatch, DomainError, NoSolution,
                     NotPositiveDefinite)
from .mac_model import MacFilterSet, MacStatistics, statistics_from_tau
from .numerics import hermitian_solve

__all__ = [
    "FeasibilityReport",
    "FixedPointContext",
    "FixedPointConditions",
    "BoundaryBalance",
    "trace_bound",
    "trace_bound_with_method",
    "polytope_test",
    "assess_feasibility",
    "fixed_point_map",
    "nk_upper_bound",
    "check_fixed_point_conditions",
    "boundary_sir_balance",
    "sir_balance_from_context",
]

DIRECT = "direct-inverse"
PSEUDO = "pseudo-inverse"
_COND_LIMIT = 1e12
_EIG_RTOL = 1e-12


def _mmse_targets(targets):
    eps = getattr(targets, "mmse_targets", None)
    if eps is None:
        eps = np.atleast_1d(np.asarray(targets, dtype=float))
    return np.asarray(eps, dtype=float)


def _tau(ensemble, mac_filters):
    if mac_filters is None:
        return np.ones((ensemble.K, ensemble.M), dtype=complex)
    if isinstance(mac_filters, MacFilterSet):
        return mac_filters.normalized()
    tau = np.asarray(mac_filters, dtype=complex)
    return tau / np.sqrt(np.mean(np.abs(tau) ** 2, axis=1))[:, None]


@dataclass(frozen=True)
class FeasibilityReport:
    trace_bound: float
    slack: float
    feasible: bool
    method: str = DIRECT

    def as_dict(self):
        return {
            "trace_bound": self.trace_bound,
            "slack": self.slack,
            "feasible": self.feasible,
            "method": self.method,
        }


def trace_bound_with_method(ensemble: ChannelEnsemble, mac_filters=None):
    """Return ``(tr(X), method)``; see :func:`trace_bound`."""
    stats = statistics_from_tau(ensemble, _tau(ensemble, mac_filters))
    U = stats.mus.T                      # E[Upsilon], (N, K)
    R = stats.thetas.sum(axis=0)         # E[Upsilon Upsilon^H], (N, N)
    R = 0.5 * (R + R.conj().T)
    w, V = np.linalg.eigh(R)
    wmax = float(w.max(initial=0.0))
    if wmax <= 0:
        return 0.0, PSEUDO
    if w.min() > wmax / _COND_LIMIT:
        X = U.conj().T @ hermitian_solve(R, U)
        method = DIRECT
    else:
        keep = w > _EIG_RTOL * wmax
        W = V[:, keep].conj().T @ U
        X = W.conj().T @ (W / w[keep][:, None])
        method = PSEUDO
    return float(np.real(np.trace(X))), method


def trace_bound(ensemble: ChannelEnsemble, mac_filters=None) -> float:
    """``tr(X)`` for the given dual-MAC precoders (``tau = 1`` when omitted).

    ``mac_filters`` may be a :class:`MacFilterSet` or a (K, M) array of
    precoder samples; only their per-user normalized shape matters, so the
    result is invariant to rescaling the powers.
    """
    return trace_bound_with_method(ensemble, mac_filters)[0]


def polytope_test(targets, trace_bound: float, method: str = DIRECT) -> FeasibilityReport:
    """Feasible iff ``sum(eps) > K - trace_bound`` (strict)."""
    eps = _mmse_targets(targets)
    K = eps.size
    if not (-1e-9 <= trace_bound <= K + 1e-9):
        raise DomainError(f"trace bound {trace_bound} outside [0, {K}]")
    slack = float(eps.sum() - (K - trace_bound))
    return FeasibilityReport(float(trace_bound), slack, slack > 0, method)


def assess_feasibility(ensemble: ChannelEnsemble, targets, mac_filters=None) -> FeasibilityReport:
    value, method = trace_bound_with_method(ensemble, mac_filters)
    return polytope_test(targets, min(max(value, 0.0), ensemble.K), method)


@dataclass(frozen=True, eq=False)
class FixedPointContext:
    """Per-user mean directions ``phi_k``, scatter ``Phi_k`` and MAC noise ``sigma2``.

    ``phi_k = E[theta_k tau_k]`` and ``Phi_k = E[|tau_k|^2 theta_k theta_k^H] - phi_k phi_k^H``.
    """

    phis: np.ndarray   # (K, N)
    Phis: np.ndarray   # (K, N, N)
    sigma2: float = 1.0

    def __post_init__(self):
        phis = np.atleast_2d(np.asarray(self.phis, dtype=complex))
        Phis = np.asarray(self.Phis, dtype=complex)
        K, N = phis.shape
        if Phis.shape != (K, N, N):
            raise DimensionMismatch(f"Phis must have shape {(K, N, N)}, got {Phis.shape}")
        if self.sigma2 < 0:
            raise DomainError("sigma2 must be non-negative")
        object.__setattr__(self, "phis", phis)
        object.__setattr__(self, "Phis", 0.5 * (Phis + Phis.conj().transpose(0, 2, 1)))

    @property
    def K(self) -> int:
        return self.phis.shape[0]

    @property
    def N(self) -> int:
        return self.phis.shape[1]

    @classmethod
    def from_statistics(cls, stats: MacStatistics, sigma2=1.0):
        outer = np.einsum("ka,kb->kab", stats.mus, stats.mus.conj())
        return cls(stats.mus, stats.thetas - outer, sigma2)

    @classmethod
    def from_ensemble(cls, ensemble: ChannelEnsemble, mac_filters=None, sigma2=1.0):
        return cls.from_statistics(statistics_from_tau(ensemble, _tau(ensemble, mac_filters)), sigma2)

    def scatter_sum(self, xi) -> np.ndarray:
        return np.einsum("k,kab->ab", np.asarray(xi, dtype=float), self.Phis) \
            + self.sigma2 * np.eye(self.N)

    def A(self, xi, k: int) -> np.ndarray:
        """``sum_i xi_i Phi_i + sum_{j != k} xi_j phi_j phi_j^H + sigma2 I``."""
        xi = np.asarray(xi, dtype=float)
        w = xi.copy()
        w[k] = 0.0
        return self.scatter_sum(xi) + np.einsum("j,ja,jb->ab", w, self.phis, self.phis.conj())


def _quad_inverse(A, v):
    try:
        x = hermitian_solve(A, v)
    except NotPositiveDefinite:
        x = np.linalg.lstsq(A, v, rcond=None)[0]
    return float(np.real(np.vdot(v, x)))


def fixed_point_map(xi, targets, ctx: FixedPointContext) -> np.ndarray:
    """``f_k(xi) = (1/eps_k - 1) / (phi_k^H A_k(xi)^{-1} phi_k)`` for every user."""
    eps = _mmse_targets(targets)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (ctx.K,) or eps.shape != (ctx.K,):
        raise DimensionMismatch("xi and targets must have one entry per user")
    out = np.empty(ctx.K)
    for k in range(ctx.K):
        if not np.any(ctx.phis[k]):
            raise DegenerateUser(f"user {k} has a zero mean direction")
        out[k] = (1.0 / eps[k] - 1.0) / _quad_inverse(ctx.A(xi, k), ctx.phis[k])
    return out


def nk_upper_bound(xi, targets, ctx: FixedPointContext) -> np.ndarray:
    """Upper bound on ``f(xi)`` obtained by projecting out the other users.

    Valid when the other users' directions are linearly independent after
    whitening (always the case for N >= K with generic channels). Entries are
    ``inf`` when user k lies in the span of the others.
    """
    eps = _mmse_targets(targets)
    xi = np.asarray(xi, dtype=float)
    w, V = np.linalg.eigh(ctx.scatter_sum(xi))
    if w.min() <= 0:
        raise DomainError("scatter sum must be positive definite (sigma2 > 0 or full-rank scatter)")
    whiten = (V / np.sqrt(w)) @ V.conj().T
    psi = ctx.phis @ whiten.T            # rows psi_k = Phi^{-1/2} phi_k
    out = np.empty(ctx.K)
    for k in range(ctx.K):
        D = np.delete(psi, k, axis=0).T  # (N, K-1)
        if D.shape[1]:
            coef = np.linalg.lstsq(D, psi[k], rcond=None)[0]
            resid = psi[k] - D @ coef
        else:
            resid = psi[k]
        denom = float(np.real(np.vdot(resid, resid)))
        scale = float(np.real(np.vdot(psi[k], psi[k])))
        out[k] = np.inf if denom <= 1e-14 * scale else (1.0 / eps[k] - 1.0) / denom
    return out


@dataclass(frozen=True, eq=False)
class FixedPointConditions:
    f_zero: np.ndarray
    condition_29: bool
    a: float
    condition_30: bool
    b: np.ndarray | None
    condition_31: bool
    probes: int
    upper_bound: np.ndarray | None = None

    @property
    def all_verified(self) -> bool:
        return self.condition_29 and self.condition_30 and self.condition_31


def check_fixed_point_conditions(targets, ctx: FixedPointContext, probe_scale: float = 1.0,
                                 direction=None, max_doublings: int = 40) -> FixedPointConditions:
    """Numerically check the three sufficient conditions for a fixed point of ``f``.

    * f(0) >= 0,
    * f(a 1) > a 1 with ``a = min_k f_k(0) / 2``,
    * f(b) < b for some ``b = probe_scale * 2^j * direction`` (j = 0..max_doublings)
      with ``b > a``; ``direction`` defaults to the all-ones vector.

    A failed third condition is evidence (not proof) of infeasible targets.
    When N >= K the projection upper bound at the verifying probe is reported.
    """
    if probe_scale <= 0:
        raise DomainError("probe_scale must be positive")
    f0 = fixed_point_map(np.zeros(ctx.K), targets, ctx)
    cond29 = bool(np.all(f0 >= 0))
    a = float(f0.min()) / 2.0
    cond30 = bool(a > 0 and np.all(fixed_point_map(np.full(ctx.K, a), targets, ctx) > a))
    direction = np.ones(ctx.K) if direction is None else np.asarray(direction, dtype=float)
    b_found = None
    upper = None
    probes = 0
    for j in range(max_doublings + 1):
        b = probe_scale * 2.0 ** j * direction
        probes += 1
        if not np.all(b > a):
            continue
        if np.all(fixed_point_map(b, targets, ctx) < b):
            b_found = b
            if ctx.N >= ctx.K and ctx.sigma2 > 0:
                upper = nk_upper_bound(b, targets, ctx)
            break
    return FixedPointConditions(f0, cond29, a, cond30, b_found, b_found is not None, probes, upper)


@dataclass(frozen=True, eq=False)
class BoundaryBalance:
    r: float              # solution of sum_k 1/(1 + r SIR0_k) = K - tr(X)
    b0: np.ndarray        # balanced power direction on the simplex
    sir_level: float      # common SIR/SIR0 ratio reached by b0
    iterations: int
    trace_bound: float


def _sir(b0, ctx: FixedPointContext, k):
    """Limit SIR of user k for power direction b0 (no noise)."""
    A = ctx.A(b0, k) - ctx.sigma2 * np.eye(ctx.N)
    return b0[k] * _quad_inverse(A, ctx.phis[k])


def _solve_boundary_r(sir0, level, tol=1e-14):

    def lhs(r):
        return float(np.sum(1.0 / (1.0 + r * sir0)))

    lo, hi = 1e-12, 1.0
    if lhs(lo) < level:
        return lo
    while lhs(hi) > level:
        hi *= 2.0
        if hi > 1e300:
            raise NoSolution("boundary equation has no finite root")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if lhs(mid) > level:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sir_balance_from_context(ctx: FixedPointContext, trace_value: float, sir_direction,
                             tol: float = 1e-10, max_iter: int = 10_000) -> BoundaryBalance:
    sir0 = np.asarray(sir_direction, dtype=float)
    K = ctx.K
    if sir0.shape != (K,) or np.any(sir0 <= 0):
        raise DomainError("SIR direction needs one positive weight per user")
    level = K - trace_value
    if not 0 < level < K:
        raise NoSolution(f"K - tr(X) = {level} is outside (0, {K})")
    b0 = np.full(K, 1.0 / K)
    it = 0
    for it in range(1, max_iter + 1):
        q = np.array([b0[k] / _sir(b0, ctx, k) for k in range(K)])
        new = q * sir0
        new /= new.sum()
        step = np.abs(new - b0).sum()
        b0 = new
        if step <= tol:
            break
    sir = np.array([_sir(b0, ctx, k) for k in range(K)])
    r = _solve_boundary_r(sir0, level)
    return BoundaryBalance(r, b0, float(np.mean(sir / sir0)), it, float(trace_value))


def boundary_sir_balance(ensemble: ChannelEnsemble, mac_filters, sir_direction,
                         tol: float = 1e-10, max_iter: int = 10_000) -> BoundaryBalance:
    """Boundary characterization for N < K via asymptotic SIR balancing.

    Iterates ``b0 <- normalize(Q(b0) * SIR0)`` on the simplex, where
    ``Q_k(b0) = b0_k / SIR_k(b0)`` is the limit interference of user k, and
    solves ``sum_k 1 / (1 + r SIR0_k) = K - tr(X)`` for ``r`` by bisection.

    Raises
    ------
    NoSolution
        If ``K - tr(X)`` is not strictly inside ``(0, K)``.
    """
    ctx = FixedPointContext.from_ensemble(ensemble, mac_filters, sigma2=1.0)
    value = trace_bound(ensemble, mac_filters)
    return sir_balance_from_context(ctx, value, sir_direction, tol, max_iter)
