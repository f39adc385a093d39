"""Rate balancing under a total power budget.

A common factor ``sigma`` scales all rate targets, ``eps_k = 2^(-sigma rho_k)``.
The largest ``sigma`` whose minimum power still fits the budget is located by
geometric bisection, with one power-minimization solve per candidate.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelEnsemble
from .errors import BracketFailure, Diverged, DomainError, MaxIterations
from .feasibility import assess_feasibility
from .power_min import PowerMinResult, QosTargets, SolverOptions, solve

__all__ = ["BalanceOptions", "BalanceStep", "BalanceState", "BalanceResult",
           "scaled_targets", "balance"]

log = logging.getLogger(__name__)

_MAX_BRACKET_DOUBLINGS = 30


def scaled_targets(rates, sigma) -> QosTargets:
    """Targets with every rate multiplied by ``sigma``, i.e. ``eps_k = 2^(-sigma rho_k)``."""
    if sigma < 0:
        raise DomainError(f"scaling must be non-negative, got {sigma}")
    return QosTargets(sigma * np.asarray(rates, dtype=float))


@dataclass(frozen=True)
class BalanceOptions:
    """Settings for :func:`balance`.

    ``tolerance`` is the accepted gap between total power and budget. The
    inner solver defaults to a much tighter tolerance (1e-4): the L1 stopping
    rule leaves a power error of several times its tolerance, and the
    bisection needs candidate powers accurate well below the accepted gap.
    """

    tolerance: float = 1e-2
    sigma_low: float | None = None
    sigma_high: float | None = None
    max_bisections: int = 60
    solver: SolverOptions = field(default_factory=lambda: SolverOptions(tolerance=1e-4))
    warm_start: bool = True

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")
        if (self.sigma_low is None) != (self.sigma_high is None):
            raise DomainError("give both sigma_low and sigma_high or neither")
        if self.sigma_low is not None and not 0 < self.sigma_low < self.sigma_high:
            raise DomainError("need 0 < sigma_low < sigma_high")


@dataclass(frozen=True)
class BalanceStep:
    iteration: int
    sigma_low: float
    sigma_high: float
    candidate: float
    total_power: float
    status: str

    @property
    def total_power_db(self) -> float:
        return 10.0 * np.log10(self.total_power) if self.total_power > 0 else -np.inf


@dataclass(eq=False)
class BalanceState:
    sigma_low: float
    sigma_high: float
    power_low: float
    power_high: float
    candidate: float | None = None
    steps: list = field(default_factory=list)
    converged: bool = False

    @property
    def width(self) -> float:
        """Bracket width ``sigma_high - sigma_low``."""
        return self.sigma_high - self.sigma_low


@dataclass(eq=False)
class BalanceResult:
    sigma: float
    filters: object
    xi: np.ndarray
    state: BalanceState
    solution: PowerMinResult | None = None

    @property
    def total_power(self) -> float:
        return float(np.sum(self.xi))

    def __iter__(self):
        return iter((self.sigma, self.filters, self.xi, self.state))


class _Evaluator:
    """Solves the power minimization for a given scaling, with warm starts."""

    def __init__(self, ensemble, rates, opts):
        self.ensemble = ensemble
        self.rates = rates
        self.opts = opts
        self.last_precoders = None

    def __call__(self, sigma):
        initial = self.last_precoders if self.opts.warm_start else None
        try:
            res = solve(self.ensemble, scaled_targets(self.rates, sigma), self.opts.solver, initial)
        except Diverged:
            return np.inf, None, "diverged"
        except MaxIterations as exc:
            res = exc.result
            log.warning("scaling %.6g: power minimization hit the iteration cap", sigma)
            if res is None:
                return np.inf, None, "max_iterations"
            status = "max_iterations"
        else:
            status = res.status
        self.last_precoders = res.filters.precoders
        return res.total_power, res, status

    def outside_polytope(self, sigma):
        return not assess_feasibility(self.ensemble, scaled_targets(self.rates, sigma)).feasible


def _auto_bracket(evaluate, P_tx):
    p1, r1, _ = evaluate(1.0)
    if p1 < P_tx:
        low, p_low, r_low = 1.0, p1, r1
        high = 2.0
        for _ in range(_MAX_BRACKET_DOUBLINGS):
            if evaluate.outside_polytope(high):
                return low, p_low, r_low, high, np.inf, None
            p_high, r_high, _ = evaluate(high)
            if p_high >= P_tx:
                return low, p_low, r_low, high, p_high, r_high
            low, p_low, r_low = high, p_high, r_high
            high *= 2.0
        raise BracketFailure(f"power stays below {P_tx:.6g} up to scaling {low:.6g}")
    high, p_high, r_high = 1.0, p1, r1
    low = 0.5
    for _ in range(_MAX_BRACKET_DOUBLINGS):
        p_low, r_low, _ = evaluate(low)
        if p_low <= P_tx:
            return low, p_low, r_low, high, p_high, r_high
        high, p_high, r_high = low, p_low, r_low
        low /= 2.0
    raise BracketFailure(f"power stays above {P_tx:.6g} down to scaling {high:.6g}")


def balance(ensemble: ChannelEnsemble, rates, P_tx: float,
            opts: BalanceOptions | None = None) -> BalanceResult:
    """Maximize the common rate scaling subject to a total power budget.

    Each step tries ``sigma = sqrt(sigma_low * sigma_high)``, minimizes power
    for the scaled targets, and replaces ``sigma_low`` when the power is below
    ``P_tx`` and ``sigma_high`` otherwise. It stops once
    ``|sum(xi) - P_tx| < opts.tolerance``. Candidates whose solve diverges
    count as infinite power.

    Returns
    -------
    BalanceResult
        Unpacks as ``(sigma, filters, xi, state)``; filters and powers belong
        to the last candidate.

    Raises
    ------
    BracketFailure
        If the initial levels do not satisfy
        ``power(sigma_low) <= P_tx <= power(sigma_high)``, or auto-bracketing
        cannot establish that.
    """
    opts = opts or BalanceOptions()
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    if not P_tx > 0:
        raise DomainError("power budget must be positive")
    if rates.shape != (ensemble.K,) or np.any(rates <= 0):
        raise DomainError("need one positive rate per user")
    evaluate = _Evaluator(ensemble, rates, opts)

    if opts.sigma_low is None:
        low, p_low, r_low, high, p_high, r_high = _auto_bracket(evaluate, P_tx)
    else:
        low, high = opts.sigma_low, opts.sigma_high
        p_low, r_low, _ = evaluate(low)
        p_high, r_high, _ = evaluate(high)
    if not p_low <= P_tx <= p_high:
        raise BracketFailure(
            f"bracket [{low:.6g}, {high:.6g}] gives powers [{p_low:.6g}, {p_high:.6g}], "
            f"which do not enclose {P_tx:.6g}")
    if opts.warm_start and r_low is not None:
        evaluate.last_precoders = r_low.filters.precoders

    state = BalanceState(low, high, p_low, p_high)
    result = None
    for it in range(1, opts.max_bisections + 1):
        cand = float(np.sqrt(state.sigma_low * state.sigma_high))
        power, res, status = evaluate(cand)
        state.candidate = cand
        state.steps.append(BalanceStep(it, state.sigma_low, state.sigma_high, cand, power, status))
        log.debug("bisection %d: sigma %.6g, power %.6g", it, cand, power)
        if power < P_tx:
            state.sigma_low, state.power_low = cand, power
        else:
            state.sigma_high, state.power_high = cand, power
        if res is not None:
            result = res
        if abs(power - P_tx) < opts.tolerance:
            state.converged = True
            break
    else:
        log.warning("bisection stopped after %d steps, power gap not closed", opts.max_bisections)

    if result is None:
        result = r_low
    return BalanceResult(state.candidate, result.filters, result.xi, state, result)
