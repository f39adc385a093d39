"""Jensen-gap estimate under a beta model of the MMSE, and the separate-expectation SINR rate.

If the instantaneous MMSE is beta(alpha, beta) distributed, the average rate is
``-(psi(alpha) - psi(alpha + beta)) / ln 2`` while the QoS constraint works with
``-log2(E[MMSE]) = -log2(alpha / (alpha + beta))``. Approximating
``psi(x) ~ ln(x - 1/2)`` turns their difference into a closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelEnsemble, empirical_mean_outer
from .errors import DegenerateSample, DomainError
from .numerics import SeededRng, digamma

__all__ = ["BetaFit", "beta_fit", "gap_estimate", "gap_exact",
           "sinr_approx_rate", "sinr_approx_rates", "sample_siso_mmse"]

_MIN_VARIANCE = 1e-14


@dataclass(frozen=True)
class BetaFit:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta >= 0):
            raise DomainError(f"invalid beta parameters ({self.alpha}, {self.beta})")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


def beta_fit(mmse_samples) -> BetaFit:
    """Fit a beta distribution by matching mean and (unbiased) variance."""
    x = np.asarray(mmse_samples, dtype=float).ravel()
    if x.size < 2:
        raise DegenerateSample("need at least two samples")
    if np.any(x <= 0) or np.any(x >= 1):
        raise DegenerateSample("samples must lie strictly inside (0, 1)")
    m = float(x.mean())
    s = float(x.var(ddof=1))
    if s < _MIN_VARIANCE:
        raise DegenerateSample(f"sample variance {s:.3g} is too small to fit")
    common = m * (1.0 - m) / s - 1.0
    if common <= 0:
        raise DegenerateSample("sample variance exceeds what any beta law allows")
    return BetaFit(m * common, (1.0 - m) * common)


def _params(fit, beta):
    if isinstance(fit, BetaFit):
        return fit.alpha, fit.beta
    return float(fit), float(beta)


def gap_estimate(fit, beta=None) -> float:
    """Closed-form gap ``log2(1 + (beta/2) / ((alpha - 1/2)(alpha + beta)))``.

    Accepts a :class:`BetaFit` or the two shape parameters.
    """
    a, b = _params(fit, beta)
    if a <= 0.5:
        raise DomainError(f"the gap approximation needs alpha > 1/2, got {a}")
    if b <= 0:
        raise DomainError(f"beta must be positive, got {b}")
    return math.log2(1.0 + 0.5 * b / ((a - 0.5) * (a + b)))


def gap_exact(fit, beta=None) -> float:
    """Gap between the beta-model average rate and ``-log2`` of the mean MMSE."""
    a, b = _params(fit, beta)
    if a <= 0 or b <= 0:
        raise DomainError("beta parameters must be positive")
    avg_rate = -(digamma(a) - digamma(a + b)) / math.log(2.0)
    return avg_rate + math.log2(a / (a + b))


def sinr_approx_rates(precoders, ensemble: ChannelEnsemble) -> np.ndarray:
    """Rates from an SINR whose numerator and denominator are averaged separately."""
    P = np.asarray(precoders, dtype=complex)
    out = np.empty(ensemble.K)
    for k in range(ensemble.K):
        R = empirical_mean_outer(ensemble, k)
        q = np.real(np.einsum("in,nm,im->i", P.conj(), R, P))
        signal = q[k]
        interf = q.sum() - signal
        out[k] = math.log2(1.0 + signal / (ensemble.noise_vars[k] + interf))
    return out


def sinr_approx_rate(precoders, ensemble: ChannelEnsemble, k: int) -> float:
    return float(sinr_approx_rates(precoders, ensemble)[k])


def sample_siso_mmse(p2: float, sigma2: float, count: int, rng) -> np.ndarray:
    """Draw ``sigma2 / (|h|^2 p2 + sigma2)`` with ``h ~ CN(0, 1)``."""
    if p2 < 0 or sigma2 <= 0 or count < 1:
        raise DomainError("need p2 >= 0, sigma2 > 0 and count >= 1")
    gen = rng.generator() if isinstance(rng, SeededRng) else rng
    h2 = gen.exponential(1.0, size=int(count))
    return sigma2 / (h2 * p2 + sigma2)
