"""Small dense complex linear algebra, seeded sampling and special functions.

Dimensions in this package are tiny (N, K up to ~16), so everything here is
plain numpy/scipy on dense arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .errors import DimensionMismatch, DomainError, NotPositiveDefinite

__all__ = [
    "SeededRng",
    "hermitian_solve",
    "psd_factor",
    "sample_complex_gaussian",
    "digamma",
    "to_db",
    "from_db",
]

PIVOT_RTOL = 1e-14
EIG_CLIP_RTOL = 1e-12


@dataclass(frozen=True)
class SeededRng:
    """Counter-based random stream identified by ``(seed, stream)``.

    Every call to :meth:`generator` starts a fresh Philox stream keyed by the
    pair, so the same pair always reproduces the same sequence regardless of
    what other streams were consumed before.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= self.seed < 2**64 and 0 <= self.stream < 2**64):
            raise DomainError("seed and stream must be unsigned 64-bit integers")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=[self.seed, self.stream]))

    def substream(self, offset: int) -> "SeededRng":
        return SeededRng(self.seed, (self.stream + offset) % 2**64)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected SeededRng or numpy Generator, got {type(rng)!r}")


def hermitian_solve(A, B):
    """Solve ``A X = B`` for Hermitian positive definite ``A``.

    Parameters
    ----------
    A : (n, n) complex array
        Hermitian positive definite matrix (only the lower triangle is read).
    B : (n,) or (n, k) array
        Right-hand side(s).

    Raises
    ------
    NotPositiveDefinite
        If a Cholesky pivot falls below ``1e-14`` times the largest diagonal
        entry of ``A``.
    """
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"A must be square, got shape {A.shape}")
    if B.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"B has {B.shape[0]} rows, A is {A.shape[0]}x{A.shape[0]}")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    scale = np.max(np.abs(np.diag(A).real))
    pivots = np.abs(np.diag(L)) ** 2
    if scale <= 0 or np.min(pivots) < PIVOT_RTOL * scale:
        raise NotPositiveDefinite("Cholesky pivot below relative tolerance")
    return cho_solve((L, True), B)


def psd_factor(cov):
    """Return ``L`` with ``L @ L^H == cov`` for a Hermitian PSD ``cov``.

    Cholesky is tried first; rank-deficient (or zero) covariances fall back to
    an eigen-factorization with tiny/negative eigenvalues clipped to zero.
    """
    cov = np.asarray(cov, dtype=complex)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise DimensionMismatch(f"covariance must be square, got shape {cov.shape}")
    scale = np.max(np.abs(np.diag(cov).real)) if cov.size else 0.0
    if scale > 0:
        try:
            L = np.linalg.cholesky(cov)
            if np.min(np.abs(np.diag(L)) ** 2) >= PIVOT_RTOL * scale:
                return L
        except np.linalg.LinAlgError:
            pass
    w, V = np.linalg.eigh(0.5 * (cov + cov.conj().T))
    wmax = max(float(np.max(w, initial=0.0)), 0.0)
    w = np.where(w > EIG_CLIP_RTOL * wmax, w, 0.0) if wmax > 0 else np.zeros_like(w)
    return V * np.sqrt(w)


def sample_complex_gaussian(mean, cov, rng, size=None):
    """Draw circularly-symmetric complex Gaussian vectors ``CN(mean, cov)``.

    Returns an ``(N,)`` vector when ``size`` is None, else ``(size, N)``.
    A zero covariance returns ``mean`` exactly.
    """
    mean = np.asarray(mean, dtype=complex)
    cov = np.asarray(cov, dtype=complex)
    if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
        raise DimensionMismatch(
            f"mean of length {mean.size} incompatible with covariance {cov.shape}")
    gen = _as_generator(rng)
    n = mean.size
    count = 1 if size is None else int(size)
    raw = gen.standard_normal((count, n, 2))
    z = (raw[..., 0] + 1j * raw[..., 1]) / math.sqrt(2.0)
    L = psd_factor(cov)
    out = mean + z @ L.T
    return out[0] if size is None else out


_ASYMPTOTIC = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def digamma(x: float) -> float:
    """Digamma function for positive real ``x``.

    Upward recurrence to ``x >= 10`` followed by the asymptotic Bernoulli series.
    """
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"digamma is defined here for finite x > 0, got {x}")
    acc = 0.0
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for coef in _ASYMPTOTIC:
        series += coef * power
        power *= inv2
    return acc + math.log(x) - 0.5 / x - series


def to_db(p: float) -> float:
    if not p > 0:
        raise DomainError(f"power must be positive to express in dB, got {p}")
    return 10.0 * math.log10(p)


def from_db(d: float) -> float:
    return 10.0 ** (d / 10.0)
