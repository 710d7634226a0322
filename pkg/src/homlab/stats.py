"""Sample-size rule and percentile bootstrap."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError
from .streams import Stream, as_stream

# resamples drawn per keyed substream; fixed so results never depend on scheduling
BOOTSTRAP_BLOCK = 256


@dataclass(frozen=True)
class SampleSummary:
    mean: float
    std_dev: float
    count: int

    def __post_init__(self):
        if self.std_dev < 0:
            raise DomainError("std_dev must be >= 0")
        if self.count < 2:
            raise DomainError("a summary needs count >= 2")

    @classmethod
    def of(cls, data) -> "SampleSummary":
        x = np.asarray(data, dtype=float)
        if x.size < 2:
            raise DomainError("need at least 2 values to summarize")
        return cls(float(x.mean()), float(x.std(ddof=1)), int(x.size))


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    level: float
    estimate: float = math.nan
    std_error: float = math.nan

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise DomainError("level must lie in (0, 1)")
        if self.lo > self.hi:
            raise DomainError("lo must not exceed hi")

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)


def min_samples(summary: SampleSummary, rel_halfwidth: float = 0.05, z: float = 1.96) -> int:
    """Smallest N whose CLT interval ``mean +- z sd/sqrt(N)`` is within ``rel_halfwidth`` of the mean."""
    if summary.mean <= 0:
        raise DomainError("min_samples needs a positive mean")
    if rel_halfwidth <= 0 or z <= 0:
        raise DomainError("rel_halfwidth and z must be positive")
    n = (z * summary.std_dev / (rel_halfwidth * summary.mean)) ** 2
    # keep exact-integer cases from rounding up on representation error
    return max(2, math.ceil(n * (1.0 - 1e-12)))


def _mean_statistic(resampled: np.ndarray) -> np.ndarray:
    return resampled.mean(axis=1)


def bootstrap_distribution(sample, n_resamples: int, rng: Stream | int,
                           statistic: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """Statistic evaluated on ``n_resamples`` with-replacement resamples.

    ``sample`` may be 2-D (rows resampled together).  ``statistic`` maps an
    array of shape ``(B, n, ...)`` to ``(B,)``; default is the mean.
    Block ``b`` of resamples uses substream ``rng.child(b)``.
    """
    data = np.asarray(sample, dtype=float)
    n = data.shape[0]
    stat = statistic or _mean_statistic
    stream = as_stream(rng)
    out = np.empty(n_resamples)
    for start in range(0, n_resamples, BOOTSTRAP_BLOCK):
        m = min(BOOTSTRAP_BLOCK, n_resamples - start)
        gen = stream.child(start // BOOTSTRAP_BLOCK).generator()
        idx = gen.integers(0, n, size=(m, n))
        out[start:start + m] = stat(data[idx])
    return out


def bootstrap_ci(sample, n_resamples: int = 10_000, level: float = 0.95,
                 rng: Stream | int = 0,
                 statistic: Callable[[np.ndarray], np.ndarray] | None = None) -> ConfidenceInterval:
    """Percentile bootstrap interval ``[c + d_lo, c + d_hi]``.

    ``d = c* - c`` over resamples, with the quantiles taken by linear
    interpolation between order statistics.  The returned ``std_error`` is the
    standard deviation of ``c*``.
    """
    data = np.asarray(sample, dtype=float)
    if data.size == 0:
        raise DomainError("empty sample")
    if data.shape[0] < 2:
        raise DomainError("bootstrap needs at least 2 observations")
    if n_resamples < 100:
        raise DomainError("use at least 100 resamples")
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")
    stat = statistic or _mean_statistic
    c = float(stat(data[np.newaxis])[0])
    deltas = bootstrap_distribution(data, n_resamples, rng, stat) - c
    q_lo, q_hi = np.quantile(deltas, [(1.0 - level) / 2.0, (1.0 + level) / 2.0], method="linear")
    lo, hi = c + float(q_lo), c + float(q_hi)
    return ConfidenceInterval(min(lo, hi), max(lo, hi), level, c, float(np.std(deltas, ddof=1)))


def coverage_study(trials: int = 1000, sample_size: int = 100, n_resamples: int = 2000,
                   level: float = 0.95, rng: Stream | int = 0, mean: float = 1.0,
                   std_dev: float = 1.0) -> float:
    """Fraction of ``trials`` normal samples whose bootstrap CI covers the true mean."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    stream = as_stream(rng)
    hits = 0
    for k in range(trials):
        x = stream.child(k, 0).generator().normal(mean, std_dev, sample_size)
        hits += bootstrap_ci(x, n_resamples, level, stream.child(k, 1)).contains(mean)
    return hits / trials
