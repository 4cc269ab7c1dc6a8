"""Probabilistic memory profiles: duration quantiles, overflow risk, sampled runs.

A profile is a piecewise-constant sequence of segments, each covering a
fraction of the run and carrying an independent normal memory peak.  The
run duration is normal, truncated below at one tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

_STD_NORMAL = NormalDist()
# ceil() tolerance so tail mass lost to truncation does not push an exact
# tick up by one
_TICK_EPS = 1e-3


@dataclass(frozen=True)
class Fmp:
    segments: tuple[tuple[float, float, float], ...]  # (fraction, mem_mean, mem_std)
    duration_mean: float
    duration_std: float = 0.0

    def __post_init__(self):
        if not self.segments:
            raise ValueError("fmp needs at least one segment")
        for frac, mean, std in self.segments:
            if not 0.0 < frac <= 1.0:
                raise ValueError(f"segment fraction {frac} outside (0, 1]")
            if mean < 0 or std < 0:
                raise ValueError("segment mem_mean and mem_std must be nonnegative")
        if abs(math.fsum(f for f, _, _ in self.segments) - 1.0) > 1e-9:
            raise ValueError("segment fractions must sum to 1")
        if not self.duration_mean > 0:
            raise ValueError("duration_mean must be positive")
        if self.duration_std < 0:
            raise ValueError("duration_std must be nonnegative")

    @property
    def mean_memory(self) -> float:
        return math.fsum(f * m for f, m, _ in self.segments)

    def scaled(self, factor: float) -> "Fmp":
        """Profile of a chunk that is ``factor`` times as long; memory shape is kept."""
        return Fmp(self.segments, self.duration_mean * factor, self.duration_std * factor)


@dataclass(frozen=True)
class RealizedExecution:
    actual_duration: int
    peak_mem_per_segment: tuple[float, ...]
    observed_features: tuple[float, ...] = ()

    def __post_init__(self):
        if self.actual_duration <= 0:
            raise ValueError("actual_duration must be positive")


def _truncnorm_ppf(q: float, mu: float, sigma: float, lower: float) -> float:
    """Quantile of N(mu, sigma) conditioned on ``x >= lower``."""
    if sigma == 0:
        return max(mu, lower)
    a = _STD_NORMAL.cdf((lower - mu) / sigma)
    p = a + q * (1.0 - a)
    if p >= 1.0:
        return max(mu, lower)
    p = min(max(p, 1e-300), 1.0 - 1e-16)
    return max(lower, mu + sigma * _STD_NORMAL.inv_cdf(p))


def predict_duration(fmp: Fmp, quantile: float = 0.9) -> int:
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must lie in (0, 1)")
    x = _truncnorm_ppf(quantile, fmp.duration_mean, fmp.duration_std, 1.0)
    return max(1, math.ceil(x - _TICK_EPS))


def _phi(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def prob_exceeds_capacity(fmp: Fmp, capacity: float, duration: int) -> float:
    """P(max segment peak > capacity), peaks independent normals.

    A zero-variance segment is a step: it overflows with certainty or never.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    stay_below = 1.0
    for _, mean, std in fmp.segments:
        if std == 0:
            factor = 1.0 if mean <= capacity else 0.0
        else:
            factor = _phi((capacity - mean) / std)
        stay_below *= factor
        if stay_below == 0.0:
            break
    return min(1.0, max(0.0, 1.0 - stay_below))


def is_safe(fmp: Fmp, capacity: float, duration: int, theta: float) -> bool:
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    return prob_exceeds_capacity(fmp, capacity, duration) <= theta


def _round_tick(x: float) -> int:
    return max(1, math.floor(x + 0.5))


def sample_execution(fmp: Fmp, committed_duration: int, rng_seed) -> RealizedExecution:
    """Draw one ground-truth run; identical seeds give identical runs.

    ``rng_seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    if committed_duration <= 0:
        raise ValueError("committed_duration must be positive")
    rng = np.random.default_rng(rng_seed)
    u = rng.random(1 + len(fmp.segments))
    duration = _truncnorm_ppf(float(u[0]), fmp.duration_mean, fmp.duration_std, 1.0)
    peaks = tuple(
        _truncnorm_ppf(float(ui), mean, std, 0.0)
        for ui, (_, mean, std) in zip(u[1:], fmp.segments)
    )
    return RealizedExecution(_round_tick(duration), peaks)
