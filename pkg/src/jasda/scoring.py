"""Feature normalizers, job/system utilities, the age factor and the composite score."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .fmp import Fmp

FeatureVector = tuple[float, ...]


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def feature_vector(values: Sequence[float]) -> FeatureVector:
    """Validate and freeze a feature vector; every entry must be in [0, 1]."""
    out = tuple(float(v) for v in values)
    for v in out:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"feature value {v} outside [0, 1]")
    return out


@dataclass
class JobRuntimeState:
    job_id: str
    t_last_scheduled: int
    remaining_work: int
    arrival_time: int

    def __post_init__(self):
        if self.t_last_scheduled < self.arrival_time:
            raise ValueError("t_last_scheduled precedes arrival")


def normalize_jct(delta_jct: float, delta_jct_max: float) -> float:
    if not delta_jct_max > 0:
        raise ValueError("delta_jct_max must be positive")
    return _clamp01(1.0 - delta_jct / delta_jct_max)


def normalize_energy(e: float, e_max: float) -> float:
    if not e_max > 0:
        raise ValueError("e_max must be positive")
    return _clamp01(1.0 - e / e_max)


def qos_indicator(meets: bool) -> int:
    return 1 if meets else 0


def mem_headroom(fmp: Fmp, capacity: float, duration: int) -> float:
    """Time-weighted mean free-memory fraction on the slice; duration only scales weights."""
    if not capacity > 0:
        raise ValueError("capacity must be positive")
    return _clamp01(
        math.fsum(frac * _clamp01((capacity - mean) / capacity) for frac, mean, _ in fmp.segments)
    )


def _weighted(features: Sequence[float], weights: Sequence[float]) -> float:
    if len(features) != len(weights):
        raise ValueError(f"{len(features)} features but {len(weights)} weights")
    return math.fsum(w * x for w, x in zip(weights, features))


def job_utility(features: Sequence[float], alpha: Sequence[float]) -> float:
    return _clamp01(_weighted(features, alpha))


def system_utility(features: Sequence[float], beta: Sequence[float], age: float) -> float:
    """Weighted system features plus the age term; ``beta[-1]`` weights the age."""
    if not 0.0 <= age <= 1.0:
        raise ValueError("age must lie in [0, 1]")
    return _clamp01(_weighted(features, beta[:-1]) + beta[-1] * age)


def age_factor(state: JobRuntimeState, now: int, age_horizon: int) -> float:
    if age_horizon <= 0:
        raise ValueError("age_horizon must be positive")
    wait = now - state.t_last_scheduled
    if wait < 0:
        raise ValueError("now precedes the job's last scheduling time")
    return min(1.0, wait / age_horizon)


def composite_score(h_hat: float, f_sys_tilde: float, lam: float) -> float:
    if lam == 1.0:
        return h_hat
    return _clamp01(lam * h_hat + (1.0 - lam) * f_sys_tilde)
