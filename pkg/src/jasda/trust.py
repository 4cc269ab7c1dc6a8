"""Calibration of declared job utilities and ex-post reliability tracking.

Each job carries a :class:`ReliabilityState`.  Before its first verified
variant the declared utility is blended with a baseline using ``gamma``;
afterwards the blend weight is the reliability ``rho``, which decays
exponentially with the job's mean reporting error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

HIST_SMOOTHING = 0.2


@dataclass(frozen=True)
class VerificationRecord:
    variant_id: str
    per_feature_error: tuple[float, ...]
    variant_error: float
    verified_at: int
    job_id: Optional[str] = None
    observed_utility: Optional[float] = None


@dataclass(frozen=True)
class ReliabilityState:
    job_id: str
    hist_avg: Optional[float] = None  # None until the job's first declaration
    mean_error: float = 0.0
    verified_count: int = 0
    rho: float = 1.0


def reliability(mean_error: float, kappa: float) -> float:
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    return math.exp(-kappa * mean_error)


def with_baseline(state: ReliabilityState, h_tilde: float) -> ReliabilityState:
    """Seed the historical average with the first declaration seen."""
    if state.hist_avg is not None:
        return state
    return replace(state, hist_avg=h_tilde)


def calibrate(h_tilde: float, state: ReliabilityState, gamma: float = 1.0) -> float:
    hist = h_tilde if state.hist_avg is None else state.hist_avg
    weight = gamma if state.verified_count == 0 else state.rho
    return weight * h_tilde + (1.0 - weight) * hist


def per_feature_error(declared: Sequence[float], observed: Sequence[float]) -> tuple[float, ...]:
    if len(declared) != len(observed):
        raise ValueError(
            f"declared has {len(declared)} features, observed has {len(observed)}"
        )
    return tuple(abs(d - o) for d, o in zip(declared, observed))


def variant_error(
    per_feature: Sequence[float],
    w: Sequence[float],
    observed_mask: Optional[Sequence[bool]] = None,
) -> float:
    """Convex combination of per-feature errors.

    Features whose mask entry is false had no ground truth; their weight is
    dropped and the rest renormalized.
    """
    if len(per_feature) != len(w):
        raise ValueError("error and weight vectors differ in length")
    if observed_mask is None:
        observed_mask = [True] * len(w)
    kept = [(wi, ei) for wi, ei, ok in zip(w, per_feature, observed_mask) if ok]
    total_w = math.fsum(wi for wi, _ in kept)
    if total_w <= 0:
        raise ValueError("no verifiable feature carries weight")
    err = math.fsum(wi * ei for wi, ei in kept) / total_w
    return min(1.0, max(0.0, err))


def update_reliability(
    state: ReliabilityState, record: VerificationRecord, kappa: float
) -> ReliabilityState:
    """Fold one verified variant into the job's running error mean and rho."""
    if not 0.0 <= record.variant_error <= 1.0:
        raise ValueError("variant_error must lie in [0, 1]")
    n = state.verified_count + 1
    mean = state.mean_error + (record.variant_error - state.mean_error) / n
    hist = state.hist_avg
    if record.observed_utility is not None:
        if hist is None:
            hist = record.observed_utility
        else:
            hist = (1.0 - HIST_SMOOTHING) * hist + HIST_SMOOTHING * record.observed_utility
    return ReliabilityState(
        job_id=state.job_id,
        hist_avg=hist,
        mean_error=mean,
        verified_count=n,
        rho=reliability(mean, kappa),
    )
