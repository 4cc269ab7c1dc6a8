"""Domain types shared across the scheduler, plus the policy parameter bundle.

Time is measured in integer ticks and every interval is half-open
``[start, end)``, so two variants that touch at a boundary are compatible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from .fmp import Fmp


class PolicyError(ValueError):
    """A policy parameter violates its documented range."""

    def __init__(self, message: str, field: str):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class SliceSpec:
    slice_id: str
    capacity: float  # GB, constant over the horizon

    def __post_init__(self):
        if not self.capacity > 0:
            raise ValueError(f"slice {self.slice_id!r}: capacity must be positive")


@dataclass(frozen=True)
class Window:
    """An announced idle region ``[t_min, t_min + delta_t)`` on one slice."""

    slice_id: str
    capacity: float
    t_min: int
    delta_t: int

    def __post_init__(self):
        if self.delta_t <= 0:
            raise ValueError("window delta_t must be positive")

    @property
    def t_end(self) -> int:
        return self.t_min + self.delta_t


@dataclass(frozen=True)
class PolicyParams:
    """Every tunable weight and threshold of the scoring and admission rules.

    ``beta`` carries the age weight as its last entry.
    """

    lam: float = 0.5
    alpha: tuple[float, ...] = (0.5, 0.5)
    beta: tuple[float, ...] = (0.2, 0.3, 0.2, 0.3)
    theta: float = 0.05
    tau_min: int = 3
    gamma: float = 1.0
    kappa: float = 2.0
    verification_weights: tuple[float, ...] = (0.5, 0.5)
    age_horizon: int = 100
    lead_time: int = 0

    @property
    def beta_age(self) -> float:
        return self.beta[-1] if self.beta else 0.0


def validate_policy(params: PolicyParams) -> PolicyParams:
    """Return ``params`` unchanged, or raise :class:`PolicyError` naming the first broken rule."""
    p = params
    if not 0.0 <= p.lam <= 1.0:
        raise PolicyError("lambda out of range", "lambda")
    if any(a < 0 for a in p.alpha):
        raise PolicyError("alpha has a negative weight", "alpha")
    if math.fsum(p.alpha) > 1.0 + 1e-12:
        raise PolicyError("alpha sum exceeds 1", "alpha")
    if not p.beta:
        raise PolicyError("beta must include the age weight", "beta")
    if any(b < 0 for b in p.beta):
        raise PolicyError("beta has a negative weight", "beta")
    if math.fsum(p.beta) > 1.0 + 1e-12:
        raise PolicyError("beta sum exceeds 1", "beta")
    if not 0.0 < p.theta < 1.0:
        raise PolicyError("theta out of range", "theta")
    if not p.tau_min > 0:
        raise PolicyError("tau_min must be positive", "tau_min")
    if not 0.0 <= p.gamma <= 1.0:
        raise PolicyError("gamma out of range", "gamma")
    if not p.kappa > 0:
        raise PolicyError("kappa must be positive", "kappa")
    if any(w < 0 for w in p.verification_weights):
        raise PolicyError("verification weights must be nonnegative", "verification_weights")
    if abs(math.fsum(p.verification_weights) - 1.0) > 1e-12:
        raise PolicyError("verification weights must sum to 1", "verification_weights")
    if not p.age_horizon > 0:
        raise PolicyError("age_horizon must be positive", "age_horizon")
    if p.lead_time < 0:
        raise PolicyError("lead_time must be nonnegative", "lead_time")
    return params


@dataclass(frozen=True)
class Variant:
    """One candidate subjob offered by a job for an announced window."""

    variant_id: str
    job_id: str
    slice_id: str
    t_start: int
    predicted_duration: int
    fmp: "Fmp"
    declared_features: tuple[float, ...]
    work: int = 0  # nominal work the subjob would complete

    def __post_init__(self):
        if self.predicted_duration <= 0:
            raise ValueError("predicted_duration must be positive")
        if any(not 0.0 <= x <= 1.0 for x in self.declared_features):
            raise ValueError(f"{self.variant_id}: declared features must lie in [0, 1]")

    @property
    def t_end(self) -> int:
        return self.t_start + self.predicted_duration

    @property
    def interval(self) -> tuple[int, int]:
        return (self.t_start, self.t_end)


def fits_window(variant: Variant, window: Window, tau_min: int) -> bool:
    """Whether the variant's interval lies inside the window and respects tau_min."""
    return (
        variant.slice_id == window.slice_id
        and window.t_min <= variant.t_start
        and variant.t_end <= window.t_end
        and variant.predicted_duration >= tau_min
    )


@dataclass(frozen=True)
class ScoredVariant:
    variant: Variant
    h_tilde: float
    f_sys_tilde: float
    h_hat: float
    score: float
    age_anchor: int = 0  # tie-break only: older anchor wins equal scores

    @property
    def variant_id(self) -> str:
        return self.variant.variant_id

    @property
    def start(self) -> int:
        return self.variant.t_start

    @property
    def end(self) -> int:
        return self.variant.t_end


@dataclass(frozen=True)
class Commitment:
    variant_id: str
    job_id: Optional[str]
    slice_id: str
    start: int
    end: int
    committed_at: int
    work: int = 0

    @property
    def interval(self) -> tuple[int, int]:
        return (self.start, self.end)


def intervals_disjoint(intervals) -> bool:
    """Half-open disjointness check over ``(start, end)`` pairs."""
    ordered = sorted(intervals)
    return all(a[1] <= b[0] for a, b in zip(ordered, ordered[1:]))


__all__ = [
    "Commitment",
    "PolicyError",
    "PolicyParams",
    "ScoredVariant",
    "SliceSpec",
    "Variant",
    "Window",
    "fits_window",
    "intervals_disjoint",
    "validate_policy",
]
