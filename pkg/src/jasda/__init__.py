"""Window-announcement scheduling with bid clearing for sliced accelerators."""

from .clearing import ClearingResult, max_score_variant, select_best_compatible
from .config import WorkloadConfig, generate_workload, load_config, write_config
from .core import PolicyParams, ScoredVariant, SliceSpec, Variant, Window, validate_policy
from .engine import Simulation, run_baseline, run_simulation
from .fmp import Fmp
from .metrics import MetricsReport, audit_trace, compute_metrics

__all__ = [
    "ClearingResult",
    "Fmp",
    "MetricsReport",
    "PolicyParams",
    "ScoredVariant",
    "Simulation",
    "SliceSpec",
    "Variant",
    "Window",
    "WorkloadConfig",
    "audit_trace",
    "compute_metrics",
    "generate_workload",
    "load_config",
    "max_score_variant",
    "run_baseline",
    "run_simulation",
    "select_best_compatible",
    "validate_policy",
    "write_config",
]
