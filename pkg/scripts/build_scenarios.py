"""Regenerate the JSON scenarios shipped in src/jasda/scenarios/.

    python3 scripts/build_scenarios.py [--out DIR]

table3.json is hand-written and not touched here.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from jasda.config import GeneratorParams, JobSpec, Reservation, WorkloadConfig, generate_workload, write_config
from jasda.core import PolicyParams, SliceSpec
from jasda.fmp import Fmp

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "src" / "jasda" / "scenarios"

# 50 Poisson arrivals packed into 400 ticks on a 500-tick horizon: demand
# exceeds what the three slices can serve, so utilization is policy-limited.
LOADED = GeneratorParams(rate=0.2, arrival_window=400, horizon=500, n_jobs=50)


def starvation() -> WorkloadConfig:
    """One heavy job with a hopeless deadline against 20 light jobs arriving
    slightly faster than the slice can drain them."""
    low = JobSpec("L", 0, 20, Fmp(((1.0, 8.0, 0.5),), 20.0, 0.5),
                  qos_deadline=1, max_variants=2, chunk_max=10)
    high = [
        JobSpec(f"H{i + 1:02d}", 18 * i, 20, Fmp(((1.0, 4.0, 0.5),), 20.0, 0.5),
                max_variants=2, chunk_max=10)
        for i in range(20)
    ]
    policy = PolicyParams(lam=0.5, alpha=(0.9, 0.1), beta=(0.2, 0.3, 0.2, 0.3),
                          theta=0.05, tau_min=3, age_horizon=200)
    return WorkloadConfig((SliceSpec("s1", 20.0),), (low, *high), policy,
                          horizon=450, delta_jct_max=2000.0, e_max=1000.0, seed=1)


def calibration(gap: int = 12) -> WorkloadConfig:
    """A job over-declaring by +0.3 on a slice with periodic background load.

    After t=48 the slice is free for 5 ticks, then busy for ``gap`` ticks,
    repeatedly.  Each chunk of the job therefore lands ``gap`` ticks later
    than it would on an idle slice, and its true JCT feature falls steadily.
    """
    first, chunk, n = 48, 5, 25
    period = chunk + gap
    reservations = [Reservation("s1", 0, first)] + [
        Reservation("s1", first + k * period + chunk, first + (k + 1) * period) for k in range(n)
    ]
    job = JobSpec("X", 0, 100, Fmp(((1.0, 6.0, 0.0),), 100.0, 0.0),
                  bias=0.3, max_variants=1, chunk_max=chunk)
    policy = PolicyParams(lam=0.5, alpha=(0.5, 0.5), beta=(0.2, 0.3, 0.2, 0.3),
                          tau_min=3, kappa=2.0, age_horizon=100)
    return WorkloadConfig((SliceSpec("s1", 20.0),), (job,), policy,
                          horizon=first + n * period + 50, delta_jct_max=200.0, e_max=1000.0,
                          seed=3, reservations=tuple(reservations))


def random50() -> WorkloadConfig:
    return generate_workload(LOADED, seed=0)


SCENARIOS = {"starvation": starvation, "calibration": calibration, "random50": random50}


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=SCENARIO_DIR)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for name, build in SCENARIOS.items():
        path = args.out / f"{name}.json"
        write_config(build(), path)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
