"""Sweep seeds of a generated workload and compare jasda, greedy and fifo.

    python3 scripts/compare_policies.py --seeds 12 --out sweep.csv

Writes one row per (seed, policy) with the fixed metrics columns and prints
how often jasda's utilization is at least greedy's.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from jasda.config import GeneratorParams, generate_workload, generator_params_from_dict
from jasda.engine import POLICIES, run_simulation
from jasda.metrics import CSV_COLUMNS

sys.path.insert(0, str(Path(__file__).parent))
from build_scenarios import LOADED  # noqa: E402


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=12)
    ap.add_argument("--params", type=Path, help="generator parameters JSON (default: the loaded 50-job setup)")
    ap.add_argument("--rate", type=float)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args(argv)

    gp: GeneratorParams = LOADED
    if args.params:
        gp = generator_params_from_dict(json.loads(args.params.read_text()))
    if args.rate is not None:
        gp = replace(gp, rate=args.rate)

    rows, wins = [], 0
    for seed in range(args.seeds):
        cfg = generate_workload(gp, seed)
        util = {}
        for policy in POLICIES:
            _, report = run_simulation(cfg, seed, policy)
            rows.append(report.csv_row(policy, seed))
            util[policy] = report.utilization
        wins += util["jasda"] >= util["greedy"]
        print(f"seed {seed:3d}  " + "  ".join(f"{p} {util[p]:.4f}" for p in POLICIES))
    print(f"jasda >= greedy utilization on {wins}/{args.seeds} seeds")

    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
        print(f"-> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
