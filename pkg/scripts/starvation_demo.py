"""Effect of the age weight on the starvation scenario.

    python3 scripts/starvation_demo.py [--beta-age 0 0.1 0.2 0.3]

For each age weight, prints the max waiting age and when the low-utility
job L completes (if it does).
"""

from __future__ import annotations

import argparse
from dataclasses import replace

from jasda.config import load_config, scenario_path
from jasda.engine import run_simulation


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--beta-age", type=float, nargs="+", default=[0.0, 0.1, 0.2, 0.3])
    args = ap.parse_args(argv)

    base = load_config(scenario_path("starvation"))
    print(f"{'beta_age':>8}  {'max_wait':>8}  {'L done at':>9}  {'completed':>9}")
    for b in args.beta_age:
        cfg = replace(base, policy=replace(base.policy, beta=base.policy.beta[:-1] + (b,)))
        trace, report = run_simulation(cfg)
        done = next((e["completion_time"] for e in trace
                     if e["type"] == "execution" and e["job_id"] == "L" and e["completed"]), None)
        print(f"{b:8.2f}  {report.max_wait:8d}  {str(done):>9}  {report.completed_jobs:6d}/{report.total_jobs}")


if __name__ == "__main__":
    main()
