"""Trust trajectory of the over-declaring job in the calibration scenario.

    python3 scripts/calibration_demo.py [--n 15] [--gap 12]

``--gap`` rebuilds the scenario with a different background-load gap between
the job's chunks; small gaps make the declared utility fall more slowly than
HistAvg catches up, and the calibrated distance then grows instead.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from jasda.engine import run_simulation

sys.path.insert(0, str(Path(__file__).parent))
from build_scenarios import calibration  # noqa: E402


def series(cfg, job="X", n=15):
    trace, _ = run_simulation(cfg)
    out = []
    for i, e in enumerate(trace):
        if e["type"] == "execution" and e["job_id"] == job and e["verification"]:
            v = e["verification"]
            nxt = next((b for later in trace[i + 1:] if later["type"] == "iteration"
                        for b in later["bids"] if b["job_id"] == job), None)
            out.append((v["variant_error"], v["mean_error"], v["rho"], v["hist_avg"],
                        nxt["h_tilde"] if nxt else None, nxt["h_hat"] if nxt else None))
            if len(out) == n:
                break
    return out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=15)
    ap.add_argument("--gap", type=int, default=None)
    args = ap.parse_args(argv)

    cfg = calibration() if args.gap is None else calibration(gap=args.gap)
    print(f"{'k':>2}  {'err':>6}  {'mean':>6}  {'rho':>7}  {'hist':>7}  {'h_decl':>7}  {'h_hat':>7}  {'|h_hat-hist|':>12}")
    for k, (err, mean, rho, hist, h, hh) in enumerate(series(cfg, n=args.n), 1):
        dist = f"{abs(hh - hist):12.5f}" if hh is not None else f"{'-':>12}"
        hs = f"{h:7.4f}  {hh:7.4f}" if h is not None else f"{'-':>7}  {'-':>7}"
        print(f"{k:2d}  {err:6.4f}  {mean:6.4f}  {rho:7.4f}  {hist:7.4f}  {hs}  {dist}")


if __name__ == "__main__":
    main()
