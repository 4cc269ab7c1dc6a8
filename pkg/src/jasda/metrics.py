"""Metrics and audits computed purely from an emitted trace.

Everything here reads only the trace events (the header embeds the full
config), so a stored trace can be re-scored and checked without rerunning
the simulation.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import config_from_dict
from .fmp import prob_exceeds_capacity

CSV_COLUMNS = (
    "policy", "seed", "utilization", "mean_jct", "p95_jct",
    "max_wait", "frag_count", "frag_ticks", "mean_rho",
)


@dataclass
class MetricsReport:
    utilization: float = 0.0
    mean_jct: float = 0.0
    median_jct: float = 0.0
    p95_jct: float = 0.0
    mean_wait: float = 0.0
    max_wait: int = 0
    frag_count: int = 0
    frag_ticks: int = 0
    mean_rho: float = 0.0
    completed_jobs: int = 0
    total_jobs: int = 0
    total_cleared_score: float = 0.0
    rho_trajectory: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self, policy: str, seed: int) -> dict:
        row = {"policy": policy, "seed": seed}
        row.update({k: getattr(self, k) for k in CSV_COLUMNS[2:]})
        return row


def trace_lines(trace) -> list[str]:
    return [json.dumps(event, sort_keys=True, separators=(",", ":")) for event in trace]


def trace_hash(trace) -> str:
    h = hashlib.sha256()
    for line in trace_lines(trace):
        h.update(line.encode())
        h.update(b"\n")
    return h.hexdigest()


def write_trace(trace, path) -> None:
    with open(path, "w") as fh:
        for line in trace_lines(trace):
            fh.write(line + "\n")


def read_trace(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _split(trace):
    header = trace[0] if trace and trace[0].get("type") == "header" else None
    if header is None:
        raise ValueError("trace does not start with a header event")
    iterations = [e for e in trace if e.get("type") == "iteration"]
    executions = [e for e in trace if e.get("type") == "execution"]
    end = next((e for e in trace if e.get("type") == "end"), None)
    return header, iterations, executions, end


def _idle_gaps(busy: list[tuple[int, int]], horizon: int) -> list[int]:
    gaps, cursor = [], 0
    for s, e in sorted(busy):
        if s > cursor:
            gaps.append(s - cursor)
        cursor = max(cursor, e)
    if cursor < horizon:
        gaps.append(horizon - cursor)
    return gaps


def compute_metrics(trace) -> MetricsReport:
    header, iterations, executions, end = _split(trace)
    cfg = header["config"]
    horizon = cfg["horizon"]
    slices = [s["slice_id"] for s in cfg["slices"]]
    jobs = cfg["jobs"]
    tau_min = cfg["policy"]["tau_min"]
    final_time = end["time"] if end else horizon
    report = MetricsReport(total_jobs=len(jobs))
    if not jobs:
        return report

    busy = {s: [] for s in slices}
    for r in cfg.get("reservations", []):
        busy[r["slice_id"]].append((r["start"], r["end"]))
    committed_ticks = 0
    commit_times = defaultdict(list)
    for it in iterations:
        for c in it["commitments"]:
            busy[c["slice_id"]].append((c["start"], c["end"]))
            committed_ticks += c["end"] - c["start"]
            commit_times[c["job_id"]].append(it["time"])
    report.utilization = committed_ticks / (len(slices) * horizon)
    report.total_cleared_score = math.fsum(it["total_score"] for it in iterations)

    arrival = {j["job_id"]: j["arrival"] for j in jobs}
    completion = {e["job_id"]: e["completion_time"] for e in executions if e["completed"]}
    jcts = [completion[j] - arrival[j] for j in arrival if j in completion]
    report.completed_jobs = len(jcts)
    if jcts:
        report.mean_jct = float(np.mean(jcts))
        report.median_jct = float(np.median(jcts))
        report.p95_jct = float(np.percentile(jcts, 95))

    waits = []
    for job_id, t0 in arrival.items():
        if t0 >= final_time and job_id not in completion:
            continue
        anchors = [t0] + sorted(commit_times[job_id])
        waits += [b - a for a, b in zip(anchors, anchors[1:])]
        if job_id not in completion:
            waits.append(max(0, final_time - anchors[-1]))
    if waits:
        report.mean_wait = float(np.mean(waits))
        report.max_wait = int(max(waits))

    for s in slices:
        short = [g for g in _idle_gaps(busy[s], horizon) if g < tau_min]
        report.frag_count += len(short)
        report.frag_ticks += sum(short)

    rho = {j["job_id"]: [] for j in jobs}
    for e in executions:
        if e["verification"] is not None:
            rho[e["job_id"]].append(e["verification"]["rho"])
    report.rho_trajectory = rho
    report.mean_rho = float(np.mean([traj[-1] if traj else 1.0 for traj in rho.values()]))
    return report


def audit_trace(trace) -> list[str]:
    """Consistency problems in a trace; an empty list means it is clean."""
    problems = []
    try:
        header, iterations, executions, end = _split(trace)
        cfg = config_from_dict(header["config"])
    except (ValueError, KeyError) as exc:
        return [f"malformed trace: {exc}"]
    policy = cfg.policy
    fmp_of = {j.job_id: j.fmp for j in cfg.jobs}
    per_slice = defaultdict(list)
    for r in cfg.reservations:
        per_slice[r.slice_id].append((r.start, r.end, f"reserved:{r.slice_id}:{r.start}"))

    committed_ids = set()
    for it in iterations:
        k = it["iteration"]
        w = it["window"]
        w_end = w["t_min"] + w["delta_t"]
        bids = {b["variant_id"]: b for b in it["bids"]}
        selected = it["selected"]
        if not set(selected) <= set(bids):
            problems.append(f"iteration {k}: selected variant not among bids")
            continue
        total = math.fsum(bids[v]["score"] for v in selected)
        if abs(total - it["total_score"]) > 1e-9:
            problems.append(f"iteration {k}: total_score {it['total_score']} != sum of selected {total}")
        if sorted(c["variant_id"] for c in it["commitments"]) != sorted(selected):
            problems.append(f"iteration {k}: commitments differ from the selection")
        for c in it["commitments"]:
            vid = c["variant_id"]
            if vid in committed_ids:
                problems.append(f"iteration {k}: {vid} committed twice")
            committed_ids.add(vid)
            if c["slice_id"] != w["slice_id"]:
                problems.append(f"iteration {k}: {vid} committed off the announced slice")
            if not (w["t_min"] <= c["start"] < c["end"] <= w_end):
                problems.append(f"iteration {k}: {vid} interval [{c['start']}, {c['end']}) leaves the window")
            if c["end"] - c["start"] < policy.tau_min:
                problems.append(f"iteration {k}: {vid} shorter than tau_min")
            bid = bids.get(vid)
            if bid is not None and (bid["start"], bid["end"]) != (c["start"], c["end"]):
                problems.append(f"iteration {k}: {vid} commitment interval differs from its bid")
            fmp = fmp_of.get(c["job_id"])
            if fmp is None:
                problems.append(f"iteration {k}: {vid} belongs to unknown job {c['job_id']!r}")
            else:
                p = prob_exceeds_capacity(fmp, w["capacity"], c["end"] - c["start"])
                if p > policy.theta:
                    problems.append(f"iteration {k}: {vid} unsafe (exceedance {p:.4g} > theta)")
            per_slice[c["slice_id"]].append((c["start"], c["end"], vid))

    for slice_id, items in per_slice.items():
        items.sort()
        for (s1, e1, a), (s2, e2, b) in zip(items, items[1:]):
            if e1 > s2:
                problems.append(f"slice {slice_id}: {a} [{s1}, {e1}) overlaps {b} [{s2}, {e2})")
        for s, e, vid in items:
            if s < 0 or e > cfg.horizon:
                problems.append(f"slice {slice_id}: {vid} outside the horizon")

    for e in executions:
        if e["variant_id"] not in committed_ids:
            problems.append(f"execution of uncommitted variant {e['variant_id']}")
    if end is None:
        problems.append("trace has no end event")
    return problems
