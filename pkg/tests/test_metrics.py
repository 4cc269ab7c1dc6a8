import copy

import pytest

from jasda.config import (
    GeneratorParams,
    JobSpec,
    WorkloadConfig,
    config_to_dict,
    generate_workload,
    load_config,
    scenario_path,
)
from jasda.core import PolicyParams, SliceSpec
from jasda.engine import run_simulation
from jasda.fmp import Fmp
from jasda.metrics import audit_trace, compute_metrics, read_trace, trace_hash, write_trace

from oracles import replay_metrics


def _config(jobs=(), horizon=20, slices=("s",)):
    return WorkloadConfig(tuple(SliceSpec(s, 20.0) for s in slices), tuple(jobs), PolicyParams(tau_min=2),
                          horizon, 100.0, 1000.0)


def _job(job_id, arrival, work):
    return JobSpec(job_id, arrival, work, Fmp(((1.0, 4.0, 0.0),), float(work)))


def hand_trace(commitments, jobs, horizon=20):
    """Minimal trace: one iteration per commitment, each run completing on time."""
    cfg = config_to_dict(_config(jobs, horizon))
    trace = [{"type": "header", "schema_version": 1, "policy": "jasda", "seed": 0, "config": cfg}]
    for k, (vid, job, start, end) in enumerate(commitments, 1):
        trace.append({
            "type": "iteration", "iteration": k, "time": start,
            "window": {"slice_id": "s", "capacity": 20.0, "t_min": start, "delta_t": horizon - start},
            "bids": [{"variant_id": vid, "job_id": job, "start": start, "end": end, "score": 0.5}],
            "selected": [vid], "total_score": 0.5,
            "commitments": [{"variant_id": vid, "job_id": job, "slice_id": "s", "start": start, "end": end,
                             "work": end - start}],
            "verified": [],
        })
        trace.append({"type": "execution", "time": end, "variant_id": vid, "job_id": job, "slice_id": "s",
                      "start": start, "end": end, "actual_duration": end - start, "peaks": [4.0],
                      "credited_work": end - start, "overrun": False, "oom": False, "completed": True,
                      "completion_time": end, "verification": None})
    trace.append({"type": "end", "time": max((c[3] for c in commitments), default=horizon), "iterations": len(commitments)})
    return trace


def test_empty_workload():
    trace, report = run_simulation(_config())
    assert [e["type"] for e in trace] == ["header", "end"]
    assert report.utilization == 0 and report.mean_jct == 0 and report.max_wait == 0
    assert report.mean_rho == 0 and report.frag_count == 0


def test_single_job_arithmetic():
    trace, report = run_simulation(_config([_job("J", 3, 10)], horizon=50))
    assert report.utilization == pytest.approx(10 / 50)
    assert report.mean_jct == 10 and report.completed_jobs == 1


def test_back_to_back_commitments_fill_horizon():
    trace = hand_trace([("a", "A", 0, 10), ("b", "B", 10, 20)], [_job("A", 0, 10), _job("B", 0, 10)])
    assert audit_trace(trace) == []
    assert compute_metrics(trace).utilization == 1.0


def test_three_commitment_fixture():
    jobs = [_job("A", 0, 4), _job("B", 1, 5), _job("C", 2, 3)]
    trace = hand_trace([("a", "A", 0, 4), ("b", "B", 4, 9), ("c", "C", 10, 13)], jobs)
    assert audit_trace(trace) == []
    m = compute_metrics(trace)
    assert m.utilization == pytest.approx(12 / 20)
    # JCTs 4, 8, 11
    assert (m.mean_jct, m.median_jct) == (pytest.approx(23 / 3), 8)
    assert m.p95_jct == pytest.approx(10.7)  # linear interpolation between 8 and 11
    assert m.max_wait == 8 and m.mean_wait == pytest.approx(11 / 3)  # waits 0, 3, 8 before first commit
    assert (m.frag_count, m.frag_ticks) == (1, 1)  # [9, 10) is shorter than tau_min
    assert m.mean_rho == 1.0


def test_metrics_match_replay_oracle():
    cfg = load_config(scenario_path("random50"))
    trace, report = run_simulation(cfg)
    ref = replay_metrics(trace)
    assert report.utilization == pytest.approx(ref["utilization"], abs=1e-12)
    assert report.completed_jobs == len(ref["jcts"])
    assert report.mean_jct == pytest.approx(sum(ref["jcts"]) / len(ref["jcts"]))


def test_trace_round_trip(tmp_path):
    trace, _ = run_simulation(_config([_job("J", 0, 6)]))
    write_trace(trace, tmp_path / "t.jsonl")
    back = read_trace(tmp_path / "t.jsonl")
    assert trace_hash(back) == trace_hash(trace)


def test_audit_flags_injected_overlap():
    cfg = generate_workload(GeneratorParams(n_jobs=10, rate=0.2, arrival_window=50, horizon=300), 4)
    trace, _ = run_simulation(cfg)
    assert audit_trace(trace) == []
    bad = copy.deepcopy(trace)
    its = [e for e in bad if e["type"] == "iteration" and e["commitments"]]
    first, second = its[0]["commitments"][0], next(
        c for e in its[1:] for c in e["commitments"] if c["slice_id"] == its[0]["commitments"][0]["slice_id"])
    second["start"] = first["start"]
    assert any("overlaps" in p for p in audit_trace(bad))


def test_audit_flags_other_tampering():
    trace = hand_trace([("a", "A", 0, 4)], [_job("A", 0, 4)])
    t = copy.deepcopy(trace)
    t[1]["total_score"] = 0.9
    assert any("total_score" in p for p in audit_trace(t))
    t = copy.deepcopy(trace)
    t[1]["selected"] = ["ghost"]
    assert any("not among bids" in p for p in audit_trace(t))
    t = copy.deepcopy(trace)
    t[1]["commitments"][0]["end"] = 30
    assert audit_trace(t)
    assert audit_trace(trace[:-1]) == ["trace has no end event"]
    assert audit_trace([])[0].startswith("malformed")
