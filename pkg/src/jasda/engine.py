"""Deterministic discrete-event simulation of the announce/bid/clear/commit cycle.

One window is announced per iteration.  Windows are announced just in time:
the loop advances ``now`` to the next arrival, commitment end, or gap start
(less ``lead_time``), and only windows starting by ``now + lead_time`` are
cleared.  Commitments are realized when their interval ends; the realized
run feeds ex-post verification and the job's reliability.
"""

from __future__ import annotations

import heapq
import logging
from bisect import insort
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .clearing import ClearingResult, select_best_compatible, single_pick
from .config import FMP_SAMPLING_STREAM, JobSpec, ScriptedFeatures, WorkloadConfig, config_to_dict
from .core import Commitment, PolicyParams, ScoredVariant, SliceSpec, Variant, Window
from .fmp import Fmp, RealizedExecution, is_safe, predict_duration, prob_exceeds_capacity, sample_execution
from .scoring import (
    JobRuntimeState,
    age_factor,
    composite_score,
    job_utility,
    mem_headroom,
    normalize_energy,
    normalize_jct,
    qos_indicator,
    system_utility,
)
from .trust import (
    ReliabilityState,
    VerificationRecord,
    calibrate,
    per_feature_error,
    update_reliability,
    variant_error,
    with_baseline,
)

log = logging.getLogger(__name__)

JOB_FEATURES = ("jct", "qos")
SYSTEM_FEATURES = ("energy", "mem_headroom", "fill")  # the age term follows
POLICIES = ("jasda", "greedy", "fifo")


# ---------------------------------------------------------------- timelines

@dataclass
class SliceTimeline:
    slice: SliceSpec
    horizon: int
    commitments: list[Commitment] = field(default_factory=list)  # sorted by start

    def add(self, c: Commitment) -> None:
        if c.start < 0 or c.end > self.horizon or c.start >= c.end:
            raise ValueError(f"commitment {c.variant_id} outside [0, {self.horizon})")
        for other in self.commitments:
            if c.start < other.end and other.start < c.end:
                raise ValueError(f"commitment {c.variant_id} overlaps {other.variant_id}")
        insort(self.commitments, c, key=lambda x: x.start)

    def gaps(self, start: int = 0) -> Iterator[tuple[int, int]]:
        """Maximal idle intervals clipped to ``[start, horizon)``."""
        cursor = start
        for c in self.commitments:
            if c.end <= cursor:
                continue
            if c.start > cursor:
                yield (cursor, c.start)
            cursor = max(cursor, c.end)
        if cursor < self.horizon:
            yield (cursor, self.horizon)


def announce_window(
    timelines: Sequence[SliceTimeline],
    now: int,
    params: PolicyParams,
    skip=frozenset(),
) -> Optional[Window]:
    """Earliest idle gap at or after ``now + lead_time`` that is at least tau_min long.

    Ties on start time go to the slice listed first.  ``skip`` holds
    ``(slice_id, t_min, delta_t)`` keys already announced without result.
    """
    t0 = now + params.lead_time
    best = None
    for tl in timelines:
        for a, b in tl.gaps(t0):
            if b - a < params.tau_min or (tl.slice.slice_id, a, b - a) in skip:
                continue
            if best is None or a < best.t_min:
                best = Window(tl.slice.slice_id, tl.slice.capacity, a, b - a)
            break
    return best


# ---------------------------------------------------------------- agents

@dataclass
class JobAgent:
    job_id: str
    fmp: Fmp  # profile of the whole job
    total_work: int
    remaining_work: int
    qos_deadline: Optional[int]
    declared_bias: float
    max_variants_per_window: int
    runtime: JobRuntimeState
    arrival: int = 0
    strategy: str = "greedy-fill"
    chunk_max: Optional[int] = None
    chunk_min: int = 1
    feature_script: tuple[ScriptedFeatures, ...] = ()
    planned_work: int = 0
    busy_until: int = 0
    completion_time: Optional[int] = None
    notes: dict = field(default_factory=dict)
    _seq: int = 0

    @classmethod
    def from_spec(cls, spec: JobSpec) -> "JobAgent":
        return cls(
            job_id=spec.job_id,
            fmp=spec.fmp,
            total_work=spec.total_work,
            remaining_work=spec.total_work,
            qos_deadline=spec.qos_deadline,
            declared_bias=spec.bias,
            max_variants_per_window=spec.max_variants,
            runtime=JobRuntimeState(spec.job_id, spec.arrival, spec.total_work, spec.arrival),
            arrival=spec.arrival,
            strategy=spec.strategy,
            chunk_max=spec.chunk_max,
            chunk_min=spec.chunk_min,
            feature_script=spec.feature_script,
            busy_until=spec.arrival,
        )

    @property
    def unplanned_work(self) -> int:
        return self.remaining_work - self.planned_work

    @property
    def time_per_work(self) -> float:
        return self.fmp.duration_mean / self.total_work

    def chunk_fmp(self, work: int) -> Fmp:
        return self.fmp.scaled(work / self.total_work)

    def next_variant_id(self) -> str:
        self._seq += 1
        sep = "" if self.job_id[-1:].isalpha() else "_"
        return f"v{self.job_id}{sep}{self._seq}"


@dataclass(frozen=True)
class BidContext:
    now: int = 0
    delta_jct_max: float = 100.0
    duration_quantile: float = 0.9


def _chunk_duration(agent: JobAgent, work: int, quantile: float, tau_min: int) -> int:
    return max(tau_min, predict_duration(agent.chunk_fmp(work), quantile))


def _largest_fitting_work(agent: JobAgent, cap: int, room: int, quantile: float, tau_min: int) -> Optional[int]:
    """Largest work <= cap whose (padded) predicted duration fits in ``room`` ticks."""
    if cap < 1 or _chunk_duration(agent, 1, quantile, tau_min) > room:
        return None
    lo, hi = 1, cap
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if _chunk_duration(agent, mid, quantile, tau_min) <= room:
            lo = mid
        else:
            hi = mid - 1
    return lo


def _projected_completion(agent: JobAgent, end: float, work_after: int) -> float:
    return end + work_after * agent.time_per_work


def job_features(agent: JobAgent, completion: float, delta_jct_max: float) -> tuple[float, float]:
    """True (unbiased) job-side features for a projected completion time."""
    ideal = agent.arrival + agent.total_work * agent.time_per_work
    phi_jct = normalize_jct(max(0.0, completion - ideal), delta_jct_max)
    meets = agent.qos_deadline is None or completion <= agent.qos_deadline
    return (phi_jct, float(qos_indicator(meets)))


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def generate_variants(
    agent: JobAgent,
    window: Window,
    params: PolicyParams,
    ctx: BidContext = BidContext(),
    strategy: Optional[str] = None,
) -> list[Variant]:
    """Eligible subjob variants for ``window``; an empty list means the job stays silent."""
    strategy = strategy or agent.strategy
    left = agent.unplanned_work
    if left <= 0 or window.delta_t < params.tau_min:
        return []
    if not is_safe(agent.fmp, window.capacity, window.delta_t, params.theta):
        return []
    cap = min(left, agent.chunk_max or agent.total_work)
    q = ctx.duration_quantile
    cursor = max(window.t_min, agent.busy_until)
    limit = 1 if strategy == "single-span" else agent.max_variants_per_window

    out: list[Variant] = []
    while len(out) < limit and left > 0:
        room = window.t_end - cursor
        w = _largest_fitting_work(agent, min(cap, left), room, q, params.tau_min)
        if w is None or (w < agent.chunk_min and w < left):
            break
        duration = _chunk_duration(agent, w, q, params.tau_min)
        chunk = agent.chunk_fmp(w)
        if not is_safe(chunk, window.capacity, duration, params.theta):
            break
        vid = agent.next_variant_id()
        work_after = left - w
        features = job_features(agent, _projected_completion(agent, cursor + duration, work_after), ctx.delta_jct_max)
        declared = tuple(_clamp01(x + agent.declared_bias) for x in features)
        system = None
        k = len(out)
        if k < len(agent.feature_script):
            declared = agent.feature_script[k].declared
            system = agent.feature_script[k].system
        agent.notes[vid] = {"work_after": work_after, "system": system, "scripted": k < len(agent.feature_script)}
        out.append(Variant(vid, agent.job_id, window.slice_id, cursor, duration, chunk, declared, w))
        cursor += duration
        left -= w
    return out


def system_features(variant: Variant, window: Window, e_max: float) -> tuple[float, ...]:
    d = variant.predicted_duration
    energy = normalize_energy(d * variant.fmp.mean_memory, e_max)
    headroom = mem_headroom(variant.fmp, window.capacity, d)
    fill = min(1.0, d / window.delta_t)
    return (energy, headroom, fill)


# ---------------------------------------------------------------- outcomes

@dataclass(frozen=True)
class IterationOutcome:
    iteration: int
    window: Optional[Window]
    bids: tuple[ScoredVariant, ...]
    result: ClearingResult
    verifications: tuple[VerificationRecord, ...] = ()
    time: int = 0


@dataclass
class _Pending:
    commitment: Commitment
    variant: Variant
    index: int
    capacity: float

    def __lt__(self, other):
        return (self.commitment.end, self.index) < (other.commitment.end, other.index)


def _bid_record(sv: ScoredVariant, capacity: float) -> dict:
    v = sv.variant
    return {
        "variant_id": v.variant_id,
        "job_id": v.job_id,
        "start": v.t_start,
        "end": v.t_end,
        "work": v.work,
        "declared": list(v.declared_features),
        "h_tilde": sv.h_tilde,
        "f_sys": sv.f_sys_tilde,
        "h_hat": sv.h_hat,
        "score": sv.score,
        "p_exceed": prob_exceeds_capacity(v.fmp, capacity, v.predicted_duration),
    }


def _window_record(w: Window) -> dict:
    return {"slice_id": w.slice_id, "capacity": w.capacity, "t_min": w.t_min, "delta_t": w.delta_t}


# ---------------------------------------------------------------- simulation

class Simulation:
    """Engine state plus the loop.  Call :meth:`run_iteration` until it returns None."""

    def __init__(self, config: WorkloadConfig, seed: Optional[int] = None, policy: str = "jasda"):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        params = config.policy
        if len(params.alpha) != len(JOB_FEATURES):
            raise ValueError(f"alpha needs {len(JOB_FEATURES)} weights ({', '.join(JOB_FEATURES)})")
        if len(params.beta) != len(SYSTEM_FEATURES) + 1:
            raise ValueError(f"beta needs {len(SYSTEM_FEATURES) + 1} weights ({', '.join(SYSTEM_FEATURES)}, age)")
        self.config = config
        self.params = params
        self.policy = policy
        self.seed = config.seed if seed is None else seed
        self.now = 0
        self.iteration = 0
        self.horizon = config.horizon
        self.timelines = [SliceTimeline(s, config.horizon) for s in config.slices]
        self._timeline = {tl.slice.slice_id: tl for tl in self.timelines}
        for r in config.reservations:
            self._timeline[r.slice_id].add(
                Commitment(f"reserved:{r.slice_id}:{r.start}", None, r.slice_id, r.start, min(r.end, self.horizon), -1)
            )
        self.agents = [JobAgent.from_spec(j) for j in config.jobs]
        self.reliability = {a.job_id: ReliabilityState(a.job_id) for a in self.agents}
        self.pending: list[_Pending] = []
        self.skip: set = set()
        self.finished = False
        self.final_time = 0
        self._commit_index = 0
        self._fresh_verifications: list[VerificationRecord] = []
        self.trace: list[dict] = [{
            "type": "header",
            "schema_version": 1,
            "policy": policy,
            "seed": self.seed,
            "config": config_to_dict(config),
        }]

    # -- scoring

    def score(self, variant: Variant, window: Window, agent: JobAgent) -> ScoredVariant:
        p = self.params
        h_tilde = job_utility(variant.declared_features, p.alpha)
        state = with_baseline(self.reliability[agent.job_id], h_tilde)
        self.reliability[agent.job_id] = state
        h_hat = calibrate(h_tilde, state, p.gamma)
        psi = agent.notes[variant.variant_id]["system"] or system_features(variant, window, self.config.e_max)
        age = age_factor(agent.runtime, self.now, p.age_horizon)
        f_sys = system_utility(psi, p.beta, age)
        return ScoredVariant(variant, h_tilde, f_sys, h_hat, composite_score(h_hat, f_sys, p.lam),
                             age_anchor=agent.runtime.t_last_scheduled)

    # -- loop

    def _active_bidders(self) -> list[JobAgent]:
        return [a for a in self.agents if a.arrival <= self.now and a.unplanned_work > 0]

    def _all_done(self) -> bool:
        return all(a.remaining_work == 0 for a in self.agents)

    def _next_event_time(self) -> Optional[int]:
        now, lead = self.now, self.params.lead_time
        times = [a.arrival for a in self.agents if a.arrival > now]
        times += [p.commitment.end for p in self.pending if p.commitment.end > now]
        for tl in self.timelines:
            for a, b in tl.gaps(now + lead):
                if b - a >= self.params.tau_min and a - lead > now:
                    times.append(a - lead)
                    break
        return min(times) if times else None

    def run_iteration(self) -> Optional[IterationOutcome]:
        """Run the next announce-bid-clear-commit cycle; None once the run is over."""
        if self.finished:
            return None
        while True:
            self._realize_until(self.now)
            if self._all_done() or self.now >= self.horizon:
                break
            bidders = self._active_bidders()
            if bidders:
                window = announce_window(self.timelines, self.now, self.params, self.skip)
                if window is not None and window.t_min <= self.now + self.params.lead_time:
                    return self._cycle(window, bidders)
            nxt = self._next_event_time()
            if nxt is None or nxt >= self.horizon:
                break
            self.now = nxt
            self.skip.clear()
        self._finish()
        return None

    def run(self) -> list[IterationOutcome]:
        outcomes = []
        while (out := self.run_iteration()) is not None:
            outcomes.append(out)
        return outcomes

    def _cycle(self, window: Window, bidders: list[JobAgent]) -> IterationOutcome:
        self.iteration += 1
        ctx = BidContext(self.now, self.config.delta_jct_max, self.config.duration_quantile)
        strategy = "single-span" if self.policy == "fifo" else None
        by_id = {a.job_id: a for a in bidders}
        bids = []
        for agent in bidders:
            for v in generate_variants(agent, window, self.params, ctx, strategy):
                bids.append(self.score(v, window, agent))

        if self.policy == "jasda":
            result = select_best_compatible(bids)
        elif self.policy == "greedy":
            result = single_pick(bids)
        else:
            result = self._fifo_pick(bids, by_id)

        commits = []
        for sv in result.selected:
            commits.append(self._commit(sv, window, by_id[sv.variant.job_id]))
        chosen = {id(sv) for sv in result.selected}
        for sv in bids:
            if id(sv) not in chosen:
                by_id[sv.variant.job_id].notes.pop(sv.variant_id, None)
        if not commits:
            self.skip.add((window.slice_id, window.t_min, window.delta_t))

        verifs = tuple(self._fresh_verifications)
        self._fresh_verifications.clear()
        self.trace.append({
            "type": "iteration",
            "iteration": self.iteration,
            "time": self.now,
            "window": _window_record(window),
            "bids": [_bid_record(sv, window.capacity) for sv in bids],
            "selected": list(result.selected_ids),
            "total_score": result.total_score,
            "commitments": [
                {"variant_id": c.variant_id, "job_id": c.job_id, "slice_id": c.slice_id,
                 "start": c.start, "end": c.end, "work": c.work}
                for c in commits
            ],
            "verified": [r.variant_id for r in verifs],
        })
        log.debug("iter %d t=%d window %s: %d bids, selected %s",
                  self.iteration, self.now, window, len(bids), result.selected_ids)
        return IterationOutcome(self.iteration, window, tuple(bids), result, verifs, self.now)

    def _fifo_pick(self, bids, by_id) -> ClearingResult:
        if not bids:
            return ClearingResult()
        order = {a.job_id: i for i, a in enumerate(self.agents)}
        pick = min(bids, key=lambda sv: (by_id[sv.variant.job_id].arrival, order[sv.variant.job_id]))
        return ClearingResult((pick,), pick.score, tuple(sv.variant_id for sv in bids if sv is not pick))

    def _commit(self, sv: ScoredVariant, window: Window, agent: JobAgent) -> Commitment:
        v = sv.variant
        c = Commitment(v.variant_id, v.job_id, v.slice_id, v.t_start, v.t_end, self.iteration, v.work)
        self._timeline[v.slice_id].add(c)
        agent.planned_work += v.work
        agent.busy_until = max(agent.busy_until, v.t_end)
        agent.runtime.t_last_scheduled = self.now
        heapq.heappush(self.pending, _Pending(c, v, self._commit_index, window.capacity))
        self._commit_index += 1
        return c

    # -- realization

    def _realize_until(self, t: int) -> None:
        while self.pending and self.pending[0].commitment.end <= t:
            self._realize(heapq.heappop(self.pending))

    def _realize(self, p: _Pending) -> None:
        c, v = p.commitment, p.variant
        agent = next(a for a in self.agents if a.job_id == c.job_id)
        seed = np.random.SeedSequence(self.seed, spawn_key=(FMP_SAMPLING_STREAM, p.index))
        committed = c.end - c.start
        run: RealizedExecution = sample_execution(v.fmp, committed, seed)
        oom = any(peak > p.capacity for peak in run.peak_mem_per_segment)
        overrun = run.actual_duration > committed
        if oom:
            credited = 0
        elif overrun:
            credited = (c.work * committed) // run.actual_duration
        else:
            credited = c.work
        run_end = c.start + min(run.actual_duration, committed)
        agent.planned_work -= c.work
        agent.remaining_work -= credited
        agent.runtime.remaining_work = agent.remaining_work
        completed = agent.remaining_work == 0
        if completed:
            agent.completion_time = run_end

        note = agent.notes.pop(c.variant_id, {"work_after": 0, "scripted": False})
        verification = None
        if not note["scripted"]:
            completion = _projected_completion(agent, run_end, note["work_after"] + c.work - credited)
            observed = job_features(agent, completion, self.config.delta_jct_max)
            errors = per_feature_error(v.declared_features, observed)
            record = VerificationRecord(
                variant_id=c.variant_id,
                per_feature_error=errors,
                variant_error=variant_error(errors, self.params.verification_weights),
                verified_at=self.iteration,
                job_id=agent.job_id,
                observed_utility=job_utility(observed, self.params.alpha),
            )
            state = update_reliability(self.reliability[agent.job_id], record, self.params.kappa)
            self.reliability[agent.job_id] = state
            self._fresh_verifications.append(record)
            verification = {
                "per_feature_error": list(errors),
                "variant_error": record.variant_error,
                "observed": list(observed),
                "observed_utility": record.observed_utility,
                "rho": state.rho,
                "mean_error": state.mean_error,
                "hist_avg": state.hist_avg,
                "verified_count": state.verified_count,
            }
        self.trace.append({
            "type": "execution",
            "time": c.end,
            "variant_id": c.variant_id,
            "job_id": c.job_id,
            "slice_id": c.slice_id,
            "start": c.start,
            "end": c.end,
            "actual_duration": run.actual_duration,
            "peaks": list(run.peak_mem_per_segment),
            "credited_work": credited,
            "overrun": overrun,
            "oom": oom,
            "completed": completed,
            "completion_time": agent.completion_time if completed else None,
            "verification": verification,
        })

    def _finish(self) -> None:
        self._realize_until(self.horizon)
        self.finished = True
        if self._all_done():
            done = [a.completion_time for a in self.agents if a.completion_time is not None]
            self.final_time = max(done, default=0)
        else:
            self.final_time = self.horizon
        self.trace.append({"type": "end", "time": self.final_time, "iterations": self.iteration})


def run_iteration(sim: Simulation, params: Optional[PolicyParams] = None) -> IterationOutcome:
    """One cycle on ``sim``; an exhausted run yields an empty outcome."""
    if params is not None and params != sim.params:
        raise ValueError("params must match the simulation's policy")
    out = sim.run_iteration()
    if out is None:
        return IterationOutcome(sim.iteration, None, (), ClearingResult(), (), sim.now)
    return out


def run_simulation(config: WorkloadConfig, seed: Optional[int] = None, policy: str = "jasda"):
    """Run to completion; returns ``(trace, metrics)``."""
    from .metrics import compute_metrics

    sim = Simulation(config, seed, policy)
    sim.run()
    return sim.trace, compute_metrics(sim.trace)


def run_baseline(config: WorkloadConfig, seed: Optional[int] = None, policy: str = "greedy"):
    if policy not in ("fifo", "greedy"):
        raise ValueError("baseline policy must be 'fifo' or 'greedy'")
    return run_simulation(config, seed, policy)
