"""Workload configuration: schema, JSON round-trip, and the seeded generator."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .core import PolicyError, PolicyParams, SliceSpec, validate_policy
from .fmp import Fmp

SCHEMA_VERSION = 1
STRATEGIES = ("greedy-fill", "single-span")

# named sub-streams of the config seed
ARRIVALS_STREAM = 1
FMP_SAMPLING_STREAM = 2
PROFILE_STREAM = 3


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class ScriptedFeatures:
    """Fixed declared (and optionally system) features for a job's k-th variant in a window."""

    declared: tuple[float, ...]
    system: Optional[tuple[float, ...]] = None


@dataclass(frozen=True)
class JobSpec:
    job_id: str
    arrival: int
    total_work: int
    fmp: Fmp
    qos_deadline: Optional[int] = None
    bias: float = 0.0
    strategy: str = "greedy-fill"
    max_variants: int = 4
    chunk_max: Optional[int] = None
    chunk_min: int = 1
    feature_script: tuple[ScriptedFeatures, ...] = ()


@dataclass(frozen=True)
class Reservation:
    """Background occupancy of a slice that the scheduler cannot use."""

    slice_id: str
    start: int
    end: int


@dataclass(frozen=True)
class WorkloadConfig:
    slices: tuple[SliceSpec, ...]
    jobs: tuple[JobSpec, ...]
    policy: PolicyParams
    horizon: int
    delta_jct_max: float
    e_max: float
    seed: int = 0
    duration_quantile: float = 0.9
    reservations: tuple[Reservation, ...] = ()


# ---------------------------------------------------------------- to / from dict

_POLICY_KEYS = {
    "lambda": "lam",
    "alpha": "alpha",
    "beta": "beta",
    "theta": "theta",
    "tau_min": "tau_min",
    "gamma": "gamma",
    "kappa": "kappa",
    "verification_weights": "verification_weights",
    "age_horizon": "age_horizon",
    "lead_time": "lead_time",
}


def policy_to_dict(p: PolicyParams) -> dict:
    return {key: _jsonable(getattr(p, attr)) for key, attr in _POLICY_KEYS.items()}


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def config_to_dict(cfg: WorkloadConfig) -> dict:
    jobs = []
    for j in cfg.jobs:
        d = {
            "job_id": j.job_id,
            "arrival": j.arrival,
            "total_work": j.total_work,
            "fmp": {
                "segments": [list(s) for s in j.fmp.segments],
                "duration_mean": j.fmp.duration_mean,
                "duration_std": j.fmp.duration_std,
            },
            "qos_deadline": j.qos_deadline,
            "bias": j.bias,
            "strategy": j.strategy,
            "max_variants": j.max_variants,
            "chunk_max": j.chunk_max,
            "chunk_min": j.chunk_min,
        }
        if j.feature_script:
            d["feature_script"] = [
                {"declared": list(s.declared), "system": _jsonable(s.system)}
                for s in j.feature_script
            ]
        jobs.append(d)
    return {
        "schema_version": SCHEMA_VERSION,
        "horizon": cfg.horizon,
        "seed": cfg.seed,
        "duration_quantile": cfg.duration_quantile,
        "normalization": {"delta_jct_max": cfg.delta_jct_max, "e_max": cfg.e_max},
        "slices": [{"slice_id": s.slice_id, "capacity": s.capacity} for s in cfg.slices],
        "reservations": [asdict(r) for r in cfg.reservations],
        "policy": policy_to_dict(cfg.policy),
        "jobs": jobs,
    }


class _Reader:
    """Pulls typed fields out of a dict, tracking the path for error messages."""

    def __init__(self, data: Any, path: str):
        if not isinstance(data, dict):
            raise ConfigError("expected an object", path)
        self.data = data
        self.path = path
        self.seen: set[str] = set()

    def sub(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def get(self, key: str, kind, default=..., optional=False):
        self.seen.add(key)
        if key not in self.data:
            if default is ...:
                raise ConfigError("missing required field", self.sub(key))
            return default
        value = self.data[key]
        if value is None and optional:
            return None
        return _coerce(value, kind, self.sub(key))

    def raw(self, key: str, default=...):
        self.seen.add(key)
        if key not in self.data:
            if default is ...:
                raise ConfigError("missing required field", self.sub(key))
            return default
        return self.data[key]

    def finish(self):
        unknown = sorted(set(self.data) - self.seen)
        if unknown:
            raise ConfigError(f"unknown key {unknown[0]!r}", self.sub(unknown[0]))


def _coerce(value, kind, path):
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return int(value)
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"expected a number, got {value!r}", path)
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    if kind == "floats":
        if not isinstance(value, list):
            raise ConfigError("expected a list of numbers", path)
        return tuple(_coerce(v, float, f"{path}[{i}]") for i, v in enumerate(value))
    raise TypeError(kind)


def _policy_from(data, path) -> PolicyParams:
    r = _Reader(data, path)
    defaults = PolicyParams()
    kwargs = {}
    for key, attr in _POLICY_KEYS.items():
        default = getattr(defaults, attr)
        kind = "floats" if isinstance(default, tuple) else type(default)
        kwargs[attr] = r.get(key, kind, default)
    r.finish()
    params = PolicyParams(**kwargs)
    try:
        validate_policy(params)
    except PolicyError as exc:
        raise ConfigError(str(exc), f"{path}.{exc.field}") from None
    return params


def _fmp_from(data, path) -> Fmp:
    r = _Reader(data, path)
    raw_segments = r.raw("segments")
    if not isinstance(raw_segments, list) or not raw_segments:
        raise ConfigError("expected a non-empty list of [fraction, mem_mean, mem_std]", r.sub("segments"))
    segments = []
    for i, seg in enumerate(raw_segments):
        seg_path = f"{r.sub('segments')}[{i}]"
        values = _coerce(seg, "floats", seg_path)
        if len(values) != 3:
            raise ConfigError("segment needs [fraction, mem_mean, mem_std]", seg_path)
        segments.append(values)
    mean = r.get("duration_mean", float)
    std = r.get("duration_std", float, 0.0)
    r.finish()
    try:
        return Fmp(tuple(segments), mean, std)
    except ValueError as exc:
        raise ConfigError(str(exc), path) from None


def _job_from(data, path, policy: PolicyParams) -> JobSpec:
    r = _Reader(data, path)
    job_id = r.get("job_id", str)
    arrival = r.get("arrival", int)
    total_work = r.get("total_work", int)
    fmp = _fmp_from(r.raw("fmp"), r.sub("fmp"))
    deadline = r.get("qos_deadline", int, None, optional=True)
    bias = r.get("bias", float, 0.0)
    strategy = r.get("strategy", str, "greedy-fill")
    max_variants = r.get("max_variants", int, 4)
    chunk_max = r.get("chunk_max", int, None, optional=True)
    chunk_min = r.get("chunk_min", int, 1)
    script = []
    for i, item in enumerate(r.raw("feature_script", [])):
        sp = f"{r.sub('feature_script')}[{i}]"
        sr = _Reader(item, sp)
        declared = sr.get("declared", "floats")
        system = sr.get("system", "floats", None, optional=True)
        sr.finish()
        if len(declared) != len(policy.alpha):
            raise ConfigError("declared length must match policy.alpha", f"{sp}.declared")
        if system is not None and len(system) != len(policy.beta) - 1:
            raise ConfigError("system length must match policy.beta minus the age weight", f"{sp}.system")
        if any(not 0 <= x <= 1 for x in declared + (system or ())):
            raise ConfigError("scripted features must lie in [0, 1]", sp)
        script.append(ScriptedFeatures(declared, system))
    r.finish()
    if arrival < 0:
        raise ConfigError("must be nonnegative", r.sub("arrival"))
    if total_work <= 0:
        raise ConfigError("must be positive", r.sub("total_work"))
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}", r.sub("strategy"))
    if max_variants < 1:
        raise ConfigError("must be at least 1", r.sub("max_variants"))
    if chunk_min < 1:
        raise ConfigError("must be at least 1", r.sub("chunk_min"))
    if chunk_max is not None and chunk_max < chunk_min:
        raise ConfigError("must be at least chunk_min", r.sub("chunk_max"))
    return JobSpec(job_id, arrival, total_work, fmp, deadline, bias, strategy,
                   max_variants, chunk_max, chunk_min, tuple(script))


def config_from_dict(data: Any) -> WorkloadConfig:
    r = _Reader(data, "")
    version = r.get("schema_version", int)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}", "schema_version")
    horizon = r.get("horizon", int)
    if horizon <= 0:
        raise ConfigError("must be positive", "horizon")
    seed = r.get("seed", int, 0)
    quantile = r.get("duration_quantile", float, 0.9)
    if not 0 < quantile < 1:
        raise ConfigError("must lie in (0, 1)", "duration_quantile")

    nr = _Reader(r.raw("normalization"), "normalization")
    delta_jct_max = nr.get("delta_jct_max", float)
    e_max = nr.get("e_max", float)
    nr.finish()
    if delta_jct_max <= 0:
        raise ConfigError("must be positive", "normalization.delta_jct_max")
    if e_max <= 0:
        raise ConfigError("must be positive", "normalization.e_max")

    slices = []
    for i, item in enumerate(_list(r.raw("slices"), "slices")):
        sr = _Reader(item, f"slices[{i}]")
        sid, cap = sr.get("slice_id", str), sr.get("capacity", float)
        sr.finish()
        if cap <= 0:
            raise ConfigError("must be positive", f"slices[{i}].capacity")
        slices.append(SliceSpec(sid, cap))
    if len({s.slice_id for s in slices}) != len(slices):
        raise ConfigError("duplicate slice_id", "slices")
    slice_ids = {s.slice_id for s in slices}

    reservations = []
    for i, item in enumerate(_list(r.raw("reservations", []), "reservations")):
        rr = _Reader(item, f"reservations[{i}]")
        res = Reservation(rr.get("slice_id", str), rr.get("start", int), rr.get("end", int))
        rr.finish()
        if res.slice_id not in slice_ids:
            raise ConfigError(f"unknown slice {res.slice_id!r}", f"reservations[{i}].slice_id")
        if not 0 <= res.start < res.end:
            raise ConfigError("need 0 <= start < end", f"reservations[{i}]")
        reservations.append(res)

    policy = _policy_from(r.raw("policy"), "policy")
    jobs = tuple(
        _job_from(item, f"jobs[{i}]", policy)
        for i, item in enumerate(_list(r.raw("jobs"), "jobs"))
    )
    if len({j.job_id for j in jobs}) != len(jobs):
        raise ConfigError("duplicate job_id", "jobs")
    r.finish()
    if len(policy.verification_weights) != len(policy.alpha):
        raise ConfigError("must have one weight per job-side feature", "policy.verification_weights")
    return WorkloadConfig(tuple(slices), jobs, policy, horizon, delta_jct_max, e_max,
                          seed, quantile, tuple(reservations))


def _list(value, path):
    if not isinstance(value, list):
        raise ConfigError("expected a list", path)
    return value


def load_config(path) -> WorkloadConfig:
    """Parse a config file.  Raises ConfigError (schema) or OSError (io)."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data)


def write_config(cfg: WorkloadConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")


def scenario_path(name: str) -> Path:
    """Path of a scenario shipped with the package, e.g. ``"table3"``."""
    stem = name[:-5] if name.endswith(".json") else name
    ref = resources.files("jasda") / "scenarios" / f"{stem}.json"
    return Path(str(ref))


def resolve_config_path(arg: str) -> Path:
    p = Path(arg)
    if p.exists():
        return p
    shipped = scenario_path(p.name)
    return shipped if shipped.exists() else p


# ---------------------------------------------------------------- generator

@dataclass(frozen=True)
class GeneratorParams:
    rate: float = 0.05  # expected arrivals per tick
    arrival_window: int = 1000
    horizon: int = 2000
    n_jobs: Optional[int] = None  # stop after this many arrivals
    slices: tuple[SliceSpec, ...] = (
        SliceSpec("s1", 10.0), SliceSpec("s2", 20.0), SliceSpec("s3", 40.0),
    )
    work_range: tuple[int, int] = (10, 60)
    mem_range: tuple[float, float] = (2.0, 30.0)
    mem_cv: float = 0.1
    duration_cv: float = 0.1
    max_segments: int = 3
    chunk_range: tuple[int, int] = (5, 20)
    max_variants: int = 4
    deadline_fraction: float = 0.3
    biased_fraction: float = 0.0
    bias: float = 0.3
    policy: PolicyParams = field(default_factory=PolicyParams)
    delta_jct_max: float = 200.0
    e_max: float = 1000.0


def _stream(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def poisson_arrivals(rate: float, window: int, seed: int, limit: Optional[int] = None) -> list[int]:
    """Integer arrival ticks of a Poisson process on ``[0, window)``."""
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    if rate == 0:
        return []
    rng = _stream(seed, ARRIVALS_STREAM)
    out: list[int] = []
    t = 0.0
    while limit is None or len(out) < limit:
        t += rng.exponential(1.0 / rate)
        if t >= window:
            break
        out.append(int(t))
    return out


def generate_workload(gp: GeneratorParams, seed: int) -> WorkloadConfig:
    arrivals = poisson_arrivals(gp.rate, gp.arrival_window, seed, gp.n_jobs)
    rng = _stream(seed, PROFILE_STREAM)
    max_cap = max(s.capacity for s in gp.slices)
    width = max(3, len(str(len(arrivals))))
    jobs = []
    for i, arrival in enumerate(arrivals):
        work = int(rng.integers(gp.work_range[0], gp.work_range[1] + 1))
        n_seg = int(rng.integers(1, gp.max_segments + 1))
        cuts = np.sort(rng.choice(np.arange(1, 20), size=n_seg - 1, replace=False)) / 20.0
        fracs = np.diff(np.concatenate(([0.0], cuts, [1.0])))
        fracs[-1] = 1.0 - float(np.sum(fracs[:-1]))
        peak = float(rng.uniform(*gp.mem_range))
        segments = []
        for k, frac in enumerate(fracs):
            mean = peak if k == n_seg - 1 else peak * float(rng.uniform(0.3, 1.0))
            mean = round(min(mean, max_cap * 0.9), 3)
            segments.append((float(frac), mean, round(mean * gp.mem_cv, 3)))
        fmp = Fmp(tuple(segments), float(work), round(work * gp.duration_cv, 3))
        deadline = None
        if rng.random() < gp.deadline_fraction:
            deadline = int(arrival + work * float(rng.uniform(1.5, 4.0)))
        bias = gp.bias if rng.random() < gp.biased_fraction else 0.0
        strategy = STRATEGIES[int(rng.integers(0, len(STRATEGIES)))]
        chunk = int(rng.integers(gp.chunk_range[0], gp.chunk_range[1] + 1))
        jobs.append(JobSpec(
            job_id=f"J{i:0{width}d}",
            arrival=arrival,
            total_work=work,
            fmp=fmp,
            qos_deadline=deadline,
            bias=bias,
            strategy=strategy,
            max_variants=gp.max_variants,
            chunk_max=max(chunk, gp.policy.tau_min),
            chunk_min=1,
        ))
    return WorkloadConfig(
        slices=tuple(gp.slices),
        jobs=tuple(jobs),
        policy=gp.policy,
        horizon=gp.horizon,
        delta_jct_max=gp.delta_jct_max,
        e_max=gp.e_max,
        seed=seed,
    )


def generator_params_from_dict(data: dict) -> GeneratorParams:
    known = {f.name for f in fields(GeneratorParams)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r}", "generator")
    kwargs = dict(data)
    if "slices" in kwargs:
        kwargs["slices"] = tuple(SliceSpec(s["slice_id"], float(s["capacity"])) for s in kwargs["slices"])
    if "policy" in kwargs:
        kwargs["policy"] = _policy_from(kwargs["policy"], "generator.policy")
    for key in ("work_range", "mem_range", "chunk_range"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return GeneratorParams(**kwargs)
