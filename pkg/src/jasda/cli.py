"""Command-line front end: ``jasda run|compare|generate|replay|report``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import (
    ConfigError,
    GeneratorParams,
    generate_workload,
    generator_params_from_dict,
    load_config,
    resolve_config_path,
    write_config,
)
from .engine import POLICIES, run_simulation
from .metrics import (
    CSV_COLUMNS,
    MetricsReport,
    audit_trace,
    compute_metrics,
    read_trace,
    trace_hash,
    write_trace,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_AUDIT = 3
EXIT_IO = 4

log = logging.getLogger("jasda")


def _load(args):
    cfg = load_config(resolve_config_path(args.config))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_metrics(report: MetricsReport, path_stem: Path, fmt: str, policy: str, seed: int) -> Path:
    if fmt == "csv":
        path = path_stem.with_suffix(".csv")
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            writer.writerow(report.csv_row(policy, seed))
    else:
        path = path_stem.with_suffix(".json")
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    trace, report = run_simulation(cfg, cfg.seed, args.policy)
    write_trace(trace, out / "trace.jsonl")
    path = _write_metrics(report, out / "metrics", args.format, args.policy, cfg.seed)
    print(f"{args.policy}: {len(trace)} events, trace {trace_hash(trace)[:12]}, metrics -> {path}")
    print(render_table([report.csv_row(args.policy, cfg.seed)]))
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    rows = []
    for policy in POLICIES:
        trace, report = run_simulation(cfg, cfg.seed, policy)
        write_trace(trace, out / f"trace_{policy}.jsonl")
        rows.append(report.csv_row(policy, cfg.seed))
    if args.format == "json":
        path = out / "compare.json"
        path.write_text(json.dumps(rows, indent=2) + "\n")
    else:
        path = out / "compare.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
    print(render_table(rows))
    print(f"-> {path}")
    return EXIT_OK


def cmd_generate(args) -> int:
    gp = GeneratorParams()
    if args.params:
        gp = generator_params_from_dict(json.loads(Path(args.params).read_text()))
    overrides = {k: v for k, v in (("rate", args.rate), ("n_jobs", args.jobs), ("horizon", args.horizon)) if v is not None}
    if overrides:
        gp = replace(gp, **overrides)
    cfg = generate_workload(gp, args.seed if args.seed is not None else 0)
    out = Path(args.out)
    if out.suffix != ".json":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "config.json"
    write_config(cfg, out)
    print(f"{len(cfg.jobs)} jobs -> {out}")
    return EXIT_OK


def cmd_replay(args) -> int:
    trace = read_trace(args.trace)
    problems = audit_trace(trace)
    report = compute_metrics(trace) if not any(p.startswith("malformed") for p in problems) else None
    metrics_path = Path(args.metrics) if args.metrics else Path(args.trace).with_name("metrics.json")
    if report is not None and metrics_path.exists() and metrics_path.suffix == ".json":
        stored = json.loads(metrics_path.read_text())
        if stored != json.loads(json.dumps(report.to_dict())):
            problems.append(f"recomputed metrics differ from {metrics_path}")
    for p in problems:
        print(f"AUDIT FAIL: {p}", file=sys.stderr)
    if problems:
        return EXIT_AUDIT
    print(f"audit ok: {len(trace)} events, trace {trace_hash(trace)[:12]}")
    print(render_table([report.csv_row(trace[0].get("policy", "?"), trace[0].get("seed", 0))]))
    return EXIT_OK


def cmd_report(args) -> int:
    if args.trace:
        trace = read_trace(args.trace)
        rows = [compute_metrics(trace).csv_row(trace[0].get("policy", "?"), trace[0].get("seed", 0))]
    elif args.metrics:
        path = Path(args.metrics)
        if path.suffix == ".csv":
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(fh))
        else:
            data = json.loads(path.read_text())
            if isinstance(data, list):
                rows = data
            else:
                rows = [{"policy": "-", "seed": "-", **{k: data.get(k, "") for k in CSV_COLUMNS[2:]}}]
    else:
        raise ConfigError("report needs --trace or --metrics")
    if args.format == "json":
        print(json.dumps(rows, indent=2))
    else:
        print(render_table(rows))
    return EXIT_OK


def render_table(rows) -> str:
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.4f}"
        try:
            f = float(v)
            return f"{f:.4f}" if "." in str(v) else str(v)
        except (TypeError, ValueError):
            return str(v)

    cells = [[fmt(r.get(c, "")) for c in CSV_COLUMNS] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) if cells else len(c) for i, c in enumerate(CSV_COLUMNS)]
    buf = io.StringIO()
    buf.write("  ".join(c.rjust(w) for c, w in zip(CSV_COLUMNS, widths)) + "\n")
    for row in cells:
        buf.write("  ".join(v.rjust(w) for v, w in zip(row, widths)) + "\n")
    return buf.getvalue().rstrip("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jasda", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt):
        p.add_argument("--config", required=True, help="workload config (path or shipped scenario name)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--format", choices=("csv", "json"), default=fmt)

    p = sub.add_parser("run", help="simulate one policy")
    common(p, "json")
    p.add_argument("--out", default="out")
    p.add_argument("--policy", choices=POLICIES, default="jasda")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run jasda and the baselines on one config")
    common(p, "csv")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("generate", help="write a synthetic Poisson workload")
    p.add_argument("--out", required=True, help="output .json file or directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--params", help="JSON file with generator parameters")
    p.add_argument("--rate", type=float, default=None, help="arrivals per tick")
    p.add_argument("--jobs", type=int, default=None, help="cap on the number of jobs")
    p.add_argument("--horizon", type=int, default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("replay", help="audit a trace and recompute its metrics")
    p.add_argument("--trace", required=True)
    p.add_argument("--metrics", help="metrics.json to compare against (default: next to the trace)")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("report", help="print a metrics summary table")
    p.add_argument("--trace")
    p.add_argument("--metrics")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    level = getattr(logging, os.environ.get("JASDA_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
