"""Command line entry point with one subcommand per workflow.

Exit codes: 0 ok, 1 domain violation (invalid scenario), 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence

from dmcis.engine import derive_seed
from dmcis.generate import GENERATORS, generate
from dmcis.metrics import SUMMARY_COLUMNS, compute_metrics, mean, metrics_json, p95, write_metrics
from dmcis.scenario import (
    ParseError,
    Scenario,
    dump_scenario,
    load_scenario,
    parse_scenario,
    resolve_path,
    validate_scenario,
    with_value,
)
from dmcis.trace import load_trace
from dmcis.world import Simulation

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
SEED_ENV = "DMCIS_SEED"


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _load(path: str) -> Scenario:
    try:
        return load_scenario(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except ParseError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _seed(flag: Optional[int], scenario: Scenario) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV, "").strip()
    if env:
        try:
            return int(env, 0)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return scenario.doc["seed"]


def _report_violations(violations) -> None:
    for v in violations:
        where = f" [{v.area}]" if v.area else ""
        print(f"VIOLATION {v.code}{where}: {v.message}")


def cmd_validate(args) -> int:
    s = _load(args.scenario)
    violations = validate_scenario(s)
    if violations:
        _report_violations(violations)
        return EXIT_VIOLATION
    print("OK")
    return EXIT_OK


def cmd_run(args) -> int:
    s = _load(args.scenario)
    violations = validate_scenario(s)
    if violations:
        _report_violations(violations)
        print("refusing to run an invalid scenario", file=sys.stderr)
        return EXIT_VIOLATION
    seed = _seed(args.seed, s)
    if args.until is not None and args.until < 0:
        raise UsageError("--until must be >= 0")
    sink = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        sim = Simulation(s, seed=seed, trace_sink=sink)
        summary = sim.run(args.until)
    finally:
        if sink is not None:
            sink.close()
    report = compute_metrics(sim.trace.events, s)
    if args.metrics:
        write_metrics(report, args.metrics)
    print(
        f"seed={seed} emitted={summary.emitted} delivered={summary.delivered} "
        f"buffered={summary.buffered} dropped={summary.dropped} warnings={report.summary['warnings']} "
        f"events={sim.trace.count}"
    )
    return EXIT_OK


def parse_values(text: str) -> List[Any]:
    """Comma-separated JSON scalars; ``a..b`` expands to the integers a to b."""
    out: List[Any] = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        if ".." in part:
            lo, _, hi = part.partition("..")
            try:
                out.extend(range(int(lo), int(hi) + 1))
            except ValueError:
                raise UsageError(f"bad range {part!r}") from None
            continue
        try:
            out.append(json.loads(part))
        except json.JSONDecodeError:
            out.append(part)
    if not out:
        raise UsageError("--values is empty")
    return out


def cell_seed(master: int, value: Any, seed_index: int) -> int:
    # keyed by the value itself so reordering --values leaves every cell unchanged
    return derive_seed(master, "sweep", json.dumps(value, sort_keys=True), seed_index)


def _run_cell(job) -> Dict[str, Any]:
    doc, value, index, seed = job
    s = parse_scenario(doc)
    sim = Simulation(s, seed=seed, keep_trace=True)
    sim.run()
    m = compute_metrics(sim.trace.events, s)
    row = {"row": "cell", "value": json.dumps(value), "seed_index": index, "seed": seed}
    row.update({k: m.summary[k] for k in SUMMARY_COLUMNS})
    row["_det"] = m.detection_latencies
    return row


SWEEP_COLUMNS = ["row", "value", "seed_index", "seed", "cells"] + SUMMARY_COLUMNS


def _aggregate(value: Any, cells: List[Dict[str, Any]]) -> Dict[str, Any]:
    def avg(key):
        return mean([c[key] for c in cells if c[key] is not None])

    pooled = [x for c in cells for x in c["_det"]]
    agg = {"row": "aggregate", "value": json.dumps(value), "cells": len(cells)}
    for key in SUMMARY_COLUMNS:
        agg[key] = avg(key)
    agg["detection_latency_mean"] = mean(pooled)
    agg["detection_latency_p95"] = p95(pooled)
    return agg


def sweep_rows(s: Scenario, param: str, values: Sequence[Any], seeds: int, master: int, jobs: int = 1):
    """Per-(value, seed) rows followed by one aggregate row per value."""
    try:
        resolve_path(s.doc, param)
    except KeyError:
        raise UsageError(f"parameter path {param!r} does not resolve in the scenario") from None
    docs = []
    for value in values:
        try:
            cell = with_value(s, param, value)
        except ParseError as exc:
            raise UsageError(f"value {value!r} for {param}: {exc}") from None
        violations = validate_scenario(cell)
        if violations:
            return None, (value, violations)
        docs.append((value, cell.doc))
    job_list = [(doc, value, i, cell_seed(master, value, i)) for value, doc in docs for i in range(seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell, job_list))
    else:
        cells = [_run_cell(j) for j in job_list]
    rows = [c for c in cells]
    for n, value in enumerate(v for v, _ in docs):
        rows.append(_aggregate(value, cells[n * seeds:(n + 1) * seeds]))
    for r in rows:
        r.pop("_det", None)
    return rows, None


def _fmt(v: Any) -> Any:
    return "" if v is None else v


def cmd_sweep(args) -> int:
    s = _load(args.scenario)
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    values = parse_values(args.values)
    master = _seed(args.seed, s)
    rows, bad = sweep_rows(s, args.param, values, args.seeds, master, args.jobs)
    if bad is not None:
        value, violations = bad
        print(f"value {value!r} makes the scenario invalid:")
        _report_violations(violations)
        return EXIT_VIOLATION
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k)) for k in SWEEP_COLUMNS})
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_report(args) -> int:
    s = _load(args.scenario)
    try:
        trace = load_trace(args.trace)
    except OSError as exc:
        raise UsageError(f"cannot read {args.trace}: {exc.strerror}") from None
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{args.trace}: malformed trace ({exc})") from None
    report = compute_metrics(trace, s)
    if args.metrics:
        write_metrics(report, args.metrics)
    else:
        sys.stdout.write(metrics_json(report))
    return EXIT_OK


def _kv(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def cmd_generate(args) -> int:
    kwargs = dict(args.set or [])
    try:
        doc = generate(args.name, **kwargs)
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    text = dump_scenario(parse_scenario(doc))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dmcis", description="Disaster monitoring network simulator")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a scenario's load-time conditions")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="simulate a scenario")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int, default=None, help=f"master seed (default: ${SEED_ENV}, then the scenario's)")
    r.add_argument("--until", type=float, default=None, help="horizon in seconds (default: scenario duration)")
    r.add_argument("--trace", help="JSON Lines trace output path")
    r.add_argument("--metrics", help="metrics output (.json also writes a sibling .csv)")
    r.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="run a parameter sweep")
    sw.add_argument("scenario")
    sw.add_argument("--param", required=True, help="dotted path, e.g. maps.count or sdccs[0].tau")
    sw.add_argument("--values", required=True, help="comma list of JSON values; a..b for integer ranges")
    sw.add_argument("--seeds", type=int, default=1, help="seeds per value")
    sw.add_argument("--seed", type=int, default=None, help="master seed")
    sw.add_argument("--out", help="CSV output (default stdout)")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")
    sw.set_defaults(func=cmd_sweep)

    rp = sub.add_parser("report", help="recompute metrics from a trace")
    rp.add_argument("trace")
    rp.add_argument("--scenario", required=True)
    rp.add_argument("--metrics", help="output path (default: JSON to stdout)")
    rp.set_defaults(func=cmd_report)

    g = sub.add_parser("generate", help="write a reference scenario")
    g.add_argument("name", choices=sorted(GENERATORS))
    g.add_argument("--set", action="append", type=_kv, metavar="KEY=VALUE", help="generator argument")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
