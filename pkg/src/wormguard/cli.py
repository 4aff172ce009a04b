"""Command-line harness.

Exit status: 0 route established (or command succeeded), 2 attack detected,
3 discovery timed out, 1 error.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import fixture
from .engine import EXIT_ERROR, measure_overhead, run
from .errors import WormguardError
from .scenario import (
    COMPARE_COLUMNS, METRICS_COLUMNS, OUTPUT_DIR_ENV, SUMMARY_COLUMNS, SWEEP_AGG_COLUMNS,
    SWEEP_HOPS_COLUMNS, SWEEP_RUN_COLUMNS, aggregate, aggregate_by_hops, compare_rows,
    load_experiment, load_scenario, metrics_row, run_sweep, write_csv,
)


def _out_dir(arg: str | None) -> Path:
    out = Path(arg or os.environ.get(OUTPUT_DIR_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = load_scenario(args.scenario)
    if args.no_prevention:
        cfg = cfg.with_(prevention_enabled=False)
    result = run(cfg)
    out = _out_dir(args.out)
    stem = Path(args.scenario).stem
    (out / f"{stem}.trace").write_text(result.trace_text)
    row = metrics_row(result.metrics)
    write_csv([row], METRICS_COLUMNS, out / f"{stem}_metrics.csv")
    for col in METRICS_COLUMNS:
        print(f"{col:22} {row[col] if row[col] is not None else '-'}")
    return result.metrics.exit_status


def cmd_compare(args) -> int:
    cfg = load_scenario(args.scenario)
    cmp = measure_overhead(cfg.with_(prevention_enabled=False), cfg.with_(prevention_enabled=True))
    out = _out_dir(args.out)
    stem = Path(args.scenario).stem
    print(write_csv(compare_rows(cmp), COMPARE_COLUMNS, out / f"{stem}_compare.csv"), end="")
    summary = cmp.summary
    write_csv([summary], SUMMARY_COLUMNS, out / f"{stem}_summary.csv")
    for k in SUMMARY_COLUMNS:
        print(f"# {k} {summary[k]}")
    return 0


def cmd_sweep(args) -> int:
    experiment = load_experiment(args.experiment)
    out = Path(args.out) if args.out else experiment.output_dir
    out.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(experiment, jobs=args.jobs)
    write_csv(rows, SWEEP_RUN_COLUMNS, out / "runs.csv")
    print(write_csv(aggregate(rows), SWEEP_AGG_COLUMNS, out / "aggregate.csv"), end="")
    write_csv(aggregate_by_hops(rows), SWEEP_HOPS_COLUMNS, out / "by_hops.csv")
    print(f"# {len(rows)} runs written to {out}")
    return 0


def cmd_fixtures(args) -> int:
    ok = True
    for case in fixture.CASES:
        got, _ = fixture.run_case(case)
        ok &= got == case.expected.value
        print(f"{case.label:16} {case.checker} {got}")
    return 0 if ok else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wormguard", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario, print metrics, write trace and CSV")
    r.add_argument("scenario")
    r.add_argument("--out", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    r.add_argument("--no-prevention", action="store_true", help="disable the validity check")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="baseline vs prevention, per RREP hop")
    c.add_argument("scenario")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="run an experiment file of repeated scenarios")
    s.add_argument("experiment")
    s.add_argument("--out", help="overrides output_dir from the file")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    f = sub.add_parser("fixtures", help="the four canonical A-O verdicts")
    f.set_defaults(func=cmd_fixtures)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except WormguardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
