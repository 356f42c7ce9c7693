"""Command line entry point: ``verify``, ``bound``, ``rate`` and ``decompose``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import fields
from pathlib import Path
from typing import Sequence, TextIO

from .._parallel import set_threads
from ..chaos import stroock_decompose
from ..core import ENUMERATION_CAP, standardize
from ..montecarlo import SampleSpec
from .experiments import (
    CSV_COLUMNS,
    STATISTICS,
    RateStudyConfig,
    StatisticSpec,
    parse_config,
    run_bound,
    run_rate,
)
from .verify import run_verify


def _int_list(text: str) -> list[int]:
    return [int(float(x)) for x in text.split(",") if x.strip()]


def _global_options(suppress: bool) -> argparse.ArgumentParser:
    # shared by the top-level parser and every subcommand, so flags work on either side
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=d(None), help="random seed (default 0)")
    p.add_argument("--threads", type=int, default=d(1), help="worker threads (default 1)")
    p.add_argument("--format", choices=("csv", "json"), default=d("json"), help="output format")
    p.add_argument("--config", type=Path, default=d(None), help="key=value file of defaults")
    return p


def _statistic_options(p: argparse.ArgumentParser, positional: bool) -> None:
    if positional:
        p.add_argument("statistic", choices=STATISTICS)
    else:
        p.add_argument("--statistic", choices=STATISTICS)
    p.add_argument("--alpha", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--p", type=float, help="edge probability; overrides alpha and theta")
    p.add_argument("--d", type=int, help="degree for the degree statistic")
    p.add_argument("--pattern", help="named pattern or edge list such as 0-1,1-2")
    p.add_argument("--D", type=int, help="children per vertex of a regular tree")
    p.add_argument("--tree-file", dest="tree_file", help="file of 'parent child' pairs")


def build_parser() -> argparse.ArgumentParser:
    common = _global_options(suppress=True)
    parser = argparse.ArgumentParser(
        prog="rademacher-stein",
        description="Discrete Malliavin calculus and normal-approximation bounds on Rademacher spaces.",
        parents=[_global_options(suppress=False)],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run the operator identity suite")
    v.add_argument("--cap", type=int, default=ENUMERATION_CAP)

    b = sub.add_parser("bound", parents=[common], help="evaluate the bound for one statistic")
    _statistic_options(b, positional=True)
    b.add_argument("--n", type=int, required=True, help="vertices, tree depth, or length")
    b.add_argument("--mode", choices=("exact", "monte_carlo", "mc"), default="monte_carlo")
    b.add_argument("--samples", type=int, default=10_000)
    b.add_argument("--batches", type=int, default=100)
    b.add_argument("--triple", default="auto", help="'auto' or r,s,t")
    b.add_argument("--reps", type=int, default=16)

    r = sub.add_parser("rate", parents=[common], help="fit the decay rate over several sizes")
    _statistic_options(r, positional=False)
    r.add_argument("--sizes", type=_int_list)
    r.add_argument("--samples", type=_int_list, help="one count, or one per size")
    r.add_argument("--batches", type=int)
    r.add_argument("--triple")
    r.add_argument("--reps", type=int)
    r.add_argument("--output", help="also write the JSON report here")

    c = sub.add_parser("decompose", parents=[common], help="print chaos kernels as CSV rows")
    _statistic_options(c, positional=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--standardize", action="store_true", help="centre and scale first")
    c.add_argument("--tol", type=float, default=1e-12, help="drop kernel values below this")
    return parser


def _config_values(args) -> dict:
    return parse_config(args.config.read_text()) if args.config else {}


def _seed(args, config: dict) -> int:
    return args.seed if args.seed is not None else int(config.get("seed") or 0)


def _statistic_spec(args, config: dict) -> StatisticSpec:
    names = [f.name for f in fields(StatisticSpec)]
    values = {k: config[k] for k in names if k in config}
    values.update({k: getattr(args, k) for k in names if getattr(args, k, None) is not None})
    return StatisticSpec(**values)


def _write_csv(out: TextIO, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def _cmd_verify(args, out: TextIO) -> int:
    report = run_verify(cap=args.cap, seed=_seed(args, _config_values(args)))
    rows = report.rows()
    if args.format == "json":
        json.dump({"passed": report.passed, "seed": report.seed, "cap": report.cap,
                   "seconds": report.seconds, "results": rows}, out, indent=2)
        out.write("\n")
    else:
        _write_csv(out, ["identity", "residual", "tolerance", "passed"],
                   [[r["identity"], r["residual"], r["tolerance"], r["passed"]] for r in rows])
    return 0 if report.passed else 1


def _cmd_bound(args, out: TextIO) -> int:
    config = _config_values(args)
    stat = _statistic_spec(args, config)
    spec = SampleSpec(args.samples, _seed(args, config), args.batches)
    record = run_bound(stat, args.n, args.mode, spec, args.triple, args.reps)
    if args.format == "json":
        json.dump(record.to_dict(), out, indent=2)
        out.write("\n")
    else:
        _write_csv(out, CSV_COLUMNS, [record.csv_row()])
    return 0


def _cmd_rate(args, out: TextIO) -> int:
    values = _config_values(args)
    names = [f.name for f in fields(RateStudyConfig)]
    values.update({k: getattr(args, k) for k in names if getattr(args, k, None) is not None})
    values["seed"] = _seed(args, values)
    report = run_rate(RateStudyConfig(**values))
    if args.format == "json":
        json.dump(report.to_dict(), out, indent=2)
        out.write("\n")
    else:
        _write_csv(out, CSV_COLUMNS, [r.csv_row() for r in report.records])
        print(
            f"slope={report.slope:.4f} r2={report.r_squared:.4f} theoretical={report.theoretical} "
            f"dK_slope={report.dK_slope:.4f} ratios={[round(x, 4) for x in report.ratios]}",
            file=sys.stderr,
        )
    return 0


def _cmd_decompose(args, out: TextIO) -> int:
    stat = _statistic_spec(args, _config_values(args))
    space, f, _ = stat.build(args.n)
    if args.standardize:
        f = standardize(space, f)
    decomp = stroock_decompose(space, f)
    rows = [[0, decomp.mean]] if abs(decomp.mean) > args.tol else []
    for kern in decomp.kernels:
        for key, val in sorted(kern.entries.items()):
            if abs(val) > args.tol:
                rows.append([kern.order, *key, val])
    if args.format == "json":
        json.dump([{"order": r[0], "indices": list(r[1:-1]), "value": r[-1]} for r in rows], out, indent=2)
        out.write("\n")
    else:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["order", "indices...", "value"])
        w.writerows(rows)
    return 0


COMMANDS = {"verify": _cmd_verify, "bound": _cmd_bound, "rate": _cmd_rate, "decompose": _cmd_decompose}


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    args = build_parser().parse_args(argv)
    set_threads(args.threads)
    try:
        return COMMANDS[args.command](args, out or sys.stdout)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
