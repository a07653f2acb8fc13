"""Command line front door: ``lavgap run|check|list-examples``."""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from . import harness
from .errors import ConfigError
from .examples import list_examples


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lavgap", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run checkers and the convergence study")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="report path (overrides outputs.report_path; default stdout)")
    run.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    chk = sub.add_parser("check", help="run the hypothesis checkers only")
    chk.add_argument("--config", required=True)
    sub.add_parser("list-examples", help="print registered example names")
    return ap


def _write(data: bytes, path: Optional[str]) -> None:
    if path:
        harness.write_bytes(path, data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _check(cfg) -> int:
    report = harness.run_checks(cfg)
    for name in sorted(report.verdicts):
        rep = report.verdicts[name]
        mark = "*" if name in report.required else " "
        line = f"{mark} {name:16s} {rep.verdict.value}"
        if rep.witness:
            line += "  " + " ".join(f"{k}={harness.fmt(v)}" for k, v in sorted(rep.witness.items()))
        print(line)
    return report.exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-examples":
        for name, desc in list_examples().items():
            print(f"{name}\t{desc}")
        return harness.EXIT_OK
    try:
        cfg = harness.load_config(args.config)
        if args.command == "check":
            return _check(cfg)
        report = harness.run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    except harness.NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return harness.EXIT_NUMERIC
    try:
        _write(harness.emit_report(report, args.format), args.out or cfg.outputs.report_path)
        if report.samples is not None:
            harness.write_bytes(cfg.outputs.samples_path, harness.emit_samples(report.samples))
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return harness.EXIT_NUMERIC
    if report.falsified:
        print("falsified: " + ", ".join(report.falsified), file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
