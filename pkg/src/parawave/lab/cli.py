"""``parawave <experiment> --config FILE [--set section.key=value ...] [--bless]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import ConfigInvalid, GoldenMismatch, ParawaveError
from .config import EXPERIMENTS, load_config
from .experiments import artifact_prefix, run
from .report import compare_golden

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parawave", description="Run a water-wave operator experiment.")
    p.add_argument("experiment", help="one of: " + ", ".join(EXPERIMENTS))
    p.add_argument("--config", type=Path, help="flat 'section.key = value' file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p.add_argument("--bless", action="store_true", help="rewrite the golden file from this run")
    p.add_argument("--golden", type=Path, help="golden file (default: <output_dir>/golden/<name>.json)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.experiment, args.config, args.overrides)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        report = run(cfg)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParawaveError, ValueError, ArithmeticError) as exc:
        print(f"{cfg.experiment}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    for c in report.criteria:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name}: {c.value:.6g} {c.relation} {c.bound:.6g}")

    golden = args.golden or cfg.output_dir / "golden" / f"{artifact_prefix(cfg)}.json"
    code = EXIT_PASS if report.passed else EXIT_FAIL
    if args.bless:
        compare_golden(report, golden, bless=True)
        print(f"blessed {golden}")
    elif golden.exists():
        try:
            diff = compare_golden(report, golden)
            print(f"golden ok ({len(diff)} fields differ within tolerance)")
        except GoldenMismatch as exc:
            print(f"golden mismatch: {', '.join(exc.fields)}")
            code = EXIT_FAIL
    print(f"report: {report.artifacts[-1]}  ({report.wall_clock:.2f} s)")
    return code


if __name__ == "__main__":
    sys.exit(main())
