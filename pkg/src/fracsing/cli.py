"""Command line entry point: ``fracsing solve|verify|sweep``."""

from __future__ import annotations

import argparse
import glob
import sys

from .config import OUTPUT_ENV, ConfigError, load_config
from .report import EXIT_INPUT, InputError, load_configs, run_solve, run_sweep, run_verify


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracsing",
        description="Singular fractional elliptic problems: solve, verify and sweep experiments.",
        epilog=f"Set {OUTPUT_ENV} to override output_dir from the config.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="solve the configured problem and write reports")
    p.add_argument("config")
    p = sub.add_parser("verify", help="re-run the certificates on a stored solution.csv")
    p.add_argument("config")
    p.add_argument("solution")
    p = sub.add_parser("sweep", help="run every config matching a glob and fit refinement rates")
    p.add_argument("pattern")
    p.add_argument("--workers", type=int, default=None)
    return parser


def _summary(report) -> str:
    lines = [f"status: {report.status}"]
    if report.outside_paper_regime:
        lines.append("outside the analysed regime (s >= 1/2)")
    lines += [f"  {'PASS' if c.passed else 'FAIL'}  {c.name}" for c in report.certificates]
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            report = run_solve(load_config(args.config))
        elif args.command == "verify":
            report = run_verify(load_config(args.config), args.solution)
        else:
            paths = sorted(glob.glob(args.pattern))
            _, rates, code = run_sweep(load_configs(paths), max_workers=args.workers)
            for mode, s, q, n_max, points, rate in rates:
                print(f"{mode} s={s:g} q={q:g} n_max={n_max:g}: rate {rate:.3f} over {points} meshes")
            return code
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(_summary(report))
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
