"""Batch experiment runner.

Subcommands: run <config> executes the configured suites and writes one JSON
report per suite plus CSV data files; validate <config> parses and checks a
config without running; list-suites prints the registry; version prints the
package and report-schema versions. Exit status of run is nonzero iff any
suite failed. Wall-clock metadata goes into run_meta.json so the reports
themselves are reproducible byte for byte.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .config import ConfigError, load_config
from .suites import SUITES, emit_plot_data, report_schema_version, run_suite


def main(argv=None):
    parser = argparse.ArgumentParser(prog="surfsde", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the suites listed in the config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None, help="override the config output_dir")
    p_run.add_argument(
        "--plot-data", action="store_true",
        help="also collect every CSV artifact into (series, x, y) triples",
    )

    p_val = sub.add_parser("validate", help="parse and validate a config")
    p_val.add_argument("config")

    sub.add_parser("list-suites", help="print the known suite names")
    sub.add_parser("version", help="print package and report schema versions")

    args = parser.parse_args(argv)

    if args.command == "list-suites":
        for name in sorted(SUITES):
            print(name)
        return 0

    if args.command == "version":
        print(f"surfsde {__version__} (report schema {report_schema_version()})")
        return 0

    try:
        cfg = load_config(args.config, SUITES.keys())
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"{args.config}: ok ({len(cfg.suites)} suites)")
        return 0

    outdir = Path(
        args.output_dir or os.environ.get("SURFSDE_OUTPUT_DIR") or cfg.output_dir
    )
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    failures = []
    for name in cfg.suites:
        report = run_suite(name, cfg, outdir)
        status = "PASS" if report.passed else "FAIL"
        print(f"[{status}] {name}" + (f"  ({report.error})" if report.error else ""))
        for check in report.checks:
            mark = "ok " if check.passed else "FAIL"
            print(f"    {mark} {check.condition}: {check.measured:.6g} {check.direction} {check.threshold:.6g}")
        if not report.passed:
            failures.append(name)
    if args.plot_data:
        emit_plot_data(outdir)
    meta = {
        "config": str(args.config),
        "started_unix": started,
        "elapsed_s": time.time() - started,
        "schema_version": report_schema_version(),
        "package_version": __version__,
    }
    (outdir / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    if failures:
        print(f"failed suites: {', '.join(failures)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
