"""``calib-atlas`` command line: audit, verify, plot, schema, fixtures.

Exit status: 0 when every verdict passes, 1 when some verdict fails, 2 for
configuration or input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ..errors import CalibError, ConfigError, RowError, SchemaError
from ..verify.harness import SUITES, run_suite
from .audit import run_audit, write_report
from .config import load_config, load_schema
from .fixtures import build_fixtures
from .plot import emit_plot_data, load_report

log = logging.getLogger("calib_atlas")


def _setup_logging() -> None:
    level = os.environ.get("CALIB_ATLAS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def cmd_audit(args) -> int:
    try:
        cfg = load_config(args.config)
        report = run_audit(cfg)
    except (ConfigError, SchemaError, RowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    path = write_report(report, args.out)
    for name, m in report["metrics"].items():
        status = "PASS" if m["verdict"] else "FAIL"
        detail = m.get("error") or f"value={m['value']:.6g} expect={m['expect']:.6g} tol={m['tol']:.1e}"
        print(f"{status} {name}: {detail}")
    print(f"report: {path}")
    return 0 if report["passed"] else 1


def cmd_verify(args) -> int:
    rep = run_suite(args.suite, args.seed, args.n_per_edge, args.n_oracle, args.bound_scale)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "manifest.json"
    path.write_text(rep.manifest())
    for check, s in sorted(rep.summary().items()):
        status = "PASS" if s["failed"] == 0 else "FAIL"
        print(f"{status} {check}: {s['total'] - s['failed']}/{s['total']}")
    print(f"manifest: {path}")
    return 0 if rep.passed else 1


def cmd_plot(args) -> int:
    try:
        report = load_report(args.report)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read report: {exc}", file=sys.stderr)
        return 2
    for p in emit_plot_data(report, args.out):
        print(p)
    return 0


def cmd_schema(args) -> int:
    names = [args.name] if args.name else ["config", "report", "manifest"]
    docs = {n: load_schema(n) for n in names}
    print(json.dumps(docs if len(docs) > 1 else docs[names[0]], indent=1, sort_keys=True))
    return 0


def cmd_fixtures(args) -> int:
    for p in build_fixtures(args.out):
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="calib-atlas", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("audit", help="run a configured calibration audit")
    a.add_argument("--config", required=True)
    a.add_argument("--out", required=True, help="directory for report.json")
    a.set_defaults(func=cmd_audit)

    v = sub.add_parser("verify", help="run implication / counterexample / oracle suites")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default=".", help="directory for manifest.json")
    v.add_argument("--n-per-edge", type=int, default=200)
    v.add_argument("--n-oracle", type=int, default=100)
    # fault injection for tests: scales every edge bound
    v.add_argument("--bound-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="export reliability / simplex CSVs from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    s = sub.add_parser("schema", help="print the committed JSON schemas")
    s.add_argument("name", nargs="?", choices=["config", "report", "manifest"])
    s.set_defaults(func=cmd_schema)

    f = sub.add_parser("fixtures", help="regenerate the audit fixtures")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fixtures)
    return ap


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CalibError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
