"""Command-line entry point: ``vaxmed run|list|check|show``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .exceptions import CapacityError, InputError, ScenarioError, VaxmedError
from .graph import check_nde_assumptions, validate
from .report import run
from .scenario import builtin_source, list_builtin, parse_scenario

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _load(source: str):
    path = Path(source)
    if path.is_file():
        return parse_scenario(path.read_text())
    if source in list_builtin():
        return parse_scenario(builtin_source(source))
    raise ScenarioError([(source, "neither a readable file nor a built-in scenario (see `vaxmed list`)")])


def _report_errors(exc: ScenarioError, err):
    for loc, msg in exc.errors:
        print(f"error: {loc}: {msg}", file=err)


def cmd_run(args, out, err) -> int:
    if args.n is not None and args.n < 1:
        print("error: --n must be at least 1", file=err)
        return EXIT_INVALID
    scenario = _load(args.scenario)
    report = run(scenario, seed=args.seed, n=args.n)
    body = report.to_csv() if args.format == "csv" else report.to_table()
    out.write(body)
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.csv").write_text(report.to_csv())
        (d / "meta.json").write_text(report.meta_json())
    if report.has_errors:
        for r in report.rows:
            if r.is_error:
                print(f"error: {r.analysis}: {r.error}", file=err)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_list(args, out, err) -> int:
    for name in list_builtin():
        out.write(name + "\n")
    return EXIT_OK


def cmd_check(args, out, err) -> int:
    scenario = _load(args.scenario)
    dag = scenario.dag
    order = validate(dag).order
    out.write(f"{scenario.name}: valid (schema 1)\n")
    out.write(f"nodes: {' '.join(order)}\n")
    out.write(f"edges: {' '.join(f'{u}->{v}' for u, v in sorted(dag.edges))}\n")
    r = scenario.roles
    if r.get("mediator"):
        rep = check_nde_assumptions(dag, r["exposure"], r["mediator"], r["outcome"], r.get("adjust", []))
        for k in sorted(rep.verdicts):
            out.write(f"assumption {k}: {rep[k]}\n")
    return EXIT_OK


def cmd_show(args, out, err) -> int:
    out.write(builtin_source(args.name))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vaxmed", description="Vaccine mediation estimands on structural causal models.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file or built-in scenario")
    r.add_argument("scenario", help="path to a scenario JSON file or a built-in name")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    r.add_argument("--n", type=int, default=None, help="override the sample size")
    r.add_argument("--out", default=None, help="directory for report.csv and meta.json")
    r.add_argument("--format", choices=("table", "csv"), default="table")
    r.set_defaults(func=cmd_run)
    sub.add_parser("list", help="list built-in scenarios").set_defaults(func=cmd_list)
    c = sub.add_parser("check", help="validate a scenario and report identification assumptions")
    c.add_argument("scenario")
    c.set_defaults(func=cmd_check)
    s = sub.add_parser("show", help="print a built-in scenario's JSON")
    s.add_argument("name")
    s.set_defaults(func=cmd_show)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args, out, err)
    except ScenarioError as exc:
        _report_errors(exc, err)
        return EXIT_INVALID
    except InputError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_INVALID
    except (CapacityError, VaxmedError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
