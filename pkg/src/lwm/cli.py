"""Command line entry point: ``lwm run``, ``lwm eval``, ``lwm theory``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from lwm import harness, theory
from lwm.agents import AGENT_NAMES
from lwm.errors import LwmError


def _add_run_args(p: argparse.ArgumentParser) -> None:
    # defaults are None so that a --config file can fill anything not given on the command line
    p.add_argument("--env", choices=["frozenlake", "crafter"])
    p.add_argument("--agent", choices=AGENT_NAMES)
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int, help="global environment-step budget (default 300)")
    p.add_argument("--depth", type=int)
    p.add_argument("--branch", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--step-penalty", type=float)
    p.add_argument("--backend", choices=["http", "oracle", "oracle-facts", "replay"])
    p.add_argument("--compress", choices=["on", "off"])
    p.add_argument("--fixture", help="board / world fixture file")
    p.add_argument("--size", type=int, help="grid side for generated environments")
    p.add_argument("--holes", type=float, help="FrozenLake hole density for generated boards")
    p.add_argument("--out", help="output directory")
    p.add_argument("--trace", action="store_true", default=None, help="write planner node traces")
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--cassette", help="cassette file for --backend replay")
    p.add_argument("--record", help="record every backend call to this cassette")
    p.add_argument("--history-capacity", type=int)
    p.add_argument("--fact-capacity", type=int)
    p.add_argument("--workers", type=int, help="threads for root-branch evaluation")


def run_spec_from_args(args: argparse.Namespace) -> harness.RunSpec:
    values = {}
    if args.config:
        values.update(harness.RunSpec.parse_config(Path(args.config).read_text()))
    for f in fields(harness.RunSpec):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return harness.RunSpec(**values)


def cmd_run(args) -> int:
    spec = run_spec_from_args(args)
    summary = harness.execute(spec)
    keys = ("agent", "env", "seed", "steps", "episodes", "successes", "cumulative_return", "steps_per_success")
    print(json.dumps({k: summary[k] for k in keys}, sort_keys=True))
    if summary["error"]:
        print(f"run aborted: {summary['error']['error']}: {summary['error']['message']}", file=sys.stderr)
        return 1
    return 0


def cmd_eval(args) -> int:
    summaries = harness.load_summaries(args.runs)
    if not summaries:
        print(f"no *.summary.json files under {args.runs}", file=sys.stderr)
        return 1
    expert = args.expert
    rows = harness.metric_table(summaries, expert_score=expert, random_agent=args.random_agent)
    harness.write_table(rows, args.out)
    for row in rows:
        mean = "--" if row["mean"] is None else f"{row['mean']:.2f}"
        hw = "" if row["ci95"] is None else f" ± {row['ci95']:.2f}"
        print(f"{row['agent']:>10} {row['env']:<22} {row['metric']:<18} {mean}{hw} (n={row['n']})")
    return 0


def cmd_theory(args) -> int:
    spec = theory.SweepSpec.from_file(args.spec)
    rows = theory.run_sweep(spec)
    out = args.out or str(Path(args.spec).with_suffix(".csv"))
    theory.write_sweep_csv(rows, out)
    held = sum(r["holds"] for r in rows)
    eq1 = sum(r["eq1_holds"] for r in rows)
    worst = max(r["telescoping_error"] for r in rows) if rows else 0.0
    print(f"{held}/{len(rows)} bound checks hold; {eq1}/{len(rows)} value-gap checks hold; "
          f"max telescoping error {worst:.2e}; report: {out}")
    return 0 if held == len(rows) and eq1 == len(rows) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lwm", description="Fact-learning lookahead agents and baselines.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one agent on one environment for a step budget")
    _add_run_args(run)
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("eval", help="aggregate run summaries into a metric table")
    ev.add_argument("--runs", required=True, help="directory containing *.summary.json files")
    ev.add_argument("--out", required=True, help="CSV path")
    ev.add_argument("--expert", type=float, help="expert score anchor (default: best mean agent)")
    ev.add_argument("--random-agent", default="random")
    ev.set_defaults(func=cmd_eval)

    th = sub.add_parser("theory", help="randomised abstraction-bound sweep")
    th.add_argument("--spec", required=True, help="JSON sweep spec")
    th.add_argument("--out", help="CSV report path (default: next to the spec)")
    th.set_defaults(func=cmd_theory)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except LwmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
