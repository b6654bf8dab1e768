"""Run every agent over several seeds on one environment and print the aggregated metric table.

    python3 scripts/evaluate_baselines.py --env frozenlake --seeds 5 --backend oracle-facts
"""
from __future__ import annotations

import argparse

from lwm import harness
from lwm.agents import AGENT_NAMES


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--env", default="frozenlake", choices=["frozenlake", "crafter"])
    p.add_argument("--agents", nargs="+", default=list(AGENT_NAMES), choices=AGENT_NAMES)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--steps", type=int, default=harness.DEFAULT_BUDGET)
    p.add_argument("--backend", default="oracle-facts", choices=["oracle", "oracle-facts", "http"])
    p.add_argument("--fixture")
    p.add_argument("--size", type=int)
    p.add_argument("--compress", default="off", choices=["on", "off"])
    p.add_argument("--expert", type=float, help="expert score anchor (default: best mean agent)")
    p.add_argument("--workers", type=int, default=1, help="parallel runs")
    p.add_argument("--out", default="runs/baselines")
    args = p.parse_args()

    specs = [harness.RunSpec(env=args.env, agent=a, seed=s, steps=args.steps, backend=args.backend,
                             fixture=args.fixture, size=args.size, compress=args.compress, out=args.out)
             for a in args.agents for s in range(args.seeds)]
    summaries = harness.execute_many(specs, workers=args.workers)
    for s in summaries:
        if s["error"]:
            print(f"warning: {s['agent']} seed {s['seed']} aborted: {s['error']['message']}")
    rows = harness.metric_table(summaries, expert_score=args.expert)
    harness.write_table(rows, f"{args.out}/metrics.csv")
    for row in rows:
        mean = "--" if row["mean"] is None else f"{row['mean']:.2f}"
        hw = "" if row["ci95"] is None else f" ± {row['ci95']:.2f}"
        print(f"{row['agent']:>10} {row['env']:<16} {row['metric']:<18} {mean}{hw} (n={row['n']})")


if __name__ == "__main__":
    main()
