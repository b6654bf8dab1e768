"""Run the fact-learning planner on the 4x4 case-study board and print what it learned per episode.

    python3 scripts/run_case_study.py [--backend oracle-facts] [--steps 300] [--out runs/case_study]
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

from lwm import harness

FIXTURE = Path(__file__).resolve().parent.parent / "fixtures" / "case_study_4x4.txt"


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--backend", default="oracle-facts", choices=["oracle-facts", "oracle", "http", "replay"])
    p.add_argument("--cassette")
    p.add_argument("--record")
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/case_study")
    args = p.parse_args()

    spec = harness.RunSpec(env="frozenlake", agent="lwm", fixture=str(FIXTURE), seed=args.seed,
                           steps=args.steps, backend=args.backend, cassette=args.cassette,
                           record=args.record, out=args.out)
    env = harness.build_env(spec)
    agent = harness.build_agent(spec, env, harness.build_backend(spec, env))
    log_path = Path(args.out) / f"{spec.stem}.jsonl"
    record = harness.run_budget(agent, env, spec.seed, spec.steps, log_path=log_path)

    # the log records the agent's knowledge after each episode's reflection
    knowledge = [e["knowledge"] for e in map(json.loads, log_path.read_text().splitlines())
                 if e["type"] == "episode_end"]
    seen: set[str] = set()
    for i, ep in enumerate(record.episodes):
        new = [f for f in knowledge[i] if f not in seen]
        seen.update(knowledge[i])
        actions = " ".join(t.action for t in ep)
        print(f"episode {i:3d}  return {ep.total_reward:+6.2f}  steps {len(ep):2d}  actions: {actions}")
        if new:
            print(f"             learned: {new}")
    s = record.summary()
    print(f"\n{s['episodes']} episodes, {s['successes']} successes, "
          f"cumulative return {s['cumulative_return']:.2f}, steps per success {s['steps_per_success']}")


if __name__ == "__main__":
    main()
