"""Budgeted evaluation runs, metrics, and result tables."""
from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from lwm.agents import Agent, AgentConfig, make_agent
from lwm.core import EpisodeBuffer, Transition
from lwm.envs import crafter as cm
from lwm.envs import frozenlake as fl
from lwm.errors import InvalidArgument, LwmError, UndefinedNormalization
from lwm.facts import SUCCESS_THRESHOLD, classify_outcome
from lwm.llm.backends import HttpBackend, RecordingBackend, ReplayBackend
from lwm.llm.oracle import FACTS, FULL, oracle_for
from lwm.planner import PlanConfig

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_BUDGET = 300
TABLE_COLUMNS = ["agent", "env", "metric", "mean", "ci95", "n"]


# -- metrics --------------------------------------------------------------------


def normalized_score(raw: float, random_score: float, expert_score: float) -> float:
    denom = expert_score - random_score
    if denom == 0:
        raise UndefinedNormalization("expert and random scores coincide")
    return 100.0 * (raw - random_score) / denom


def ci95(samples: Sequence[float]) -> tuple[float, float | None]:
    """Mean and Student-t 95% half-width; the half-width is None for one sample."""
    xs = np.asarray(list(samples), dtype=float)
    if xs.size == 0:
        raise InvalidArgument("ci95 needs at least one sample")
    mean = float(xs.mean())
    if xs.size == 1:
        return mean, None
    sd = float(xs.std(ddof=1))
    return mean, float(stats.t.ppf(0.975, xs.size - 1) * sd / math.sqrt(xs.size))


# -- runs -----------------------------------------------------------------------


@dataclass
class RunRecord:
    agent: str
    env: str
    seed: int
    episodes: list[EpisodeBuffer] = field(default_factory=list)
    step_budget: int = DEFAULT_BUDGET
    error: dict | None = None

    @property
    def steps(self) -> int:
        return sum(len(ep) for ep in self.episodes)

    @property
    def cumulative_return(self) -> float:
        total = 0.0
        for ep in self.episodes:
            for t in ep.transitions:
                total += t.reward
        return total

    def successes(self, threshold: float = SUCCESS_THRESHOLD) -> list[EpisodeBuffer]:
        return [ep for ep in self.episodes if ep.transitions and ep.total_reward >= threshold]

    def summary(self, threshold: float = SUCCESS_THRESHOLD, config: dict | None = None) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "agent": self.agent,
            "env": self.env,
            "seed": self.seed,
            "step_budget": self.step_budget,
            "steps": self.steps,
            "cumulative_return": self.cumulative_return,
            "episodes": len(self.episodes),
            "successes": len(self.successes(threshold)),
            "steps_per_success": steps_per_success(self, threshold),
            "episode_lengths": [len(ep) for ep in self.episodes],
            "episode_returns": [ep.total_reward for ep in self.episodes],
            "error": self.error,
            "config": config or {},
        }


def steps_per_success(record: RunRecord, success_threshold: float = SUCCESS_THRESHOLD) -> float | None:
    lengths = [len(ep) for ep in record.successes(success_threshold)]
    return float(np.mean(lengths)) if lengths else None


class JsonlLog:
    """Deterministic JSON-lines writer (sorted keys, no timestamps)."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self.fh = None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.fh = self.path.open("w", encoding="utf-8")

    def write(self, kind: str, **payload) -> None:
        if self.fh:
            self.fh.write(json.dumps({"schema": SCHEMA_VERSION, "type": kind, **payload}, sort_keys=True) + "\n")

    def close(self) -> None:
        if self.fh:
            self.fh.close()
            self.fh = None


def run_budget(agent: Agent, env, seed: int, step_budget: int = DEFAULT_BUDGET,
               log_path: str | Path | None = None, trace_path: str | Path | None = None,
               success_threshold: float = SUCCESS_THRESHOLD) -> RunRecord:
    """Play episodes until ``step_budget`` environment steps have been spent.

    An episode cut short by the global budget is marked truncated and still
    reflected on, so its experience is not thrown away.
    """
    if step_budget < 1:
        raise InvalidArgument("step_budget must be >= 1")
    agent.seed(seed)
    record = RunRecord(agent=agent.name, env=env.spec.name, seed=seed, step_budget=step_budget)
    out = JsonlLog(log_path)
    trace = JsonlLog(trace_path)
    out.write("run_start", agent=agent.name, env=env.spec.name, seed=seed, step_budget=step_budget)
    steps = 0
    try:
        while steps < step_budget:
            obs = env.reset()
            agent.begin_episode(obs)
            buf = EpisodeBuffer()
            episode = len(record.episodes)
            record.episodes.append(buf)
            while True:
                action = agent.act(obs)
                for node in agent.drain_trace():
                    trace.write("node", episode=episode, step=steps, **node)
                res = env.step(action)
                steps += 1
                t = Transition(obs, action, res.reward, res.obs, res.done)
                buf.append(t)
                agent.observe(t, res.truncated)
                out.write("step", episode=episode, t=len(buf) - 1, global_step=steps - 1,
                          truncated=res.truncated, **t.to_json())
                obs = res.obs
                if res.done:
                    buf.truncated = res.truncated
                    break
                if steps >= step_budget:
                    buf.truncated = True
                    break
            agent.end_episode(buf)
            out.write("episode_end", episode=episode, length=len(buf), total_reward=buf.total_reward,
                      outcome=classify_outcome(buf, success_threshold), truncated=buf.truncated,
                      knowledge=agent.knowledge())
    except LwmError as exc:
        record.error = {"error": type(exc).__name__, "message": str(exc), "step": steps}
        out.write("error", **record.error)
        log.error("run aborted at step %d: %s", steps, exc)
    out.write("run_end", steps=record.steps, cumulative_return=record.cumulative_return,
              episodes=len(record.episodes))
    out.close()
    trace.close()
    return record


# -- run configuration ------------------------------------------------------------


@dataclass
class RunSpec:
    env: str = "frozenlake"
    agent: str = "lwm"
    seed: int = 0
    steps: int = DEFAULT_BUDGET
    depth: int = 3
    branch: int = 4
    gamma: float = 0.99
    step_penalty: float = 0.01
    backend: str = "oracle-facts"
    compress: str = "off"
    fixture: str | None = None
    size: int | None = None
    holes: float = 0.9
    out: str = "runs"
    trace: bool = False
    cassette: str | None = None
    record: str | None = None
    history_capacity: int = 51
    fact_capacity: int = 200
    success_threshold: float = SUCCESS_THRESHOLD
    workers: int = 1

    @classmethod
    def parse_config(cls, text: str) -> dict:
        """Flat ``key = value`` lines (``#`` comments); keys mirror the CLI flags."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidArgument(f"config line without '=': {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in types:
                raise InvalidArgument(f"unknown config key {key!r}")
            values[key] = _convert(types[key], value)
        return values

    @property
    def stem(self) -> str:
        return f"{self.agent}_{self.env_id}_s{self.seed}"

    @property
    def env_id(self) -> str:
        if self.fixture:
            return f"{self.env}_{Path(self.fixture).stem}"
        return f"{self.env}_{self.size or default_size(self.env)}"


def _convert(kind, value: str):
    kind = str(kind)
    if "bool" in kind:
        return value.lower() in ("1", "true", "yes", "on")
    if "int" in kind and "None" not in kind:
        return int(value)
    if "float" in kind:
        return float(value)
    if "int" in kind:
        return None if value.lower() == "none" else int(value)
    return None if value.lower() == "none" else value


def default_size(env: str) -> int:
    return 4 if env == "frozenlake" else 5


def build_env(spec: RunSpec):
    if spec.env == "frozenlake":
        board = fl.load_board(spec.fixture) if spec.fixture else fl.gen_frozen_lake(
            spec.size or 4, spec.holes, spec.seed)
        env = fl.FrozenLakeEnv(board)
    elif spec.env == "crafter":
        world = cm.load_world(spec.fixture) if spec.fixture else cm.gen_crafter(spec.size or 5, spec.seed)
        env = cm.CrafterEnv(world)
    else:
        raise InvalidArgument(f"unknown env {spec.env!r}")
    # keep the env name stable across seeds; fixtures are named after the file
    env.spec = replace(env.spec, name=spec.env_id)
    return env


def build_backend(spec: RunSpec, env):
    if spec.agent == "random":
        return None
    if spec.backend == "oracle":
        backend = oracle_for(env, FULL, spec.gamma, spec.step_penalty)
    elif spec.backend == "oracle-facts":
        backend = oracle_for(env, FACTS, spec.gamma, spec.step_penalty)
    elif spec.backend == "http":
        backend = HttpBackend()
    elif spec.backend == "replay":
        if not spec.cassette:
            raise InvalidArgument("--backend replay needs --cassette PATH")
        backend = ReplayBackend(spec.cassette)
    else:
        raise InvalidArgument(f"unknown backend {spec.backend!r}")
    if spec.record:
        backend = RecordingBackend(backend, spec.record)
    return backend


def build_agent(spec: RunSpec, env, backend):
    plan = PlanConfig(depth=spec.depth, branch=spec.branch, gamma=spec.gamma,
                      step_penalty=spec.step_penalty, workers=spec.workers)
    cfg = AgentConfig(history_capacity=spec.history_capacity, fact_capacity=spec.fact_capacity,
                      compress=spec.compress == "on", success_threshold=spec.success_threshold,
                      trace=spec.trace)
    return make_agent(spec.agent, env.spec, backend, plan, cfg, spec.seed)


def execute(spec: RunSpec) -> dict:
    """Run one configuration, write ``<stem>.jsonl`` and ``<stem>.summary.json``; return the summary."""
    if spec.compress not in ("on", "off"):
        raise InvalidArgument("compress must be 'on' or 'off'")
    env = build_env(spec)
    backend = build_backend(spec, env)
    agent = build_agent(spec, env, backend)
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    record = run_budget(
        agent, env, spec.seed, spec.steps,
        log_path=out / f"{spec.stem}.jsonl",
        trace_path=out / f"{spec.stem}.trace.jsonl" if spec.trace else None,
        success_threshold=spec.success_threshold,
    )
    summary = record.summary(spec.success_threshold, config=asdict(spec))
    (out / f"{spec.stem}.summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def execute_many(specs: Sequence[RunSpec], workers: int = 1) -> list[dict]:
    """Independent runs; with ``workers > 1`` they go to a process pool."""
    if workers <= 1:
        return [execute(s) for s in specs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(execute, specs))


# -- aggregation ------------------------------------------------------------------


def load_summaries(runs_dir: str | Path) -> list[dict]:
    return [json.loads(p.read_text()) for p in sorted(Path(runs_dir).rglob("*.summary.json"))]


def metric_table(summaries: Iterable[dict], expert_score: dict | float | None = None,
                 random_agent: str = "random") -> list[dict]:
    """Rows of (agent, env, metric, mean, ci95, n) over seeds.

    Steps per success is averaged within each seed first, then across seeds.
    The expert anchor defaults to the best mean cumulative return per env.
    """
    groups: dict[tuple[str, str], list[dict]] = defaultdict(list)
    for s in summaries:
        groups[(s["agent"], s["env"])].append(s)
    rows = []
    means: dict[str, dict[str, tuple[float, float | None, int]]] = defaultdict(dict)
    for (agent, env), runs in sorted(groups.items()):
        returns = [r["cumulative_return"] for r in runs]
        mean, hw = ci95(returns)
        means[env][agent] = (mean, hw, len(returns))
        rows.append(_row(agent, env, "cumulative_return", mean, hw, len(returns)))
        sps = [r["steps_per_success"] for r in runs if r["steps_per_success"] is not None]
        if sps:
            m, h = ci95(sps)
            rows.append(_row(agent, env, "steps_per_success", m, h, len(sps)))
        else:
            rows.append(_row(agent, env, "steps_per_success", None, None, 0))
    for env, agents in sorted(means.items()):
        if random_agent not in agents:
            continue
        rand = agents[random_agent][0]
        if isinstance(expert_score, dict):
            expert = expert_score.get(env)
        else:
            expert = expert_score
        if expert is None:
            expert = max(m for m, _, _ in agents.values())
        for agent, (mean, hw, n) in sorted(agents.items()):
            try:
                score = normalized_score(mean, rand, expert)
            except UndefinedNormalization:
                log.warning("normalization undefined for %s (expert == random)", env)
                break
            scale = 100.0 / abs(expert - rand)
            rows.append(_row(agent, env, "normalized_score", score, None if hw is None else hw * scale, n))
    return rows


def _row(agent, env, metric, mean, hw, n) -> dict:
    return {"agent": agent, "env": env, "metric": metric, "mean": mean, "ci95": hw, "n": n}


def write_table(rows: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row[k] is None else row[k]) for k in TABLE_COLUMNS})
