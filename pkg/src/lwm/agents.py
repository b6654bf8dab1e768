"""Agents driven by the evaluation harness.

Every agent follows the same episode protocol::

    agent.begin_episode(obs)
    action = agent.act(obs)          # repeated
    agent.observe(transition, truncated)
    agent.end_episode(episode_buffer)
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from lwm import baselines
from lwm.core import FACT_CAPACITY, HISTORY_CAPACITY, EpisodeBuffer, FactMemory, HistoryBuffer, Transition
from lwm.envs.base import EnvSpec
from lwm.errors import InvalidArgument
from lwm.facts import SUCCESS_THRESHOLD, format_trajectory_summary, learn_facts_and_update
from lwm.llm.backends import Backend
from lwm.planner import PlanConfig, Planner, TerminalSet

AGENT_NAMES = ("random", "react", "reflexion", "react_fec", "lwm")


@dataclass(frozen=True)
class AgentConfig:
    history_capacity: int = HISTORY_CAPACITY
    fact_capacity: int = FACT_CAPACITY
    lesson_capacity: int = baselines.LESSON_CAPACITY
    compress: bool = False
    success_threshold: float = SUCCESS_THRESHOLD
    trace: bool = False


class Agent:
    name = "agent"

    def __init__(self, spec: EnvSpec, cfg: AgentConfig = AgentConfig(), seed: int = 0):
        self.spec = spec
        self.cfg = cfg
        self.rng = random.Random(seed)
        self.history = HistoryBuffer(capacity=cfg.history_capacity)

    def seed(self, seed: int) -> None:
        self.rng.seed(seed)

    def begin_episode(self, obs: str) -> None:
        self.history = HistoryBuffer(capacity=self.cfg.history_capacity)
        self.history.push("Obs", obs)

    def act(self, obs: str) -> str:
        raise NotImplementedError

    def observe(self, t: Transition, truncated: bool = False) -> None:
        self.history.push_pair(t.action, t.next_obs)

    def end_episode(self, buf: EpisodeBuffer) -> None:
        pass

    def knowledge(self) -> list[str]:
        """Learned context carried across episodes (facts or lessons)."""
        return []

    def drain_trace(self) -> list[dict]:
        return []


class RandomAgent(Agent):
    name = "random"

    def act(self, obs: str) -> str:
        return baselines.random_act(self.spec.allowed_actions, self.rng)


class ReactAgent(Agent):
    name = "react"

    def __init__(self, backend: Backend, spec: EnvSpec, cfg: AgentConfig = AgentConfig(), seed: int = 0):
        super().__init__(spec, cfg, seed)
        self.backend = backend
        self.last_thought = ""

    def context(self) -> tuple[list[str] | None, str]:
        return None, ""

    def act(self, obs: str) -> str:
        context, title = self.context()
        self.last_thought, action = baselines.react_act(
            self.backend, self.spec.description, obs, self.history.lines, self.spec.allowed_actions,
            context, title, self.rng,
        )
        return action


class ReflexionAgent(ReactAgent):
    name = "reflexion"

    def __init__(self, backend: Backend, spec: EnvSpec, cfg: AgentConfig = AgentConfig(), seed: int = 0):
        super().__init__(backend, spec, cfg, seed)
        self.lessons = baselines.LessonBuffer(capacity=cfg.lesson_capacity)

    def context(self):
        return list(self.lessons.items), baselines.LESSONS_TITLE

    def end_episode(self, buf: EpisodeBuffer) -> None:
        summary = format_trajectory_summary(buf, self.cfg.success_threshold)
        self.lessons = baselines.reflexion_reflect(self.backend, self.spec.description, summary, self.lessons)

    def knowledge(self) -> list[str]:
        return list(self.lessons.items)


class ReactFecAgent(ReactAgent):
    name = "react_fec"

    def __init__(self, backend: Backend, spec: EnvSpec, cfg: AgentConfig = AgentConfig(), seed: int = 0):
        super().__init__(backend, spec, cfg, seed)
        self.facts = FactMemory(capacity=cfg.fact_capacity)
        self.snapshot = self.facts.copy()

    def begin_episode(self, obs: str) -> None:
        super().begin_episode(obs)
        self.snapshot = self.facts.copy()

    def context(self):
        return list(self.snapshot.items), baselines.FACTS_TITLE

    def end_episode(self, buf: EpisodeBuffer) -> None:
        self.facts = baselines.fec_reflect(
            self.backend, buf, self.facts, self.spec.description, self.cfg.compress, self.cfg.success_threshold
        )

    def knowledge(self) -> list[str]:
        return list(self.facts.items)


class LwmAgent(Agent):
    """Fact memory plus lookahead planning; planning uses the facts snapshotted at episode start."""

    name = "lwm"

    def __init__(self, backend: Backend, spec: EnvSpec, plan: PlanConfig = PlanConfig(),
                 cfg: AgentConfig = AgentConfig(), seed: int = 0):
        super().__init__(spec, cfg, seed)
        self.backend = backend
        self.facts = FactMemory(capacity=cfg.fact_capacity)
        self.snapshot = self.facts.copy()
        self.terminal = TerminalSet()
        self.planner = Planner(backend, spec, plan, rng=self.rng, terminal=self.terminal, trace=cfg.trace)

    def begin_episode(self, obs: str) -> None:
        super().begin_episode(obs)
        self.snapshot = self.facts.copy()

    def act(self, obs: str) -> str:
        return self.planner.plan_action(obs, self.history, self.snapshot)

    def observe(self, t: Transition, truncated: bool = False) -> None:
        super().observe(t, truncated)
        if t.done and not truncated:
            self.terminal.add(t.next_obs)

    def end_episode(self, buf: EpisodeBuffer) -> None:
        self.facts = learn_facts_and_update(
            self.backend, buf, self.facts, self.spec.description, self.cfg.compress, self.cfg.success_threshold
        )

    def knowledge(self) -> list[str]:
        return list(self.facts.items)

    def drain_trace(self) -> list[dict]:
        out = [r.to_json() for r in self.planner.trace]
        self.planner.trace.clear()
        return out


def make_agent(name: str, spec: EnvSpec, backend: Backend | None = None, plan: PlanConfig = PlanConfig(),
               cfg: AgentConfig = AgentConfig(), seed: int = 0) -> Agent:
    if name not in AGENT_NAMES:
        raise InvalidArgument(f"unknown agent {name!r}; choose from {', '.join(AGENT_NAMES)}")
    if name == "random":
        return RandomAgent(spec, cfg, seed)
    if backend is None:
        raise InvalidArgument(f"agent {name!r} needs an LLM backend")
    if name == "lwm":
        return LwmAgent(backend, spec, plan, cfg, seed)
    cls = {"react": ReactAgent, "reflexion": ReflexionAgent, "react_fec": ReactFecAgent}[name]
    return cls(backend, spec, cfg, seed)
