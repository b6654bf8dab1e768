"""Post-episode fact elicitation and optional compression."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

from lwm.core import EpisodeBuffer, FactMemory, Transition, canonical_fact
from lwm.errors import FactWarning, InvalidArgument
from lwm.llm import prompts
from lwm.llm.backends import Backend, complete

SUCCESS_THRESHOLD = 0.99
SUCCESS, FAILURE, TRUNCATED = "SUCCESS", "FAILURE", "TRUNCATED"
OUTCOME_LABELS = {SUCCESS: "SUCCESS", FAILURE: "FAILURE", TRUNCATED: "FAILURE (step limit)"}


def format_reward(x: float) -> str:
    """Shortest round-trip decimal with at least one fractional digit."""
    return repr(float(x))


@dataclass(frozen=True)
class TrajectorySummary:
    outcome: str
    total_reward: float
    lines: tuple[str, ...]
    transitions: tuple[Transition, ...] = ()

    @property
    def header(self) -> str:
        return f"Outcome: {OUTCOME_LABELS[self.outcome]} (Total Reward: {format_reward(self.total_reward)})"

    @property
    def text(self) -> str:
        return "\n".join((self.header, *self.lines))


def classify_outcome(buf: EpisodeBuffer, success_threshold: float = SUCCESS_THRESHOLD) -> str:
    if buf.total_reward >= success_threshold:
        return SUCCESS
    if buf.truncated or not buf.transitions[-1].done:
        return TRUNCATED
    return FAILURE


def format_trajectory_summary(buf: EpisodeBuffer, success_threshold: float = SUCCESS_THRESHOLD) -> TrajectorySummary:
    if not buf.transitions:
        raise InvalidArgument("cannot summarise an empty episode")
    lines = tuple(
        f"{i}. Obs: {t.obs} | Act: {t.action} | Reward: {format_reward(t.reward)} | Next_Obs: {t.next_obs}"
        for i, t in enumerate(buf.transitions, start=1)
    )
    return TrajectorySummary(
        outcome=classify_outcome(buf, success_threshold),
        total_reward=buf.total_reward,
        lines=lines,
        transitions=tuple(buf.transitions),
    )


def _dedup(facts: Sequence[str], exclude=()) -> list[str]:
    seen = {canonical_fact(f) for f in exclude}
    out = []
    for fact in facts:
        key = canonical_fact(fact)
        if key and key not in seen:
            seen.add(key)
            out.append(key)
    return out


def extract_facts(backend: Backend, env_description: str, summary: TrajectorySummary,
                  known: FactMemory | Sequence[str]) -> list[str]:
    known_list = list(known)
    call = prompts.extraction_call(env_description, summary, known_list)
    result = complete(backend, call)
    # the prompt already forbids repeats; filter anyway since live models ignore it
    return _dedup(result["new_facts"], exclude=known_list)


def compress_facts(backend: Backend, env_description: str, facts: Sequence[str]) -> list[str]:
    call = prompts.compression_call(env_description, list(facts))
    result = _dedup(complete(backend, call)["all_facts"])
    if not result and facts:
        warnings.warn("compression returned no facts; keeping the uncompressed list", FactWarning, stacklevel=2)
        return _dedup(facts)
    return result


def learn_facts_and_update(
    backend: Backend,
    buf: EpisodeBuffer,
    mem: FactMemory,
    env_description: str,
    compress_enabled: bool = False,
    success_threshold: float = SUCCESS_THRESHOLD,
) -> FactMemory:
    """Extract new facts from ``buf``, merge, optionally compress; capacity applied last."""
    summary = format_trajectory_summary(buf, success_threshold)
    new = extract_facts(backend, env_description, summary, mem)
    merged = _dedup([*mem.items, *new])
    if compress_enabled:
        merged = compress_facts(backend, env_description, merged)
    return FactMemory(merged, capacity=mem.capacity)
