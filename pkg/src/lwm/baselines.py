"""Baseline decision rules: random, ReAct, Reflexion lessons, and ReAct with learned facts."""
from __future__ import annotations

import logging
import random
import warnings
from collections import deque
from dataclasses import replace
from typing import Iterable, Sequence

from lwm.errors import AgentWarning, InvalidArgument, LwmError, MissingCassette
from lwm.facts import TrajectorySummary, learn_facts_and_update
from lwm.llm import prompts
from lwm.llm.backends import Backend, complete

log = logging.getLogger(__name__)

LESSON_CAPACITY = 5
LESSON_WORD_LIMIT = 20
FACTS_TITLE = "Atomic facts you have learned about this environment"
LESSONS_TITLE = "Lessons from previous episodes (old->new)"

# Fact-augmented ReAct reflects exactly like the planner agent does.
fec_reflect = learn_facts_and_update


def random_act(allowed: Sequence[str], rng: random.Random) -> str:
    if not allowed:
        raise InvalidArgument("no allowed actions to choose from")
    return allowed[rng.randrange(len(allowed))]


def _match_action(raw: str, allowed: Sequence[str]) -> str | None:
    name = raw.strip()
    if name in allowed:
        return name
    if name.isdigit() and int(name) < len(allowed):
        return allowed[int(name)]
    return None


def react_act(
    backend: Backend,
    env_description: str,
    obs: str,
    history: Sequence[str],
    allowed: Sequence[str],
    context: Sequence[str] | None = None,
    context_title: str = FACTS_TITLE,
    rng: random.Random | None = None,
) -> tuple[str, str]:
    """One thought/action step. An illegal action gets one corrective re-prompt,
    then a uniformly random legal action (with a warning)."""
    call = prompts.react_call(env_description, obs, history, allowed, context, context_title)
    result = complete(backend, call)
    action = _match_action(result["action"], allowed)
    if action is not None:
        return result.thought, action
    note = (
        f"\n\nYour previous choice {result['action']!r} is not an allowed action. "
        f"Choose exactly one of {prompts.format_actions(allowed)}."
    )
    retry = complete(backend, replace(call, user=call.user + note))
    action = _match_action(retry["action"], allowed)
    if action is not None:
        return retry.thought, action
    warnings.warn(f"illegal action {retry['action']!r} after re-prompt; acting randomly", AgentWarning, stacklevel=2)
    return retry.thought, random_act(allowed, rng or random.Random(0))


class LessonBuffer:
    """FIFO store of the most recent reflection lessons."""

    def __init__(self, lessons: Iterable[str] = (), capacity: int = LESSON_CAPACITY):
        if capacity < 1:
            raise InvalidArgument("lesson capacity must be positive")
        self.capacity = capacity
        self._items: deque[str] = deque(lessons, maxlen=capacity)

    def append(self, lesson: str) -> None:
        self._items.append(lesson)

    def copy(self) -> LessonBuffer:
        return LessonBuffer(self._items, self.capacity)

    @property
    def items(self) -> tuple[str, ...]:
        return tuple(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LessonBuffer):
            return NotImplemented
        return self.items == other.items and self.capacity == other.capacity


def reflexion_reflect(
    backend: Backend,
    env_description: str,
    summary: TrajectorySummary,
    lessons: LessonBuffer,
) -> LessonBuffer:
    out = lessons.copy()
    call = prompts.lesson_call(env_description, summary, lessons.items)
    try:
        lesson = " ".join(complete(backend, call)["lesson"].split())
    except MissingCassette:
        raise
    except LwmError as exc:
        warnings.warn(f"reflection failed ({exc}); lessons unchanged", AgentWarning, stacklevel=2)
        return out
    if not lesson:
        warnings.warn("reflection returned an empty lesson", AgentWarning, stacklevel=2)
        return out
    if len(lesson.split()) > LESSON_WORD_LIMIT:
        warnings.warn(f"lesson longer than {LESSON_WORD_LIMIT} words", AgentWarning, stacklevel=2)
    out.append(lesson)
    return out
