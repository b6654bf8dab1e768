"""Prompt rendering: text templates under ``lwm/prompts`` plus builders for each call."""
from __future__ import annotations

from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

import jinja2

from lwm.llm import schemas
from lwm.llm.schemas import LlmCall

EXPERT_SYSTEM = "You are an expert agent."
EMPTY_LIST = "None"

_env = jinja2.Environment(
    undefined=jinja2.StrictUndefined,
    keep_trailing_newline=False,
    autoescape=False,
)


@lru_cache(maxsize=None)
def template(name: str) -> jinja2.Template:
    text = resources.files("lwm.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return _env.from_string(text)


def render(name: str, **values) -> str:
    return template(name).render(**values).rstrip("\n")


def must_call(name: str) -> str:
    return f"You must call {name}."


def format_list(items: Iterable[str]) -> str:
    """One ``- item`` per line; ``None`` when empty."""
    lines = [f"- {x}" for x in items]
    return "\n".join(lines) if lines else EMPTY_LIST


def format_lines(lines: Iterable[str]) -> str:
    text = "\n".join(lines)
    return text if text else EMPTY_LIST


def format_actions(actions: Sequence[str]) -> str:
    return "[" + ", ".join(actions) + "]"


def propose_call(env_description: str, facts: Sequence[str], obs: str, history: Sequence[str],
                 allowed: Sequence[str], branch: int) -> LlmCall:
    user = render(
        "propose_actions",
        env_description_str=env_description,
        current_facts_list_str=format_list(facts),
        current_observation_str=obs,
        history_lines_str=format_lines(history),
        branch_factor_int=branch,
        allowed_actions_list_str=format_actions(allowed),
    )
    return LlmCall(
        system=must_call("propose_actions"),
        user=user,
        function=schemas.PROPOSE_ACTIONS,
        temperature=schemas.PLANNER_TEMPERATURE,
        fields={"obs": obs, "facts": tuple(facts), "history": tuple(history),
                "allowed": tuple(allowed), "branch": branch},
    )


def simulate_call(env_description: str, facts: Sequence[str], obs: str, history: Sequence[str],
                  action: str) -> LlmCall:
    user = render(
        "simulate_step",
        env_description_str=env_description,
        current_facts_list_str=format_list(facts),
        current_observation_str=obs,
        history_lines_str=format_lines(history),
        action_to_simulate_str=action,
    )
    return LlmCall(
        system=must_call("simulate_step"),
        user=user,
        function=schemas.SIMULATE_STEP,
        temperature=schemas.PLANNER_TEMPERATURE,
        fields={"obs": obs, "facts": tuple(facts), "history": tuple(history), "action": action},
    )


def value_call(env_description: str, facts: Sequence[str], obs: str, history: Sequence[str],
               gamma: float) -> LlmCall:
    user = render(
        "estimate_value",
        env_description_str=env_description,
        current_facts_list_str=format_list(facts),
        observation_to_evaluate_str=obs,
        history_lines_str=format_lines(history),
        discount_gamma_float=gamma,
    )
    return LlmCall(
        system=must_call("estimate_value"),
        user=user,
        function=schemas.ESTIMATE_VALUE,
        temperature=schemas.PLANNER_TEMPERATURE,
        fields={"obs": obs, "facts": tuple(facts), "history": tuple(history), "gamma": gamma},
    )


def extraction_call(env_description: str, summary, known: Sequence[str]) -> LlmCall:
    user = render(
        "fact_extraction",
        env_description_str=env_description,
        episode_trajectory_summary_str=summary.text,
        current_facts_list_str=format_list(known),
    )
    return LlmCall(
        system=EXPERT_SYSTEM,
        user=user,
        function=schemas.FACT_EXTRACTION,
        temperature=schemas.PLANNER_TEMPERATURE,
        fields={"summary": summary, "known": tuple(known)},
    )


def compression_call(env_description: str, facts: Sequence[str]) -> LlmCall:
    user = render(
        "fact_redundancy_remover",
        env_description_str=env_description,
        current_facts_list_for_compression_str=format_list(facts),
    )
    return LlmCall(
        system=EXPERT_SYSTEM,
        user=user,
        function=schemas.FACT_REDUNDANCY_REMOVER,
        temperature=schemas.PLANNER_TEMPERATURE,
        fields={"facts": tuple(facts)},
    )


def react_call(env_description: str, obs: str, history: Sequence[str], allowed: Sequence[str],
               context: Sequence[str] | None = None, context_title: str = "") -> LlmCall:
    user = render(
        "react_step",
        env_description_str=env_description,
        context_title=context_title if context is not None else "",
        context_lines_str=format_list(context or ()),
        current_observation_str=obs,
        history_lines_str=format_lines(history),
        allowed_actions_list_str=format_actions(allowed),
    )
    return LlmCall(
        system=must_call("react_step"),
        user=user,
        function=schemas.REACT_STEP,
        temperature=schemas.REACT_TEMPERATURE,
        fields={"obs": obs, "history": tuple(history), "allowed": tuple(allowed),
                "context": tuple(context or ())},
    )


def lesson_call(env_description: str, summary, lessons: Sequence[str]) -> LlmCall:
    user = render(
        "reflexion_lesson",
        env_description_str=env_description,
        episode_trajectory_summary_str=summary.text,
        lessons_list_str=format_list(lessons),
    )
    return LlmCall(
        system=EXPERT_SYSTEM,
        user=user,
        function=schemas.REFLEXION_LESSON,
        temperature=schemas.PLANNER_TEMPERATURE,
        fields={"summary": summary, "lessons": tuple(lessons)},
    )
