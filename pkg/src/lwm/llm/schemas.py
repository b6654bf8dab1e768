"""Function-call schemas and the request/response value types."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from lwm.errors import ContractError

DEFAULT_MAX_TOKENS = 8512
PLANNER_TEMPERATURE = 0.0
REACT_TEMPERATURE = 0.3

# field type tags
STRING, NUMBER, BOOLEAN, STRING_LIST = "string", "number", "boolean", "string_list"

_JSON_TYPES = {
    STRING: {"type": "string"},
    NUMBER: {"type": "number"},
    BOOLEAN: {"type": "boolean"},
    STRING_LIST: {"type": "array", "items": {"type": "string"}},
}


@dataclass(frozen=True)
class FunctionSchema:
    name: str
    description: str
    fields: tuple[tuple[str, str, str], ...]  # (name, type tag, description)

    @property
    def field_names(self) -> tuple[str, ...]:
        return tuple(f[0] for f in self.fields)

    def to_tool(self) -> dict:
        """OpenAI-style ``tools`` entry."""
        props = {name: {**_JSON_TYPES[kind], "description": desc} for name, kind, desc in self.fields}
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": props,
                    "required": list(self.field_names),
                    "additionalProperties": False,
                },
            },
        }

    def parse(self, arguments: Any) -> LlmResult:
        """Strictly validate decoded tool arguments; any mismatch is a ContractError."""
        if not isinstance(arguments, dict):
            raise ContractError(f"{self.name}: arguments must be an object, got {type(arguments).__name__}")
        expected = set(self.field_names)
        got = set(arguments)
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise ContractError(f"{self.name}: missing fields {missing}, unexpected fields {extra}")
        out = {}
        for name, kind, _ in self.fields:
            out[name] = _coerce(self.name, name, kind, arguments[name])
        thought = out.pop("thought")
        return LlmResult(function=self.name, thought=thought, arguments=out)


def _coerce(fn: str, name: str, kind: str, value: Any):
    bad = ContractError(f"{fn}.{name}: expected {kind}, got {value!r}")
    if kind == STRING:
        if not isinstance(value, str):
            raise bad
        return value
    if kind == NUMBER:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad
        value = float(value)
        if not math.isfinite(value):
            raise bad
        return value
    if kind == BOOLEAN:
        if not isinstance(value, bool):
            raise bad
        return value
    if kind == STRING_LIST:
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise bad
        return list(value)
    raise ContractError(f"unknown field type {kind}")


_THOUGHT = ("thought", STRING, "Your reasoning.")

PROPOSE_ACTIONS = FunctionSchema(
    "propose_actions",
    "Propose the most promising next actions.",
    (_THOUGHT, ("actions", STRING_LIST, "The proposed actions.")),
)
SIMULATE_STEP = FunctionSchema(
    "simulate_step",
    "Predict the outcome of one action.",
    (
        _THOUGHT,
        ("next_observation", STRING, "The predicted (perhaps latent) observation after the action."),
        ("reward", NUMBER, "The predicted immediate reward after the action."),
        ("done", BOOLEAN, "True if the resulting state ends the episode."),
    ),
)
ESTIMATE_VALUE = FunctionSchema(
    "estimate_value",
    "Estimate the discounted future return from an observation.",
    (_THOUGHT, ("value", NUMBER, "The estimated state value.")),
)
FACT_EXTRACTION = FunctionSchema(
    "fact_extraction",
    "Extract new atomic facts from an episode.",
    (_THOUGHT, ("new_facts", STRING_LIST, "Newly extracted atomic facts; empty if none.")),
)
FACT_REDUNDANCY_REMOVER = FunctionSchema(
    "fact_redundancy_remover",
    "Return the fact list with redundant entries removed.",
    (_THOUGHT, ("all_facts", STRING_LIST, "The refined list of atomic facts.")),
)
REACT_STEP = FunctionSchema(
    "react_step",
    "Reason about the situation, then choose one action.",
    (_THOUGHT, ("action", STRING, "The action to take, exactly as listed.")),
)
REFLEXION_LESSON = FunctionSchema(
    "reflexion_lesson",
    "Write one short actionable lesson from an episode.",
    (_THOUGHT, ("lesson", STRING, "One lesson, at most 20 words.")),
)

SCHEMAS = {
    s.name: s
    for s in (
        PROPOSE_ACTIONS,
        SIMULATE_STEP,
        ESTIMATE_VALUE,
        FACT_EXTRACTION,
        FACT_REDUNDANCY_REMOVER,
        REACT_STEP,
        REFLEXION_LESSON,
    )
}


@dataclass(frozen=True)
class LlmCall:
    """One single-shot function-call request.

    ``fields`` carries the structured values the prompt was rendered from. Live
    backends ignore it; the oracle reads it instead of parsing prose.
    """

    system: str
    user: str
    function: FunctionSchema
    temperature: float = PLANNER_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    fields: dict = field(default_factory=dict, compare=False, hash=False)


@dataclass(frozen=True)
class LlmResult:
    function: str
    thought: str
    arguments: dict

    def __getitem__(self, key: str):
        return self.arguments[key]

    def to_json(self) -> dict:
        return {"thought": self.thought, **self.arguments}

    @classmethod
    def from_json(cls, function: str, data: dict) -> LlmResult:
        if function not in SCHEMAS:
            raise ContractError(f"unknown function {function!r}")
        return SCHEMAS[function].parse(data)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)
