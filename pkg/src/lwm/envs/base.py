from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol


@dataclass(frozen=True)
class EnvSpec:
    name: str
    allowed_actions: tuple[str, ...]
    description: str
    max_steps: int

    def __post_init__(self):
        if not self.allowed_actions:
            raise ValueError("allowed_actions must be non-empty")
        if not self.description:
            raise ValueError("description must be non-empty")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class StepResult:
    obs: str
    reward: float
    done: bool
    truncated: bool = False


class Env(Protocol):
    spec: EnvSpec

    def reset(self) -> str: ...

    def step(self, action) -> StepResult: ...

    def observation(self) -> str: ...


def env_description(spec: EnvSpec) -> str:
    return spec.description
