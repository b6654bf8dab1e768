"""Domain types shared by every other module: facts, history, transitions."""
from __future__ import annotations

import warnings
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, Literal

from lwm.errors import FactWarning, InvalidArgument

FACT_CAPACITY = 200
HISTORY_CAPACITY = 51

HistoryKind = Literal["Obs", "Act"]


def canonical_fact(text: str) -> str:
    """Trim and collapse internal whitespace runs; case is preserved."""
    return " ".join(text.split())


def format_history_line(kind: HistoryKind, text: str) -> str:
    if kind not in ("Obs", "Act"):
        raise InvalidArgument(f"unknown history line kind {kind!r}")
    if not text:
        raise InvalidArgument("history line text must be non-empty")
    return f"{kind}: {text}"


class FactMemory:
    """Bounded, ordered, deduplicated store of atomic facts.

    Duplicates are detected after :func:`canonical_fact`; when the store is full
    the oldest fact is dropped.
    """

    def __init__(self, facts: Iterable[str] = (), capacity: int = FACT_CAPACITY):
        if capacity < 1:
            raise InvalidArgument("fact capacity must be positive")
        self.capacity = capacity
        self._items: deque[str] = deque()
        self._keys: set[str] = set()
        for fact in facts:
            self.insert(fact)

    def insert(self, fact: str) -> bool:
        """Add ``fact``; returns False if it was empty or already known."""
        key = canonical_fact(fact)
        if not key:
            warnings.warn("rejected empty fact", FactWarning, stacklevel=2)
            return False
        if key in self._keys:
            return False
        self._items.append(key)
        self._keys.add(key)
        while len(self._items) > self.capacity:
            self._keys.discard(self._items.popleft())
        return True

    def extend(self, facts: Iterable[str]) -> list[str]:
        """Insert each fact in order; returns those that were actually added."""
        return [canonical_fact(f) for f in facts if self.insert(f)]

    def __contains__(self, fact: object) -> bool:
        return isinstance(fact, str) and canonical_fact(fact) in self._keys

    def __iter__(self) -> Iterator[str]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FactMemory):
            return NotImplemented
        return list(self._items) == list(other._items) and self.capacity == other.capacity

    @property
    def items(self) -> tuple[str, ...]:
        return tuple(self._items)

    def copy(self) -> FactMemory:
        return FactMemory(self._items, capacity=self.capacity)

    def __repr__(self) -> str:
        return f"FactMemory({list(self._items)!r}, capacity={self.capacity})"


def fact_memory_insert(mem: FactMemory, fact: str) -> FactMemory:
    """Functional form of :meth:`FactMemory.insert`; ``mem`` is left untouched."""
    out = mem.copy()
    out.insert(fact)
    return out


class HistoryBuffer:
    """Rolling window of ``"Obs: ..."`` / ``"Act: ..."`` lines. Capacity counts lines."""

    def __init__(self, lines: Iterable[str] = (), capacity: int = HISTORY_CAPACITY):
        if capacity < 1:
            raise InvalidArgument("history capacity must be positive")
        self.capacity = capacity
        self._lines: deque[str] = deque(lines, maxlen=capacity)

    def push(self, kind: HistoryKind, text: str) -> None:
        self._lines.append(format_history_line(kind, text))

    def push_pair(self, action: str, obs: str) -> None:
        self.push("Act", action)
        self.push("Obs", obs)

    def extended(self, action: str, obs: str) -> HistoryBuffer:
        """Copy with an (action, observation) pair appended; used for simulated branches."""
        out = HistoryBuffer(self._lines, capacity=self.capacity)
        out.push_pair(action, obs)
        return out

    def clear(self) -> None:
        self._lines.clear()

    @property
    def lines(self) -> tuple[str, ...]:
        return tuple(self._lines)

    def __len__(self) -> int:
        return len(self._lines)

    def __iter__(self) -> Iterator[str]:
        return iter(self._lines)

    def __repr__(self) -> str:
        return f"HistoryBuffer({list(self._lines)!r}, capacity={self.capacity})"


def history_push_pair(h: HistoryBuffer, action: str, obs: str) -> HistoryBuffer:
    return h.extended(action, obs)


@dataclass(frozen=True)
class Transition:
    obs: str
    action: str
    reward: float
    next_obs: str
    done: bool

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> Transition:
        return cls(
            obs=data["obs"],
            action=data["action"],
            reward=float(data["reward"]),
            next_obs=data["next_obs"],
            done=bool(data["done"]),
        )


@dataclass
class EpisodeBuffer:
    """Transitions of one episode. ``truncated`` marks a step-budget ending."""

    transitions: list[Transition] = field(default_factory=list)
    total_reward: float = 0.0
    truncated: bool = False

    def append(self, t: Transition) -> None:
        self.transitions.append(t)
        self.total_reward += t.reward

    def __len__(self) -> int:
        return len(self.transitions)

    def __iter__(self) -> Iterator[Transition]:
        return iter(self.transitions)

    def to_json(self) -> dict:
        return {
            "transitions": [t.to_json() for t in self.transitions],
            "total_reward": self.total_reward,
            "truncated": self.truncated,
        }

    @classmethod
    def from_json(cls, data: dict) -> EpisodeBuffer:
        buf = cls(truncated=bool(data.get("truncated", False)))
        for t in data["transitions"]:
            buf.append(Transition.from_json(t))
        return buf
