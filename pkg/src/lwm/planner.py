"""Depth-limited lookahead over a language-model world model, with per-decision memoization."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import random
import threading
import warnings
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Sequence

from lwm.core import FactMemory, HistoryBuffer, canonical_fact
from lwm.envs.base import EnvSpec
from lwm.errors import AgentWarning, InvalidArgument, LwmError, MissingCassette, PlanningError
from lwm.llm import prompts
from lwm.llm.backends import Backend, complete
from lwm.llm.schemas import LlmResult

log = logging.getLogger(__name__)

PROPOSE, SIMULATE, VALUE = "propose", "simulate", "value"


@dataclass(frozen=True)
class PlanConfig:
    depth: int = 3
    branch: int = 4
    gamma: float = 0.99
    step_penalty: float = 0.01
    workers: int = 1  # >1 evaluates root branches on a thread pool

    def __post_init__(self):
        if self.depth < 1:
            raise InvalidArgument("search depth must be >= 1")
        if self.branch < 1:
            raise InvalidArgument("branch factor must be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidArgument("gamma must lie in [0, 1)")
        if self.step_penalty < 0:
            raise InvalidArgument("step penalty must be non-negative")
        if self.workers < 1:
            raise InvalidArgument("workers must be >= 1")


def compute_q(r_prime: float, step_penalty: float, gamma: float, v_next: float) -> float:
    return r_prime - step_penalty + gamma * v_next


def facts_digest(facts: Iterable[str]) -> str:
    canon = sorted(canonical_fact(f) for f in facts)
    return hashlib.sha256(json.dumps(canon).encode("utf-8")).hexdigest()


def cache_key(kind: str, obs: str, action: str | None, history: Sequence[str], digest: str) -> str:
    if kind not in (PROPOSE, SIMULATE, VALUE):
        raise InvalidArgument(f"unknown cache key kind {kind!r}")
    payload = json.dumps([kind, obs, action, list(history), digest])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class TerminalSet:
    """Observations known (from real experience) to end an episode."""

    def __init__(self, items: Iterable[str] = ()):
        self._items = set(items)
        self._lock = threading.Lock()

    def add(self, obs: str) -> None:
        with self._lock:
            self._items.add(obs)

    def __contains__(self, obs: object) -> bool:
        return obs in self._items

    def __len__(self) -> int:
        return len(self._items)


@dataclass(frozen=True)
class TraceRecord:
    depth: int
    obs: str
    action: str
    r: float | None
    v_next: float | None
    q: float

    def to_json(self) -> dict:
        d = asdict(self)
        if math.isinf(self.q):
            d["q"] = None
        return d


class _PlanCache:
    """One plan call's memo table; each key is computed exactly once, even under threads."""

    def __init__(self):
        self.entries: dict[str, Future] = {}
        self.lock = threading.Lock()

    def get(self, key: str, compute: Callable[[], LlmResult]) -> LlmResult:
        with self.lock:
            fut = self.entries.get(key)
            owner = fut is None
            if owner:
                fut = Future()
                self.entries[key] = fut
        if owner:
            try:
                fut.set_result(compute())
            except BaseException as exc:  # stored and re-raised for every requester
                fut.set_exception(exc)
        return fut.result()

    def __len__(self) -> int:
        return len(self.entries)


class Planner:
    def __init__(
        self,
        backend: Backend,
        spec: EnvSpec,
        cfg: PlanConfig = PlanConfig(),
        rng: random.Random | None = None,
        terminal: TerminalSet | None = None,
        trace: bool = False,
    ):
        self.backend = backend
        self.spec = spec
        self.cfg = cfg
        self.rng = rng or random.Random(0)
        self.terminal = terminal if terminal is not None else TerminalSet()
        self.trace_enabled = trace
        self.trace: list[TraceRecord] = []
        self._trace_lock = threading.Lock()
        self._cache = _PlanCache()
        self._facts: tuple[str, ...] = ()
        self._digest = facts_digest(())
        self.last_q: list[tuple[str, float]] = []

    # -- memoized backend calls ---------------------------------------------

    def _call(self, kind: str, obs: str, action: str | None, history: HistoryBuffer) -> LlmResult:
        lines = history.lines
        key = cache_key(kind, obs, action, lines, self._digest)
        desc, facts = self.spec.description, self._facts
        if kind == PROPOSE:
            call = prompts.propose_call(desc, facts, obs, lines, self.spec.allowed_actions, self.cfg.branch)
        elif kind == SIMULATE:
            call = prompts.simulate_call(desc, facts, obs, lines, action)
        else:
            call = prompts.value_call(desc, facts, obs, lines, self.cfg.gamma)
        return self._cache.get(key, lambda: complete(self.backend, call))

    def _propose(self, obs: str, history: HistoryBuffer) -> list[str]:
        raw = self._call(PROPOSE, obs, None, history)["actions"]
        allowed = self.spec.allowed_actions
        out: list[str] = []
        for item in raw:
            name = item.strip()
            if name not in allowed and name.isdigit() and int(name) < len(allowed):
                name = allowed[int(name)]
            if name in allowed and name not in out:
                out.append(name)
            elif name not in allowed:
                log.debug("dropping proposed action %r (not allowed)", item)
        return out[: self.cfg.branch]

    def _value(self, obs: str, history: HistoryBuffer) -> float:
        return self._call(VALUE, obs, None, history)["value"]

    # -- search ---------------------------------------------------------------

    def _q(self, obs: str, history: HistoryBuffer, action: str, depth: int) -> float:
        sim = self._call(SIMULATE, obs, action, history)
        nxt, r, done = sim["next_observation"], sim["reward"], sim["done"]
        if done:
            v_next = 0.0
        else:
            v_next = self._node_value(nxt, history.extended(action, nxt), depth - 1)
        q = compute_q(r, self.cfg.step_penalty, self.cfg.gamma, v_next)
        if self.trace_enabled:
            with self._trace_lock:
                self.trace.append(TraceRecord(depth, obs, action, r, v_next, q))
        return q

    def _safe_q(self, obs: str, history: HistoryBuffer, action: str, depth: int) -> float:
        try:
            return self._q(obs, history, action, depth)
        except MissingCassette:
            raise  # a replay mismatch is a setup error, not a flaky branch
        except LwmError as exc:
            warnings.warn(f"branch {action!r} at depth {depth} failed: {exc}", AgentWarning, stacklevel=3)
            if self.trace_enabled:
                with self._trace_lock:
                    self.trace.append(TraceRecord(depth, obs, action, None, None, -math.inf))
            return -math.inf

    def estimate_node_value(self, obs: str, history: HistoryBuffer, facts: FactMemory | Sequence[str] = (),
                            depth: int = 0) -> float:
        """Backed-up value of ``obs`` searching ``depth`` more levels (fresh memo table)."""
        if depth < 0:
            raise InvalidArgument("depth must be >= 0")
        self._begin(facts.items if isinstance(facts, FactMemory) else tuple(facts))
        return self._node_value(obs, history, depth)

    def _node_value(self, obs: str, history: HistoryBuffer, depth: int) -> float:
        if depth <= 0 or obs in self.terminal:
            return self._value(obs, history)
        actions = self._propose(obs, history)
        if not actions:
            return self._value(obs, history)
        return max(self._safe_q(obs, history, a, depth) for a in actions)

    def _begin(self, facts) -> None:
        self._facts = tuple(facts)
        self._digest = facts_digest(self._facts)
        self._cache = _PlanCache()

    def plan_action(self, obs: str, history: HistoryBuffer, facts: FactMemory | Sequence[str] = ()) -> str:
        facts = facts.items if isinstance(facts, FactMemory) else tuple(facts)
        self._begin(facts)
        self.last_q = []
        allowed = self.spec.allowed_actions
        try:
            actions = self._propose(obs, history)
        except MissingCassette:
            raise
        except LwmError as exc:
            warnings.warn(f"root proposal failed ({exc}); acting randomly", AgentWarning, stacklevel=2)
            actions = []
        if not actions:
            return self.rng.choice(allowed)
        depth = self.cfg.depth
        if self.cfg.workers > 1 and len(actions) > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
                qs = list(pool.map(lambda a: self._safe_q(obs, history, a, depth), actions))
        else:
            qs = [self._safe_q(obs, history, a, depth) for a in actions]
        self.last_q = list(zip(actions, qs))
        if all(q == -math.inf for q in qs):
            raise PlanningError("every proposed branch failed")
        best = 0
        for i, q in enumerate(qs):
            if q > qs[best]:
                best = i
        return actions[best]

    @property
    def cache_size(self) -> int:
        return len(self._cache)
