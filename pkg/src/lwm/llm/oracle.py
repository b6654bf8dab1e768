"""Deterministic scripted stand-in for the LLM.

The oracle answers every function call from an explicit environment model. In
``full`` visibility it uses the true dynamics; in ``facts`` visibility it uses a
belief world where everything not asserted by a fact takes its default value
(FrozenLake: unknown cells are ice; CrafterMini: unknown cells are grass). That
mimics a language model that knows the rules and exactly the facts it was given.
"""
from __future__ import annotations

import re
import threading
from collections import OrderedDict
from dataclasses import replace
from typing import Sequence

import numpy as np

from lwm.envs import crafter as cm
from lwm.envs import frozenlake as fl
from lwm.errors import ContractError, EstimationError, InvalidArgument, SimulationError
from lwm.llm.schemas import LlmCall, LlmResult
from lwm.theory import TabularMdp, value_iteration

FULL, FACTS = "full", "facts"
ORACLE_TOL = 1e-12

_HOLE_PATTERNS = (
    re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)\s+is\s+a\s+hole\b", re.I),
    re.compile(r"hole_at\(\s*(?:row\s*=\s*)?(\d+)\s*,\s*(?:col\s*=\s*)?(\d+)\s*\)", re.I),
    re.compile(r"hole\s*@\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)", re.I),
)
_ICE_RE = re.compile(r"^\(\s*(\d+)\s*,\s*(\d+)\s*\)\s+is\s+ice\.?$", re.I)
_GOAL_RE = re.compile(r"^\(\s*(\d+)\s*,\s*(\d+)\s*\)\s+is\s+the\s+goal\.?$", re.I)
_LESSON_RE = re.compile(r"Avoid moving (\w+) from \((\d+),\s*(\d+)\)")
_CRAFTER_FACT_RE = re.compile(r"^(tree|stone|iron|water|grass) at \((\d+),\s*(\d+)\)\.?$", re.I)


def hole_cells(facts: Sequence[str]) -> set[tuple[int, int]]:
    cells = set()
    for fact in facts:
        for pat in _HOLE_PATTERNS:
            m = pat.search(fact)
            if m:
                cells.add((int(m.group(1)), int(m.group(2))))
                break
    return cells


def fact_signature(fact: str):
    """Spelling-independent identity of a fact, used by the oracle compressor."""
    text = " ".join(fact.split())
    for pat in _HOLE_PATTERNS:
        m = pat.search(text)
        if m:
            return ("hole", int(m.group(1)), int(m.group(2)))
    for tag, pat in (("ice", _ICE_RE), ("goal", _GOAL_RE)):
        m = pat.match(text)
        if m:
            return (tag, int(m.group(1)), int(m.group(2)))
    m = _CRAFTER_FACT_RE.match(text)
    if m:
        return (m.group(1).lower(), int(m.group(2)), int(m.group(3)))
    return ("text", text)


def top_k_in_order(actions: Sequence[str], q: Sequence[float], k: int) -> list[str]:
    """Best ``k`` actions by ``q`` (earlier wins ties), returned in the original order."""
    if k >= len(actions):
        return list(actions)
    ranked = sorted(range(len(actions)), key=lambda i: -q[i])[:k]
    return [actions[i] for i in sorted(ranked)]


def argmax_first(values: Sequence[float]) -> int:
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return best


class _Lru:
    def __init__(self, size: int = 4096):
        self.size = size
        self.data: OrderedDict = OrderedDict()
        self.lock = threading.Lock()

    def get(self, key):
        with self.lock:
            if key in self.data:
                self.data.move_to_end(key)
                return self.data[key]
        return None

    def put(self, key, value):
        with self.lock:
            self.data[key] = value
            self.data.move_to_end(key)
            while len(self.data) > self.size:
                self.data.popitem(last=False)


# -- FrozenLake ---------------------------------------------------------------


class FrozenLakeOracle:
    def __init__(self, board: fl.FrozenLakeBoard):
        self.board = board
        self._values = _Lru()

    @property
    def actions(self) -> tuple[str, ...]:
        return fl.ACTIONS

    def world(self, facts: Sequence[str] | None) -> fl.FrozenLakeBoard:
        if facts is None:
            return self.board
        return self.belief_board(hole_cells(facts))

    def belief_board(self, holes: set[tuple[int, int]]) -> fl.FrozenLakeBoard:
        n = self.board.n
        rows = []
        for r in range(n):
            row = []
            for c in range(n):
                if (r, c) == (0, 0):
                    row.append(fl.START)
                elif (r, c) == (n - 1, n - 1):
                    row.append(fl.GOAL)
                else:
                    row.append(fl.HOLE if (r, c) in holes else fl.ICE)
            rows.append("".join(row))
        return fl.FrozenLakeBoard(n=n, tiles=tuple(rows))

    def _parse(self, obs: str, err=SimulationError):
        try:
            pos, terrain = fl.parse_obs(obs)
        except SimulationError as exc:
            raise err(str(exc)) from exc
        if not (0 <= pos[0] < self.board.n and 0 <= pos[1] < self.board.n):
            raise err(f"position {pos} is outside the {self.board.n}x{self.board.n} board")
        return pos, terrain

    def simulate(self, obs: str, action: str, facts) -> tuple[str, float, bool]:
        pos, terrain = self._parse(obs)
        if action not in fl.MOVES:
            raise SimulationError(f"unknown FrozenLake action {action!r}")
        if terrain in ("hole", "goal"):
            return obs, 0.0, True
        board = self.world(facts)
        nxt, reward, done = fl.move(board, pos, action)
        return fl.render_obs(board, nxt), reward, done

    def value_table(self, board: fl.FrozenLakeBoard, gamma: float, penalty: float) -> np.ndarray:
        key = (board.tiles, gamma, penalty)
        cached = self._values.get(key)
        if cached is not None:
            return cached
        n = board.n
        S, A = n * n, len(fl.ACTIONS)
        T = np.zeros((S, A, S))
        R = np.zeros((S, A))
        for r in range(n):
            for c in range(n):
                s = r * n + c
                if board.tile((r, c)) in (fl.HOLE, fl.GOAL):
                    T[s, :, s] = 1.0
                    continue
                for a, act in enumerate(fl.ACTIONS):
                    (r2, c2), rew, _ = fl.move(board, (r, c), act)
                    T[s, a, r2 * n + c2] = 1.0
                    R[s, a] = rew - penalty
        v = value_iteration(TabularMdp(T=T, R=R, gamma=gamma), tol=ORACLE_TOL).v
        self._values.put(key, v)
        return v

    def value(self, obs: str, facts, gamma: float, penalty: float) -> float:
        pos, terrain = self._parse(obs, EstimationError)
        if terrain in ("hole", "goal"):
            return 0.0
        board = self.world(facts)
        return float(self.value_table(board, gamma, penalty)[pos[0] * board.n + pos[1]])

    def one_step_q(self, obs: str, actions: Sequence[str], facts, gamma: float, penalty: float) -> list[float]:
        out = []
        for a in actions:
            nxt, r, done = self.simulate(obs, a, facts)
            out.append(r - penalty + (0.0 if done else gamma * self.value(nxt, facts, gamma, penalty)))
        return out

    def extract(self, summary, known: Sequence[str]) -> list[str]:
        found: list[str] = []
        for t in summary.transitions:
            pos, terrain = fl.parse_obs(t.next_obs)
            if terrain == "hole":
                found.append(f"({pos[0]},{pos[1]}) is a hole.")
        if summary.outcome == "SUCCESS":
            for t in summary.transitions:
                pos, terrain = fl.parse_obs(t.next_obs)
                if terrain == "ice":
                    found.append(f"({pos[0]},{pos[1]}) is ice.")
                elif terrain == "goal":
                    found.append(f"({pos[0]},{pos[1]}) is the goal.")
        return _new_only(found, known)

    def beliefs_from_context(self, context: Sequence[str]) -> list[str]:
        """Turn facts and hole lessons into hole facts for a belief board."""
        facts = list(context)
        for line in context:
            m = _LESSON_RE.search(line)
            if m and m.group(1) in fl.MOVES:
                pos = (int(m.group(2)), int(m.group(3)))
                if 0 <= pos[0] < self.board.n and 0 <= pos[1] < self.board.n:
                    (r, c), _, _ = fl.move(self.board_shape(), pos, m.group(1))
                    facts.append(f"({r},{c}) is a hole.")
        return facts

    def board_shape(self) -> fl.FrozenLakeBoard:
        return self.belief_board(set())

    def lesson(self, summary) -> str:
        last = summary.transitions[-1]
        if summary.outcome == "SUCCESS":
            return "Repeat this successful action sequence: " + ", ".join(t.action for t in summary.transitions) + "."
        pos, terrain = fl.parse_obs(last.next_obs)
        if terrain == "hole":
            (r, c), _ = fl.parse_obs(last.obs)
            return f"Avoid moving {last.action} from ({r},{c}); it leads into a hole."
        n = self.board.n
        return f"Move steadily toward the goal at ({n - 1},{n - 1}) instead of wandering."


# -- CrafterMini --------------------------------------------------------------


class CrafterValueSolver:
    """Exact optimal values for CrafterMini with the planner's step penalty folded in.

    A "level" fixes grid, inventory and tools; inside a level only moves change
    the state and every move costs ``c = -1 - penalty``. All tiles are walkable and
    the grid is a torus, so the cheapest way to reach cell q from p takes the
    toroidal Manhattan distance d(p, q) steps. The value of p is then

        max( c / (1 - gamma),  max_q  c (1 - gamma^d) / (1 - gamma) + gamma^d X(q) )

    where X(q) is the best level-changing action at q (a useful collect or a
    craft) followed by the next level's value. Collecting beyond what the
    remaining recipes need is never better than idling, so those exits are skipped.
    """

    def __init__(self, n: int, gamma: float, penalty: float):
        self.n = n
        self.gamma = gamma
        self.penalty = penalty
        self.cost = cm.STEP_COST - penalty
        idx = np.arange(n * n)
        rows, cols = idx // n, idx % n
        dr = np.abs(rows[:, None] - rows[None, :])
        dc = np.abs(cols[:, None] - cols[None, :])
        dist = np.minimum(dr, n - dr) + np.minimum(dc, n - dc)
        self.discount = gamma ** dist.astype(float)
        self.path_cost = self.cost * (1.0 - self.discount) / (1.0 - gamma)
        self.idle = self.cost / (1.0 - gamma)
        self.memo: dict = {}
        self.lock = threading.RLock()

    @staticmethod
    def level_key(s: cm.CrafterState):
        return (s.grid, s.wood, s.stone, s.iron, s.wood_pickaxe, s.stone_pickaxe, s.iron_pickaxe)

    @staticmethod
    def useful(s: cm.CrafterState, resource: str) -> bool:
        if s.iron_pickaxe:
            return False
        later_sp = not s.stone_pickaxe
        need = {
            "wood": (0 if s.wood_pickaxe else 3) + (1 if later_sp else 0),
            "stone": 3 if later_sp else 0,
            "iron": 3,
        }[resource]
        return getattr(s, resource) < need

    def values(self, s: cm.CrafterState) -> np.ndarray:
        """Optimal value of every agent position in the level of ``s``."""
        key = self.level_key(s)
        with self.lock:
            hit = self.memo.get(key)
        if hit is not None:
            return hit
        n = self.n
        if s.iron_pickaxe:
            out = np.zeros(n * n)
        else:
            x = self._exits(s, key)
            v = self.path_cost + self.discount * x[None, :]
            out = np.maximum(v.max(axis=1), self.idle)
        with self.lock:
            self.memo[key] = out
        return out

    def _exits(self, s: cm.CrafterState, key) -> np.ndarray:
        n = self.n
        x = np.full(n * n, -np.inf)
        # crafting does not depend on position, so one probe covers every cell
        for a in (5, 6, 7):
            probe = replace(s, pos=(0, 0))
            nxt, r, done = cm.transition(probe, a)
            if self.level_key(nxt) == key:
                continue
            if done:
                x = np.maximum(x, r - self.penalty)
            else:
                x = np.maximum(x, r - self.penalty + self.gamma * self.values(nxt))
        for q in range(n * n):
            pos = (q // n, q % n)
            ch = s.tile(pos)
            if ch in cm.RESOURCE_OF and self.useful(s, cm.RESOURCE_OF[ch]):
                nxt, r, _ = cm.transition(replace(s, pos=pos), 4)
                x[q] = max(x[q], r - self.penalty + self.gamma * self.values(nxt)[q])
        return x

    def value(self, s: cm.CrafterState) -> float:
        if s.iron_pickaxe:
            return 0.0
        return float(self.values(s)[s.pos[0] * self.n + s.pos[1]])


class CrafterOracle:
    def __init__(self, world: cm.CrafterWorld, env: cm.CrafterEnv | None = None):
        self.world_def = world
        self.env = env
        self._solvers: dict = {}
        self._lock = threading.Lock()

    @property
    def actions(self) -> tuple[str, ...]:
        return cm.ACTIONS

    def bind(self, env: cm.CrafterEnv) -> None:
        self.env = env

    def solver(self, gamma: float, penalty: float) -> CrafterValueSolver:
        with self._lock:
            key = (gamma, penalty)
            if key not in self._solvers:
                self._solvers[key] = CrafterValueSolver(self.world_def.n, gamma, penalty)
            return self._solvers[key]

    def state(self, obs: str, facts, err=SimulationError) -> cm.CrafterState:
        try:
            p = cm.parse_obs(obs)
        except SimulationError as exc:
            raise err(str(exc)) from exc
        n = self.world_def.n
        if not (0 <= p.pos[0] < n and 0 <= p.pos[1] < n):
            raise err(f"position {p.pos} is outside the {n}x{n} world")
        tools = {name: name in p.tools for name in ("wood_pickaxe", "stone_pickaxe", "iron_pickaxe")}
        if p.grid is not None:
            if len(p.grid) != n or any(len(row) != n for row in p.grid):
                raise err("latent map has the wrong size")
            grid = p.grid
        elif facts is None:
            if self.env is not None and self.env.observation() == obs.strip():
                return self.env.state
            raise err("full-visibility oracle cannot recover the map from this observation")
        else:
            grid = self.belief_grid(facts, p)
        return cm.CrafterState(grid=grid, pos=p.pos, wood=p.wood, stone=p.stone, iron=p.iron, **tools)

    def belief_grid(self, facts: Sequence[str], p: cm.ParsedObs) -> tuple[str, ...]:
        n = self.world_def.n
        cells = [["g"] * n for _ in range(n)]
        for fact in facts:
            m = _CRAFTER_FACT_RE.match(" ".join(fact.split()))
            if m:
                r, c = int(m.group(2)), int(m.group(3))
                if 0 <= r < n and 0 <= c < n:
                    cells[r][c] = cm.TILE_CODES[m.group(1).lower()]
        r, c = p.pos
        cells[r][c] = p.tile
        for name, (dr, dc) in zip(("north", "south", "east", "west"), (cm.DIRS[i] for i in range(4))):
            cells[(r + dr) % n][(c + dc) % n] = p.neighbours[name]
        return tuple("".join(row) for row in cells)

    def simulate(self, obs: str, action: str, facts) -> tuple[str, float, bool]:
        s = self.state(obs, facts)
        if s.iron_pickaxe:
            return obs, 0.0, True
        try:
            nxt, reward, done = cm.transition(s, action)
        except InvalidArgument as exc:
            raise SimulationError(str(exc)) from exc
        return cm.render_latent(nxt), reward, done

    def value(self, obs: str, facts, gamma: float, penalty: float) -> float:
        s = self.state(obs, facts, EstimationError)
        return self.solver(gamma, penalty).value(s)

    def one_step_q(self, obs: str, actions: Sequence[str], facts, gamma: float, penalty: float) -> list[float]:
        out = []
        for a in actions:
            nxt, r, done = self.simulate(obs, a, facts)
            out.append(r - penalty + (0.0 if done else gamma * self.value(nxt, facts, gamma, penalty)))
        return out

    def extract(self, summary, known: Sequence[str]) -> list[str]:
        found = []
        for t in summary.transitions:
            for obs in (t.obs, t.next_obs):
                p = cm.parse_obs(obs)
                if p.tile in cm.RESOURCE_OF:
                    found.append(f"{cm.TILE_NAMES[p.tile]} at ({p.pos[0]},{p.pos[1]}).")
        return _new_only(found, known)

    def beliefs_from_context(self, context: Sequence[str]) -> list[str]:
        return list(context)

    def lesson(self, summary) -> str:
        if summary.outcome == "SUCCESS":
            return "Keep the same plan: gather wood, stone and iron, crafting each pickaxe as soon as possible."
        return "Collect three wood, craft a wood pickaxe, then three stone and three iron before crafting."


def _new_only(found: Sequence[str], known: Sequence[str]) -> list[str]:
    seen = {fact_signature(k) for k in known}
    out = []
    for fact in found:
        sig = fact_signature(fact)
        if sig not in seen:
            seen.add(sig)
            out.append(fact)
    return out


def oracle_compress(facts: Sequence[str]) -> list[str]:
    seen = set()
    out = []
    for fact in facts:
        sig = fact_signature(fact)
        if sig not in seen:
            seen.add(sig)
            out.append(fact)
    return out


# -- backend ------------------------------------------------------------------


class OracleBackend:
    """Answers every schema from an explicit model; see module docstring."""

    def __init__(self, model, visibility: str = FULL, gamma: float = 0.99, step_penalty: float = 0.01):
        if visibility not in (FULL, FACTS):
            raise InvalidArgument("visibility must be 'full' or 'facts'")
        self.model = model
        self.visibility = visibility
        self.gamma = gamma
        self.step_penalty = step_penalty
        self.thought = "oracle: exact dynamics" if visibility == FULL else "oracle: belief-world dynamics"

    def _facts(self, call: LlmCall):
        return None if self.visibility == FULL else tuple(call.fields.get("facts", ()))

    def _need(self, call: LlmCall, *names):
        missing = [n for n in names if n not in call.fields]
        if missing:
            raise ContractError(f"oracle needs structured fields {missing} for {call.function.name}")
        return [call.fields[n] for n in names]

    def complete(self, call: LlmCall) -> LlmResult:
        name = call.function.name
        m = self.model
        if name == "simulate_step":
            obs, action = self._need(call, "obs", "action")
            nxt, reward, done = m.simulate(obs, action, self._facts(call))
            args = {"next_observation": nxt, "reward": reward, "done": done}
        elif name == "estimate_value":
            (obs,) = self._need(call, "obs")
            gamma = float(call.fields.get("gamma", self.gamma))
            args = {"value": m.value(obs, self._facts(call), gamma, self.step_penalty)}
        elif name == "propose_actions":
            obs, allowed, branch = self._need(call, "obs", "allowed", "branch")
            actions = [a for a in m.actions if a in allowed]
            if branch < len(actions):
                q = m.one_step_q(obs, actions, self._facts(call), self.gamma, self.step_penalty)
                actions = top_k_in_order(actions, q, branch)
            args = {"actions": actions}
        elif name == "fact_extraction":
            summary, known = self._need(call, "summary", "known")
            args = {"new_facts": m.extract(summary, known)}
        elif name == "fact_redundancy_remover":
            (facts,) = self._need(call, "facts")
            args = {"all_facts": oracle_compress(facts)}
        elif name == "react_step":
            obs, allowed, context = self._need(call, "obs", "allowed", "context")
            beliefs = m.beliefs_from_context(context)
            actions = [a for a in m.actions if a in allowed] or list(allowed)
            q = m.one_step_q(obs, actions, beliefs, self.gamma, self.step_penalty)
            args = {"action": actions[argmax_first(q)]}
        elif name == "reflexion_lesson":
            (summary,) = self._need(call, "summary")
            args = {"lesson": m.lesson(summary)}
        else:
            raise ContractError(f"oracle does not implement {name}")
        return call.function.parse({"thought": self.thought, **args})


def oracle_for(env, visibility: str = FULL, gamma: float = 0.99, step_penalty: float = 0.01) -> OracleBackend:
    """Build an oracle backend bound to a FrozenLakeEnv or CrafterEnv instance."""
    if isinstance(env, fl.FrozenLakeEnv):
        model = FrozenLakeOracle(env.board)
    elif isinstance(env, cm.CrafterEnv):
        model = CrafterOracle(env.world, env)
    else:
        raise InvalidArgument(f"no oracle model for {type(env).__name__}")
    return OracleBackend(model, visibility, gamma, step_penalty)
