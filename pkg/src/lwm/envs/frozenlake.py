"""Procedurally generated, deterministic text FrozenLake."""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from lwm.envs.base import EnvSpec, StepResult
from lwm.envs.rng import SplitMix64
from lwm.errors import InvalidArgument, ProtocolViolation, SimulationError

START, ICE, HOLE, GOAL = "S", ".", "H", "G"
TERRAIN = {START: "start", ICE: "ice", HOLE: "hole", GOAL: "goal"}
# Canonical order; the oracle proposer enumerates in this order too.
ACTIONS = ("right", "down", "left", "up")
MOVES = {"right": (0, 1), "down": (1, 0), "left": (0, -1), "up": (-1, 0)}

OBS_RE = re.compile(r"^You are at \((\d+), (\d+)\) on (start|ice|hole|goal)\.")

Pos = tuple[int, int]


@dataclass(frozen=True)
class FrozenLakeBoard:
    n: int
    tiles: tuple[str, ...]  # one string per row, chars from "S.HG"
    hole_density: float = 0.0
    seed: int = 0

    @property
    def start(self) -> Pos:
        return (0, 0)

    @property
    def goal(self) -> Pos:
        return (self.n - 1, self.n - 1)

    def tile(self, pos: Pos) -> str:
        return self.tiles[pos[0]][pos[1]]

    def holes(self) -> list[Pos]:
        return [(r, c) for r in range(self.n) for c in range(self.n) if self.tiles[r][c] == HOLE]

    def to_text(self) -> str:
        return "\n".join(" ".join(row) for row in self.tiles)


def safe_corridor(n: int) -> list[Pos]:
    """Staircase alternating right/down from (0,0) to (n-1,n-1)."""
    r = c = 0
    path = [(0, 0)]
    while (r, c) != (n - 1, n - 1):
        if c <= r and c < n - 1:
            c += 1
        else:
            r += 1
        path.append((r, c))
    return path


def gen_frozen_lake(n: int, hole_density: float, seed: int) -> FrozenLakeBoard:
    if n < 2:
        raise InvalidArgument("FrozenLake needs n >= 2")
    if not 0.0 <= hole_density <= 1.0:
        raise InvalidArgument("hole_density must lie in [0, 1]")
    rng = SplitMix64(seed)
    safe = set(safe_corridor(n))
    rows = []
    for r in range(n):
        row = []
        for c in range(n):
            if (r, c) == (0, 0):
                row.append(START)
            elif (r, c) == (n - 1, n - 1):
                row.append(GOAL)
            elif (r, c) in safe:
                row.append(ICE)
            else:
                row.append(HOLE if rng.random() < hole_density else ICE)
        rows.append("".join(row))
    return FrozenLakeBoard(n=n, tiles=tuple(rows), hole_density=hole_density, seed=seed)


def is_solvable(board: FrozenLakeBoard) -> bool:
    """BFS over 4-neighbour non-hole tiles from start to goal."""
    n = board.n
    seen = {board.start}
    queue = deque([board.start])
    while queue:
        r, c = queue.popleft()
        if (r, c) == board.goal:
            return True
        for dr, dc in MOVES.values():
            nxt = (r + dr, c + dc)
            if 0 <= nxt[0] < n and 0 <= nxt[1] < n and nxt not in seen and board.tile(nxt) != HOLE:
                seen.add(nxt)
                queue.append(nxt)
    return False


def parse_board(text: str) -> FrozenLakeBoard:
    """Load the plain-text fixture format: rows of space-separated ``S . H G`` cells."""
    rows = ["".join(line.split()) for line in text.strip().splitlines() if line.strip()]
    n = len(rows)
    if n < 2 or any(len(row) != n for row in rows):
        raise InvalidArgument("board fixture must be a square grid with n >= 2")
    if any(ch not in TERRAIN for row in rows for ch in row):
        raise InvalidArgument("board cells must be one of S . H G")
    if rows[0][0] != START or rows[-1][-1] != GOAL:
        raise InvalidArgument("board must have S at (0,0) and G at (n-1,n-1)")
    if sum(row.count(START) for row in rows) != 1 or sum(row.count(GOAL) for row in rows) != 1:
        raise InvalidArgument("board must have exactly one S and one G")
    holes = sum(row.count(HOLE) for row in rows)
    board = FrozenLakeBoard(n=n, tiles=tuple(rows), hole_density=holes / max(1, n * n - 2))
    if not is_solvable(board):
        raise InvalidArgument("board fixture has no path from start to goal")
    return board


def load_board(path: str | Path) -> FrozenLakeBoard:
    return parse_board(Path(path).read_text())


# The 4x4 board from the published case study (grid_4_h_9_s_0).
CASE_STUDY_BOARD = parse_board(
    """
    S . H H
    H . . H
    H H . .
    H H H G
    """
)


def render_obs(board: FrozenLakeBoard, pos: Pos) -> str:
    return f"You are at ({pos[0]}, {pos[1]}) on {TERRAIN[board.tile(pos)]}."


def parse_obs(obs: str) -> tuple[Pos, str]:
    m = OBS_RE.match(obs.strip())
    if m is None:
        raise SimulationError(f"not a FrozenLake observation: {obs!r}")
    return (int(m.group(1)), int(m.group(2))), m.group(3)


def move(board: FrozenLakeBoard, pos: Pos, action: str) -> tuple[Pos, float, bool]:
    """Deterministic dynamics: (next position, reward, terminal)."""
    if action not in MOVES:
        raise InvalidArgument(f"unknown FrozenLake action {action!r}")
    dr, dc = MOVES[action]
    r, c = pos[0] + dr, pos[1] + dc
    if not (0 <= r < board.n and 0 <= c < board.n):
        r, c = pos
    tile = board.tile((r, c))
    if tile == HOLE:
        return (r, c), -1.0, True
    if tile == GOAL:
        return (r, c), 1.0, True
    return (r, c), 0.0, False


def describe(board: FrozenLakeBoard, max_steps: int) -> str:
    n = board.n
    return (
        f"TextFrozenLake: a deterministic {n}x{n} grid world. Rows and columns are numbered 0 to {n - 1}; "
        f"coordinates are written (row, col).\n"
        f"You start at (0, 0) (S) and must reach the goal at ({n - 1}, {n - 1}) (G). "
        f"Tiles are ice (.) or holes (H); each non-start, non-goal tile is a hole with probability "
        f"{board.hole_density:g}, but a path to the goal is guaranteed to exist.\n"
        f"Observations have the form \"You are at (r, c) on <terrain>.\" where terrain is start, ice, hole "
        f"or goal; the map itself is never shown.\n"
        f"Actions: {', '.join(ACTIONS)}. Moving off the grid leaves you where you are. "
        f"\"down\" increases the row, \"right\" increases the column.\n"
        f"Rewards: +1.0 for reaching the goal, -1.0 for falling into a hole, 0.0 otherwise.\n"
        f"The episode ends on reaching the goal, falling into a hole, or after {max_steps} steps."
    )


class FrozenLakeEnv:
    def __init__(self, board: FrozenLakeBoard, max_steps: int | None = None):
        self.board = board
        self.max_steps = max_steps if max_steps is not None else 8 * (board.n - 1)
        self.spec = EnvSpec(
            name=f"frozenlake_{board.n}",
            allowed_actions=ACTIONS,
            description=describe(board, self.max_steps),
            max_steps=self.max_steps,
        )
        self.pos: Pos = board.start
        self.step_count = 0
        self.done = False

    @classmethod
    def generate(cls, n: int = 4, hole_density: float = 0.9, seed: int = 0) -> FrozenLakeEnv:
        return cls(gen_frozen_lake(n, hole_density, seed))

    def reset(self) -> str:
        self.pos = self.board.start
        self.step_count = 0
        self.done = False
        return self.observation()

    def observation(self) -> str:
        return render_obs(self.board, self.pos)

    def step(self, action: str) -> StepResult:
        if self.done:
            raise ProtocolViolation("step() called after the episode ended; call reset()")
        if self.step_count >= self.max_steps:
            raise ProtocolViolation("step budget already exhausted")
        self.pos, reward, terminal = move(self.board, self.pos, action)
        self.step_count += 1
        truncated = not terminal and self.step_count >= self.max_steps
        self.done = terminal or truncated
        return StepResult(self.observation(), reward, self.done, truncated)


def frozen_lake_step(board: FrozenLakeBoard, agent_pos: Pos, action: str) -> StepResult:
    """Single stateless step from ``agent_pos`` (no step budget)."""
    pos, reward, done = move(board, agent_pos, action)
    return StepResult(render_obs(board, pos), reward, done)
