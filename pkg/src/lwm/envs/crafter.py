"""CrafterMini: a toroidal text crafting world (wood -> stone -> iron pickaxe)."""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path

from lwm.envs.base import EnvSpec, StepResult
from lwm.envs.rng import SplitMix64
from lwm.errors import InvalidArgument, ProtocolViolation, SimulationError

TILE_NAMES = {"g": "grass", "t": "tree", "s": "stone", "i": "iron", "w": "water"}
TILE_CODES = {v: k for k, v in TILE_NAMES.items()}
RESOURCE_OF = {"t": "wood", "s": "stone", "i": "iron"}

ACTIONS = (
    "north",
    "south",
    "east",
    "west",
    "collect",
    "craft_wood_pickaxe",
    "craft_stone_pickaxe",
    "craft_iron_pickaxe",
)
DIRS = {0: (-1, 0), 1: (1, 0), 2: (0, 1), 3: (0, -1)}
CRAFT_BONUS = {5: 10.0, 6: 20.0, 7: 50.0}
STEP_COST = -1.0

# Cell sampling weights for generation, in TILE_NAMES order.
TILE_WEIGHTS = (("g", 0.45), ("t", 0.2), ("s", 0.15), ("i", 0.1), ("w", 0.1))

OBS_RE = re.compile(
    r"^You are on (\w+) at \((\d+), (\d+)\)\. North: (\w+), South: (\w+), East: (\w+), West: (\w+)\. "
    r"Inventory: wood=(\d+), stone=(\d+), iron=(\d+)\. Tools: ([\w, ]+)\."
)
LATENT_RE = re.compile(r" Map: ([gtsiw/]+)\.$")


@dataclass(frozen=True)
class CrafterState:
    """Full world state. ``grid`` holds one string per row of tile codes (g/t/s/i/w)."""

    grid: tuple[str, ...]
    pos: tuple[int, int]
    wood: int = 0
    stone: int = 0
    iron: int = 0
    wood_pickaxe: bool = False
    stone_pickaxe: bool = False
    iron_pickaxe: bool = False

    @property
    def n(self) -> int:
        return len(self.grid)

    def tile(self, pos: tuple[int, int]) -> str:
        return self.grid[pos[0] % self.n][pos[1] % self.n]

    def tools(self) -> list[str]:
        names = ("wood_pickaxe", "stone_pickaxe", "iron_pickaxe")
        return [name for name in names if getattr(self, name)]

    def resource_tiles(self) -> int:
        return sum(row.count(ch) for row in self.grid for ch in RESOURCE_OF)


@dataclass(frozen=True)
class CrafterWorld:
    """Blueprint produced by :func:`gen_crafter`; ``initial`` is restored on every reset."""

    n: int
    initial: CrafterState
    seed: int = 0

    @property
    def max_steps(self) -> int:
        return 4 * self.n * self.n

    def to_text(self) -> str:
        r, c = self.initial.pos
        return f"agent {r} {c}\n" + "\n".join(" ".join(row) for row in self.initial.grid)


def action_index(action) -> int:
    if isinstance(action, bool):
        raise InvalidArgument(f"invalid CrafterMini action {action!r}")
    if isinstance(action, int):
        if 0 <= action < len(ACTIONS):
            return action
        raise InvalidArgument(f"CrafterMini action must be in 0..7, got {action}")
    if isinstance(action, str):
        if action in ACTIONS:
            return ACTIONS.index(action)
        if action.strip().isdigit():
            return action_index(int(action.strip()))
    raise InvalidArgument(f"unknown CrafterMini action {action!r}")


def transition(state: CrafterState, action) -> tuple[CrafterState, float, bool]:
    """Pure dynamics: (next state, reward, terminal). No step budget here."""
    a = action_index(action)
    reward = STEP_COST
    if a in DIRS:
        dr, dc = DIRS[a]
        n = state.n
        state = replace(state, pos=((state.pos[0] + dr) % n, (state.pos[1] + dc) % n))
    elif a == 4:
        ch = state.tile(state.pos)
        if ch in RESOURCE_OF:
            r, c = state.pos
            row = state.grid[r]
            grid = state.grid[:r] + (row[:c] + "g" + row[c + 1 :],) + state.grid[r + 1 :]
            res = RESOURCE_OF[ch]
            state = replace(state, grid=grid, **{res: getattr(state, res) + 1})
    elif a == 5:
        if state.wood >= 3 and not state.wood_pickaxe:
            state = replace(state, wood=state.wood - 3, wood_pickaxe=True)
            reward += CRAFT_BONUS[5]
    elif a == 6:
        if state.wood >= 1 and state.stone >= 3 and not state.stone_pickaxe:
            state = replace(state, wood=state.wood - 1, stone=state.stone - 3, stone_pickaxe=True)
            reward += CRAFT_BONUS[6]
    elif a == 7:
        if state.stone_pickaxe and state.iron >= 3 and not state.iron_pickaxe:
            state = replace(state, iron=state.iron - 3, stone_pickaxe=False, iron_pickaxe=True)
            reward += CRAFT_BONUS[7]
    return state, reward, state.iron_pickaxe


def gen_crafter(n: int, seed: int) -> CrafterWorld:
    if n < 2:
        raise InvalidArgument("CrafterMini needs n >= 2")
    rng = SplitMix64(seed)
    while True:
        rows = []
        for _ in range(n):
            row = []
            for _ in range(n):
                u, acc = rng.random(), 0.0
                code = TILE_WEIGHTS[-1][0]
                for ch, w in TILE_WEIGHTS:
                    acc += w
                    if u < acc:
                        code = ch
                        break
                row.append(code)
            rows.append("".join(row))
        flat = "".join(rows)
        if all(ch in flat for ch in RESOURCE_OF):
            break
    pos = (rng.randrange(n), rng.randrange(n))
    return CrafterWorld(n=n, initial=CrafterState(grid=tuple(rows), pos=pos), seed=seed)


def parse_world(text: str) -> CrafterWorld:
    """Load the fixture format: header ``agent r c`` then rows of g/t/s/i/w cells."""
    lines = [line for line in text.strip().splitlines() if line.strip()]
    head = lines[0].split()
    if len(head) != 3 or head[0] != "agent":
        raise InvalidArgument("crafter fixture must start with 'agent r c'")
    rows = tuple("".join(line.split()) for line in lines[1:])
    n = len(rows)
    if n < 2 or any(len(row) != n for row in rows):
        raise InvalidArgument("crafter fixture must be a square grid with n >= 2")
    if any(ch not in TILE_NAMES for row in rows for ch in row):
        raise InvalidArgument("crafter cells must be one of g t s i w")
    flat = "".join(rows)
    if not all(ch in flat for ch in RESOURCE_OF):
        raise InvalidArgument("crafter fixture needs at least one tree, stone and iron")
    pos = (int(head[1]), int(head[2]))
    if not (0 <= pos[0] < n and 0 <= pos[1] < n):
        raise InvalidArgument("agent position outside grid")
    return CrafterWorld(n=n, initial=CrafterState(grid=rows, pos=pos))


def load_world(path: str | Path) -> CrafterWorld:
    return parse_world(Path(path).read_text())


def render_obs(state: CrafterState) -> str:
    r, c = state.pos
    name = lambda dr, dc: TILE_NAMES[state.tile((r + dr, c + dc))]  # noqa: E731
    tools = ", ".join(state.tools()) or "none"
    return (
        f"You are on {name(0, 0)} at ({r}, {c}). North: {name(-1, 0)}, South: {name(1, 0)}, "
        f"East: {name(0, 1)}, West: {name(0, -1)}. "
        f"Inventory: wood={state.wood}, stone={state.stone}, iron={state.iron}. Tools: {tools}."
    )


def render_latent(state: CrafterState) -> str:
    """Observation plus the full map; what a simulator emits as a latent next observation."""
    return f"{render_obs(state)} Map: {'/'.join(state.grid)}."


@dataclass(frozen=True)
class ParsedObs:
    tile: str
    pos: tuple[int, int]
    neighbours: dict  # "north"/"south"/"east"/"west" -> tile code
    wood: int
    stone: int
    iron: int
    tools: frozenset
    grid: tuple[str, ...] | None  # only present on latent observations


def parse_obs(obs: str) -> ParsedObs:
    text = obs.strip()
    m = OBS_RE.match(text)
    if m is None:
        raise SimulationError(f"not a CrafterMini observation: {obs!r}")
    names = [m.group(i) for i in (1, 4, 5, 6, 7)]
    if any(name not in TILE_CODES for name in names):
        raise SimulationError(f"unknown tile in observation: {obs!r}")
    tools_txt = m.group(11).strip()
    tools = frozenset() if tools_txt == "none" else frozenset(t.strip() for t in tools_txt.split(","))
    latent = LATENT_RE.search(text)
    grid = tuple(latent.group(1).split("/")) if latent else None
    return ParsedObs(
        tile=TILE_CODES[names[0]],
        pos=(int(m.group(2)), int(m.group(3))),
        neighbours=dict(zip(("north", "south", "east", "west"), (TILE_CODES[x] for x in names[1:]))),
        wood=int(m.group(8)),
        stone=int(m.group(9)),
        iron=int(m.group(10)),
        tools=tools,
        grid=grid,
    )


def describe(n: int, max_steps: int) -> str:
    actions = "\n".join(f"  {i}: {name}" for i, name in enumerate(ACTIONS))
    return (
        f"CrafterMini: a deterministic text-only {n}x{n} world on a toroidal (wrap-around) grid. "
        f"Coordinates are written (row, col); north decreases the row, east increases the column.\n"
        f"Each tile is grass, tree, stone, iron or water; at least one tree, stone and iron tile exists.\n"
        f"Observation: your tile and coordinates, the terrain to the north, south, east and west, "
        f"your inventory (wood, stone, iron) and the tools you hold.\n"
        f"Actions (integer: name):\n{actions}\n"
        f"collect takes the resource on your tile (tree gives wood, stone gives stone, iron gives iron) "
        f"and turns the tile into grass.\n"
        f"Recipes: wood_pickaxe needs 3 wood (+10 reward); stone_pickaxe needs 1 wood and 3 stone (+20 reward); "
        f"iron_pickaxe needs a stone_pickaxe and 3 iron, consuming the stone_pickaxe (+50 reward). "
        f"Crafting without the ingredients, or a tool you already hold, does nothing.\n"
        f"Rewards: every step costs -1 in addition to any crafting bonus.\n"
        f"The episode ends immediately when an iron_pickaxe is crafted or after {max_steps} steps."
    )


class CrafterEnv:
    def __init__(self, world: CrafterWorld, max_steps: int | None = None):
        self.world = world
        self.max_steps = max_steps if max_steps is not None else world.max_steps
        self.spec = EnvSpec(
            name=f"crafter_{world.n}",
            allowed_actions=ACTIONS,
            description=describe(world.n, self.max_steps),
            max_steps=self.max_steps,
        )
        self.state = world.initial
        self.step_count = 0
        self.done = False
        self.collected = {"wood": 0, "stone": 0, "iron": 0}

    @classmethod
    def generate(cls, n: int = 5, seed: int = 0) -> CrafterEnv:
        return cls(gen_crafter(n, seed))

    def reset(self) -> str:
        self.state = self.world.initial
        self.step_count = 0
        self.done = False
        self.collected = {"wood": 0, "stone": 0, "iron": 0}
        return self.observation()

    def observation(self) -> str:
        return render_obs(self.state)

    def step(self, action) -> StepResult:
        if self.done:
            raise ProtocolViolation("step() called after the episode ended; call reset()")
        prev = self.state
        self.state, reward, terminal = transition(self.state, action)
        for res in self.collected:
            gained = getattr(self.state, res) - getattr(prev, res)
            if action_index(action) == 4 and gained > 0:
                self.collected[res] += gained
        self.step_count += 1
        truncated = not terminal and self.step_count >= self.max_steps
        self.done = terminal or truncated
        return StepResult(self.observation(), reward, self.done, truncated)


def crafter_step(world_state: CrafterState, action) -> StepResult:
    state, reward, done = transition(world_state, action)
    return StepResult(render_obs(state), reward, done)
