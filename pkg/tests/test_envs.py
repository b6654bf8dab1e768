import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lwm.envs import crafter as cm
from lwm.envs import frozenlake as fl
from lwm.envs.rng import SplitMix64
from lwm.errors import InvalidArgument, ProtocolViolation, SimulationError


def test_splitmix_reference_values():
    # first outputs of splitmix64 seeded with 0 (widely published test vector)
    rng = SplitMix64(0)
    assert rng.next_u64() == 0xE220A8397B1DCDAF
    assert rng.next_u64() == 0x6E789E6AA1B965F4


# -- FrozenLake -------------------------------------------------------------------


def test_case_study_fixture_layout():
    b = fl.CASE_STUDY_BOARD
    assert b.to_text() == "S . H H\nH . . H\nH H . .\nH H H G"
    assert len(b.holes()) == 9
    assert fl.is_solvable(b)


@settings(max_examples=150, deadline=None)
@given(st.sampled_from([2, 3, 4, 6, 8]), st.floats(0, 1), st.integers(0, 2**63))
def test_generated_boards_solvable(n, h, seed):
    b = fl.gen_frozen_lake(n, h, seed)
    assert b.tile((0, 0)) == fl.START and b.tile((n - 1, n - 1)) == fl.GOAL
    assert fl.is_solvable(b)
    assert fl.gen_frozen_lake(n, h, seed) == b


@pytest.mark.parametrize("seed", range(5))
def test_density_extremes(seed):
    assert fl.gen_frozen_lake(4, 0.0, seed).holes() == []
    full = fl.gen_frozen_lake(4, 1.0, seed)
    safe = set(fl.safe_corridor(4))
    expected = {(r, c) for r in range(4) for c in range(4)} - safe
    assert set(full.holes()) == expected


def test_gen_errors():
    with pytest.raises(InvalidArgument):
        fl.gen_frozen_lake(1, 0.5, 0)
    with pytest.raises(InvalidArgument):
        fl.gen_frozen_lake(4, 1.5, 0)


def test_step_examples():
    b = fl.CASE_STUDY_BOARD
    r = fl.frozen_lake_step(b, (0, 0), "down")
    assert (r.obs, r.reward, r.done) == ("You are at (1, 0) on hole.", -1.0, True)
    r = fl.frozen_lake_step(b, (0, 0), "up")
    assert (r.obs, r.reward, r.done) == ("You are at (0, 0) on start.", 0.0, False)
    env = fl.FrozenLakeEnv(b)
    env.reset()
    rewards = [env.step(a).reward for a in ["right", "down", "right", "down", "right", "down"]]
    assert rewards == [0.0] * 5 + [1.0]
    assert env.done and env.step_count == 6
    with pytest.raises(ProtocolViolation):
        env.step("up")
    with pytest.raises(InvalidArgument):
        fl.frozen_lake_step(b, (0, 0), "jump")


def test_budget_truncation():
    env = fl.FrozenLakeEnv(fl.CASE_STUDY_BOARD)
    assert env.max_steps == 24
    env.reset()
    for _ in range(23):
        assert not env.step("up").done
    last = env.step("up")
    assert last.done and last.truncated and last.reward == 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.lists(st.sampled_from(fl.ACTIONS), max_size=40))
def test_reward_partition_and_length(seed, actions):
    env = fl.FrozenLakeEnv(fl.gen_frozen_lake(4, 0.5, seed))
    env.reset()
    steps = 0
    for a in actions:
        if env.done:
            break
        r = env.step(a)
        steps += 1
        assert r.reward in (-1.0, 0.0, 1.0)
        if r.reward != 0.0:
            assert r.done and not r.truncated
    assert steps <= env.max_steps


def test_obs_parse_and_description():
    assert fl.parse_obs("You are at (2, 3) on ice.") == ((2, 3), "ice")
    with pytest.raises(SimulationError):
        fl.parse_obs("somewhere")
    env = fl.FrozenLakeEnv(fl.gen_frozen_lake(4, 0.9, 0))
    assert "a path to the goal is guaranteed" in env.spec.description
    assert env.spec.description == fl.FrozenLakeEnv(fl.gen_frozen_lake(4, 0.9, 0)).spec.description


def test_board_loader_validates(tmp_path):
    with pytest.raises(InvalidArgument):
        fl.parse_board("S H\nH G")  # no path
    with pytest.raises(InvalidArgument):
        fl.parse_board("S .\n. X")
    p = tmp_path / "b.txt"
    p.write_text(fl.CASE_STUDY_BOARD.to_text())
    assert fl.load_board(p).tiles == fl.CASE_STUDY_BOARD.tiles


# -- CrafterMini --------------------------------------------------------------------


def _state(**kw):
    base = dict(grid=("tgg", "gsg", "ggi"), pos=(0, 0))
    base.update(kw)
    return cm.CrafterState(**base)


def test_crafter_collect_example():
    s, r, done = cm.transition(_state(), 4)
    assert s.wood == 1 and s.grid[0][0] == "g" and r == -1.0 and not done


def test_crafter_craft_examples():
    s, r, _ = cm.transition(_state(wood=3), 5)
    assert s.wood_pickaxe and s.wood == 0 and r == 9.0
    s, r, done = cm.transition(_state(stone_pickaxe=True, iron=3), 7)
    assert s.iron_pickaxe and not s.stone_pickaxe and s.iron == 0 and r == 49.0 and done
    s, r, _ = cm.transition(_state(wood=1, stone=3), 6)
    assert s.stone_pickaxe and s.wood == 0 and s.stone == 0 and r == 19.0


def test_crafter_gating_noops():
    for a, kw in [(5, dict(wood=2)), (6, dict(wood=0, stone=3)), (7, dict(iron=3)), (7, dict(stone_pickaxe=True, iron=2))]:
        s0 = _state(**kw)
        s1, r, done = cm.transition(s0, a)
        assert s1 == s0 and r == -1.0 and not done


def test_crafter_wraparound_and_errors():
    s, _, _ = cm.transition(_state(pos=(0, 0)), "north")
    assert s.pos == (2, 0)
    s, _, _ = cm.transition(_state(pos=(0, 0)), 3)
    assert s.pos == (0, 2)
    with pytest.raises(InvalidArgument):
        cm.transition(_state(), 8)
    with pytest.raises(InvalidArgument):
        cm.transition(_state(), "dig")


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**63))
def test_crafter_generation(n, seed):
    w = cm.gen_crafter(n, seed)
    flat = "".join(w.initial.grid)
    assert all(ch in flat for ch in "tsi")
    assert w.max_steps == 4 * n * n
    assert cm.gen_crafter(n, seed) == w


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.lists(st.integers(0, 7), max_size=120))
def test_crafter_conservation(seed, actions):
    env = cm.CrafterEnv(cm.gen_crafter(4, seed))
    env.reset()
    start = env.world.initial.resource_tiles()
    steps = 0
    for a in actions:
        if env.done:
            break
        env.step(a)
        steps += 1
        s = env.state
        assert min(s.wood, s.stone, s.iron) >= 0
        assert sum(env.collected.values()) == start - s.resource_tiles()
    assert steps <= env.max_steps


def test_crafter_observation_format():
    s = _state(wood=2, wood_pickaxe=True)
    obs = cm.render_obs(s)
    assert obs == ("You are on tree at (0, 0). North: grass, South: grass, East: grass, West: grass. "
                   "Inventory: wood=2, stone=0, iron=0. Tools: wood_pickaxe.")
    p = cm.parse_obs(cm.render_latent(s))
    assert p.grid == s.grid and p.tools == frozenset({"wood_pickaxe"}) and p.wood == 2


def test_crafter_description_lists_actions():
    desc = cm.CrafterEnv(cm.gen_crafter(5, 0)).spec.description
    for i, name in enumerate(cm.ACTIONS):
        assert f"{i}: {name}" in desc
    assert cm.CrafterEnv(cm.gen_crafter(5, 0)).max_steps == 100


def test_crafter_fixture_loader():
    w = cm.parse_world("agent 1 2\nt g s\ng i g\nw g g")
    assert w.initial.pos == (1, 2) and w.initial.grid == ("tgs", "gig", "wgg")
    assert cm.parse_world(w.to_text()) == w
    with pytest.raises(InvalidArgument):
        cm.parse_world("agent 0 0\ng g\ng g")
