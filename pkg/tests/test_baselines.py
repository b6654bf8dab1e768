import random
import warnings
from collections import Counter

import pytest
from conftest import case_study_episode
from hypothesis import given, settings
from hypothesis import strategies as st

from lwm import baselines
from lwm.agents import AgentConfig, LwmAgent, ReactFecAgent, ReflexionAgent, make_agent
from lwm.core import Transition
from lwm.envs import frozenlake as fl
from lwm.errors import AgentWarning, BackendError, InvalidArgument, MissingCassette
from lwm.facts import format_trajectory_summary, learn_facts_and_update
from lwm.llm.backends import ScriptedBackend
from lwm.llm.oracle import FACTS, oracle_for

ENV = fl.FrozenLakeEnv(fl.CASE_STUDY_BOARD)
DESC = ENV.spec.description
ALLOWED = list(fl.ACTIONS)
OBS = "You are at (0, 0) on start."


# -- random ---------------------------------------------------------------------------


def test_random_singleton_and_errors():
    assert baselines.random_act(["only"], random.Random(1)) == "only"
    with pytest.raises(InvalidArgument):
        baselines.random_act([], random.Random(1))


def test_random_uniform_frequencies():
    rng = random.Random(123)
    counts = Counter(baselines.random_act(ALLOWED, rng) for _ in range(100_000))
    for a in ALLOWED:
        assert abs(counts[a] / 100_000 - 0.25) <= 0.02


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_random_seeded_determinism(seed):
    r1, r2 = random.Random(seed), random.Random(seed)
    assert [baselines.random_act(ALLOWED, r1) for _ in range(20)] == [baselines.random_act(ALLOWED, r2) for _ in range(20)]


# -- ReAct --------------------------------------------------------------------------------


def test_react_passthrough():
    b = ScriptedBackend({"react_step": {"thought": "go right toward goal", "action": "right"}})
    assert baselines.react_act(b, DESC, OBS, [f"Obs: {OBS}"], ALLOWED) == ("go right toward goal", "right")
    assert b.calls[0].temperature == 0.3


def test_react_illegal_then_legal():
    b = ScriptedBackend({"react_step": [{"thought": "", "action": "fly"}, {"thought": "ok", "action": "down"}]})
    assert baselines.react_act(b, DESC, OBS, [], ALLOWED) == ("ok", "down")
    assert "'fly' is not an allowed action" in b.calls[1].user
    assert b.calls[1].user.startswith(b.calls[0].user)


def test_react_illegal_twice_falls_back_to_random():
    b = ScriptedBackend({"react_step": {"thought": "", "action": "fly"}})
    with pytest.warns(AgentWarning):
        _, action = baselines.react_act(b, DESC, OBS, [], ALLOWED, rng=random.Random(0))
    assert action in ALLOWED and b.count("react_step") == 2


@settings(max_examples=50, deadline=None)
@given(st.lists(st.text(max_size=6), min_size=2, max_size=2), st.integers(0, 100))
def test_react_always_legal(replies, seed):
    b = ScriptedBackend({"react_step": [{"thought": "", "action": r} for r in replies]})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AgentWarning)
        _, action = baselines.react_act(b, DESC, OBS, [], ALLOWED, rng=random.Random(seed))
    assert action in ALLOWED


def test_react_prompt_contains_every_fact():
    facts = ["(1,0) is a hole.", "(2,1) is a hole.", "(0,1) is ice."]
    b = ScriptedBackend({"react_step": {"thought": "", "action": "right"}})
    baselines.react_act(b, DESC, OBS, [], ALLOWED, facts, baselines.FACTS_TITLE)
    for f in facts:
        assert f"- {f}" in b.calls[0].user


def test_react_backend_error_propagates():
    with pytest.raises(BackendError):
        baselines.react_act(ScriptedBackend({"react_step": BackendError("x")}), DESC, OBS, [], ALLOWED)


# -- Reflexion --------------------------------------------------------------------------------


def _lesson_backend(lesson):
    return ScriptedBackend({"reflexion_lesson": lesson if isinstance(lesson, Exception)
                            else {"thought": "", "lesson": lesson}})


def test_lesson_fifo():
    lessons = baselines.LessonBuffer([f"l{i}" for i in range(5)])
    summary = format_trajectory_summary(case_study_episode(0))
    out = baselines.reflexion_reflect(_lesson_backend("new"), DESC, summary, lessons)
    assert out.items == ("l1", "l2", "l3", "l4", "new")
    assert lessons.items == tuple(f"l{i}" for i in range(5))


def test_lesson_example_and_prompt():
    text = "Avoid moving into holes by evaluating the safety of the next position before taking an action."
    b = _lesson_backend(text)
    summary = format_trajectory_summary(case_study_episode(0))
    out = baselines.reflexion_reflect(b, DESC, summary, baselines.LessonBuffer(["old"]))
    assert out.items == ("old", text)
    assert "- old" in b.calls[0].user and summary.text in b.calls[0].user


@pytest.mark.parametrize("reply", ["", "   ", BackendError("down")])
def test_lesson_empty_or_failed_is_noop(reply):
    lessons = baselines.LessonBuffer(["a"])
    with pytest.warns(AgentWarning):
        out = baselines.reflexion_reflect(_lesson_backend(reply), DESC,
                                          format_trajectory_summary(case_study_episode(0)), lessons)
    assert out == lessons


def test_lesson_replay_miss_propagates():
    with pytest.raises(MissingCassette):
        baselines.reflexion_reflect(_lesson_backend(MissingCassette("x")), DESC,
                                    format_trajectory_summary(case_study_episode(0)), baselines.LessonBuffer())


def test_long_lesson_kept_with_warning():
    long = " ".join(["word"] * 25)
    with pytest.warns(AgentWarning):
        out = baselines.reflexion_reflect(_lesson_backend(long), DESC,
                                          format_trajectory_summary(case_study_episode(0)), baselines.LessonBuffer())
    assert out.items == (long,)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.text(alphabet="abc ", min_size=1, max_size=5).filter(str.strip), max_size=15), st.integers(1, 6))
def test_lesson_buffer_bound(lessons, capacity):
    buf = baselines.LessonBuffer(capacity=capacity)
    for lesson in lessons:
        buf.append(lesson)
    assert len(buf) <= capacity
    assert buf.items == tuple(lessons[-capacity:]) if lessons else buf.items == ()


# -- fact-augmented ReAct -------------------------------------------------------------------------


def test_fec_is_the_fact_engine():
    assert baselines.fec_reflect is learn_facts_and_update


def test_fec_and_lwm_extraction_prompts_identical():
    backends = [oracle_for(ENV, FACTS), oracle_for(ENV, FACTS)]
    agents = [ReactFecAgent(backends[0], ENV.spec), LwmAgent(backends[1], ENV.spec)]
    spies = []
    for agent in agents:
        spy = ScriptedBackend({"fact_extraction": {"thought": "", "new_facts": ["(1,0) is a hole."]}})
        agent.backend = spy
        spies.append(spy)
        agent.end_episode(case_study_episode(0))
    assert spies[0].calls[0].user == spies[1].calls[0].user
    assert agents[0].knowledge() == agents[1].knowledge() == ["(1,0) is a hole."]


# -- agent lifecycle ---------------------------------------------------------------------------------


def test_history_seeded_with_initial_observation():
    agent = make_agent("random", ENV.spec, seed=3)
    agent.begin_episode(OBS)
    assert agent.history.lines == (f"Obs: {OBS}",)
    agent.observe(Transition(OBS, "right", 0.0, "You are at (0, 1) on ice.", False))
    assert agent.history.lines[-2:] == ("Act: right", "Obs: You are at (0, 1) on ice.")


def test_facts_snapshot_fixed_within_episode():
    b = ScriptedBackend({"fact_extraction": {"thought": "", "new_facts": ["f"]},
                         "react_step": {"thought": "", "action": "up"}})
    agent = ReactFecAgent(b, ENV.spec)
    agent.begin_episode(OBS)
    agent.end_episode(case_study_episode(0))  # reflection lands mid-stream; snapshot is unchanged
    assert agent.context()[0] == []
    agent.begin_episode(OBS)
    assert agent.context()[0] == ["f"]


def test_reflexion_context_newest_last():
    agent = ReflexionAgent(_lesson_backend("x"), ENV.spec, AgentConfig(lesson_capacity=2))
    for lesson in ["a", "b", "c"]:
        agent.backend = _lesson_backend(lesson)
        agent.end_episode(case_study_episode(0))
    assert agent.context() == (["b", "c"], baselines.LESSONS_TITLE)


def test_lwm_terminal_set_only_from_real_terminals():
    agent = LwmAgent(oracle_for(ENV, FACTS), ENV.spec)
    agent.begin_episode(OBS)
    agent.observe(Transition(OBS, "up", 0.0, OBS, True), truncated=True)
    assert len(agent.terminal) == 0
    agent.observe(Transition(OBS, "down", -1.0, "You are at (1, 0) on hole.", True))
    assert "You are at (1, 0) on hole." in agent.terminal


def test_make_agent_errors():
    with pytest.raises(InvalidArgument):
        make_agent("planner", ENV.spec)
    with pytest.raises(InvalidArgument):
        make_agent("react", ENV.spec)
    assert make_agent("lwm", ENV.spec, oracle_for(ENV)).name == "lwm"
