import os
from pathlib import Path

import pytest
from conftest import case_study_episode

from lwm.baselines import FACTS_TITLE
from lwm.envs import frozenlake as fl
from lwm.facts import format_trajectory_summary
from lwm.llm import prompts

GOLDEN = Path(__file__).parent / "golden"
DESC = fl.FrozenLakeEnv(fl.CASE_STUDY_BOARD).spec.description
FACTS = ["(1,0) is a hole.", "(2,1) is a hole."]
HISTORY = ["Obs: You are at (0, 0) on start.", "Act: right", "Obs: You are at (0, 1) on ice."]
OBS = "You are at (0, 1) on ice."


def golden_calls():
    summary = format_trajectory_summary(case_study_episode(2))
    actions = list(fl.ACTIONS)
    return {
        "propose_actions": prompts.propose_call(DESC, FACTS, OBS, HISTORY, actions, 4),
        "simulate_step": prompts.simulate_call(DESC, FACTS, OBS, HISTORY, "down"),
        "estimate_value": prompts.value_call(DESC, FACTS, OBS, HISTORY, 0.99),
        "fact_extraction": prompts.extraction_call(DESC, summary, FACTS),
        "fact_redundancy_remover": prompts.compression_call(DESC, FACTS + ["hole_at(row=1,col=0)"]),
        "react_step": prompts.react_call(DESC, OBS, HISTORY, actions, FACTS, FACTS_TITLE),
        "reflexion_lesson": prompts.lesson_call(
            DESC, summary, ["Avoid moving down from (0,0); it leads into a hole."]),
    }


def render_golden(call) -> str:
    return f"SYSTEM: {call.system}\nTEMPERATURE: {call.temperature}\n---\n{call.user}\n"


@pytest.mark.parametrize("name", sorted(golden_calls()))
def test_prompt_matches_golden(name):
    text = render_golden(golden_calls()[name])
    path = GOLDEN / f"{name}.txt"
    if os.environ.get("LWM_REGEN_GOLDEN"):
        path.write_text(text, encoding="utf-8")
    assert text == path.read_text(encoding="utf-8")


def test_call_metadata():
    for name, call in golden_calls().items():
        assert call.function.name == name
        assert call.max_tokens == 8512
        assert call.temperature == (0.3 if name == "react_step" else 0.0)


def test_empty_lists_render_none():
    call = prompts.propose_call(DESC, [], OBS, [], ["up"], 1)
    assert "(at beginning of episode):\nNone\n" in call.user
    assert "Recent history (old->new):\nNone\n" in call.user
    assert prompts.format_actions(["a", "b"]) == "[a, b]"


def test_react_without_context_omits_section():
    call = prompts.react_call(DESC, OBS, [], ["up"])
    assert "learned" not in call.user and "Lessons" not in call.user


def test_missing_placeholder_is_an_error():
    import jinja2

    with pytest.raises(jinja2.UndefinedError):
        prompts.render("simulate_step", env_description_str="x")
