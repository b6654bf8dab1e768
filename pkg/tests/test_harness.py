import csv
import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lwm import harness
from lwm.agents import make_agent
from lwm.core import EpisodeBuffer, Transition
from lwm.envs import frozenlake as fl
from lwm.errors import BackendError, InvalidArgument, UndefinedNormalization
from lwm.llm.backends import ScriptedBackend
from lwm.llm.oracle import FULL, oracle_for

FIXTURE = str(Path(__file__).parent.parent / "fixtures" / "case_study_4x4.txt")


# -- arithmetic ----------------------------------------------------------------------


@pytest.mark.parametrize("raw,expected", [(20.20, 89.62), (-265.20, -165.65), (-61.10, 16.91)])
def test_normalized_score_table_values(raw, expected):
    assert harness.normalized_score(raw, -80.0, 31.8) == pytest.approx(expected, abs=0.01)


def test_normalized_score_identities():
    assert harness.normalized_score(-80.0, -80.0, 31.8) == 0.0
    assert harness.normalized_score(31.8, -80.0, 31.8) == 100.0
    with pytest.raises(UndefinedNormalization):
        harness.normalized_score(1.0, 2.0, 2.0)


def test_ci95_examples():
    assert harness.ci95([5, 5, 5]) == (5.0, 0.0)
    mean, hw = harness.ci95([1, 2, 3])
    assert mean == pytest.approx(2.0, abs=1e-3) and hw == pytest.approx(2.484, abs=1e-3)
    assert harness.ci95([7.5]) == (7.5, None)
    with pytest.raises(InvalidArgument):
        harness.ci95([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=20))
def test_ci95_shift_invariant_width(xs):
    m, hw = harness.ci95(xs)
    m2, hw2 = harness.ci95([x + 10.0 for x in xs])
    assert m2 == pytest.approx(m + 10.0, abs=1e-6)
    assert hw2 == pytest.approx(hw, rel=1e-6, abs=1e-6)


def _record(lengths_and_rewards):
    rec = harness.RunRecord("a", "e", 0, step_budget=100)
    for n, final in lengths_and_rewards:
        buf = EpisodeBuffer()
        for i in range(n):
            last = i == n - 1
            buf.append(Transition("o", "x", final if last else 0.0, "o", last))
        rec.episodes.append(buf)
    return rec


def test_steps_per_success():
    assert harness.steps_per_success(_record([(4, 1.0), (8, 1.0), (3, -1.0)])) == 6.0
    assert harness.steps_per_success(_record([(3, -1.0)])) is None


# -- runs -----------------------------------------------------------------------------


def test_budget_one_records_one_transition(tmp_path):
    env = fl.FrozenLakeEnv(fl.CASE_STUDY_BOARD)
    rec = harness.run_budget(make_agent("random", env.spec, seed=0), env, seed=0, step_budget=1)
    assert rec.steps == 1 and len(rec.episodes) == 1
    with pytest.raises(InvalidArgument):
        harness.run_budget(make_agent("random", env.spec), env, seed=0, step_budget=0)


def test_full_oracle_lwm_on_fixture_is_optimal():
    env = fl.FrozenLakeEnv(fl.load_board(FIXTURE))
    agent = make_agent("lwm", env.spec, oracle_for(env, FULL))
    rec = harness.run_budget(agent, env, seed=0, step_budget=300)
    assert len(rec.episodes) == 50
    assert all(len(e) == 6 and e.total_reward == 1.0 for e in rec.episodes)
    assert rec.cumulative_return == 50.0
    assert harness.steps_per_success(rec) == 6.0


def test_partial_episode_is_truncated_and_reflected():
    env = fl.FrozenLakeEnv(fl.CASE_STUDY_BOARD)
    backend = ScriptedBackend({"react_step": {"thought": "", "action": "up"},
                               "fact_extraction": {"thought": "", "new_facts": []}})
    agent = make_agent("react_fec", env.spec, backend)
    rec = harness.run_budget(agent, env, seed=0, step_budget=30)
    assert [len(e) for e in rec.episodes] == [24, 6]
    assert rec.episodes[-1].truncated
    assert backend.count("fact_extraction") == 2
    assert rec.steps <= 30


def test_run_error_is_recorded(tmp_path):
    env = fl.FrozenLakeEnv(fl.CASE_STUDY_BOARD)
    agent = make_agent("react", env.spec, ScriptedBackend({"react_step": BackendError("offline")}))
    rec = harness.run_budget(agent, env, seed=0, step_budget=10, log_path=tmp_path / "r.jsonl")
    assert rec.error["error"] == "BackendError" and rec.error["step"] == 0
    kinds = [json.loads(line)["type"] for line in (tmp_path / "r.jsonl").read_text().splitlines()]
    assert kinds[-2:] == ["error", "run_end"]


def test_random_on_fixture_matches_published_mean(tmp_path):
    returns = []
    for seed in range(10):
        spec = harness.RunSpec(agent="random", fixture=FIXTURE, seed=seed, out=str(tmp_path))
        returns.append(harness.execute(spec)["cumulative_return"])
    mean, hw = harness.ci95(returns)
    assert mean == pytest.approx(-80.0, abs=1e-9)
    assert hw < 10


def test_logs_byte_identical_and_schema(tmp_path):
    texts = []
    for sub in ("a", "b"):
        spec = harness.RunSpec(agent="lwm", fixture=FIXTURE, steps=40, out=str(tmp_path / sub), trace=True)
        harness.execute(spec)
        texts.append([(tmp_path / sub / f"{spec.stem}{ext}").read_bytes()
                      for ext in (".jsonl", ".trace.jsonl", ".summary.json")])
    assert texts[0][:2] == texts[1][:2]
    lines = [json.loads(x) for x in texts[0][0].decode().splitlines()]
    assert all(x["schema"] == 1 for x in lines)
    # summaries differ only in the output directory they record
    a, b = (json.loads(t[2]) for t in texts)
    a["config"].pop("out"), b["config"].pop("out")
    assert a == b
    assert lines[0]["type"] == "run_start" and lines[-1]["type"] == "run_end"
    summary = json.loads(texts[0][2])
    assert summary["schema"] == 1 and summary["steps"] == 40


def test_execute_many_processes(tmp_path):
    specs = [harness.RunSpec(agent="random", fixture=FIXTURE, seed=s, steps=50, out=str(tmp_path)) for s in range(3)]
    assert harness.execute_many(specs, workers=2) == harness.execute_many(specs, workers=1)


# -- config -----------------------------------------------------------------------------


def test_parse_config():
    text = "env = crafter  # comment\nagent=react_fec\nseed = 3\nstep-penalty = 0.05\ntrace = on\nfixture = none\n"
    values = harness.RunSpec.parse_config(text)
    assert values == {"env": "crafter", "agent": "react_fec", "seed": 3, "step_penalty": 0.05, "trace": True,
                      "fixture": None}
    spec = harness.RunSpec(**values)
    assert spec.stem == "react_fec_crafter_5_s3"
    for bad in ("nonsense", "colour = red"):
        with pytest.raises(InvalidArgument):
            harness.RunSpec.parse_config(bad)


def test_build_errors(tmp_path):
    with pytest.raises(InvalidArgument):
        harness.execute(harness.RunSpec(env="chess", out=str(tmp_path)))
    with pytest.raises(InvalidArgument):
        harness.execute(harness.RunSpec(backend="replay", out=str(tmp_path)))
    with pytest.raises(InvalidArgument):
        harness.execute(harness.RunSpec(compress="maybe", out=str(tmp_path)))


# -- aggregation -------------------------------------------------------------------------------


def _summary(agent, env, ret, sps):
    return {"agent": agent, "env": env, "cumulative_return": ret, "steps_per_success": sps}


def test_metric_table_identities(tmp_path):
    summaries = [_summary("random", "fl", r, None) for r in (-80, -82, -78)]
    summaries += [_summary("lwm", "fl", r, s) for r, s in ((30, 6.0), (32, 7.0), (33.4, 6.5))]
    summaries += [_summary("react", "fl", r, 10.0) for r in (-60, -62, -61.3)]
    rows = harness.metric_table(summaries)
    norm = {r["agent"]: r for r in rows if r["metric"] == "normalized_score"}
    assert norm["random"]["mean"] == 0.0 and norm["lwm"]["mean"] == 100.0
    assert 0 < norm["react"]["mean"] < 100
    sps = {r["agent"]: r for r in rows if r["metric"] == "steps_per_success"}
    assert sps["lwm"]["mean"] == pytest.approx(6.5) and sps["random"]["mean"] is None
    # explicit anchor
    rows = harness.metric_table(summaries, expert_score=100.0)
    assert [r for r in rows if r["metric"] == "normalized_score" and r["agent"] == "lwm"][0]["mean"] < 100
    out = tmp_path / "t.csv"
    harness.write_table(rows, out)
    with open(out) as fh:
        reader = csv.DictReader(fh)
        assert reader.fieldnames == harness.TABLE_COLUMNS
        assert len(list(reader)) == len(rows)


def test_load_summaries(tmp_path):
    harness.execute(harness.RunSpec(agent="random", fixture=FIXTURE, steps=20, out=str(tmp_path / "x")))
    loaded = harness.load_summaries(tmp_path)
    assert len(loaded) == 1 and loaded[0]["env"] == "frozenlake_case_study_4x4"
