from fractions import Fraction

import pytest

from eventchain.agents.backends import LlmBackend
from eventchain.agents.evaluation import EvalConfig, WorkflowInputs, run_evaluation, run_once
from eventchain.sim import AebScenario

from conftest import FIXTURES


def backend(name):
    return LlmBackend(name, fixture_path=str(FIXTURES / f"eval_{name}.json"))


@pytest.fixture(scope="module")
def report():
    return run_evaluation(EvalConfig((backend("engineered"), backend("sabotaged"), backend("mixed")), runs=5))


def test_engineered_rates(report):
    s = report.score("engineered")
    assert (s.model_valid, s.code_valid, s.overall) == (3, 5, 3)
    assert s.rate(s.model_valid) == Fraction(3, 5)
    assert s.rate(s.code_valid) == 1


def test_sabotaged_overall_zero(report):
    s = report.score("sabotaged")
    assert (s.model_valid, s.code_valid, s.overall) == (5, 5, 0)
    assert all("collided" in o.notes[0] for o in s.outcomes)


def test_mixed_rates(report):
    s = report.score("mixed")
    flags = [(o.model_valid, o.code_valid, o.overall) for o in s.outcomes]
    assert flags == [
        (True, True, True),      # fenced answer
        (True, True, True),      # bare JSON, found by bracket scan
        (False, False, False),   # no artifact: downstream stages count as failed
        (True, False, False),    # execute signature does not match the inputs
        (True, True, True),      # stateless braking still stops from 10 m/s
    ]


def test_overall_bounded_by_components(report):
    for s in report.scores:
        for o in s.outcomes:
            assert o.overall <= (o.model_valid and o.code_valid)


def test_table_and_json(report):
    table = report.table()
    assert "engineered" in table and "60%" in table
    again = run_evaluation(EvalConfig((backend("engineered"), backend("sabotaged"), backend("mixed")), runs=5))
    assert again.to_json() == report.to_json()


def test_parallel_matches_serial(report):
    par = run_evaluation(EvalConfig((backend("mixed"),), runs=5, workers=4))
    assert par.scores[0] == report.score("mixed")


def test_missing_fixture_counts_as_failed_run(tmp_path):
    f = tmp_path / "empty.json"
    f.write_text('{"backend": "x", "responses": {}}')
    r = run_evaluation(EvalConfig((LlmBackend("x", fixture_path=str(f)),), runs=2))
    assert r.scores[0].overall == 0 and r.scores[0].n == 2


def test_agent_model_source():
    b = LlmBackend("aeb", fixture_path=str(FIXTURES / "aeb_replay.json"))
    out = run_once(b, WorkflowInputs.aeb(), AebScenario(), model_source="agent")
    assert out.overall, out.notes


def test_runs_must_be_positive():
    with pytest.raises(ValueError):
        run_evaluation(EvalConfig((backend("mixed"),), runs=0))
