import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eventchain.behaviors import REFERENCE_BEHAVIORS, StatelessBrakingDecision
from eventchain.codegen import parse_template, render, shipped_template
from eventchain.sim import (AebScenario, BehaviorContractError, DanglingSubscriptionError, ScenarioError,
                            UnresolvedBehaviorError, WiringError, braking_decision, load_wiring, run_scenario,
                            ttc_calculate)

from oracle import engagement_oracle

SENSOR_PERIOD = 1 / 20


@pytest.fixture(scope="module")
def graph(aeb_model):
    manifest = render(parse_template(shipped_template("wiring_manifest.tmpl")), aeb_model)["wiring_manifest.json"]
    return load_wiring(manifest, strict=True)


@pytest.mark.parametrize("d, v, expected", [(20.0, 10.0, 2.0), (5.0, 10.0, 0.5), (10.0, 0.0, math.inf),
                                            (10.0, -1.0, math.inf), (0.0, 5.0, 0.0)])
def test_ttc(d, v, expected):
    assert ttc_calculate(d, v) == expected


def test_ttc_negative_distance():
    with pytest.raises(ValueError):
        ttc_calculate(-1.0, 5.0)


@pytest.mark.parametrize("ttc, force", [(0.5, 1.0), (0.99, 1.0), (1.0, 1.0), (1.5, 0.5), (1.99, 0.01),
                                        (2.0, 0.0), (2.5, 0.0), (math.inf, 0.0), (0.0, 1.0)])
def test_braking_table(ttc, force):
    assert braking_decision(ttc) == pytest.approx(force, abs=1e-9)


@given(st.floats(min_value=0, allow_nan=False))
def test_braking_normalized_and_monotone(ttc):
    f = braking_decision(ttc)
    assert 0.0 <= f <= 1.0
    assert braking_decision(ttc + 0.1) <= f


def test_aeb_graph(graph):
    assert [n.name for n in graph.nodes] == ["ObjectDetection", "TTC_Calculation", "Braking_Decision",
                                             "Carla_Vehicle_Control"]
    assert graph.node("TTC_Calculation").frequency == 20.0


def test_empty_manifest():
    assert load_wiring("").nodes == ()
    assert load_wiring('{"nodes": []}', strict=True).nodes == ()


def _manifest(*nodes):
    return json.dumps({"event_chain": "t", "nodes": list(nodes)})


def _n(name, freq=20.0, subs=(), pubs=()):
    return {"name": name, "frequency": freq,
            "subscriptions": [{"topic": t, "field": f, "input": i} for t, f, i in subs],
            "publications": [{"topic": t, "field": f, "output": o} for t, f, o in pubs]}


def test_dangling_subscription_strict_only():
    doc = _manifest(_n("A", subs=[("/ghost", "data", "x")]))
    assert len(load_wiring(doc).nodes) == 1
    with pytest.raises(DanglingSubscriptionError, match="/ghost"):
        load_wiring(doc, strict=True)


@pytest.mark.parametrize("doc", [
    "{bad json",
    "[]",
    _manifest(_n("A"), _n("A")),
    _manifest(_n("A", freq=0.0)),
    _manifest({"name": "A"}),
])
def test_wiring_schema_errors(doc):
    with pytest.raises(WiringError):
        load_wiring(doc)


@pytest.mark.parametrize("v0", [5.0, 10.0, 15.0])
def test_safety_grid(graph, v0):
    trace = run_scenario(graph, REFERENCE_BEHAVIORS, AebScenario(v0=v0, d0=50.0, a_max=8.0))
    assert trace.passed
    assert trace.final_gap > 0 and trace.final_speed == 0.0


@pytest.mark.parametrize("v0", [5.0, 10.0, 15.0])
def test_engagement_matches_oracle(graph, v0):
    trace = run_scenario(graph, REFERENCE_BEHAVIORS, AebScenario(v0=v0))
    expected, oracle_gap = engagement_oracle(v0, 50.0, 8.0)
    assert oracle_gap > 0
    assert abs(trace.engagement_time - expected) <= SENSOR_PERIOD + 1e-9


def test_engagement_when_gap_first_below_20m(graph):
    trace = run_scenario(graph, REFERENCE_BEHAVIORS, AebScenario(v0=10.0))
    eng = trace.engagement()
    before = [t for t in trace.ticks if t.time < eng.time]
    assert all(t.brake_force == 0.0 for t in before)
    assert eng.gap <= 20.0 + 1e-9


@settings(max_examples=25, deadline=None)
@given(st.floats(1.0, 30.0), st.floats(10.0, 80.0))
def test_normalized_and_monotone(graph, v0, d0):
    trace = run_scenario(graph, REFERENCE_BEHAVIORS, AebScenario(v0=v0, d0=d0))
    forces = [t.brake_force for t in trace.ticks]
    assert all(0.0 <= f <= 1.0 for f in forces)
    assert all(b >= a for a, b in zip(forces, forces[1:]))


def test_stateless_ramp_releases_brake(graph):
    # documents why the reference decision holds its peak
    behaviors = {**REFERENCE_BEHAVIORS, "Braking_Decision": StatelessBrakingDecision}
    trace = run_scenario(graph, behaviors, AebScenario(v0=15.0, duration=30.0))
    forces = [t.brake_force for t in trace.ticks]
    assert any(b < a for a, b in zip(forces, forces[1:]))
    assert not trace.passed


def test_high_speed_collides(graph):
    trace = run_scenario(graph, REFERENCE_BEHAVIORS, AebScenario(v0=25.0))
    assert trace.collided and not trace.passed


def test_determinism(graph):
    a = run_scenario(graph, REFERENCE_BEHAVIORS, AebScenario(v0=12.0))
    b = run_scenario(graph, REFERENCE_BEHAVIORS, AebScenario(v0=12.0))
    assert a.to_csv() == b.to_csv()
    assert a.messages_jsonl() == b.messages_jsonl()
    assert a.summary() == b.summary()


def test_zero_duration(graph):
    trace = run_scenario(graph, REFERENCE_BEHAVIORS, AebScenario(duration=0.0))
    assert trace.ticks == [] and trace.messages == []


def test_scenario_validation(graph):
    with pytest.raises(ScenarioError, match="dt"):
        run_scenario(graph, REFERENCE_BEHAVIORS, AebScenario(dt=0.05))
    with pytest.raises(ScenarioError):
        run_scenario(graph, REFERENCE_BEHAVIORS, AebScenario(v0=0.0))


def test_unresolved_behavior(graph):
    with pytest.raises(UnresolvedBehaviorError):
        run_scenario(graph, {"ObjectDetection": REFERENCE_BEHAVIORS["ObjectDetection"]}, AebScenario())


class _Extra:
    def execute(self, ttc):
        return {"brake_force": 0.0, "debug": 1}


class _OutOfRange:
    def execute(self, brake_force):
        return {"brake_cmd": 1.5}


def test_contract_violation(graph):
    with pytest.raises(BehaviorContractError, match="debug"):
        run_scenario(graph, {**REFERENCE_BEHAVIORS, "Braking_Decision": _Extra}, AebScenario())


def test_brake_outside_range(graph):
    with pytest.raises(ScenarioError, match="outside"):
        run_scenario(graph, {**REFERENCE_BEHAVIORS, "Carla_Vehicle_Control": _OutOfRange}, AebScenario())


class _Counter:
    def __init__(self):
        self.k = 0

    def execute(self):
        self.k += 1
        return {"count": self.k}


class _Reader:
    seen: list = []

    def execute(self, count):
        _Reader.seen.append(count)
        return {}


def test_latest_value_semantics():
    _Reader.seen = []
    graph = load_wiring(_manifest(_n("Counter", 20.0, pubs=[("/count", "seq", "count")]),
                                  _n("Reader", 10.0, subs=[("/count", "seq", "count")])))
    trace = run_scenario(graph, {"Counter": _Counter, "Reader": _Reader}, AebScenario(duration=1.0))
    # counter fires at 0, 0.05, 0.1, ...; the 10 Hz reader sees the newest value each time
    assert _Reader.seen == [1, 3, 5, 7, 9, 11, 13, 15, 17, 19]
    assert trace.metrics["Reader"].activations == 10
    assert trace.metrics["Reader"].max_input_age == 0.0


def test_missing_input_skips_with_warning(caplog):
    graph = load_wiring(_manifest(_n("Reader", 10.0, subs=[("/never", "seq", "count")])))
    trace = run_scenario(graph, {"Reader": _Reader}, AebScenario(duration=0.5))
    assert trace.metrics["Reader"].skipped == 5
    assert trace.metrics["Reader"].activations == 0
    assert "msg not received" in caplog.text


def test_trace_exports(graph):
    trace = run_scenario(graph, REFERENCE_BEHAVIORS, AebScenario())
    lines = trace.to_csv().splitlines()
    assert lines[0] == "time,speed,gap,ttc,brake_force"
    assert len(lines) == len(trace.ticks) + 1
    first = json.loads(trace.messages_jsonl().splitlines()[0])
    assert first["publisher"] == "world" and first["seq"] == 0
