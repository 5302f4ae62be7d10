"""Deterministic publish/subscribe simulator and the AEB scenario.

Nodes fire periodically at their own frequency (phase 0). Within a tick the
world publishes first, then nodes fire in chain order, each reading the
latest message on every subscribed topic. The ego vehicle is a point mass
braking against a stationary obstacle.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

log = logging.getLogger(__name__)

_EPS = 1e-9


class WiringError(Exception):
    pass


class DanglingSubscriptionError(WiringError):
    pass


class ScenarioError(Exception):
    pass


class UnresolvedBehaviorError(ScenarioError):
    pass


class BehaviorContractError(ScenarioError):
    pass


# --- AEB functions -----------------------------------------------------------

def ttc_calculate(distance: float, relative_speed: float) -> float:
    """Time to collision in seconds; ``inf`` when not closing in."""
    if distance < 0:
        raise ValueError(f"distance must be >= 0, got {distance}")
    if relative_speed <= 0:
        return math.inf
    return distance / relative_speed


def braking_decision(ttc: float) -> float:
    """Normalized brake force: full below 1 s, linear ramp to zero at 2 s."""
    if ttc < 1.0:
        return 1.0
    if ttc < 2.0:
        return 2.0 - ttc
    return 0.0


# --- wiring ------------------------------------------------------------------

@dataclass(frozen=True)
class Port:
    topic: str
    field: str
    name: str
    message_type: str = ""
    qos_profile: str = ""


@dataclass(frozen=True)
class NodeSpec:
    name: str
    frequency: float
    subscriptions: tuple[Port, ...] = ()
    publications: tuple[Port, ...] = ()
    behavior: str = ""

    @property
    def behavior_key(self) -> str:
        return self.behavior or self.name

    @property
    def output_names(self) -> list[str]:
        return list(dict.fromkeys(p.name for p in self.publications))


@dataclass(frozen=True)
class NodeGraph:
    nodes: tuple[NodeSpec, ...] = ()
    name: str = ""

    def published_topics(self) -> set[str]:
        return {p.topic for n in self.nodes for p in n.publications}

    def node(self, name: str) -> NodeSpec:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)


def _req(d: Any, key: str, kind, path: str):
    if not isinstance(d, dict) or key not in d:
        raise WiringError(f"{path}.{key}: missing")
    v = d[key]
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise WiringError(f"{path}.{key}: expected a number")
        return float(v)
    if not isinstance(v, kind):
        raise WiringError(f"{path}.{key}: expected {kind.__name__}")
    return v


def load_wiring(manifest: str, strict: bool = False, world_topics: frozenset | set | None = None) -> NodeGraph:
    """Parse a wiring manifest into a validated :class:`NodeGraph`.

    With ``strict`` every subscription must be fed by a node publication or
    by one of ``world_topics`` (default: the topics of :class:`WorldBinding`).
    """
    try:
        data = json.loads(manifest) if manifest.strip() else {}
    except json.JSONDecodeError as e:
        raise WiringError(f"invalid JSON: {e.msg} (line {e.lineno}, column {e.colno})") from None
    if not isinstance(data, dict):
        raise WiringError("manifest must be a JSON object")
    nodes = []
    names = set()
    for i, n in enumerate(data.get("nodes", [])):
        path = f"nodes[{i}]"
        name = _req(n, "name", str, path)
        if name in names:
            raise WiringError(f"{path}.name: duplicate node {name!r}")
        names.add(name)
        freq = _req(n, "frequency", float, path)
        if not freq > 0:
            raise WiringError(f"{path}.frequency: must be > 0")
        subs = tuple(
            Port(_req(s, "topic", str, f"{path}.subscriptions[{j}]"), _req(s, "field", str, f"{path}.subscriptions[{j}]"),
                 _req(s, "input", str, f"{path}.subscriptions[{j}]"), s.get("message_type", ""), s.get("qos_profile", ""))
            for j, s in enumerate(n.get("subscriptions", [])))
        pubs = tuple(
            Port(_req(p, "topic", str, f"{path}.publications[{j}]"), _req(p, "field", str, f"{path}.publications[{j}]"),
                 _req(p, "output", str, f"{path}.publications[{j}]"), p.get("message_type", ""), p.get("qos_profile", ""))
            for j, p in enumerate(n.get("publications", [])))
        nodes.append(NodeSpec(name, freq, subs, pubs, n.get("behavior", "")))
    graph = NodeGraph(tuple(nodes), data.get("event_chain", ""))
    if strict:
        if world_topics is None:
            world_topics = WorldBinding().published
        fed = graph.published_topics() | set(world_topics)
        for n in graph.nodes:
            for s in n.subscriptions:
                if s.topic not in fed:
                    raise DanglingSubscriptionError(f"node {n.name!r} subscribes to {s.topic!r}, "
                                                    "which nothing publishes")
    return graph


# --- messages ----------------------------------------------------------------

@dataclass(frozen=True)
class Message:
    topic: str
    timestamp: float
    seq: int
    payload: Mapping[str, Any]
    publisher: str = ""


class MessageStore:
    """Latest-value store with a full publication log."""

    def __init__(self):
        self.latest: dict[str, Message] = {}
        self.log: list[Message] = []

    def publish(self, topic: str, timestamp: float, payload: dict, publisher: str) -> Message:
        prev = self.latest.get(topic)
        if prev is not None and timestamp < prev.timestamp:
            raise ScenarioError(f"timestamp went backwards on {topic}")
        msg = Message(topic, timestamp, len(self.log), dict(payload), publisher)
        self.latest[topic] = msg
        self.log.append(msg)
        return msg


# --- scenario ----------------------------------------------------------------

@dataclass(frozen=True)
class WorldBinding:
    """Topics through which the simulated world talks to the node graph."""
    distance_topic: str = "/carla/ego_vehicle/lidar"
    distance_field: str = "data"
    speed_topic: str = "/carla/ego_vehicle/vehicle_status"
    speed_field: str = "velocity"
    brake_topic: str = "/carla/ego_vehicle/vehicle_control_cmd"
    brake_field: str = "brake"

    @property
    def published(self) -> frozenset:
        return frozenset({self.distance_topic, self.speed_topic})


@dataclass(frozen=True)
class AebScenario:
    v0: float = 10.0
    d0: float = 50.0
    a_max: float = 8.0
    dt: float = 0.01
    duration: float = 20.0
    sensor_frequency: float = 20.0
    world: WorldBinding = field(default_factory=WorldBinding)

    def validate(self, graph: NodeGraph | None = None) -> None:
        for name in ("v0", "d0", "a_max", "dt", "sensor_frequency"):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"{name} must be positive")
        if self.duration < 0:
            raise ScenarioError("duration must be >= 0")
        freqs = [self.sensor_frequency] + [n.frequency for n in (graph.nodes if graph else ())]
        if self.dt > 1.0 / (2.0 * max(freqs)) + _EPS:
            raise ScenarioError(f"dt={self.dt} exceeds half the shortest period ({1.0 / max(freqs)} s)")


@dataclass(frozen=True)
class TickRecord:
    time: float
    speed: float
    gap: float
    ttc: float
    brake_force: float
    messages: tuple[Message, ...] = ()


@dataclass
class NodeMetrics:
    activations: int = 0
    skipped: int = 0
    max_input_age: float = 0.0


@dataclass
class ScenarioTrace:
    ticks: list[TickRecord]
    final_speed: float
    final_gap: float
    collided: bool
    metrics: dict[str, NodeMetrics]
    messages: list[Message]

    @property
    def stopped(self) -> bool:
        return self.final_speed == 0.0

    @property
    def passed(self) -> bool:
        return self.stopped and not self.collided and self.final_gap > 0

    @property
    def engagement_time(self) -> float | None:
        for t in self.ticks:
            if t.brake_force > 0:
                return t.time
        return None

    def engagement(self) -> TickRecord | None:
        for t in self.ticks:
            if t.brake_force > 0:
                return t
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "speed", "gap", "ttc", "brake_force"])
        for t in self.ticks:
            w.writerow([repr(round(t.time, 9)), repr(t.speed), repr(t.gap), repr(t.ttc), repr(t.brake_force)])
        return buf.getvalue()

    def messages_jsonl(self) -> str:
        lines = []
        for m in self.messages:
            lines.append(json.dumps({"seq": m.seq, "time": round(m.timestamp, 9), "topic": m.topic,
                                     "publisher": m.publisher, "payload": dict(m.payload)}, sort_keys=True))
        return "".join(line + "\n" for line in lines)

    def summary(self) -> dict:
        eng = self.engagement()
        return {
            "passed": self.passed,
            "collided": self.collided,
            "stopped": self.stopped,
            "final_speed": self.final_speed,
            "final_gap": self.final_gap,
            "ticks": len(self.ticks),
            "engagement_time": None if eng is None else round(eng.time, 9),
            "engagement_gap": None if eng is None else eng.gap,
            "max_brake_force": max((t.brake_force for t in self.ticks), default=0.0),
        }


BehaviorFactory = Callable[[], Any]


def _due(tick: int, dt: float, fired: int, freq: float) -> bool:
    return tick * dt + _EPS >= fired / freq


def run_scenario(graph: NodeGraph, behaviors: Mapping[str, BehaviorFactory], sc: AebScenario) -> ScenarioTrace:
    sc.validate(graph)
    instances = {}
    for n in graph.nodes:
        factory = behaviors.get(n.behavior_key)
        if factory is None:
            raise UnresolvedBehaviorError(f"no behavior registered for {n.behavior_key!r}")
        instances[n.name] = factory()
    try:
        return _loop(graph, instances, sc)
    finally:
        for inst in instances.values():
            close = getattr(inst, "close", None)
            if callable(close):
                close()


def _loop(graph: NodeGraph, instances: dict, sc: AebScenario) -> ScenarioTrace:
    store = MessageStore()
    w = sc.world
    metrics = {n.name: NodeMetrics() for n in graph.nodes}
    fired = {n.name: 0 for n in graph.nodes}
    world_fired = 0
    v, gap = float(sc.v0), float(sc.d0)
    ticks: list[TickRecord] = []
    collided = False
    n_ticks = int(round(sc.duration / sc.dt))

    for i in range(n_ticks):
        t = i * sc.dt
        first = len(store.log)
        if _due(i, sc.dt, world_fired, sc.sensor_frequency):
            world_fired += 1
            _publish_grouped(store, t, "world", [(w.distance_topic, w.distance_field, gap),
                                                 (w.speed_topic, w.speed_field, v)])
        for n in graph.nodes:
            if not _due(i, sc.dt, fired[n.name], n.frequency):
                continue
            fired[n.name] += 1
            _fire(n, instances[n.name], store, t, metrics[n.name])
        cmd = store.latest.get(w.brake_topic)
        brake = 0.0
        if cmd is not None:
            if w.brake_field not in cmd.payload:
                raise ScenarioError(f"brake topic {w.brake_topic} carries no field {w.brake_field!r}")
            brake = float(cmd.payload[w.brake_field])
            if not 0.0 <= brake <= 1.0:
                raise ScenarioError(f"brake command {brake!r} outside [0, 1] at t={t:.3f}")
        ticks.append(TickRecord(t, v, gap, ttc_calculate(max(gap, 0.0), v), brake,
                                tuple(store.log[first:])))
        v = max(0.0, v - brake * sc.a_max * sc.dt)
        gap -= v * sc.dt
        if gap <= 0.0:
            collided = True
            break
        if v == 0.0:
            break
    return ScenarioTrace(ticks, v, gap, collided, metrics, store.log)


def _publish_grouped(store: MessageStore, t: float, publisher: str, items) -> None:
    payloads: dict[str, dict] = {}
    for topic, fld, value in items:
        payloads.setdefault(topic, {})[fld] = value
    for topic, payload in payloads.items():
        store.publish(topic, t, payload, publisher)


def _fire(n: NodeSpec, behavior, store: MessageStore, t: float, m: NodeMetrics) -> None:
    inputs = {}
    oldest = t
    for s in n.subscriptions:
        msg = store.latest.get(s.topic)
        if msg is None:
            log.warning("%s: msg not received on %s", n.name, s.topic)
            m.skipped += 1
            return
        if s.field not in msg.payload:
            raise ScenarioError(f"{n.name}: message on {s.topic} has no field {s.field!r}")
        inputs[s.name] = msg.payload[s.field]
        oldest = min(oldest, msg.timestamp)
    try:
        output = behavior.execute(**inputs)
    except ScenarioError:
        raise
    except Exception as e:
        raise ScenarioError(f"{n.name}.execute raised {type(e).__name__}: {e}") from e
    if not isinstance(output, dict):
        raise BehaviorContractError(f"{n.name}.execute returned {type(output).__name__}, expected dict")
    declared = set(n.output_names)
    if set(output) != declared:
        extra = sorted(set(output) - declared)
        missing = sorted(declared - set(output))
        raise BehaviorContractError(f"{n.name}.execute output keys mismatch: "
                                    f"undeclared {extra}, missing {missing}")
    m.activations += 1
    m.max_input_age = max(m.max_input_age, t - oldest)
    _publish_grouped(store, t, n.name, [(p.topic, p.field, output[p.name]) for p in n.publications])
