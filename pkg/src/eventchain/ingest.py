"""Event-chain descriptions: parsing, reuse diffing and lowering to a model."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .metamodel import InstanceModel, Metamodel, ModelObject


class SchemaError(Exception):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class FrequencyPolicyError(Exception):
    pass


class LoweringError(Exception):
    pass


@dataclass(frozen=True)
class PortValue:
    name: str
    field: str
    description: str = ""


@dataclass(frozen=True)
class PortDesc:
    topic: str
    message_type: str
    qos_profile: str
    values: tuple[PortValue, ...] = ()


@dataclass(frozen=True)
class ComponentDesc:
    name: str
    description: str = ""
    input: tuple[PortDesc, ...] = ()
    output: tuple[PortDesc, ...] = ()

    def input_names(self) -> list[str]:
        return [v.name for p in self.input for v in p.values]

    def output_names(self) -> list[str]:
        return [v.name for p in self.output for v in p.values]

    def to_dict(self) -> dict:
        def port(p: PortDesc) -> dict:
            return {
                "topic": p.topic,
                "message_type": p.message_type,
                "qos_profile": p.qos_profile,
                "values": [{"name": v.name, "field": v.field, "description": v.description}
                           for v in p.values],
            }
        return {
            "name": self.name,
            "description": self.description,
            "input": [port(p) for p in self.input],
            "output": [port(p) for p in self.output],
        }


@dataclass(frozen=True)
class EventChainDescription:
    components: tuple[ComponentDesc, ...] = ()

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.components]

    def component(self, name: str) -> ComponentDesc:
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> str:
        return json.dumps([c.to_dict() for c in self.components], indent=1, ensure_ascii=False) + "\n"


@dataclass(frozen=True)
class ComponentRegistry:
    components: tuple[ComponentDesc, ...] = ()

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.components]

    def to_json(self) -> str:
        return json.dumps([c.to_dict() for c in self.components], indent=1, ensure_ascii=False) + "\n"


@dataclass(frozen=True)
class SignalField:
    field: str
    type: str
    description: str = ""


@dataclass(frozen=True)
class SignalEntry:
    topic: str
    message_type: str
    qos_profile: str
    fields: tuple[SignalField, ...] = ()


@dataclass(frozen=True)
class SignalRegistry:
    entries: tuple[SignalEntry, ...] = ()

    def to_json(self) -> str:
        doc = [{
            "Topic Name": e.topic,
            "Message Type": e.message_type,
            "qos_profile": e.qos_profile,
            "Message Definition": [{"Field": f.field, "Type": f.type, "Description": f.description}
                                   for f in e.fields],
        } for e in self.entries]
        return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


@dataclass(frozen=True)
class FrequencyPolicy:
    """Per-node frequency overrides (Hz) with an optional fallback."""
    overrides: dict[str, float] = field(default_factory=dict)
    default: float | None = 20.0

    def resolve(self, name: str) -> float:
        value = self.overrides.get(name, self.default)
        if value is None:
            raise FrequencyPolicyError(f"no frequency resolvable for component {name!r}")
        if not value > 0:
            raise FrequencyPolicyError(f"frequency for {name!r} must be > 0, got {value!r}")
        return float(value)


# --- parsing -----------------------------------------------------------------

def _load(document: str, root: str) -> Any:
    try:
        return json.loads(document)
    except json.JSONDecodeError as e:
        raise SchemaError(root, f"invalid JSON: {e.msg} (line {e.lineno}, column {e.colno})") from None


def _get(d: Any, key: str, kind: type, path: str, default: Any = ...):
    if not isinstance(d, dict):
        raise SchemaError(path, "expected an object")
    if key not in d:
        if default is not ...:
            return default
        raise SchemaError(f"{path}.{key}", "missing")
    v = d[key]
    if not isinstance(v, kind):
        raise SchemaError(f"{path}.{key}", f"expected {kind.__name__}, got {type(v).__name__}")
    return v


def _port(d: Any, path: str) -> PortDesc:
    topic = _get(d, "topic", str, path)
    message_type = _get(d, "message_type", str, path)
    if message_type.count("/") != 1 or message_type.startswith("/") or message_type.endswith("/"):
        raise SchemaError(f"{path}.message_type", f"{message_type!r} is not of the form 'pkg/Type'")
    qos = _get(d, "qos_profile", str, path)
    values = []
    for i, v in enumerate(_get(d, "values", list, path)):
        vp = f"{path}.values[{i}]"
        values.append(PortValue(_get(v, "name", str, vp), _get(v, "field", str, vp),
                                _get(v, "description", str, vp, "")))
    return PortDesc(topic, message_type, qos, tuple(values))


def _component(d: Any, path: str) -> ComponentDesc:
    name = _get(d, "name", str, path)
    description = _get(d, "description", str, path, "")
    ins = tuple(_port(p, f"{path}.input[{i}]") for i, p in enumerate(_get(d, "input", list, path)))
    outs = tuple(_port(p, f"{path}.output[{i}]") for i, p in enumerate(_get(d, "output", list, path)))
    return ComponentDesc(name, description, ins, outs)


def _components(data: Any, root: str) -> tuple[ComponentDesc, ...]:
    if not isinstance(data, list):
        raise SchemaError(root, "expected a JSON array of components")
    comps = tuple(_component(c, f"{root}[{i}]") for i, c in enumerate(data))
    seen = set()
    for i, c in enumerate(comps):
        if c.name in seen:
            raise SchemaError(f"{root}[{i}].name", f"duplicate component name {c.name!r}")
        seen.add(c.name)
    return comps


def parse_event_chain(document: str) -> EventChainDescription:
    return EventChainDescription(_components(_load(document, "components"), "components"))


def parse_component_registry(document: str) -> ComponentRegistry:
    return ComponentRegistry(_components(_load(document, "registry"), "registry"))


def parse_signal_registry(document: str) -> SignalRegistry:
    data = _load(document, "signals")
    if not isinstance(data, list):
        raise SchemaError("signals", "expected a JSON array")
    entries = []
    seen = set()
    for i, e in enumerate(data):
        path = f"signals[{i}]"
        topic = _get(e, "Topic Name", str, path)
        if topic in seen:
            raise SchemaError(f"{path}.Topic Name", f"duplicate topic {topic!r}")
        seen.add(topic)
        fields = tuple(
            SignalField(_get(f, "Field", str, f"{path}.Message Definition[{j}]"),
                        _get(f, "Type", str, f"{path}.Message Definition[{j}]"),
                        _get(f, "Description", str, f"{path}.Message Definition[{j}]", ""))
            for j, f in enumerate(_get(e, "Message Definition", list, path)))
        entries.append(SignalEntry(topic, _get(e, "Message Type", str, path),
                                   _get(e, "qos_profile", str, path), fields))
    return SignalRegistry(tuple(entries))


# --- diff & lowering ---------------------------------------------------------

def diff_components(desc: EventChainDescription, reg: ComponentRegistry) -> tuple[list[str], list[str]]:
    """Split component names into (existing, to_generate), keeping chain order."""
    known = set(reg.names)
    existing = [n for n in desc.names if n in known]
    to_generate = [n for n in desc.names if n not in known]
    return existing, to_generate


def lower_to_instance(desc: EventChainDescription, reg: ComponentRegistry, freq: FrequencyPolicy,
                      mm: Metamodel, chain_name: str = "EventChain") -> InstanceModel:
    existing, _ = diff_components(desc, reg)
    existing = set(existing)

    data_ids: dict[tuple[str, str], str] = {}
    data_attrs: dict[str, dict] = {}
    node_refs: list[tuple[list[str], list[str]]] = []

    def intern(port: PortDesc, value: PortValue) -> str:
        key = (port.topic, value.field)
        if key in data_ids:
            did = data_ids[key]
            attrs = data_attrs[did]
            if attrs["qosProfile"] != port.qos_profile:
                raise LoweringError(f"conflicting qos_profile for {port.topic}#{value.field}: "
                                    f"{attrs['qosProfile']!r} vs {port.qos_profile!r}")
            if attrs["messageType"] != port.message_type:
                raise LoweringError(f"conflicting message_type for {port.topic}#{value.field}: "
                                    f"{attrs['messageType']!r} vs {port.message_type!r}")
            return did
        did = f"data_{len(data_ids) + 1}"
        data_ids[key] = did
        data_attrs[did] = {
            "name": value.name,
            "topicName": port.topic,
            "messageType": port.message_type,
            "fieldName": value.field,
            "qosProfile": port.qos_profile,
            "description": value.description,
        }
        return did

    for comp in desc.components:
        ins = _dedup([intern(p, v) for p in comp.input for v in p.values])
        outs = _dedup([intern(p, v) for p in comp.output for v in p.values])
        node_refs.append((ins, outs))

    node_ids = [f"node_{c.name}" for c in desc.components]
    objects = [ModelObject("eventchain", "EventChain", {"name": chain_name},
                           {"software": node_ids, "data": list(data_ids.values())})]
    for k, comp in enumerate(desc.components):
        ins, outs = node_refs[k]
        refs = {"input": ins, "output": outs}
        if k + 1 < len(node_ids):
            refs["nextstep"] = [node_ids[k + 1]]
        attrs = {"name": comp.name, "frequency": freq.resolve(comp.name),
                 "existing": comp.name in existing}
        objects.append(ModelObject(node_ids[k], "SoftwareNode", attrs, refs))
    for did, attrs in data_attrs.items():
        objects.append(ModelObject(did, "Data", attrs))
    return InstanceModel(mm, objects)


def _dedup(ids: list[str]) -> list[str]:
    return list(dict.fromkeys(ids))
