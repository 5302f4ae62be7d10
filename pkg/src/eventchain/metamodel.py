"""Metamodel and instance-model facility.

Metamodels are flat collections of classes with typed attributes and
references. Instance models are object graphs that conform to a metamodel.
Both are loaded from JSON documents and are immutable once built.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from types import MappingProxyType
from typing import Any, Iterable, Mapping

PRIMITIVE_TYPES = ("string", "float", "int", "bool")
MULTIPLICITIES = {
    "0..1": (0, 1),
    "1..1": (1, 1),
    "0..*": (0, None),
    "1..*": (1, None),
}


class ModelError(Exception):
    """Base class for metamodel and instance-model errors."""


class ModelParseError(ModelError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class DuplicateNameError(ModelError):
    pass


class DanglingTargetError(ModelError):
    pass


class ConformanceError(ModelError):
    def __init__(self, object_id: str | None, rule: str, message: str):
        self.object_id = object_id
        self.rule = rule
        prefix = f"object {object_id!r}: " if object_id is not None else ""
        super().__init__(f"{prefix}[{rule}] {message}")


class UnknownFeatureError(ModelError):
    pass


class UnsetAttributeError(ModelError):
    pass


@dataclass(frozen=True)
class Attribute:
    name: str
    type: str
    positive: bool = False


@dataclass(frozen=True)
class Reference:
    name: str
    target: str
    multiplicity: str = "0..*"
    containment: bool = False

    @property
    def lower(self) -> int:
        return MULTIPLICITIES[self.multiplicity][0]

    @property
    def upper(self) -> int | None:
        return MULTIPLICITIES[self.multiplicity][1]

    @property
    def single(self) -> bool:
        return self.upper == 1


@dataclass(frozen=True)
class MetaClass:
    name: str
    attributes: tuple[Attribute, ...] = ()
    references: tuple[Reference, ...] = ()

    def attribute(self, name: str) -> Attribute | None:
        for a in self.attributes:
            if a.name == name:
                return a
        return None

    def reference(self, name: str) -> Reference | None:
        for r in self.references:
            if r.name == name:
                return r
        return None

    @property
    def feature_names(self) -> list[str]:
        return [a.name for a in self.attributes] + [r.name for r in self.references]


@dataclass(frozen=True)
class Metamodel:
    name: str
    classes: tuple[MetaClass, ...] = ()
    root: str | None = None

    def __post_init__(self):
        seen = set()
        for c in self.classes:
            if c.name in seen:
                raise DuplicateNameError(f"duplicate class name {c.name!r}")
            seen.add(c.name)
            features = set()
            for f in c.feature_names:
                if f in features:
                    raise DuplicateNameError(f"duplicate feature {f!r} in class {c.name!r}")
                features.add(f)
            for a in c.attributes:
                if a.type not in PRIMITIVE_TYPES:
                    raise ModelError(f"{c.name}.{a.name}: unknown attribute type {a.type!r}")
            for r in c.references:
                if r.multiplicity not in MULTIPLICITIES:
                    raise ModelError(f"{c.name}.{r.name}: bad multiplicity {r.multiplicity!r}")
        for c in self.classes:
            for r in c.references:
                if r.target not in seen:
                    raise DanglingTargetError(
                        f"{c.name}.{r.name} targets undeclared class {r.target!r}")
        if self.root is not None and self.root not in seen:
            raise DanglingTargetError(f"root class {self.root!r} is not declared")

    def get_class(self, name: str) -> MetaClass | None:
        for c in self.classes:
            if c.name == name:
                return c
        return None

    @property
    def class_names(self) -> list[str]:
        return [c.name for c in self.classes]


@dataclass(frozen=True)
class ModelObject:
    id: str
    cls: str
    attributes: Mapping[str, Any] = field(default_factory=dict)
    references: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "attributes", MappingProxyType(dict(self.attributes)))
        refs = {k: tuple(v) for k, v in self.references.items()}
        object.__setattr__(self, "references", MappingProxyType(refs))

    def __eq__(self, other):
        if not isinstance(other, ModelObject):
            return NotImplemented
        return (self.id == other.id and self.cls == other.cls
                and dict(self.attributes) == dict(other.attributes)
                and _nonempty(self.references) == _nonempty(other.references))

    def __hash__(self):
        return hash((self.id, self.cls))

    def __repr__(self):
        return f"ModelObject({self.id!r}, {self.cls!r})"


def _nonempty(refs: Mapping[str, tuple[str, ...]]) -> dict:
    return {k: v for k, v in refs.items() if v}


class InstanceModel:
    """A conformant object graph. Construction validates every invariant."""

    def __init__(self, metamodel: Metamodel, objects: Iterable[ModelObject]):
        self.metamodel = metamodel
        self.objects: tuple[ModelObject, ...] = tuple(objects)
        index = {}
        for obj in self.objects:
            if obj.id in index:
                raise ConformanceError(obj.id, "unique-id", "duplicate object id")
            index[obj.id] = obj
        self._index = MappingProxyType(index)
        _check_conformance(self)

    @property
    def metamodel_name(self) -> str:
        return self.metamodel.name

    def get(self, object_id: str) -> ModelObject:
        return self._index[object_id]

    def __contains__(self, object_id: str) -> bool:
        return object_id in self._index

    def of_class(self, cls: str) -> list[ModelObject]:
        return [o for o in self.objects if o.cls == cls]

    def root(self) -> ModelObject:
        if self.metamodel.root is None:
            raise ModelError(f"metamodel {self.metamodel.name!r} declares no root class")
        (obj,) = self.of_class(self.metamodel.root)
        return obj

    def __eq__(self, other):
        if not isinstance(other, InstanceModel):
            return NotImplemented
        return (self.metamodel_name == other.metamodel_name
                and dict(self._index) == dict(other._index))

    def __repr__(self):
        return f"InstanceModel({self.metamodel_name!r}, {len(self.objects)} objects)"


def _check_conformance(m: InstanceModel) -> None:
    mm = m.metamodel
    contained_by: dict[str, str] = {}
    for obj in m.objects:
        mc = mm.get_class(obj.cls)
        if mc is None:
            raise ConformanceError(obj.id, "class-exists", f"unknown class {obj.cls!r}")
        for name, value in obj.attributes.items():
            attr = mc.attribute(name)
            if attr is None:
                raise ConformanceError(obj.id, "attribute-declared",
                                       f"{obj.cls} has no attribute {name!r}")
            if not _type_ok(attr.type, value):
                raise ConformanceError(obj.id, "attribute-type",
                                       f"{name}={value!r} is not of type {attr.type}")
            if attr.positive and not value > 0:
                raise ConformanceError(obj.id, "attribute-positive", f"{name} must be > 0")
        for name, targets in obj.references.items():
            ref = mc.reference(name)
            if ref is None:
                raise ConformanceError(obj.id, "reference-declared",
                                       f"{obj.cls} has no reference {name!r}")
            if len(set(targets)) != len(targets):
                raise ConformanceError(obj.id, "reference-unique",
                                       f"{name} lists a target twice")
            for tid in targets:
                if tid not in m:
                    raise ConformanceError(obj.id, "reference-resolves",
                                           f"{name} -> {tid!r} does not resolve")
                target = m.get(tid)
                if target.cls != ref.target:
                    raise ConformanceError(obj.id, "reference-type",
                                           f"{name} -> {tid!r} is {target.cls}, expected {ref.target}")
                if ref.containment:
                    if tid in contained_by:
                        raise ConformanceError(tid, "containment-forest",
                                               f"contained by both {contained_by[tid]!r} and {obj.id!r}")
                    contained_by[tid] = obj.id
        for ref in mc.references:
            n = len(obj.references.get(ref.name, ()))
            if n < ref.lower or (ref.upper is not None and n > ref.upper):
                raise ConformanceError(obj.id, "multiplicity",
                                       f"{ref.name} has {n} targets, multiplicity is {ref.multiplicity}")
    # containment cycles
    for start in contained_by:
        seen = {start}
        cur = start
        while cur in contained_by:
            cur = contained_by[cur]
            if cur in seen:
                raise ConformanceError(start, "containment-forest", "containment cycle")
            seen.add(cur)
    if mm.root is not None:
        roots = m.of_class(mm.root)
        if len(roots) != 1:
            raise ConformanceError(None, "single-root",
                                   f"expected exactly one {mm.root} object, found {len(roots)}")


def _type_ok(type_name: str, value: Any) -> bool:
    if type_name == "string":
        return isinstance(value, str)
    if type_name == "bool":
        return isinstance(value, bool)
    if type_name == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if type_name == "float":
        return isinstance(value, float)
    return False


# --- loading -------------------------------------------------------------

def _parse_json(document: str) -> Any:
    try:
        return json.loads(document)
    except json.JSONDecodeError as e:
        raise ModelParseError(e.msg, e.lineno, e.colno) from None


def _require(d: Any, key: str, kind: type, where: str):
    if not isinstance(d, dict):
        raise ModelParseError(f"{where}: expected an object")
    if key not in d:
        raise ModelParseError(f"{where}: missing key {key!r}")
    v = d[key]
    if not isinstance(v, kind) or (kind is not bool and isinstance(v, bool)):
        raise ModelParseError(f"{where}.{key}: expected {kind.__name__}")
    return v


def load_metamodel(document: str) -> Metamodel:
    data = _parse_json(document)
    name = _require(data, "name", str, "metamodel")
    classes = []
    for i, c in enumerate(_require(data, "classes", list, "metamodel")):
        where = f"classes[{i}]"
        attrs = []
        for j, a in enumerate(c.get("attributes", []) if isinstance(c, dict) else []):
            aw = f"{where}.attributes[{j}]"
            attrs.append(Attribute(_require(a, "name", str, aw), _require(a, "type", str, aw),
                                   bool(a.get("positive", False))))
        refs = []
        for j, r in enumerate(c.get("references", []) if isinstance(c, dict) else []):
            rw = f"{where}.references[{j}]"
            refs.append(Reference(_require(r, "name", str, rw), _require(r, "target", str, rw),
                                  r.get("multiplicity", "0..*"), bool(r.get("containment", False))))
        classes.append(MetaClass(_require(c, "name", str, where), tuple(attrs), tuple(refs)))
    root = data.get("root")
    return Metamodel(name, tuple(classes), root)


def load_instance(document: str, mm: Metamodel) -> InstanceModel:
    data = _parse_json(document)
    declared = _require(data, "metamodel", str, "instance")
    if declared != mm.name:
        raise ConformanceError(None, "metamodel-name",
                               f"document targets {declared!r}, not {mm.name!r}")
    objects = []
    for i, o in enumerate(_require(data, "objects", list, "instance")):
        where = f"objects[{i}]"
        oid = _require(o, "id", str, where)
        cls = _require(o, "class", str, where)
        attrs = dict(o.get("attributes", {}))
        mc = mm.get_class(cls)
        if mc is not None:
            for k, v in attrs.items():
                a = mc.attribute(k)
                # JSON has one number type; widen integral floats
                if a is not None and a.type == "float" and isinstance(v, int) and not isinstance(v, bool):
                    attrs[k] = float(v)
        refs = o.get("references", {})
        if not isinstance(refs, dict) or not all(isinstance(v, list) for v in refs.values()):
            raise ModelParseError(f"{where}.references: expected a map of id lists")
        objects.append(ModelObject(oid, cls, attrs, refs))
    return InstanceModel(mm, objects)


def serialize_instance(m: InstanceModel) -> str:
    objects = []
    for obj in sorted(m.objects, key=lambda o: o.id):
        entry: dict[str, Any] = {"id": obj.id, "class": obj.cls}
        if obj.attributes:
            entry["attributes"] = dict(obj.attributes)
        refs = _nonempty(obj.references)
        if refs:
            entry["references"] = {k: list(v) for k, v in refs.items()}
        objects.append(entry)
    doc = {"metamodel": m.metamodel_name, "objects": objects}
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def navigate(m: InstanceModel, obj: ModelObject, path: str):
    """Read one feature of ``obj``.

    Attributes yield their primitive value; references yield the list of
    target objects, even for single-valued references.
    """
    mc = m.metamodel.get_class(obj.cls)
    if mc.attribute(path) is not None:
        if path not in obj.attributes:
            raise UnsetAttributeError(f"{obj.id}.{path} is unset")
        return obj.attributes[path]
    if mc.reference(path) is not None:
        return [m.get(t) for t in obj.references.get(path, ())]
    raise UnknownFeatureError(f"{obj.cls} has no feature {path!r}")


def event_chain_metamodel() -> Metamodel:
    text = resources.files("eventchain").joinpath("data/metamodel/event_chain.json").read_text("utf-8")
    return load_metamodel(text)
