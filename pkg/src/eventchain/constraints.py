"""OCL-subset constraint language: parsing and evaluation over instance models.

Surface syntax::

    context SoftwareNode
      inv HasInputAndOutputData:
        self.input->notEmpty() and self.output->notEmpty()

See ``docs/grammar.md`` for the full grammar.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

from . import expr as ex
from .metamodel import InstanceModel, ModelError, ModelObject, navigate

OCL = ex.Dialect(
    "constraint language",
    dot_calls=frozenset(),
    arrow_calls=frozenset({"notEmpty", "isEmpty", "size"}),
    iterators=frozenset({"forAll", "exists"}),
)


class ConstraintSyntaxError(Exception):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} at line {line}, column {column}")


class EvaluationError(Exception):
    pass


class UnknownContextError(Exception):
    pass


@dataclass(frozen=True)
class Invariant:
    name: str
    expr: ex.Node
    source: str


@dataclass(frozen=True)
class Context:
    cls: str
    invariants: tuple[Invariant, ...]


@dataclass(frozen=True)
class ConstraintSet:
    contexts: tuple[Context, ...]

    def invariant_names(self) -> list[str]:
        return [inv.name for c in self.contexts for inv in c.invariants]


_HEAD_RE = re.compile(r"\b(context|inv)\b")


def parse_constraints(text: str) -> ConstraintSet:
    """Parse constraint text into a :class:`ConstraintSet`.

    The text is split on the ``context`` and ``inv`` keywords; each invariant
    body runs up to the next keyword and is handed to the expression parser.
    """
    try:
        return _parse(text)
    except ex.ExprSyntaxError as e:
        raise ConstraintSyntaxError(e.message, e.line, e.column) from None


def _parse(text: str) -> ConstraintSet:
    heads = [m for m in _HEAD_RE.finditer(text) if not _in_string(text, m.start())]
    _reject_stray(text, 0, heads[0].start() if heads else len(text))
    contexts: list[Context] = []
    current_cls = None
    invs: list[Invariant] = []
    for k, m in enumerate(heads):
        end_of_segment = heads[k + 1].start() if k + 1 < len(heads) else len(text)
        if m.group(1) == "context":
            if current_cls is not None:
                contexts.append(Context(current_cls, tuple(invs)))
            toks = ex.tokenize(text, m.end(), end_of_segment)
            if toks[0].kind != "ident":
                raise _err("expected class name after 'context'", text, toks[0].offset)
            if toks[1].kind != "eof":
                raise _err(f"unexpected {toks[1].text!r}", text, toks[1].offset)
            current_cls = toks[0].text
            invs = []
        else:
            if current_cls is None:
                raise _err("invariant outside of a context declaration", text, m.start())
            toks = ex.tokenize(text, m.end(), end_of_segment)
            if toks[0].kind != "ident":
                raise _err("expected invariant name after 'inv'", text, toks[0].offset)
            if toks[1].kind != "op" or toks[1].text != ":":
                raise _err("expected ':' after invariant name", text, toks[1].offset)
            name = toks[0].text
            if any(i.name == name for i in invs):
                raise _err(f"duplicate invariant {name!r} in context {current_cls}", text, toks[0].offset)
            body_start = toks[1].offset + 1
            if toks[2].kind == "eof":
                raise _err("empty invariant body", text, toks[2].offset)
            node = ex.parse_expression(text, OCL, body_start, end_of_segment)
            invs.append(Invariant(name, node, " ".join(text[body_start:end_of_segment].split())))
    if current_cls is not None:
        contexts.append(Context(current_cls, tuple(invs)))
    return ConstraintSet(tuple(contexts))


def _in_string(text: str, pos: int) -> bool:
    line_start = text.rfind("\n", 0, pos) + 1
    return text.count("'", line_start, pos) % 2 == 1


def _reject_stray(text: str, start: int, end: int) -> None:
    toks = ex.tokenize(text, start, end)
    if toks[0].kind != "eof":
        raise _err(f"unexpected {toks[0].text!r} before first 'context'", text, toks[0].offset)


def _err(message: str, text: str, offset: int) -> ConstraintSyntaxError:
    line, col = ex.line_col(text, offset)
    return ConstraintSyntaxError(message, line, col)


def shipped_constraints() -> str:
    return resources.files("eventchain").joinpath("data/constraints/event_chain.ocl").read_text("utf-8")


# --- evaluation ------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    context: str
    invariant: str
    object_id: str
    verdict: str  # pass | fail | error
    message: str = ""


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple[Verdict, ...]

    @property
    def ok(self) -> bool:
        return all(e.verdict == "pass" for e in self.entries)

    def failures(self) -> list[Verdict]:
        return [e for e in self.entries if e.verdict != "pass"]

    def to_json(self) -> str:
        doc = {
            "ok": self.ok,
            "entries": [
                {"context": e.context, "invariant": e.invariant, "object": e.object_id,
                 "verdict": e.verdict, "message": e.message}
                for e in self.entries
            ],
        }
        return json.dumps(doc, indent=2) + "\n"

    def summary(self) -> str:
        lines = []
        for e in self.entries:
            tail = f"  ({e.message})" if e.message else ""
            lines.append(f"{e.verdict.upper():5} {e.context}::{e.invariant} on {e.object_id}{tail}")
        return "\n".join(lines)


def evaluate(cs: ConstraintSet, m: InstanceModel) -> ValidationReport:
    entries = []
    for ctx in cs.contexts:
        if m.metamodel.get_class(ctx.cls) is None:
            raise UnknownContextError(f"context class {ctx.cls!r} is not in metamodel {m.metamodel_name!r}")
        for inv in ctx.invariants:
            for obj in m.of_class(ctx.cls):
                try:
                    value = _Evaluator(m).eval(inv.expr, {"self": obj})
                except (EvaluationError, ModelError) as e:
                    entries.append(Verdict(ctx.cls, inv.name, obj.id, "error", str(e)))
                    continue
                if not isinstance(value, bool):
                    entries.append(Verdict(ctx.cls, inv.name, obj.id, "error",
                                           f"invariant evaluated to non-boolean {value!r}"))
                elif value:
                    entries.append(Verdict(ctx.cls, inv.name, obj.id, "pass"))
                else:
                    entries.append(Verdict(ctx.cls, inv.name, obj.id, "fail", inv.source))
    return ValidationReport(tuple(entries))


class _Empty:
    """Result of navigating an unset single-valued reference."""

    def __repr__(self):
        return "null"


EMPTY = _Empty()


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def compare(op: str, a, b):
    """Comparison shared by the constraint and query languages."""
    if _is_number(a) and _is_number(b):
        pass
    elif isinstance(a, str) and isinstance(b, str):
        pass
    elif isinstance(a, bool) and isinstance(b, bool):
        if op not in ("=", "<>"):
            raise EvaluationError(f"ordering comparison {op!r} on booleans")
    elif isinstance(a, ModelObject) and isinstance(b, ModelObject):
        if op not in ("=", "<>"):
            raise EvaluationError(f"ordering comparison {op!r} on model objects")
        a, b = a.id, b.id
    else:
        raise EvaluationError(f"cannot compare {_type_name(a)} with {_type_name(b)}")
    return {
        "=": lambda: a == b, "<>": lambda: a != b,
        "<": lambda: a < b, "<=": lambda: a <= b,
        ">": lambda: a > b, ">=": lambda: a >= b,
    }[op]()


def _type_name(v) -> str:
    if isinstance(v, bool):
        return "boolean"
    if _is_number(v):
        return "number"
    if isinstance(v, str):
        return "string"
    if isinstance(v, ModelObject):
        return v.cls
    if isinstance(v, list):
        return "collection"
    if v is EMPTY:
        return "null"
    return type(v).__name__


class _Evaluator:
    def __init__(self, m: InstanceModel):
        self.m = m

    def eval(self, node: ex.Node, env: dict):
        method = getattr(self, "_" + type(node).__name__)
        return method(node, env)

    def _Literal(self, node, env):
        return node.value

    def _Var(self, node, env):
        if node.name not in env:
            raise EvaluationError(f"unbound variable {node.name!r}")
        return env[node.name]

    def _Nav(self, node, env):
        target = self.eval(node.target, env)
        if target is EMPTY:
            raise EvaluationError(f"navigating '{node.name}' on an empty reference")
        if isinstance(target, list):
            raise EvaluationError(f"navigating '{node.name}' on a collection")
        if not isinstance(target, ModelObject):
            raise EvaluationError(f"navigating '{node.name}' on a {_type_name(target)}")
        value = navigate(self.m, target, node.name)
        mc = self.m.metamodel.get_class(target.cls)
        ref = mc.reference(node.name)
        if ref is not None and ref.single:
            return value[0] if value else EMPTY
        return value

    def _as_collection(self, value) -> list:
        if isinstance(value, list):
            return value
        if value is EMPTY:
            return []
        return [value]

    def _Call(self, node, env):
        coll = self._as_collection(self.eval(node.target, env))
        if node.args:
            raise EvaluationError(f"{node.name}() takes no arguments")
        if node.name == "notEmpty":
            return len(coll) > 0
        if node.name == "isEmpty":
            return len(coll) == 0
        if node.name == "size":
            return len(coll)
        raise EvaluationError(f"unknown operation {node.name!r}")

    def _Iterate(self, node, env):
        coll = self._as_collection(self.eval(node.target, env))
        want_all = node.name == "forAll"
        for item in coll:
            v = self.eval(node.body, {**env, node.var: item})
            if not isinstance(v, bool):
                raise EvaluationError(f"{node.name} body is not boolean")
            if v != want_all:
                return not want_all
        return want_all

    def _Unary(self, node, env):
        v = self.eval(node.operand, env)
        if not isinstance(v, bool):
            raise EvaluationError(f"'not' applied to {_type_name(v)}")
        return not v

    def _bool(self, node, env, op):
        v = self.eval(node, env)
        if not isinstance(v, bool):
            raise EvaluationError(f"'{op}' operand is {_type_name(v)}, not boolean")
        return v

    def _Binary(self, node, env):
        op = node.op
        if op == "and":
            return self._bool(node.left, env, op) and self._bool(node.right, env, op)
        if op == "or":
            return self._bool(node.left, env, op) or self._bool(node.right, env, op)
        if op == "implies":
            return (not self._bool(node.left, env, op)) or self._bool(node.right, env, op)
        return compare(op, self.eval(node.left, env), self.eval(node.right, env))
