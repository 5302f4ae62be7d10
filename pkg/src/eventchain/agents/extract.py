"""Pull a single structured artifact out of a free-text LLM response."""
from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass, field
from typing import Any

from ..constraints import ConstraintSyntaxError, parse_constraints
from ..ingest import SchemaError, parse_event_chain
from ..metamodel import Metamodel, ModelError, event_chain_metamodel, load_instance

KINDS = ("event_chain", "instance_model", "constraints", "code")

_FENCE_RE = re.compile(r"```[ \t]*([A-Za-z0-9_+-]*)[^\n]*\n(.*?)```", re.DOTALL)
_LANGS = {
    "event_chain": {"json"},
    "instance_model": {"json"},
    "constraints": {"ocl"},
    "code": {"python", "py", "python3"},
}


class ExtractionError(Exception):
    pass


class NoArtifactError(ExtractionError):
    pass


class AmbiguousArtifactError(ExtractionError):
    pass


class ArtifactSchemaError(ExtractionError):
    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(message)


class NoExecuteMethodError(ExtractionError):
    pass


class SignatureMismatchError(ExtractionError):
    pass


@dataclass
class AgentResult:
    kind: str
    raw: str
    text: str                 # the extracted artifact source
    value: Any                # parsed artifact
    diagnostics: list[str] = field(default_factory=list)
    class_name: str | None = None


def _fenced(kind: str, response: str) -> str | None:
    blocks = [(m.group(1).lower(), m.group(2)) for m in _FENCE_RE.finditer(response)]
    if not blocks:
        return None
    tagged = [b for lang, b in blocks if lang in _LANGS[kind]]
    untagged = [b for lang, b in blocks if lang == ""]
    group = tagged or untagged
    if not group:
        return None
    if len(group) > 1:
        raise AmbiguousArtifactError(f"{len(group)} fenced blocks could hold the {kind} artifact")
    return group[0]


def _bracket_scan(text: str) -> str | None:
    """Return the first outermost balanced [...] or {...} span that parses as JSON."""
    for start, ch in enumerate(text):
        if ch not in "[{":
            continue
        depth = 0
        in_str = False
        esc = False
        for j in range(start, len(text)):
            c = text[j]
            if in_str:
                if esc:
                    esc = False
                elif c == "\\":
                    esc = True
                elif c == '"':
                    in_str = False
            elif c == '"':
                in_str = True
            elif c in "[{":
                depth += 1
            elif c in "]}":
                depth -= 1
                if depth == 0:
                    candidate = text[start:j + 1]
                    try:
                        json.loads(candidate)
                    except json.JSONDecodeError:
                        break
                    return candidate
    return None


def extract_artifact(kind: str, response: str, mm: Metamodel | None = None,
                     class_name: str | None = None) -> AgentResult:
    if kind not in KINDS:
        raise ValueError(f"unknown artifact kind {kind!r}")
    diagnostics = []
    body = _fenced(kind, response)
    if body is None:
        if kind in ("event_chain", "instance_model"):
            body = _bracket_scan(response)
            if body is not None:
                diagnostics.append("no fenced block; used bracket scan")
        elif kind == "constraints":
            m = re.search(r"\bcontext\b", response)
            if m is not None:
                body = response[m.start():]
                diagnostics.append("no fenced block; used text from first 'context'")
    if body is None or not body.strip():
        raise NoArtifactError(f"no {kind} artifact found in response")

    if kind == "event_chain":
        try:
            value = parse_event_chain(body)
        except SchemaError as e:
            raise ArtifactSchemaError(str(e), e.path) from None
    elif kind == "instance_model":
        try:
            value = load_instance(body, mm or event_chain_metamodel())
        except ModelError as e:
            raise ArtifactSchemaError(str(e), getattr(e, "object_id", "") or "") from None
    elif kind == "constraints":
        try:
            value = parse_constraints(body)
        except ConstraintSyntaxError as e:
            raise ArtifactSchemaError(str(e), f"line {e.line}") from None
    else:
        value = body
        class_name = _execute_class(body, class_name)
    return AgentResult(kind, response, body, value, diagnostics, class_name)


def _execute_classes(source: str) -> list[ast.ClassDef]:
    try:
        tree = ast.parse(source)
    except SyntaxError as e:
        raise ArtifactSchemaError(f"code does not parse: {e.msg} (line {e.lineno})", f"line {e.lineno}") from None
    return [node for node in tree.body if isinstance(node, ast.ClassDef)
            and any(isinstance(f, (ast.FunctionDef, ast.AsyncFunctionDef)) and f.name == "execute"
                    for f in node.body)]


def _execute_class(source: str, preferred: str | None) -> str:
    classes = _execute_classes(source)
    if not classes:
        raise NoExecuteMethodError("no class with an execute() method")
    for c in classes:
        if c.name == preferred:
            return c.name
    return classes[0].name


def check_execute_signature(source: str, class_name: str, input_names: list[str]) -> None:
    """Require ``class_name.execute`` to accept exactly the declared inputs."""
    for c in _execute_classes(source):
        if c.name != class_name:
            continue
        fn = next(f for f in c.body if isinstance(f, ast.FunctionDef) and f.name == "execute")
        a = fn.args
        params = [p.arg for p in a.posonlyargs + a.args][1:] + [p.arg for p in a.kwonlyargs]
        if a.vararg or a.kwarg:
            raise SignatureMismatchError(f"{class_name}.execute uses *args/**kwargs")
        if sorted(params) != sorted(input_names):
            raise SignatureMismatchError(
                f"{class_name}.execute takes {params}, component declares {list(input_names)}")
        return
    raise SignatureMismatchError(f"no class named {class_name!r} with an execute() method")
