"""Model-to-text templates.

Template syntax::

    [template public main(eventchain : EventChain)]
    [comment any text /]
    [for (node : SoftwareNode | eventchain.software)]
    [file (node.name.toLowerCase().concat('_node.py'), false, 'UTF-8')]
    class [node.name.concat('_node')/](Node):
    [/file]
    [/for]
    [/template]

A block tag that sits alone on its line consumes the whole line, including
the line break. A ``[`` that does not open a recognised tag or a well-formed
``[expr/]`` interpolation is literal text.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

from . import expr as ex
from .constraints import EMPTY, EvaluationError, compare
from .metamodel import InstanceModel, ModelError, ModelObject, navigate

AQL = ex.Dialect(
    "query language",
    dot_calls=frozenset({"concat", "toLowerCase", "toUpperCase", "tokenize"}),
    arrow_calls=frozenset({"first", "last", "size", "indexOf", "union", "isEmpty", "notEmpty"}),
)


class TemplateSyntaxError(Exception):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} at line {line}, column {column}")


class QueryError(Exception):
    pass


class RenderError(Exception):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")


# --- AST ---------------------------------------------------------------------

@dataclass
class Text:
    text: str            # raw source text, byte-exact
    offset: int
    start_cut: int = 0   # emitted slice after standalone-line trimming
    end_cut: int | None = None

    @property
    def emit(self) -> str:
        end = len(self.text) if self.end_cut is None else self.end_cut
        return self.text[self.start_cut:max(end, self.start_cut)]


@dataclass
class Interp:
    expr: ex.Node
    offset: int


@dataclass
class Comment:
    text: str
    offset: int


@dataclass
class Block:
    kind: str                     # template | for | if | file
    offset: int
    body: list = field(default_factory=list)
    # template
    name: str = ""
    param: str | None = None
    param_type: str | None = None
    # for
    var: str = ""
    var_type: str | None = None
    # for / if / file
    expr: ex.Node | None = None
    args: tuple = ()


@dataclass
class TemplateAst:
    source: str
    blocks: list

    @property
    def main(self) -> Block:
        for b in self.blocks:
            if isinstance(b, Block) and b.kind == "template":
                return b
        raise ValueError("template has no [template] block")


@dataclass(frozen=True)
class GeneratedFileSet:
    files: tuple[tuple[str, str], ...] = ()

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.files]

    def __getitem__(self, name: str) -> str:
        for n, content in self.files:
            if n == name:
                return content
        raise KeyError(name)

    def __len__(self):
        return len(self.files)


# --- parsing -----------------------------------------------------------------

_CLOSERS = {"[/template]": "template", "[/for]": "for", "[/if]": "if", "[/file]": "file"}
_TEMPLATE_RE = re.compile(
    r"\[template\s+public\s+([A-Za-z_]\w*)\s*\(\s*([A-Za-z_]\w*)\s*:\s*([A-Za-z_]\w*)\s*\)\s*\]")
_OPENER_RE = re.compile(r"\[(for|if|file)\s*\(")


def _scan_parens(text: str, i: int) -> int:
    """Return the index just past the ')' matching the '(' at ``i``."""
    depth = 0
    quote = False
    while i < len(text):
        c = text[i]
        if quote:
            if c == "\\":
                i += 1
            elif c == "'":
                quote = False
        elif c == "'":
            quote = True
        elif c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    return -1


def _scan_interp(text: str, i: int) -> int:
    """Return the offset of '/]' closing an interpolation opened at ``i``, or -1."""
    depth = 0
    quote = False
    j = i + 1
    while j < len(text):
        c = text[j]
        if quote:
            if c == "\\":
                j += 1
            elif c == "'":
                quote = False
            elif c == "\n":
                return -1
        elif c == "'":
            quote = True
        elif c == "\n" or c == "[":
            return -1
        elif c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
            if depth < 0:
                return -1
        elif depth == 0 and text.startswith("/]", j):
            return j
        elif c == "]":
            return -1
        j += 1
    return -1


def _syntax(text: str, offset: int, message: str) -> TemplateSyntaxError:
    line, col = ex.line_col(text, offset)
    return TemplateSyntaxError(message, line, col)


def _parse_expr(text: str, start: int, end: int):
    try:
        return ex.parse_expression(text, AQL, start, end)
    except ex.ExprSyntaxError as e:
        raise TemplateSyntaxError(e.message, e.line, e.column) from None


def _split_args(text: str, start: int, end: int) -> list[tuple[int, int]]:
    parts = []
    depth = 0
    quote = False
    seg = start
    i = start
    while i < end:
        c = text[i]
        if quote:
            if c == "\\":
                i += 1
            elif c == "'":
                quote = False
        elif c == "'":
            quote = True
        elif c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
        elif c == "," and depth == 0:
            parts.append((seg, i))
            seg = i + 1
        i += 1
    parts.append((seg, end))
    return parts


def _tokenize(text: str) -> list:
    """Split template source into Text runs and tag tuples."""
    out: list = []
    lit_start = 0
    i = 0

    def flush(upto: int):
        if upto > lit_start:
            out.append(Text(text[lit_start:upto], lit_start))

    while True:
        i = text.find("[", i)
        if i < 0:
            break
        tag = None
        for closer, kind in _CLOSERS.items():
            if text.startswith(closer, i):
                tag = ("close", kind, i, i + len(closer))
                break
        if tag is None and text.startswith("[comment", i):
            end = text.find("/]", i)
            if end < 0:
                raise _syntax(text, i, "unterminated [comment")
            tag = ("comment", text[i + 8:end].strip(), i, end + 2)
        if tag is None and text.startswith("[template", i):
            m = _TEMPLATE_RE.match(text, i)
            if m is None:
                raise _syntax(text, i, "malformed [template] header")
            tag = ("template", m, i, m.end())
        if tag is None:
            m = _OPENER_RE.match(text, i)
            if m is not None:
                open_paren = m.end() - 1
                close = _scan_parens(text, open_paren)
                if close < 0:
                    raise _syntax(text, i, f"unbalanced parentheses in [{m.group(1)}")
                j = close
                while j < len(text) and text[j] in " \t":
                    j += 1
                if j >= len(text) or text[j] != "]":
                    raise _syntax(text, j, f"expected ']' to close [{m.group(1)}")
                tag = ("open", m.group(1), i, j + 1, open_paren + 1, close - 1)
        if tag is None:
            end = _scan_interp(text, i)
            if end > i + 1:
                tag = ("interp", None, i, end + 2)
        if tag is None:
            i += 1
            continue
        flush(tag[2])
        out.append(tag)
        i = lit_start = tag[3]
    flush(len(text))
    return out


def _trim_standalone(text: str, toks: list) -> None:
    for k, tok in enumerate(toks):
        if isinstance(tok, Text) or tok[0] == "interp":
            continue
        prev = toks[k - 1] if k > 0 else None
        nxt = toks[k + 1] if k + 1 < len(toks) else None
        if prev is None:
            left_ok, left_cut = True, None
        elif isinstance(prev, Text):
            emitted_end = len(prev.text) if prev.end_cut is None else prev.end_cut
            head = prev.text[:emitted_end]
            nl = head.rfind("\n")
            tail = head[nl + 1:]
            line_start_ok = nl >= 0 or k == 1
            left_ok = line_start_ok and tail.strip(" \t") == ""
            left_cut = nl + 1 if nl >= 0 else 0
        else:
            left_ok = False
        if not left_ok:
            continue
        if nxt is None:
            right_ok, right_cut = True, None
        elif isinstance(nxt, Text):
            nl = nxt.text.find("\n", nxt.start_cut)
            seg = nxt.text[nxt.start_cut:nl if nl >= 0 else len(nxt.text)]
            right_ok = seg.strip(" \t") == "" and (nl >= 0 or k + 2 == len(toks))
            right_cut = nl + 1 if nl >= 0 else len(nxt.text)
        else:
            right_ok = False
        if not right_ok:
            continue
        if isinstance(prev, Text):
            prev.end_cut = left_cut
        if isinstance(nxt, Text):
            nxt.start_cut = right_cut


def parse_template(text: str) -> TemplateAst:
    toks = _tokenize(text)
    _trim_standalone(text, toks)
    root = Block("root", 0)
    stack = [root]
    for tok in toks:
        top = stack[-1]
        if isinstance(tok, Text):
            top.body.append(tok)
            continue
        kind = tok[0]
        if kind == "interp":
            top.body.append(Interp(_parse_expr(text, tok[2] + 1, tok[3] - 2), tok[2]))
        elif kind == "comment":
            top.body.append(Comment(tok[1], tok[2]))
        elif kind == "template":
            if len(stack) != 1:
                raise _syntax(text, tok[2], "[template] must be at top level")
            m = tok[1]
            blk = Block("template", tok[2], name=m.group(1), param=m.group(2), param_type=m.group(3))
            top.body.append(blk)
            stack.append(blk)
        elif kind == "open":
            blk = _open_block(text, tok)
            if blk.kind == "file" and any(b.kind == "file" for b in stack):
                raise _syntax(text, tok[2], "nested [file] blocks are not supported")
            top.body.append(blk)
            stack.append(blk)
        elif kind == "close":
            if top.kind != tok[1]:
                expected = f"[/{top.kind}]" if top.kind != "root" else "no closing tag"
                raise _syntax(text, tok[2], f"unbalanced [/{tok[1]}]; expected {expected}")
            stack.pop()
    if len(stack) > 1:
        raise _syntax(text, stack[-1].offset, f"[{stack[-1].kind}] is never closed")
    blocks = root.body
    if not any(isinstance(b, Block) and b.kind == "template" for b in blocks):
        blocks = [Block("template", 0, body=blocks, name="main")]
    return TemplateAst(text, blocks)


_FOR_HEAD_RE = re.compile(r"\s*([A-Za-z_]\w*)\s*(?::\s*([A-Za-z_]\w*)\s*)?\|")


def _open_block(text: str, tok) -> Block:
    _, kind, start, _, a, b = tok
    if kind == "for":
        m = _FOR_HEAD_RE.match(text, a, b)
        if m is None:
            raise _syntax(text, a, "expected '(var : Type | expression)' in [for]")
        return Block("for", start, var=m.group(1), var_type=m.group(2),
                     expr=_parse_expr(text, m.end(), b))
    if kind == "if":
        return Block("if", start, expr=_parse_expr(text, a, b))
    parts = _split_args(text, a, b)
    if not 1 <= len(parts) <= 3:
        raise _syntax(text, a, "[file] takes (name, append, encoding)")
    args = tuple(_parse_expr(text, s, e) for s, e in parts)
    return Block("file", start, expr=args[0], args=args[1:])


# --- query evaluation --------------------------------------------------------

def eval_query(e: ex.Node | str, env: dict[str, Any], m: InstanceModel):
    if isinstance(e, str):
        e = ex.parse_expression(e, AQL)
    return _Query(m).eval(e, env)


class _Query:
    def __init__(self, m: InstanceModel):
        self.m = m

    def eval(self, node, env):
        return getattr(self, "_" + type(node).__name__)(node, env)

    def _Literal(self, node, env):
        return node.value

    def _Var(self, node, env):
        if node.name not in env:
            raise QueryError(f"unbound variable {node.name!r}")
        return env[node.name]

    def _Nav(self, node, env):
        target = self.eval(node.target, env)
        if not isinstance(target, ModelObject):
            raise QueryError(f"cannot navigate '{node.name}' on {_describe(target)}")
        try:
            return navigate(self.m, target, node.name)
        except ModelError as e:
            raise QueryError(str(e)) from None

    def _Call(self, node, env):
        target = self.eval(node.target, env)
        args = [self.eval(a, env) for a in node.args]
        fn = getattr(self, ("arrow_" if node.arrow else "dot_") + node.name)
        try:
            return fn(target, *args)
        except TypeError:
            raise QueryError(f"{node.name}() called with {len(args)} argument(s)") from None

    def _Iterate(self, node, env):
        raise QueryError("iterators are not part of the query language")

    def _Unary(self, node, env):
        v = self.eval(node.operand, env)
        if not isinstance(v, bool):
            raise QueryError(f"'not' applied to {_describe(v)}")
        return not v

    def _Binary(self, node, env):
        if node.op in ("and", "or", "implies"):
            left = self._truth(node.left, env, node.op)
            if node.op == "and" and not left:
                return False
            if node.op == "or" and left:
                return True
            if node.op == "implies" and not left:
                return True
            return self._truth(node.right, env, node.op)
        try:
            return compare(node.op, self.eval(node.left, env), self.eval(node.right, env))
        except EvaluationError as e:
            raise QueryError(str(e)) from None

    def _truth(self, node, env, op):
        v = self.eval(node, env)
        if not isinstance(v, bool):
            raise QueryError(f"'{op}' operand is {_describe(v)}")
        return v

    # string operations
    @staticmethod
    def _string(v, op):
        if not isinstance(v, str):
            raise QueryError(f"{op}() expects a string, got {_describe(v)}")
        return v

    def dot_concat(self, s, other):
        return self._string(s, "concat") + self._string(other, "concat")

    def dot_toLowerCase(self, s):
        return self._string(s, "toLowerCase").lower()

    def dot_toUpperCase(self, s):
        return self._string(s, "toUpperCase").upper()

    def dot_tokenize(self, s, sep):
        self._string(s, "tokenize")
        if not isinstance(sep, str) or not sep:
            raise QueryError("tokenize() expects a non-empty string separator")
        return [part for part in s.split(sep) if part]

    # collection operations
    @staticmethod
    def _coll(v, op) -> list:
        if isinstance(v, list):
            return v
        raise QueryError(f"->{op}() expects a collection, got {_describe(v)}")

    def arrow_first(self, c):
        c = self._coll(c, "first")
        if not c:
            raise QueryError("->first() on an empty collection")
        return c[0]

    def arrow_last(self, c):
        c = self._coll(c, "last")
        if not c:
            raise QueryError("->last() on an empty collection")
        return c[-1]

    def arrow_size(self, c):
        return len(self._coll(c, "size"))

    def arrow_isEmpty(self, c):
        return not self._coll(c, "isEmpty")

    def arrow_notEmpty(self, c):
        return bool(self._coll(c, "notEmpty"))

    def arrow_indexOf(self, c, item):
        for k, x in enumerate(self._coll(c, "indexOf"), start=1):
            if _same(x, item):
                return k
        raise QueryError(f"->indexOf(): {_describe(item)} is not in the collection")

    def arrow_union(self, c, other):
        return list(self._coll(c, "union")) + list(self._coll(other, "union"))


def _same(a, b) -> bool:
    if isinstance(a, ModelObject) or isinstance(b, ModelObject):
        return isinstance(a, ModelObject) and isinstance(b, ModelObject) and a.id == b.id
    return type(a) is type(b) and a == b


def _describe(v) -> str:
    if isinstance(v, ModelObject):
        return f"{v.cls} object {v.id!r}"
    if isinstance(v, list):
        return "a collection"
    if v is EMPTY:
        return "null"
    return f"{type(v).__name__} {v!r}"


def stringify(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float, str)):
        return repr(v) if isinstance(v, float) else str(v)
    if isinstance(v, list):
        return "".join(stringify(x) for x in v)
    raise QueryError(f"cannot render {_describe(v)} as text")


# --- rendering ---------------------------------------------------------------

class _Renderer:
    def __init__(self, t: TemplateAst, m: InstanceModel):
        self.t = t
        self.m = m
        self.files: list[tuple[str, str]] = []
        self.query = _Query(m)

    def fail(self, offset: int, message: str) -> RenderError:
        line, col = ex.line_col(self.t.source, offset)
        return RenderError(message, line, col)

    def value(self, node: ex.Node, env: dict):
        try:
            return self.query.eval(node, env)
        except QueryError as e:
            raise self.fail(node.offset, str(e)) from None

    def run(self, items: list, env: dict, out: list[str]) -> None:
        for item in items:
            if isinstance(item, Text):
                out.append(item.emit)
            elif isinstance(item, Comment):
                pass
            elif isinstance(item, Interp):
                v = self.value(item.expr, env)
                try:
                    out.append(stringify(v))
                except QueryError as e:
                    raise self.fail(item.offset, str(e)) from None
            else:
                getattr(self, "block_" + item.kind)(item, env, out)

    def block_template(self, blk: Block, env: dict, out: list[str]) -> None:
        env = dict(env)
        if blk.param is not None:
            if self.m.metamodel.get_class(blk.param_type) is None:
                raise self.fail(blk.offset, f"entry class {blk.param_type!r} is not in the metamodel")
            roots = self.m.of_class(blk.param_type)
            if len(roots) != 1:
                raise self.fail(blk.offset, f"expected exactly one {blk.param_type} object, found {len(roots)}")
            env[blk.param] = roots[0]
        self.run(blk.body, env, out)

    def block_for(self, blk: Block, env: dict, out: list[str]) -> None:
        coll = self.value(blk.expr, env)
        if isinstance(coll, ModelObject):
            coll = [coll]
        if not isinstance(coll, list):
            raise self.fail(blk.offset, f"[for] expects a collection, got {_describe(coll)}")
        for item in coll:
            if blk.var_type and isinstance(item, ModelObject) and item.cls != blk.var_type:
                raise self.fail(blk.offset, f"[for] variable {blk.var} is typed {blk.var_type}, "
                                            f"got {item.cls}")
            self.run(blk.body, {**env, blk.var: item}, out)

    def block_if(self, blk: Block, env: dict, out: list[str]) -> None:
        cond = self.value(blk.expr, env)
        if not isinstance(cond, bool):
            raise self.fail(blk.offset, f"[if] condition is {_describe(cond)}, not boolean")
        if cond:
            self.run(blk.body, env, out)

    def block_file(self, blk: Block, env: dict, out: list[str]) -> None:
        name = self.value(blk.expr, env)
        if not isinstance(name, str) or not name:
            raise self.fail(blk.offset, f"[file] name must be a non-empty string, got {_describe(name)}")
        if len(blk.args) >= 2:
            enc = self.value(blk.args[1], env)
            if not isinstance(enc, str) or enc.replace("_", "-").upper() not in ("UTF-8", "UTF8"):
                raise self.fail(blk.offset, f"unsupported encoding {enc!r}")
        if any(n == name for n, _ in self.files):
            raise self.fail(blk.offset, f"duplicate generated file name {name!r}")
        body: list[str] = []
        self.run(blk.body, env, body)
        self.files.append((name, "".join(body)))


def render(t: TemplateAst, m: InstanceModel) -> GeneratedFileSet:
    r = _Renderer(t, m)
    r.run(t.blocks, {}, [])
    return GeneratedFileSet(tuple(r.files))


def render_text(t: TemplateAst, m: InstanceModel) -> str:
    """Render and return the text emitted outside of any [file] block."""
    r = _Renderer(t, m)
    out: list[str] = []
    r.run(t.blocks, {}, out)
    return "".join(out)


def shipped_template(name: str) -> str:
    return resources.files("eventchain").joinpath(f"data/templates/{name}").read_text("utf-8")
