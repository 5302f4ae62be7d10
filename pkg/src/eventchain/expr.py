"""Expression lexer and recursive-descent parser.

The constraint language and the template query language share one surface
syntax: dot navigation, arrow collection calls, boolean operators,
comparisons and literals. Each language restricts the set of callable
operations through a :class:`Dialect`.

Precedence, loosest first::

    implies < or < and < comparison < not < postfix (. and ->)
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any


class ExprSyntaxError(Exception):
    def __init__(self, message: str, source: str, offset: int):
        self.source = source
        self.offset = offset
        self.line, self.column = line_col(source, offset)
        self.message = message
        super().__init__(f"{message} at line {self.line}, column {self.column}")


def line_col(source: str, offset: int) -> tuple[int, int]:
    line = source.count("\n", 0, offset) + 1
    col = offset - (source.rfind("\n", 0, offset) + 1) + 1
    return line, col


KEYWORDS = {"and", "or", "not", "implies", "true", "false"}
COMPARISONS = ("=", "<>", "<", "<=", ">", ">=")

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>\d+\.\d+|\d+)
  | (?P<string>'(?:[^'\\]|\\.)*')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|<>|<=|>=|[.()<>=,|:])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # number, string, ident, keyword, op, eof
    text: str
    offset: int


def tokenize(source: str, start: int = 0, end: int | None = None) -> list[Token]:
    end = len(source) if end is None else end
    pos = start
    out = []
    while pos < end:
        m = _TOKEN_RE.match(source, pos, end)
        if m is None:
            if source[pos] == "'":
                raise ExprSyntaxError("unterminated string", source, pos)
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", source, pos)
        kind = m.lastgroup
        text = m.group()
        if kind == "ident" and text in KEYWORDS:
            kind = "keyword"
        if kind != "ws":
            out.append(Token(kind, text, pos))
        pos = m.end()
    out.append(Token("eof", "", end))
    return out


# --- AST -----------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    offset: int = field(compare=False)


@dataclass(frozen=True)
class Literal(Node):
    value: Any


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Nav(Node):
    target: Node
    name: str


@dataclass(frozen=True)
class Call(Node):
    """``target.name(args)`` when arrow is false, ``target->name(args)`` otherwise."""
    target: Node
    name: str
    args: tuple[Node, ...]
    arrow: bool


@dataclass(frozen=True)
class Iterate(Node):
    target: Node
    name: str
    var: str
    body: Node


@dataclass(frozen=True)
class Unary(Node):
    op: str
    operand: Node


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Dialect:
    name: str
    dot_calls: frozenset = frozenset()
    arrow_calls: frozenset = frozenset()
    iterators: frozenset = frozenset()


class Parser:
    def __init__(self, source: str, dialect: Dialect, start: int = 0, end: int | None = None):
        self.source = source
        self.dialect = dialect
        self.tokens = tokenize(source, start, end)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.at(kind, text):
            return self.advance()
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        if not self.at(kind, text):
            want = text or kind
            got = self.tok.text or "end of input"
            raise self.error(f"expected {want!r}, found {got!r}")
        return self.advance()

    def error(self, message: str, offset: int | None = None) -> ExprSyntaxError:
        return ExprSyntaxError(message, self.source, self.tok.offset if offset is None else offset)

    # grammar
    def parse_all(self) -> Node:
        node = self.expression()
        if not self.at("eof"):
            raise self.error(f"unexpected {self.tok.text!r}")
        return node

    def expression(self) -> Node:
        return self.implies()

    def implies(self) -> Node:
        left = self.or_()
        while self.at("keyword", "implies"):
            t = self.advance()
            left = Binary(t.offset, "implies", left, self.or_())
        return left

    def or_(self) -> Node:
        left = self.and_()
        while self.at("keyword", "or"):
            t = self.advance()
            left = Binary(t.offset, "or", left, self.and_())
        return left

    def and_(self) -> Node:
        left = self.comparison()
        while self.at("keyword", "and"):
            t = self.advance()
            left = Binary(t.offset, "and", left, self.comparison())
        return left

    def comparison(self) -> Node:
        left = self.unary()
        if self.tok.kind == "op" and self.tok.text in COMPARISONS:
            t = self.advance()
            left = Binary(t.offset, t.text, left, self.unary())
            if self.tok.kind == "op" and self.tok.text in COMPARISONS:
                raise self.error("comparisons do not chain; use parentheses")
        return left

    def unary(self) -> Node:
        if self.at("keyword", "not"):
            t = self.advance()
            return Unary(t.offset, "not", self.unary())
        return self.postfix()

    def postfix(self) -> Node:
        node = self.primary()
        while True:
            if self.accept("op", "."):
                name = self.expect("ident")
                if self.at("op", "("):
                    if name.text not in self.dialect.dot_calls:
                        raise self.error(f"unknown operation {name.text!r} in {self.dialect.name}",
                                         name.offset)
                    node = Call(name.offset, node, name.text, self.arguments(), False)
                else:
                    node = Nav(name.offset, node, name.text)
            elif self.accept("op", "->"):
                name = self.expect("ident")
                if name.text in self.dialect.iterators:
                    node = self.iterator(node, name)
                elif name.text in self.dialect.arrow_calls:
                    node = Call(name.offset, node, name.text, self.arguments(), True)
                else:
                    raise self.error(f"unknown collection operation {name.text!r} in {self.dialect.name}",
                                     name.offset)
            else:
                return node

    def iterator(self, target: Node, name: Token) -> Node:
        self.expect("op", "(")
        var = self.expect("ident")
        if self.accept("op", ":"):
            self.expect("ident")
        self.expect("op", "|")
        body = self.expression()
        self.expect("op", ")")
        return Iterate(name.offset, target, name.text, var.text, body)

    def arguments(self) -> tuple[Node, ...]:
        self.expect("op", "(")
        args = []
        if not self.at("op", ")"):
            args.append(self.expression())
            while self.accept("op", ","):
                args.append(self.expression())
        self.expect("op", ")")
        return tuple(args)

    def primary(self) -> Node:
        t = self.tok
        if t.kind == "number":
            self.advance()
            return Literal(t.offset, float(t.text) if "." in t.text else int(t.text))
        if t.kind == "string":
            self.advance()
            return Literal(t.offset, _unescape(t.text[1:-1]))
        if t.kind == "keyword" and t.text in ("true", "false"):
            self.advance()
            return Literal(t.offset, t.text == "true")
        if t.kind == "ident":
            self.advance()
            return Var(t.offset, t.text)
        if self.accept("op", "("):
            node = self.expression()
            self.expect("op", ")")
            return node
        raise self.error(f"unexpected {t.text or 'end of input'!r}")


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: {"n": "\n", "t": "\t"}.get(m.group(1), m.group(1)), body)


def parse_expression(source: str, dialect: Dialect, start: int = 0, end: int | None = None) -> Node:
    return Parser(source, dialect, start, end).parse_all()
