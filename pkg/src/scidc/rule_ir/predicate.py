"""Closed predicate expression language.

Grammar (precedence low to high):

    expr   := or
    or     := and ("or" and)*
    and    := unary ("and" unary)*
    unary  := "not" unary | rel
    rel    := sum (("<"|"<="|"=="|"="|"!="|">="|">") sum | "in" set)?
    sum    := term (("+"|"-") term)*
    term   := atom (("*"|"/") atom)*
    atom   := NUMBER | STRING | IDENT | set | "(" expr ")" | "-" atom

Sets are brace-enclosed literal lists. Variables hold text; a value is
numeric when its stripped text full-matches ``-?\\d+\\.?\\d*``. Arithmetic and
ordering require numeric operands and raise PredicateTypeError otherwise;
equality falls back to string comparison. Division is total: x/0 follows IEEE
(signed infinity, nan for 0/0).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from scidc.errors import PredicateSyntaxError, PredicateTypeError, UnboundVariable

_NUMERIC_RE = re.compile(r"-?\d+\.?\d*")
_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r'|(?P<str>"(?:[^"\\]|\\.)*")'
    r"|(?P<op><=|>=|==|!=|->|[<>=+\-*/(){},×÷]))"
)

_WORD_OPS = {"and", "or", "not", "in"}


def numeric_value(text: str) -> float | None:
    """The numeric view of a bound value; None when it does not parse."""
    s = text.strip()
    if _NUMERIC_RE.fullmatch(s) and s not in ("-", "-.", "."):
        try:
            return float(s)
        except ValueError:
            return None
    return None


def _unescape(raw: str) -> str:
    out = []
    i = 1
    while i < len(raw) - 1:
        c = raw[i]
        if c == "\\":
            i += 1
            n = raw[i]
            out.append({"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}.get(n, "\\" + n))
        else:
            out.append(c)
        i += 1
    return "".join(out)


class _Lexer:
    def __init__(self, text: str):
        self.tokens: list[tuple[str, object, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos].isspace():
                pos += 1
                continue
            m = _TOKEN_RE.match(text, pos)
            if not m:
                raise PredicateSyntaxError(
                    f"unexpected character {text[pos]!r} at offset {pos}")
            if m.group("num") is not None:
                self.tokens.append(("num", float(m.group("num")), pos))
            elif m.group("ident") is not None:
                word = m.group("ident")
                if word in _WORD_OPS:
                    self.tokens.append(("op", word, pos))
                else:
                    self.tokens.append(("ident", word, pos))
            elif m.group("str") is not None:
                self.tokens.append(("str", _unescape(m.group("str")), pos))
            else:
                op = m.group("op")
                op = {"×": "*", "÷": "/", "=": "=="}.get(op, op)
                self.tokens.append(("op", op, pos))
            pos = m.end()
        self.i = 0

    def peek(self) -> tuple | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> tuple:
        tok = self.peek()
        if tok is None:
            raise PredicateSyntaxError("unexpected end of expression")
        self.i += 1
        return tok

    def accept_op(self, *ops: str) -> str | None:
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] in ops:
            self.i += 1
            return tok[1]
        return None

    def expect_op(self, op: str):
        tok = self.next()
        if tok[0] != "op" or tok[1] != op:
            raise PredicateSyntaxError(f"expected {op!r} at offset {tok[2]}")


_CMP_OPS = ("<", "<=", "==", "!=", ">=", ">")


def _parse_expr(lx: _Lexer):
    terms = [_parse_and(lx)]
    while lx.accept_op("or"):
        terms.append(_parse_and(lx))
    return terms[0] if len(terms) == 1 else ("or", tuple(terms))


def _parse_and(lx: _Lexer):
    terms = [_parse_unary(lx)]
    while lx.accept_op("and"):
        terms.append(_parse_unary(lx))
    return terms[0] if len(terms) == 1 else ("and", tuple(terms))


def _parse_unary(lx: _Lexer):
    if lx.accept_op("not"):
        return ("not", _parse_unary(lx))
    return _parse_rel(lx)


def _parse_rel(lx: _Lexer):
    left = _parse_sum(lx)
    op = lx.accept_op(*_CMP_OPS)
    if op:
        return ("cmp", op, left, _parse_sum(lx))
    if lx.accept_op("in"):
        right = _parse_sum(lx)
        if right[0] != "set":
            raise PredicateSyntaxError("right side of 'in' must be a literal set")
        return ("in", left, right)
    return left


def _parse_sum(lx: _Lexer):
    node = _parse_term(lx)
    while True:
        op = lx.accept_op("+", "-")
        if not op:
            return node
        node = ("arith", op, node, _parse_term(lx))


def _parse_term(lx: _Lexer):
    node = _parse_atom(lx)
    while True:
        op = lx.accept_op("*", "/")
        if not op:
            return node
        node = ("arith", op, node, _parse_atom(lx))


def _parse_atom(lx: _Lexer):
    tok = lx.next()
    kind, value, pos = tok
    if kind == "num":
        return ("num", value)
    if kind == "str":
        return ("str", value)
    if kind == "ident":
        return ("var", value)
    if kind == "op" and value == "-":
        inner = _parse_atom(lx)
        if inner[0] == "num":
            return ("num", -inner[1])
        return ("arith", "-", ("num", 0.0), inner)
    if kind == "op" and value == "(":
        node = _parse_expr(lx)
        lx.expect_op(")")
        return node
    if kind == "op" and value == "{":
        items = []
        if not lx.accept_op("}"):
            while True:
                item = lx.next()
                if item[0] == "op" and item[1] == "-":
                    item = lx.next()
                    if item[0] != "num":
                        raise PredicateSyntaxError(
                            f"set members must be literals (offset {item[2]})")
                    item = ("num", -item[1], item[2])
                if item[0] == "num":
                    items.append(("num", item[1]))
                elif item[0] == "str":
                    items.append(("str", item[1]))
                else:
                    raise PredicateSyntaxError(
                        f"set members must be literals (offset {item[2]})")
                if lx.accept_op("}"):
                    break
                lx.expect_op(",")
        return ("set", tuple(items))
    raise PredicateSyntaxError(f"unexpected token {value!r} at offset {pos}")


def _render(node) -> str:
    kind = node[0]
    if kind == "num":
        v = node[1]
        return repr(int(v)) if v == int(v) and abs(v) < 1e15 else repr(v)
    if kind == "str":
        body = node[1].replace("\\", "\\\\").replace('"', '\\"')
        body = body.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
        return f'"{body}"'
    if kind == "var":
        return node[1]
    if kind == "set":
        return "{" + ", ".join(_render(m) for m in node[1]) + "}"
    if kind == "cmp":
        return f"({_render(node[2])} {node[1]} {_render(node[3])})"
    if kind == "in":
        return f"({_render(node[1])} in {_render(node[2])})"
    if kind == "arith":
        return f"({_render(node[2])} {node[1]} {_render(node[3])})"
    if kind == "and":
        return "(" + " and ".join(_render(t) for t in node[1]) + ")"
    if kind == "or":
        return "(" + " or ".join(_render(t) for t in node[1]) + ")"
    if kind == "not":
        return f"(not {_render(node[1])})"
    raise AssertionError(kind)


def _as_number(value, context: str) -> float:
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        num = numeric_value(value)
        if num is None:
            raise PredicateTypeError(f"{context}: value {value!r} is not numeric")
        return num
    raise PredicateTypeError(f"{context}: set used as a scalar")


def _divide(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def _numeric_view(value) -> float | None:
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        return numeric_value(value)
    return None


def _equal(left, right) -> bool:
    if isinstance(left, tuple) or isinstance(right, tuple):
        raise PredicateTypeError("set used as a scalar")
    ln, rn = _numeric_view(left), _numeric_view(right)
    if ln is not None and rn is not None:
        return ln == rn
    return str(left) == str(right)


def _eval(node, bindings) -> object:
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "str":
        return node[1]
    if kind == "var":
        name = node[1]
        if name not in bindings:
            raise UnboundVariable(f"variable {name!r} is not bound")
        return bindings[name]
    if kind == "set":
        return tuple(_eval(m, bindings) for m in node[1])
    if kind == "arith":
        _, op, l, r = node
        a = _as_number(_eval(l, bindings), op)
        b = _as_number(_eval(r, bindings), op)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        return _divide(a, b)
    if kind == "cmp":
        _, op, l, r = node
        lv, rv = _eval(l, bindings), _eval(r, bindings)
        if op == "==":
            return _equal(lv, rv)
        if op == "!=":
            return not _equal(lv, rv)
        a, b = _as_number(lv, op), _as_number(rv, op)
        return {"<": a < b, "<=": a <= b, ">=": a >= b, ">": a > b}[op]
    if kind == "in":
        _, l, s = node
        lv = _eval(l, bindings)
        return any(_equal(lv, m) for m in _eval(s, bindings))
    if kind == "and":
        return all(_truthy(_eval(t, bindings)) for t in node[1])
    if kind == "or":
        return any(_truthy(_eval(t, bindings)) for t in node[1])
    if kind == "not":
        return not _truthy(_eval(node[1], bindings))
    raise AssertionError(kind)


def _truthy(value) -> bool:
    if isinstance(value, bool):
        return value
    raise PredicateTypeError("boolean connective applied to a non-boolean")


def _variables(node, out: set):
    kind = node[0]
    if kind == "var":
        out.add(node[1])
    elif kind in ("and", "or", "set"):
        for t in node[1]:
            _variables(t, out)
    elif kind == "not":
        _variables(node[1], out)
    elif kind == "arith" or kind == "cmp":
        _variables(node[2], out)
        _variables(node[3], out)
    elif kind == "in":
        _variables(node[1], out)
        _variables(node[2], out)


@dataclass(frozen=True)
class Predicate:
    expr: tuple
    text: str = field(compare=False, default="")

    @property
    def source(self) -> str:
        return self.text or _render(self.expr)

    def render(self) -> str:
        return _render(self.expr)

    def evaluate(self, bindings) -> bool:
        result = _eval(self.expr, bindings)
        if not isinstance(result, bool):
            raise PredicateTypeError("predicate must reduce to a boolean")
        return result

    def variables(self) -> frozenset:
        out: set = set()
        _variables(self.expr, out)
        return frozenset(out)

    def constant_value(self) -> bool | None:
        """The predicate's value when it has no variables; None otherwise."""
        if self.variables():
            return None
        try:
            return self.evaluate({})
        except PredicateTypeError:
            return None


def parse_predicate(text: str) -> Predicate:
    lx = _Lexer(text)
    expr = _parse_expr(lx)
    dangling = lx.peek()
    if dangling is not None:
        raise PredicateSyntaxError(
            f"trailing input {dangling[1]!r} at offset {dangling[2]}")
    return Predicate(expr=expr, text=text.strip())
