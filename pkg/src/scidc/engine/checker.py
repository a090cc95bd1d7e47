"""Independent output checker.

Re-parses a finished output against its program by recursive descent
with backtracking, using the standard regex engine on bytes. It shares
nothing with the decoding path: no automata, no masks, no vocabulary.
A clean result means every scaffold string appears verbatim in order,
every generated span satisfies its constraint, every select picked a
legal option, and every validate loop either ends with a true predicate
or carries its declared fallback values.
"""

from __future__ import annotations

import re
from typing import Iterator

from ..errors import PredicateTypeError, UnboundVariable
from ..rule_ir import (
    Branch,
    EmitFixed,
    Gen,
    Predicate,
    RuleProgram,
    Select,
    Step,
    ValidateLoop,
)

_Bind = dict[str, str]


def check_output(program: RuleProgram, output: str) -> list[str]:
    """Violations found when parsing the output; empty means sound."""
    data = output.encode("utf-8", "surrogateescape")
    best: dict = {"pos": -1, "step": "<start>"}
    for pos, _ in _match_seq(tuple(program.steps), data, 0, {}, best):
        if pos == len(data):
            return []
    tail = data[best["pos"]:best["pos"] + 40] if best["pos"] >= 0 else b""
    return [
        f"output does not satisfy the program: stuck at step "
        f"{best['step']!r}, byte {best['pos']}, near {tail!r}"
    ]


def checked_bindings(program: RuleProgram, output: str) -> _Bind | None:
    """Bindings of the first full parse, None when the output is invalid."""
    data = output.encode("utf-8", "surrogateescape")
    best: dict = {"pos": -1, "step": "<start>"}
    for pos, bind in _match_seq(tuple(program.steps), data, 0, {}, best):
        if pos == len(data):
            return bind
    return None


def _decode(raw: bytes) -> str:
    return raw.decode("utf-8", "surrogateescape")


def _holds(predicate: Predicate, bind: _Bind) -> bool:
    try:
        return bool(predicate.evaluate(bind))
    except (PredicateTypeError, UnboundVariable):
        return False


def _match_seq(steps: tuple[Step, ...], data: bytes, pos: int, bind: _Bind,
               best: dict) -> Iterator[tuple[int, _Bind]]:
    if not steps:
        yield pos, bind
        return
    head, rest = steps[0], steps[1:]
    if pos > best["pos"]:
        best["pos"], best["step"] = pos, head.name
    for nxt, nbind in _match_step(head, data, pos, bind, best):
        yield from _match_seq(rest, data, nxt, nbind, best)


def _match_step(step: Step, data: bytes, pos: int, bind: _Bind,
                best: dict) -> Iterator[tuple[int, _Bind]]:
    body = step.body
    if isinstance(body, EmitFixed):
        raw = body.text.encode("utf-8", "surrogateescape")
        if data.startswith(raw, pos):
            yield pos + len(raw), bind
    elif isinstance(body, Gen):
        yield from _match_gen(step.name, body, data, pos, bind)
    elif isinstance(body, Select):
        options = _resolve_options(body, bind)
        # longest first so a prefix option cannot shadow a longer one
        for option in sorted(options, key=len, reverse=True):
            raw = option.encode("utf-8", "surrogateescape")
            if data.startswith(raw, pos):
                yield pos + len(raw), {**bind, step.name: option}
    elif isinstance(body, Branch):
        chosen = body.otherwise
        for arm in body.arms:
            if _holds(arm.guard, bind):
                chosen = arm.steps
                break
        yield from _match_seq(tuple(chosen), data, pos, bind, best)
    elif isinstance(body, ValidateLoop):
        if _holds(body.predicate, bind):
            yield pos, bind
        elif body.fallback and all(bind.get(var) == val
                                   for var, val in body.fallback):
            # exhausted loop: the declared fallback must be in effect
            yield pos, bind


def _match_gen(name: str, body: Gen, data: bytes, pos: int,
               bind: _Bind) -> Iterator[tuple[int, _Bind]]:
    if body.regex is not None:
        rx = re.compile(body.regex.encode("utf-8", "surrogateescape"))
        for end in range(len(data), pos - 1, -1):
            if rx.fullmatch(data, pos, end):
                yield end, {**bind, name: _decode(data[pos:end])}
    else:
        stop = (body.stop.encode("utf-8", "surrogateescape")
                if body.stop else None)
        for end in range(len(data), pos - 1, -1):
            span = data[pos:end]
            if stop is None or stop not in span:
                yield end, {**bind, name: _decode(span)}


def _resolve_options(body: Select, bind: _Bind) -> tuple[str, ...]:
    if body.dynamic is None:
        return tuple(body.options or ())
    for guard, options in body.dynamic.guards:
        if _holds(guard, bind):
            return tuple(options)
    return tuple(body.dynamic.default)
