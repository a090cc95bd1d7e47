"""Canonical text rendering of rule programs.

parse_program(serialize_program(p)) is structurally equal to p.
"""

from __future__ import annotations

from scidc.rule_ir.ast import (
    Branch,
    EmitFixed,
    Gen,
    RuleProgram,
    Select,
    Step,
    ValidateLoop,
)


def _quote(text: str) -> str:
    out = ['"']
    for c in text:
        if c == "\\":
            out.append("\\\\")
        elif c == '"':
            out.append('\\"')
        elif c == "\n":
            out.append("\\n")
        elif c == "\t":
            out.append("\\t")
        elif c == "\r":
            out.append("\\r")
        elif ord(c) < 0x20:
            out.append(f"\\u{ord(c):04x}")
        else:
            out.append(c)
    out.append('"')
    return "".join(out)


def _quote_list(items) -> str:
    return "[" + ", ".join(_quote(s) for s in items) + "]"


def _num(value: float) -> str:
    return repr(int(value)) if value == int(value) else repr(value)


def _emit_step(out: list, step: Step, depth: int):
    pad = "  " * depth
    inner = "  " * (depth + 1)
    body = step.body
    out.append(f"{pad}step {step.name}: {step.kind}")
    if isinstance(body, EmitFixed):
        out.append(f"{inner}text = {_quote(body.text)}")
    elif isinstance(body, Gen):
        if body.regex is not None:
            out.append(f"{inner}regex = {_quote(body.regex)}")
        if body.stop is not None:
            out.append(f"{inner}stop = {_quote(body.stop)}")
        out.append(f"{inner}max_tokens = {body.max_tokens}")
        if body.temperature:
            out.append(f"{inner}temperature = {_num(body.temperature)}")
    elif isinstance(body, Select):
        if body.options is not None:
            out.append(f"{inner}options = {_quote_list(body.options)}")
        if body.dynamic is not None:
            out.append(f"{inner}dynamic {{")
            deep = "  " * (depth + 2)
            for pred, opts in body.dynamic.guards:
                out.append(f"{deep}when {pred.render()} -> {_quote_list(opts)}")
            out.append(f"{deep}else -> {_quote_list(body.dynamic.default)}")
            out.append(f"{inner}}}")
        if body.temperature:
            out.append(f"{inner}temperature = {_num(body.temperature)}")
    elif isinstance(body, Branch):
        for arm in body.arms:
            out.append(f"{inner}when {arm.guard.render()} {{")
            for sub in arm.steps:
                _emit_step(out, sub, depth + 2)
            out.append(f"{inner}}}")
        if body.otherwise:
            out.append(f"{inner}else {{")
            for sub in body.otherwise:
                _emit_step(out, sub, depth + 2)
            out.append(f"{inner}}}")
    elif isinstance(body, ValidateLoop):
        out.append(f"{inner}pred = {body.predicate.render()}")
        if body.max_retries is not None:
            out.append(f"{inner}max_retries = {body.max_retries}")
        out.append(f"{inner}anchor = {body.anchor}")
        if body.retry_message is not None:
            out.append(f"{inner}retry_message = {_quote(body.retry_message)}")
        if body.fallback:
            out.append(f"{inner}fallback {{")
            deep = "  " * (depth + 2)
            for var, literal in body.fallback:
                out.append(f"{deep}{var} = {_quote(literal)}")
            out.append(f"{inner}}}")
    else:
        raise AssertionError(type(body))


def serialize_program(program: RuleProgram) -> str:
    out = ["scidc-ir v1", f"program {program.name}"]
    for key, value in program.metadata:
        out.append(f"meta {key} = {_quote(value)}")
    for step in program.steps:
        out.append("")
        _emit_step(out, step, 0)
    out.append("")
    return "\n".join(out)
