"""Parser for the rule-program text format.

Format sketch (versioned by the mandatory first line):

    scidc-ir v1
    program <name>
    meta <key> = "<value>"

    step <name>: emit
      text = "..."

    step <name>: gen
      regex = "..."          # and/or stop = "..."
      max_tokens = 10
      temperature = 0.0

    step <name>: select
      options = ["a", "b"]   # or a dynamic block:
      dynamic {
        when <predicate> -> ["a"]
        else -> ["b", "c"]
      }

    step <name>: branch
      when <predicate> {
        step <name>: emit
          text = "..."
      }
      else {
      }

    step <name>: validate
      pred = <predicate>
      max_retries = 5
      anchor = <step name>
      retry_message = "..."
      fallback {
        <var> = "<literal>"
      }

Comments run from an unquoted ``#`` to end of line. Attribute order inside a
step is free; one attribute per line.
"""

from __future__ import annotations

import re

from scidc.errors import (
    DuplicateStepName,
    PredicateSyntaxError,
    RuleSyntaxError,
    UnknownStepKind,
)
from scidc.rule_ir.ast import (
    Branch,
    BranchArm,
    DynamicOptions,
    EmitFixed,
    Gen,
    RuleProgram,
    Select,
    Step,
    ValidateLoop,
)
from scidc.rule_ir.predicate import parse_predicate

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_KINDS = ("emit", "gen", "select", "branch", "validate")

_GEN_ATTRS = {"regex", "stop", "max_tokens", "temperature"}
_SELECT_ATTRS = {"options", "temperature"}
_VALIDATE_ATTRS = {"pred", "max_retries", "anchor", "retry_message"}


def _strip_comment(line: str) -> str:
    out = []
    in_str = False
    i = 0
    while i < len(line):
        c = line[i]
        if in_str:
            out.append(c)
            if c == "\\" and i + 1 < len(line):
                out.append(line[i + 1])
                i += 1
            elif c == '"':
                in_str = False
        elif c == '"':
            in_str = True
            out.append(c)
        elif c == "#":
            break
        else:
            out.append(c)
        i += 1
    return "".join(out).rstrip()


def _parse_string(text: str, line_no: int, col: int) -> tuple[str, int]:
    """Parse a quoted string starting at ``col``; returns (value, end col)."""
    if col >= len(text) or text[col] != '"':
        raise RuleSyntaxError("expected a quoted string", line_no, col + 1)
    out = []
    i = col + 1
    while i < len(text):
        c = text[i]
        if c == '"':
            return "".join(out), i + 1
        if c == "\\":
            i += 1
            if i >= len(text):
                break
            esc = text[i]
            if esc == "u":
                hexs = text[i + 1:i + 5]
                if len(hexs) != 4:
                    raise RuleSyntaxError("bad \\u escape", line_no, i + 1)
                out.append(chr(int(hexs, 16)))
                i += 4
            else:
                mapped = {"n": "\n", "t": "\t", "r": "\r", '"': '"',
                          "\\": "\\", "0": "\0"}.get(esc)
                if mapped is None:
                    raise RuleSyntaxError(f"unknown escape \\{esc}", line_no, i + 1)
                out.append(mapped)
        else:
            out.append(c)
        i += 1
    raise RuleSyntaxError("unterminated string", line_no, col + 1)


def _parse_string_list(text: str, line_no: int) -> tuple:
    s = text.strip()
    if not s.startswith("[") or not s.endswith("]"):
        raise RuleSyntaxError("expected a [\"...\"] list", line_no, 1)
    inner = s[1:-1]
    items = []
    i = 0
    while True:
        while i < len(inner) and inner[i] in " \t":
            i += 1
        if i >= len(inner):
            break
        value, i = _parse_string(inner, line_no, i)
        items.append(value)
        while i < len(inner) and inner[i] in " \t":
            i += 1
        if i < len(inner):
            if inner[i] != ",":
                raise RuleSyntaxError("expected ',' in list", line_no, i + 1)
            i += 1
    return tuple(items)


def _pred(text: str, line_no: int):
    try:
        return parse_predicate(text)
    except PredicateSyntaxError as exc:
        raise RuleSyntaxError(f"bad predicate: {exc}", line_no, 1) from None


class _Parser:
    def __init__(self, source: str):
        self.lines = source.split("\n")
        self.i = 0
        self.seen_names: set[str] = set()

    # -- line plumbing ------------------------------------------------------

    def _peek(self) -> tuple[int, str] | None:
        while self.i < len(self.lines):
            stripped = _strip_comment(self.lines[self.i]).strip()
            if stripped:
                return self.i + 1, stripped
            self.i += 1
        return None

    def _next(self) -> tuple[int, str]:
        got = self._peek()
        if got is None:
            raise RuleSyntaxError("unexpected end of file", len(self.lines), 1)
        self.i += 1
        return got

    # -- document -----------------------------------------------------------

    def parse(self) -> RuleProgram:
        line_no, header = self._next()
        if header != "scidc-ir v1":
            raise RuleSyntaxError("first line must be 'scidc-ir v1'", line_no, 1)
        line_no, prog = self._next()
        m = re.fullmatch(r"program\s+([A-Za-z_][A-Za-z0-9_]*)", prog)
        if not m:
            raise RuleSyntaxError("expected 'program <name>'", line_no, 1)
        name = m.group(1)
        metadata = []
        while True:
            nxt = self._peek()
            if nxt is None or not nxt[1].startswith("meta "):
                break
            line_no, line = self._next()
            mm = re.match(r"meta\s+([A-Za-z_][A-Za-z0-9_]*)\s*=\s*", line)
            if not mm:
                raise RuleSyntaxError("expected 'meta <key> = \"<value>\"'", line_no, 1)
            value, end = _parse_string(line, line_no, mm.end())
            if line[end:].strip():
                raise RuleSyntaxError("trailing text after meta value", line_no, end + 1)
            metadata.append((mm.group(1), value))
        steps = []
        while self._peek() is not None:
            steps.append(self._parse_step())
        if not steps:
            raise RuleSyntaxError("program has no steps", len(self.lines), 1)
        return RuleProgram(name=name, steps=tuple(steps), metadata=tuple(metadata))

    # -- steps --------------------------------------------------------------

    def _parse_step(self) -> Step:
        line_no, line = self._next()
        m = re.fullmatch(r"step\s+([A-Za-z_][A-Za-z0-9_]*)\s*:\s*([a-z_]+)", line)
        if not m:
            raise RuleSyntaxError("expected 'step <name>: <kind>'", line_no, 1)
        name, kind = m.groups()
        if name in self.seen_names:
            raise DuplicateStepName(f"duplicate step name {name!r}", line_no, 1)
        self.seen_names.add(name)
        if kind not in _KINDS:
            raise UnknownStepKind(f"unknown step kind {kind!r}", line_no, 1)
        body = getattr(self, f"_parse_{kind}")(name, line_no)
        return Step(name=name, body=body)

    def _attr_lines(self, allowed: set, step: str):
        """Yield (line_no, attr, value text) until the step body ends."""
        while True:
            nxt = self._peek()
            if nxt is None or nxt[1].startswith("step ") or nxt[1] == "}":
                return
            line_no, line = nxt
            m = re.match(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$", line)
            if m and m.group(1) in allowed:
                self.i += 1
                yield line_no, m.group(1), m.group(2)
                continue
            if m and m.group(1) not in allowed and not line.endswith("{"):
                raise RuleSyntaxError(
                    f"unknown attribute {m.group(1)!r} for step {step!r}", line_no, 1)
            return

    def _parse_emit(self, name: str, at: int) -> EmitFixed:
        text = None
        for line_no, attr, raw in self._attr_lines({"text"}, name):
            value, end = _parse_string(raw, line_no, 0)
            if raw[end:].strip():
                raise RuleSyntaxError("trailing text after string", line_no, end + 1)
            text = value
        if text is None:
            raise RuleSyntaxError(f"emit step {name!r} requires text = \"...\"", at, 1)
        return EmitFixed(text=text)

    def _parse_gen(self, name: str, at: int) -> Gen:
        fields = {}
        for line_no, attr, raw in self._attr_lines(_GEN_ATTRS, name):
            if attr in ("regex", "stop"):
                value, end = _parse_string(raw, line_no, 0)
                if raw[end:].strip():
                    raise RuleSyntaxError("trailing text after string", line_no, end + 1)
                fields[attr] = value
            elif attr == "max_tokens":
                fields[attr] = self._int(raw, line_no)
            else:
                fields[attr] = self._float(raw, line_no)
        return Gen(**fields)

    def _parse_select(self, name: str, at: int) -> Select:
        options = None
        dynamic = None
        temperature = 0.0
        while True:
            nxt = self._peek()
            if nxt is None or nxt[1].startswith("step ") or nxt[1] == "}":
                break
            line_no, line = nxt
            if line.replace(" ", "") == "dynamic{":
                self.i += 1
                dynamic = self._parse_dynamic(line_no)
                continue
            m = re.match(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$", line)
            if not m or m.group(1) not in _SELECT_ATTRS:
                break
            self.i += 1
            if m.group(1) == "options":
                options = _parse_string_list(m.group(2), line_no)
            else:
                temperature = self._float(m.group(2), line_no)
        return Select(options=options, dynamic=dynamic, temperature=temperature)

    def _parse_dynamic(self, at: int) -> DynamicOptions:
        guards = []
        default = None
        while True:
            line_no, line = self._next()
            if line == "}":
                break
            if line.startswith("when "):
                arrow = line.rfind("->")
                if arrow < 0:
                    raise RuleSyntaxError("expected 'when <pred> -> [...]'", line_no, 1)
                pred = _pred(line[5:arrow], line_no)
                guards.append((pred, _parse_string_list(line[arrow + 2:], line_no)))
            elif line.startswith("else"):
                arrow = line.find("->")
                if arrow < 0:
                    raise RuleSyntaxError("expected 'else -> [...]'", line_no, 1)
                default = _parse_string_list(line[arrow + 2:], line_no)
            else:
                raise RuleSyntaxError("expected 'when', 'else', or '}'", line_no, 1)
        if default is None:
            raise RuleSyntaxError("dynamic block requires an else clause", at, 1)
        return DynamicOptions(guards=tuple(guards), default=default)

    def _parse_branch(self, name: str, at: int) -> Branch:
        arms = []
        otherwise: tuple = ()
        saw_else = False
        while True:
            nxt = self._peek()
            if nxt is None:
                break
            line_no, line = nxt
            if line.startswith("when ") and line.endswith("{"):
                self.i += 1
                pred = _pred(line[5:-1], line_no)
                arms.append(BranchArm(guard=pred, steps=self._parse_step_block()))
            elif line.rstrip("{").strip() == "else" and line.endswith("{"):
                self.i += 1
                if saw_else:
                    raise RuleSyntaxError("duplicate else block", line_no, 1)
                saw_else = True
                otherwise = self._parse_step_block()
            else:
                break
        if not arms:
            raise RuleSyntaxError(
                f"branch step {name!r} requires at least one 'when' arm", at, 1)
        return Branch(arms=tuple(arms), otherwise=otherwise)

    def _parse_step_block(self) -> tuple:
        steps = []
        while True:
            nxt = self._peek()
            if nxt is None:
                raise RuleSyntaxError("unterminated block", len(self.lines), 1)
            if nxt[1] == "}":
                self.i += 1
                return tuple(steps)
            steps.append(self._parse_step())

    def _parse_validate(self, name: str, at: int) -> ValidateLoop:
        pred = None
        anchor = None
        max_retries = None  # absence is a lint error, not a parse error
        retry_message = None
        fallback: list = []
        while True:
            nxt = self._peek()
            if nxt is None or nxt[1].startswith("step ") or nxt[1] == "}":
                break
            line_no, line = nxt
            if line.replace(" ", "") == "fallback{":
                self.i += 1
                fallback = self._parse_fallback()
                continue
            m = re.match(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$", line)
            if not m or m.group(1) not in _VALIDATE_ATTRS:
                break
            self.i += 1
            attr, raw = m.group(1), m.group(2)
            if attr == "pred":
                pred = _pred(raw, line_no)
            elif attr == "anchor":
                if not _IDENT_RE.fullmatch(raw.strip()):
                    raise RuleSyntaxError("anchor must be a step name", line_no, 1)
                anchor = raw.strip()
            elif attr == "max_retries":
                max_retries = self._int(raw, line_no)
            else:
                value, end = _parse_string(raw, line_no, 0)
                if raw[end:].strip():
                    raise RuleSyntaxError("trailing text after string", line_no, end + 1)
                retry_message = value
        if pred is None:
            raise RuleSyntaxError(f"validate step {name!r} requires pred = ...", at, 1)
        if anchor is None:
            raise RuleSyntaxError(f"validate step {name!r} requires anchor = ...", at, 1)
        return ValidateLoop(predicate=pred, max_retries=max_retries, anchor=anchor,
                            fallback=tuple(fallback), retry_message=retry_message)

    def _parse_fallback(self) -> list:
        out = []
        while True:
            line_no, line = self._next()
            if line == "}":
                return out
            m = re.match(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$", line)
            if not m:
                raise RuleSyntaxError("expected '<var> = \"<literal>\"'", line_no, 1)
            value, end = _parse_string(m.group(2), line_no, 0)
            if m.group(2)[end:].strip():
                raise RuleSyntaxError("trailing text after literal", line_no, end + 1)
            out.append((m.group(1), value))

    # -- scalars ------------------------------------------------------------

    @staticmethod
    def _int(raw: str, line_no: int) -> int:
        try:
            return int(raw.strip())
        except ValueError:
            raise RuleSyntaxError(f"expected an integer, got {raw!r}", line_no, 1) from None

    @staticmethod
    def _float(raw: str, line_no: int) -> float:
        try:
            return float(raw.strip())
        except ValueError:
            raise RuleSyntaxError(f"expected a number, got {raw!r}", line_no, 1) from None


def parse_program(source: str) -> RuleProgram:
    """Parse rule-program text into a RuleProgram."""
    return _Parser(source).parse()
