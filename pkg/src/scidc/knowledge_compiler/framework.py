"""Chain-of-thought frameworks: the stage-1 compile artifact.

A framework is problem-class-level, never instance-level: it names the
variables any instance must surface (Extract), the intermediate
conclusions derived from them (Judge), and the single final synthesis
(Conclude). ``parse_framework_reply`` reads the GLLM's reply in the
prompt's output format; ``render_framework`` writes the same format, and
the two are inverses for any valid framework.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from scidc.errors import MalformedFrameworkReply

KINDS = ("extract", "judge", "conclude")

_PREFIX = {"extract": "VAR_", "judge": "MID_", "conclude": "ANS_"}
_LABEL = {"extract": "Extract", "judge": "Judge", "conclude": "Conclude"}
_HEAD_FIELD = {"extract": "Variable", "judge": "Intermediate Conclusion",
               "conclude": "Final Answer"}
_TEXT_FIELD = {"extract": "Meaning", "judge": "Inference Logic",
               "conclude": "Synthesis Logic"}

_STEP_RE = re.compile(
    r"^Step\s+\d+\s*:\s*\[(Extract|Judge|Conclude)\]\s*"
    r"(?:Variable|Intermediate Conclusion|Final Answer)\s*:\s*(\S+)\s*$")
_FIELD_RE = re.compile(r"^\s+([A-Za-z/ ]+?)\s*:\s*(.*)$")

_UNDERSTANDING = "## Problem Class Understanding"
_FRAMEWORK = "## Reasoning Framework"


@dataclass(frozen=True)
class CotStep:
    """One framework step; ``text`` holds the kind's descriptive field."""

    kind: str
    name: str
    text: str
    depends: tuple[str, ...] = ()
    domain: str = ""    # value domain (extract) or answer form (conclude)
    source: str = ""    # extract only: Document / Problem Instance
    fallback: str = ""  # conclude only: edge-case handling rule


@dataclass(frozen=True)
class CotFramework:
    problem_class: str
    steps: tuple[CotStep, ...] = field(default=())

    def validate(self) -> None:
        """Raise MalformedFrameworkReply on any invariant violation."""
        if not self.steps:
            raise MalformedFrameworkReply("framework has no steps")
        names: list[str] = []
        for i, step in enumerate(self.steps, start=1):
            prefix = _PREFIX.get(step.kind)
            if prefix is None:
                raise MalformedFrameworkReply(
                    f"step {i} has unknown kind {step.kind!r}")
            if not step.name.startswith(prefix) or step.name == prefix:
                raise MalformedFrameworkReply(
                    f"step {i} ({step.kind}) must bind a {prefix}* variable, "
                    f"got {step.name!r}")
            if step.name in names:
                raise MalformedFrameworkReply(
                    f"variable {step.name!r} is defined twice")
            if step.kind == "extract" and step.depends:
                raise MalformedFrameworkReply(
                    f"extract step {step.name!r} declares dependencies")
            for dep in step.depends:
                # "already defined in prior steps": forward refs are malformed
                if dep not in names:
                    raise MalformedFrameworkReply(
                        f"step {i} depends on {dep!r} before it is defined")
            names.append(step.name)
        concludes = [s for s in self.steps if s.kind == "conclude"]
        if len(concludes) != 1:
            raise MalformedFrameworkReply(
                f"expected exactly one Conclude step, found {len(concludes)}")
        if self.steps[-1].kind != "conclude":
            raise MalformedFrameworkReply("the Conclude step must come last")

    @property
    def conclude(self) -> CotStep:
        return self.steps[-1]


def parse_framework_reply(reply: str) -> CotFramework:
    """Read a framework from the stage-1 output format.

    Raises MalformedFrameworkReply when the headings or step shape are
    missing; invariant checks live in ``CotFramework.validate``.
    """
    if _UNDERSTANDING not in reply:
        raise MalformedFrameworkReply(
            f"reply lacks the {_UNDERSTANDING!r} heading")
    if _FRAMEWORK not in reply:
        raise MalformedFrameworkReply(f"reply lacks the {_FRAMEWORK!r} heading")
    head, _, body = reply.partition(_FRAMEWORK)
    problem_class = head.split(_UNDERSTANDING, 1)[1].strip()

    steps: list[CotStep] = []
    fields: dict[str, str] = {}
    kind = name = None

    def close():
        if kind is None:
            return
        depends = tuple(d.strip() for d in fields.get("Depends On", "").split(",")
                        if d.strip())
        steps.append(CotStep(
            kind=kind, name=name,
            text=fields.get(_TEXT_FIELD[kind], ""),
            depends=depends,
            domain=fields.get("Domain/Type", fields.get("Answer Form", "")),
            source=fields.get("Source", ""),
            fallback=fields.get("Fallback Rule", ""),
        ))

    for line in body.splitlines():
        if not line.strip():
            continue
        header = _STEP_RE.match(line.strip())
        if header is not None:
            close()
            kind, name = header.group(1).lower(), header.group(2)
            fields = {}
            continue
        entry = _FIELD_RE.match(line)
        if entry is not None and kind is not None:
            fields[entry.group(1)] = entry.group(2).strip()
    close()

    if not steps:
        raise MalformedFrameworkReply("no framework steps found in the reply")
    return CotFramework(problem_class=problem_class, steps=tuple(steps))


def render_framework(framework: CotFramework) -> str:
    """Write the framework back in the prompt's output format."""
    lines = [_UNDERSTANDING, framework.problem_class, "", _FRAMEWORK]
    for i, step in enumerate(framework.steps, start=1):
        lines.append(f"Step {i}: [{_LABEL[step.kind]}] "
                     f"{_HEAD_FIELD[step.kind]}: {step.name}")
        lines.append(f"  {_TEXT_FIELD[step.kind]}: {step.text}")
        if step.kind == "extract":
            if step.source:
                lines.append(f"  Source: {step.source}")
            if step.domain:
                lines.append(f"  Domain/Type: {step.domain}")
        if step.depends:
            lines.append(f"  Depends On: {', '.join(step.depends)}")
        if step.kind == "conclude":
            if step.domain:
                lines.append(f"  Answer Form: {step.domain}")
            if step.fallback:
                lines.append(f"  Fallback Rule: {step.fallback}")
    return "\n".join(lines) + "\n"
