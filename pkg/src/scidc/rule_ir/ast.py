"""Rule-program IR nodes.

All nodes are immutable; structural equality is dataclass equality, which is
what the serializer round-trip tests compare.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from scidc.rule_ir.predicate import Predicate


@dataclass(frozen=True)
class EmitFixed:
    text: str


@dataclass(frozen=True)
class Gen:
    regex: str | None = None
    stop: str | None = None
    max_tokens: int = 32
    temperature: float = 0.0


@dataclass(frozen=True)
class DynamicOptions:
    guards: tuple  # tuple[tuple[Predicate, tuple[str, ...]], ...]
    default: tuple  # tuple[str, ...]


@dataclass(frozen=True)
class Select:
    options: tuple | None = None  # tuple[str, ...]
    dynamic: DynamicOptions | None = None
    temperature: float = 0.0


@dataclass(frozen=True)
class BranchArm:
    guard: Predicate
    steps: tuple  # tuple[Step, ...]


@dataclass(frozen=True)
class Branch:
    arms: tuple  # tuple[BranchArm, ...]
    otherwise: tuple = ()  # tuple[Step, ...]


@dataclass(frozen=True)
class ValidateLoop:
    predicate: Predicate
    max_retries: int | None  # None = missing in source; lint rejects it
    anchor: str
    fallback: tuple = ()  # tuple[tuple[str, str], ...]
    retry_message: str | None = None


Body = Union[EmitFixed, Gen, Select, Branch, ValidateLoop]

_KIND_BY_TYPE = {
    EmitFixed: "emit",
    Gen: "gen",
    Select: "select",
    Branch: "branch",
    ValidateLoop: "validate",
}


@dataclass(frozen=True)
class Step:
    name: str
    body: Body

    @property
    def kind(self) -> str:
        return _KIND_BY_TYPE[type(self.body)]

    @property
    def binds(self) -> bool:
        """Whether executing this step writes a variable named after it."""
        return isinstance(self.body, (Gen, Select))


@dataclass(frozen=True)
class RuleProgram:
    name: str
    steps: tuple  # tuple[Step, ...]
    metadata: tuple = ()  # tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Finding:
    severity: str  # "ERROR" | "WARNING"
    step: str | None
    message: str

    def __str__(self):
        where = f" [{self.step}]" if self.step else ""
        return f"{self.severity}{where}: {self.message}"


def iter_steps(steps, depth: int = 0):
    """Yield (step, scope steps, depth) depth-first over nested step lists."""
    for step in steps:
        yield step, steps, depth
        if isinstance(step.body, Branch):
            for arm in step.body.arms:
                yield from iter_steps(arm.steps, depth + 1)
            yield from iter_steps(step.body.otherwise, depth + 1)


def all_steps(program: RuleProgram):
    return [step for step, _, _ in iter_steps(program.steps)]
