"""Run traces: ordered event log plus token accounting.

Events record what the engine did; counters record how much. The
accounting invariant is exact: tokens surviving in the output plus
tokens discarded equals total tokens emitted. Retry preambles enter the
context but never the output, so they count as emitted and discarded at
injection time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class StepStarted:
    step: str


@dataclass(frozen=True)
class TokensEmitted:
    step: str
    tokens: tuple[int, ...]
    text: str


@dataclass(frozen=True)
class MaskApplied:
    step: str
    valid_size: int


@dataclass(frozen=True)
class ValidationFailed:
    loop: str
    iteration: int
    predicate: str


@dataclass(frozen=True)
class BacktrackPerformed:
    anchor: str
    erased_tokens: int


@dataclass(frozen=True)
class FallbackApplied:
    variable: str
    value: str


@dataclass(frozen=True)
class StepCompleted:
    step: str


Event = Union[StepStarted, TokensEmitted, MaskApplied, ValidationFailed,
              BacktrackPerformed, FallbackApplied, StepCompleted]


def event_to_obj(event: Event) -> dict:
    obj: dict = {"event": type(event).__name__}
    for name, value in vars(event).items():
        obj[name] = list(value) if isinstance(value, tuple) else value
    return obj


@dataclass
class DecodeTrace:
    events: list[Event] = field(default_factory=list)
    total_tokens: int = 0
    discarded_tokens: int = 0
    regenerations: int = 0

    def add(self, event: Event) -> None:
        self.events.append(event)

    def count(self, kind: type) -> int:
        return sum(1 for e in self.events if isinstance(e, kind))

    def counters_obj(self) -> dict:
        return {
            "event": "Counters",
            "total_tokens": self.total_tokens,
            "discarded_tokens": self.discarded_tokens,
            "regenerations": self.regenerations,
        }

    def to_jsonl(self) -> str:
        """One event per line, counters in a trailing record."""
        lines = [json.dumps(event_to_obj(e), sort_keys=True,
                            ensure_ascii=False)
                 for e in self.events]
        lines.append(json.dumps(self.counters_obj(), sort_keys=True,
                                ensure_ascii=False))
        return "\n".join(lines) + "\n"
