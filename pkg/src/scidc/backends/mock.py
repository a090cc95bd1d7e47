"""Scripted mock backend.

A MockScript is an ordered list of directives; together with the prompt
and decode seed it fully determines every logits vector the mock ever
returns. The only mutable state is a cursor over the directives plus the
byte offset at which the current directive activated.

Directive semantics:

- PreferText(text): boost tokens that continue ``text`` from wherever
  the context stood when the directive became active. Once the text is
  fully spelled the directive retires and the eos token is boosted for
  one call so open-ended spans close. If the constrained decoder forced
  the context off the scripted bytes instead, the directive retires
  silently and the next directive scores the same call, so scripts stay
  aligned with spans across scaffold text they do not mention.
- PreferToken(id): boost one token id for exactly one call.
- UniformNoise(seed): pseudo-random logits, a pure function of
  (seed, context). Never retires; later directives are unreachable.
- FailValidationTimes(times, ...): sugar that expands to ``times``
  PreferText directives rendered from a failing-value template followed
  by one PreferText with a passing value.

Preferred tokens score +10 over a -10 floor, far enough apart that
temperature-1 sampling still follows the script almost surely.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ..token_model import Vocabulary
from .base import BackendCapability, DecoderBackend

PREFERRED = 10.0
FLOOR = -10.0


@dataclass(frozen=True)
class PreferText:
    text: str


@dataclass(frozen=True)
class PreferToken:
    token_id: int


@dataclass(frozen=True)
class UniformNoise:
    seed: int = 0


@dataclass(frozen=True)
class FailValidationTimes:
    times: int
    failing: str = "9.{i}"
    passing: str = "2.0"

    def __post_init__(self):
        if self.times < 0:
            raise ValueError("times must be >= 0")


Directive = Union[PreferText, PreferToken, UniformNoise, FailValidationTimes]


@dataclass(frozen=True)
class MockScript:
    directives: tuple[Directive, ...] = ()

    def expanded(self) -> tuple[Directive, ...]:
        """Resolve sugar directives into primitives."""
        out: list[Directive] = []
        for d in self.directives:
            if isinstance(d, FailValidationTimes):
                out.extend(PreferText(d.failing.format(i=i))
                           for i in range(d.times))
                out.append(PreferText(d.passing))
            else:
                out.append(d)
        return tuple(out)

    @staticmethod
    def from_json(doc: object) -> "MockScript":
        """Parse the CLI script format: a list of one-key objects."""
        if not isinstance(doc, list):
            raise ValueError("mock script must be a JSON array")
        directives: list[Directive] = []
        for i, entry in enumerate(doc):
            if not isinstance(entry, dict) or len(entry) != 1:
                raise ValueError(f"directive {i} must be a one-key object")
            key, value = next(iter(entry.items()))
            if key == "prefer_text":
                directives.append(PreferText(str(value)))
            elif key == "prefer_token":
                directives.append(PreferToken(int(value)))
            elif key == "uniform_noise":
                directives.append(UniformNoise(int(value)))
            elif key == "fail_validation":
                if isinstance(value, dict):
                    directives.append(FailValidationTimes(
                        times=int(value["times"]),
                        failing=str(value.get("failing", "9.{i}")),
                        passing=str(value.get("passing", "2.0"))))
                else:
                    directives.append(FailValidationTimes(int(value)))
            else:
                raise ValueError(f"unknown directive kind {key!r}")
        return MockScript(tuple(directives))

    @staticmethod
    def from_json_text(text: str) -> "MockScript":
        return MockScript.from_json(json.loads(text))


def _noise(seed: int, context: Sequence[int], size: int) -> np.ndarray:
    # logits are a pure function of (seed, context)
    entropy = [seed & 0xFFFFFFFF] + [int(t) for t in context]
    rng = np.random.default_rng(np.random.SeedSequence(entropy))
    return rng.uniform(-1.0, 1.0, size)


class MockBackend(DecoderBackend):
    """Deterministic scripted decoder used throughout the tests."""

    def __init__(self, vocab: Vocabulary, script: MockScript | None = None,
                 *, max_context: int = 4096, supports_logits: bool = True):
        self._vocab = vocab
        self._directives = (script or MockScript()).expanded()
        self._capability = BackendCapability(
            vocab_id="mock", max_context=max_context,
            supports_logits=supports_logits)
        self._cursor = 0
        self._active_offset: int | None = None
        self._lock = threading.Lock()

    @property
    def vocab(self) -> Vocabulary:
        return self._vocab

    @property
    def capability(self) -> BackendCapability:
        return self._capability

    def reset(self) -> None:
        """Rewind the script; one backend instance can serve many runs."""
        with self._lock:
            self._cursor = 0
            self._active_offset = None

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        self._check_context(context)
        with self._lock:
            return self._scores(context)

    def _scores(self, context: Sequence[int]) -> np.ndarray:
        size = self._vocab.size
        ctx_bytes = self._vocab.detokenize_bytes(context)
        while True:
            if self._cursor >= len(self._directives):
                return self._prefer_eos(size)
            d = self._directives[self._cursor]
            if isinstance(d, UniformNoise):
                return _noise(d.seed, context, size)
            if isinstance(d, PreferToken):
                self._cursor += 1
                self._active_offset = None
                out = np.full(size, FLOOR)
                out[d.token_id] = PREFERRED
                return out
            assert isinstance(d, PreferText)
            target = d.text.encode("utf-8", "surrogateescape")
            if not target:
                self._cursor += 1
                self._active_offset = None
                continue
            if self._active_offset is None or self._active_offset > len(ctx_bytes):
                self._active_offset = len(ctx_bytes)
            progress = ctx_bytes[self._active_offset:]
            if progress.startswith(target):
                # spelled out (or overshot): retire and close the span
                self._cursor += 1
                self._active_offset = None
                return self._prefer_eos(size)
            if not target.startswith(progress):
                # forced off script: the next directive takes this call
                self._cursor += 1
                self._active_offset = None
                continue
            remaining = target[len(progress):]
            preferred = [t for t in self._vocab.matchable_ids()
                         if remaining.startswith(self._vocab.token_bytes(t))]
            if not preferred:
                preferred = [t for t in self._vocab.matchable_ids()
                             if self._vocab.token_bytes(t).startswith(remaining)]
            if not preferred:
                # vocabulary cannot spell the scripted text: retire
                self._cursor += 1
                self._active_offset = None
                return self._prefer_eos(size)
            out = np.full(size, FLOOR)
            out[preferred] = PREFERRED
            return out

    def _prefer_eos(self, size: int) -> np.ndarray:
        out = np.full(size, FLOOR)
        if self._vocab.eos_id is not None:
            out[self._vocab.eos_id] = PREFERRED
        return out

    def generate_unconstrained(self, prompt: str, *, max_tokens: int = 256,
                               temperature: float = 0.0,
                               stop: str | None = None) -> str:
        """Greedy free-running loop over the scripted logits."""
        context = list(self._vocab.tokenize(prompt))
        start = len(context)
        for _ in range(max_tokens):
            tok = int(np.argmax(self.next_logits(context)))
            if tok == self._vocab.eos_id:
                break
            context.append(tok)
            text = self._vocab.detokenize(context[start:])
            if stop is not None and stop in text:
                return text.split(stop, 1)[0]
        return self._vocab.detokenize(context[start:])

    def select_choice(self, context: Sequence[int],
                      options: Sequence[str]) -> int:
        """Degraded choice path: follow the script when it names an option."""
        if not options:
            raise ValueError("options must be nonempty")
        with self._lock:
            while self._cursor < len(self._directives):
                d = self._directives[self._cursor]
                if isinstance(d, PreferText) and d.text in options:
                    self._cursor += 1
                    self._active_offset = None
                    return list(options).index(d.text)
                if isinstance(d, UniformNoise):
                    ranks = _noise(d.seed, context, len(options))
                    return int(np.argmax(ranks))
                self._cursor += 1
                self._active_offset = None
            return 0
