"""Decoder backend interface.

A backend owns a vocabulary and answers logit queries over token-id
contexts. The engine is backend-agnostic: a scripted mock drives tests,
a remote client talks to an inference server over HTTP.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import CapabilityError, ContextOverflow
from ..token_model import Vocabulary


@dataclass(frozen=True)
class BackendCapability:
    """What a backend can do, declared up front."""

    vocab_id: str
    max_context: int = 4096
    supports_logits: bool = True

    def __post_init__(self):
        if self.max_context < 1:
            raise ValueError("max_context must be positive")


class DecoderBackend(ABC):
    """Uniform decoder abstraction."""

    @property
    @abstractmethod
    def vocab(self) -> Vocabulary:
        """The vocabulary this backend scores over."""

    @property
    @abstractmethod
    def capability(self) -> BackendCapability:
        """Declared limits and features."""

    @abstractmethod
    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        """Score every token id given the context.

        Returns a float vector of exactly ``vocab.size`` finite entries.
        Raises ContextOverflow when the context exceeds the declared
        maximum, TransportError for remote failures.
        """

    def tokenize(self, text: str) -> list[int]:
        """Greedy longest-match tokenization over the backend vocabulary."""
        return self.vocab.tokenize(text)

    def detokenize(self, ids: Sequence[int]) -> str:
        return self.vocab.detokenize(ids)

    def generate_unconstrained(self, prompt: str, *, max_tokens: int = 256,
                               temperature: float = 0.0,
                               stop: str | None = None) -> str:
        """Free-running completion, used only by baseline comparisons."""
        raise CapabilityError("backend has no unconstrained generation")

    def select_choice(self, context: Sequence[int],
                      options: Sequence[str]) -> int:
        """Pick one option without exposing logits.

        Degraded path for backends that cannot answer next_logits; the
        default refuses so logit-capable backends never mask the error.
        """
        raise CapabilityError("backend has no choice endpoint")

    def _check_context(self, context: Sequence[int]) -> None:
        # shared precondition for next_logits implementations
        if len(context) > self.capability.max_context:
            raise ContextOverflow(
                f"context of {len(context)} tokens exceeds the backend "
                f"maximum of {self.capability.max_context}")
