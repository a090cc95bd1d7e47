"""Token selection over masked logits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyValidSet
from ..token_model import MaskedLogits


@dataclass(frozen=True)
class Greedy:
    """Argmax with lowest-token-id tie-break."""


@dataclass(frozen=True)
class Sample:
    """Draw from the renormalized masked distribution."""

    temperature: float
    seed: int


def decode_policy(masked: MaskedLogits, mode: Greedy | Sample) -> int:
    """Pick a token id; only non-forbidden tokens can be returned."""
    finite = np.isfinite(masked.values)
    if not finite.any():
        raise EmptyValidSet("no valid token to choose from")
    if isinstance(mode, Greedy) or mode.temperature <= 0:
        # np.argmax returns the first maximal index: lowest id wins ties
        return masked.argmax()
    scaled = MaskedLogits(masked.values / mode.temperature)
    probs = scaled.probabilities()
    rng = np.random.default_rng(mode.seed)
    return int(rng.choice(len(probs), p=probs))
