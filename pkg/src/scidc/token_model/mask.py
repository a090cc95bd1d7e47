"""Logit masking.

Forbidden entries get the sentinel -inf so normalization assigns them
probability exactly zero; valid entries are copied bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scidc.errors import EmptyValidSet

FORBIDDEN = float("-inf")


@dataclass(frozen=True)
class MaskedLogits:
    values: np.ndarray

    def probabilities(self) -> np.ndarray:
        """Softmax over the masked scores; forbidden entries are exactly 0."""
        v = self.values
        peak = np.max(v)
        exps = np.exp(v - peak)
        return exps / exps.sum()

    def argmax(self) -> int:
        return int(np.argmax(self.values))


def apply_mask(logits, valid) -> MaskedLogits:
    """Mask ``logits`` down to the ``valid`` token ids.

    ``valid`` may be any iterable of ids or a prebuilt integer ndarray; the
    ndarray form is the fast path for per-step decoding.
    """
    scores = np.asarray(logits)
    if isinstance(valid, np.ndarray):
        idx = valid
    else:
        idx = np.fromiter(valid, dtype=np.int64)
    if idx.size == 0:
        raise EmptyValidSet("mask would forbid every token")
    out = np.full(scores.shape, FORBIDDEN, dtype=scores.dtype)
    out[idx] = scores[idx]
    return MaskedLogits(out)
