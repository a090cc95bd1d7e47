"""Match scorers for task packs.

Scorers compare one output against one gold label and say hit or miss.
Validity is a separate question handled by the specs module; a pack may
carry no scorer at all, in which case only validity is reported.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_PROPOSAL_RE = re.compile(r"^\s*\d+\.\s*(\S+)\s*$")


def parse_proposals(output: str) -> list[str]:
    """Proposals from a numbered list, one per line, in list order."""
    proposals = []
    for line in output.splitlines():
        match = _PROPOSAL_RE.match(line)
        if match is not None:
            proposals.append(match.group(1))
    return proposals


@dataclass(frozen=True)
class ExactMatch:
    """Hit iff the output equals the gold label.

    With ``canon="staging"`` the comparison runs on the output's unique
    staging triple (spacing removed), so an invalid output with zero or
    two triples can never match.
    """

    canon: str = "text"  # "text" | "staging"

    def hit(self, output: str, gold: str, validity=None) -> bool:
        if self.canon == "staging":
            if validity is None:
                raise ValueError("staging canon needs the validity spec")
            triple = validity.extract_triple(output)
            return triple is not None and triple == gold.replace(" ", "")
        return output.strip() == gold.strip()

    def to_json_obj(self) -> dict:
        return {"kind": "exact", "canon": self.canon}


@dataclass(frozen=True)
class HitAtK:
    """Hit iff the gold answer appears in the first k parsed proposals."""

    k: int = 1

    def hit(self, output: str, gold: str, validity=None) -> bool:
        return gold in parse_proposals(output)[:self.k]

    def to_json_obj(self) -> dict:
        return {"kind": "hit_at_k", "k": self.k}


Scorer = ExactMatch | HitAtK


def scorer_from_json(doc: dict | None) -> Scorer | None:
    if doc is None or doc.get("kind") == "validity":
        return None
    kind = doc.get("kind")
    if kind == "exact":
        return ExactMatch(canon=doc.get("canon", "text"))
    if kind == "hit_at_k":
        return HitAtK(k=int(doc.get("k", 1)))
    raise ValueError(f"unknown scorer kind {kind!r}")


def score_exact(outputs: list[str], golds: list[str], *,
                canon: str = "text", validity=None) -> float:
    """Exact-match percentage over paired outputs and gold labels."""
    return _percentage(ExactMatch(canon=canon), outputs, golds, validity)


def score_hit_at_k(outputs: list[str], golds: list[str], k: int = 1) -> float:
    """Hit-at-k percentage over paired outputs and gold labels."""
    return _percentage(HitAtK(k=k), outputs, golds, None)


def _percentage(scorer, outputs, golds, validity) -> float:
    if len(outputs) != len(golds):
        raise ValueError("outputs and golds differ in length")
    if not outputs:
        raise ValueError("nothing to score")
    hits = sum(1 for out, gold in zip(outputs, golds)
               if scorer.hit(out, gold, validity))
    return 100.0 * hits / len(outputs)
