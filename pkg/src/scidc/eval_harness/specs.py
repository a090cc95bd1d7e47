"""Machine-checkable validity rules, one spec family per task.

A validity spec decides from the output text alone whether a run adhered
to the task's structural rules. No model and no gold label is involved,
and every spec returns the list of broken rules so reports can name what
went wrong. Specs that need per-instance data (the rewrite spec needs
the instance's product string) bind it through ``for_instance``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .scoring import parse_proposals

_NUMBER_RE = re.compile(r"\d+\.?\d*")


def _alternation(categories: tuple[str, ...]) -> str:
    # longest first so T1a is never shadowed by a shorter sibling
    ordered = sorted(categories, key=len, reverse=True)
    return "(?:" + "|".join(re.escape(c) for c in ordered) + ")"


@dataclass(frozen=True)
class StagingValidity:
    """Output must commit to exactly one complete staging triple.

    Complete means one category from each axis, adjacent up to single
    spaces, and no stray category mentions anywhere else in the output.
    """

    t_categories: tuple[str, ...]
    n_categories: tuple[str, ...]
    m_categories: tuple[str, ...]

    def check(self, output: str) -> list[str]:
        violations: list[str] = []
        for axis, cats in (("T", self.t_categories),
                           ("N", self.n_categories),
                           ("M", self.m_categories)):
            hits = re.findall(_alternation(cats), output)
            if not hits:
                violations.append(f"no {axis} category in the output")
            elif len(hits) > 1:
                violations.append(
                    f"{len(hits)} {axis} categories in the output, "
                    "expected exactly one")
        triples = list(re.finditer(self._triple_pattern(), output))
        if not triples:
            violations.append("no complete staging triple")
        elif len(triples) > 1:
            violations.append(
                f"{len(triples)} complete staging triples, expected one")
        return violations

    def _triple_pattern(self) -> str:
        return (_alternation(self.t_categories) + " ?"
                + _alternation(self.n_categories) + " ?"
                + _alternation(self.m_categories))

    def extract_triple(self, output: str) -> str | None:
        """The unique triple with spacing normalized away, if there is one."""
        triples = list(re.finditer(self._triple_pattern(), output))
        if len(triples) != 1:
            return None
        return triples[0].group(0).replace(" ", "")

    def for_instance(self, instance) -> "StagingValidity":
        return self

    def to_json_obj(self) -> dict:
        return {"kind": "staging",
                "t": list(self.t_categories),
                "n": list(self.n_categories),
                "m": list(self.m_categories)}


@dataclass(frozen=True)
class FormulationValidity:
    """Labelled fractions must parse, sit in range, and stay under a total."""

    fields: tuple[tuple[str, float, float], ...]  # (label, lo, hi)
    total_max: float = 100.0

    def check(self, output: str) -> list[str]:
        violations: list[str] = []
        total = 0.0
        for label, lo, hi in self.fields:
            at = output.find(label)
            if at < 0:
                violations.append(f"field {label.strip()!r} missing")
                continue
            match = _NUMBER_RE.match(output, at + len(label))
            if match is None:
                violations.append(
                    f"field {label.strip()!r} does not parse as a number")
                continue
            value = float(match.group(0))
            total += value
            if not lo <= value <= hi:
                violations.append(
                    f"field {label.strip()!r} value {match.group(0)} "
                    f"outside [{lo:g}, {hi:g}]")
        if total > self.total_max:
            violations.append(f"mass fractions exceed {self.total_max:g}")
        return violations

    def for_instance(self, instance) -> "FormulationValidity":
        return self

    def to_json_obj(self) -> dict:
        return {"kind": "formulation",
                "fields": [[label, lo, hi] for label, lo, hi in self.fields],
                "total_max": self.total_max}


@dataclass(frozen=True)
class RewriteValidity:
    """Every proposed reactant must rewrite to the product under a template.

    A template (lhs, rhs) applies forward by replacing one occurrence of
    lhs in the reactant with rhs. The product is instance data, bound via
    ``for_instance`` from the instance's ``product`` meta entry.
    """

    templates: tuple[tuple[str, str], ...]
    product: str | None = None

    def check(self, output: str) -> list[str]:
        if self.product is None:
            return ["no product bound to the rewrite spec"]
        proposals = parse_proposals(output)
        if not proposals:
            return ["no proposals found in the output"]
        violations: list[str] = []
        for rank, reactant in enumerate(proposals, start=1):
            if not self._rewrites_to_product(reactant):
                violations.append(
                    f"proposal {rank} ({reactant!r}) rewrites to the "
                    "product under no template")
        return violations

    def _rewrites_to_product(self, reactant: str) -> bool:
        for lhs, rhs in self.templates:
            at = reactant.find(lhs)
            while at >= 0:
                rewritten = reactant[:at] + rhs + reactant[at + len(lhs):]
                if rewritten == self.product:
                    return True
                at = reactant.find(lhs, at + 1)
        return False

    def for_instance(self, instance) -> "RewriteValidity":
        product = dict(instance.meta).get("product")
        return replace(self, product=product)

    def to_json_obj(self) -> dict:
        return {"kind": "rewrite",
                "templates": [[lhs, rhs] for lhs, rhs in self.templates]}


ValiditySpec = StagingValidity | FormulationValidity | RewriteValidity


def validity_from_json(doc: dict) -> ValiditySpec:
    kind = doc.get("kind")
    if kind == "staging":
        return StagingValidity(tuple(doc["t"]), tuple(doc["n"]),
                               tuple(doc["m"]))
    if kind == "formulation":
        return FormulationValidity(
            tuple((label, float(lo), float(hi))
                  for label, lo, hi in doc["fields"]),
            total_max=float(doc.get("total_max", 100.0)))
    if kind == "rewrite":
        return RewriteValidity(
            tuple((lhs, rhs) for lhs, rhs in doc["templates"]))
    raise ValueError(f"unknown validity spec kind {kind!r}")


def score_validity(output: str, spec: ValiditySpec) -> tuple[bool, list[str]]:
    """Apply ``spec`` to ``output``; valid iff the violation list is empty."""
    violations = spec.check(output)
    return (not violations, violations)
