"""Single-step rewrite proposals over a toy string grammar.

Molecules are words over the alphabet a-f. A template (lhs, rhs)
rewrites a reactant into a product by replacing one occurrence of lhs
with rhs; chemistry is out of scope. Given a product, the task proposes
reactants. Candidate reactants are enumerated by inverting the
templates against the product, so each instance carries its own select
options and therefore its own program.
"""

from __future__ import annotations

import numpy as np

from scidc.backends import MockScript, PreferText

from .packs import Instance, TaskPack, arm_suffix_texts, vocab_for_texts
from .scoring import HitAtK
from .specs import RewriteValidity

ALPHABET = "abcdef"

TEMPLATES = (("ab", "c"), ("cd", "e"), ("ef", "a"), ("ba", "d"),
             ("de", "fb"), ("fc", "b"), ("ace", "f"), ("bd", "af"))


def enumerate_candidates(product: str) -> tuple[str, ...]:
    """Every reactant one template application away from ``product``."""
    found: list[str] = []
    for lhs, rhs in TEMPLATES:
        at = product.find(rhs)
        while at >= 0:
            candidate = product[:at] + lhs + product[at + len(rhs):]
            if candidate not in found:
                found.append(candidate)
            at = product.find(rhs, at + 1)
    return tuple(found)


def _program_text(index: int, candidates: tuple[str, ...]) -> str:
    options = ", ".join(f'"{c}"' for c in candidates)
    return (f"scidc-ir v1\n"
            f"program retro_{index}\n\n"
            'step intro: emit\n  text = "Proposals:\\n1. "\n\n'
            f"step prop1: select\n  options = [{options}]\n\n"
            'step gap: emit\n  text = "\\n2. "\n\n'
            f"step prop2: select\n  options = [{options}]\n\n"
            'step fin: emit\n  text = "\\n"\n')


def _random_molecule(rng: np.random.Generator, length: int) -> str:
    return "".join(ALPHABET[int(i)]
                   for i in rng.integers(0, len(ALPHABET), length))


def generate_instances(seed: int, count: int) -> tuple[Instance, ...]:
    rng = np.random.default_rng(seed)
    instances = []
    while len(instances) < count:
        # plant a template occurrence so a forward rewrite always exists
        lhs, rhs = TEMPLATES[int(rng.integers(0, len(TEMPLATES)))]
        head = _random_molecule(rng, int(rng.integers(1, 4)))
        tail = _random_molecule(rng, int(rng.integers(1, 4)))
        reactant = head + lhs + tail
        at = reactant.find(lhs, len(head))
        product = reactant[:at] + rhs + reactant[at + len(lhs):]
        candidates = enumerate_candidates(product)
        if reactant not in candidates or len(candidates) < 2:
            continue
        index = len(instances)
        instances.append(Instance(
            input=(f"Target {index}: product {product}. Propose reactants "
                   "for one retro step.\n"),
            gold=reactant,
            meta=(("product", product),),
            program=_program_text(index, candidates),
        ))
    return tuple(instances)


def retro_oracle_script(instance: Instance) -> MockScript:
    """Scripted responder ranking the true reactant first."""
    product = dict(instance.meta)["product"]
    candidates = enumerate_candidates(product)
    second = next((c for c in candidates if c != instance.gold),
                  instance.gold)
    return MockScript((PreferText(instance.gold), PreferText(second)))


def build_retro_pack(seed: int = 0, count: int = 201) -> TaskPack:
    instances = generate_instances(seed, count)
    script_texts = [d.text
                    for inst in instances
                    for d in retro_oracle_script(inst).directives]
    suffix_texts = []
    for instance in instances:
        suffix_texts.extend(arm_suffix_texts(instance.program))
    vocab = vocab_for_texts(
        [*(inst.program for inst in instances), *suffix_texts,
         *script_texts, *(inst.input for inst in instances)])
    return TaskPack(
        id="retro",
        program=instances[0].program,
        vocab=vocab,
        validity=RewriteValidity(TEMPLATES),
        scorer=HitAtK(k=1),
        instances=instances,
    )
