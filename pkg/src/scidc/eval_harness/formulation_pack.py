"""Formulation design pack scored on validity alone.

The program forces every fraction into its declared range at the token
level (the range is encoded in the regex), and a validate loop holds a
cross-component blend rule the regexes cannot express. There is no gold
formula, so the pack carries no match scorer; reports show validity and
the regeneration counters.
"""

from __future__ import annotations

import numpy as np

from scidc.backends import FailValidationTimes, MockScript, PreferText

from .packs import Instance, TaskPack, arm_suffix_texts, vocab_for_texts
from .specs import FormulationValidity

FIELDS = (("plasticizer: ", 2.0, 4.8),
          ("curing agent: ", 0.5, 5.0),
          ("binder: ", 1.0, 3.5))

SOLVENTS = ("aqueous", "solvent-free", "hybrid")

FORMULATION_PROGRAM = r'''scidc-ir v1
program formulation_card
meta domain = "industrial formulation"

step intro: emit
  text = "Formulation:\nplasticizer: "

step plasticizer: gen
  regex = "(2|3)\\.\\d|4\\.[0-8]"
  max_tokens = 4

step l2: emit
  text = "\ncuring agent: "

step curing: gen
  regex = "0\\.[5-9]|[1-4]\\.\\d|5\\.0"
  max_tokens = 4

step check_blend: validate
  pred = plasticizer + curing <= 8
  max_retries = 3
  anchor = curing
  retry_message = "\n[Retry {retry}] Plasticizer plus curing agent must stay at or below 8; restate the curing fraction.\n"
  fallback {
    curing = "2.0"
  }

step l3: emit
  text = "\nbinder: "

step binder: gen
  regex = "[12]\\.\\d|3\\.[0-5]"
  max_tokens = 4

step l4: emit
  text = "\nsolvent: "

step solvent: select
  options = ["aqueous", "solvent-free", "hybrid"]

step fin: emit
  text = "\n"
'''

_PROMPTS = (
    "Requirement {i}: a flexible blend, plasticizer near {p}, {s} system "
    "preferred.\n",
    "Requirement {i}: low-shrink cast; keep curing agent mild and use a "
    "{s} solvent. Plasticizer target {p}.\n",
    "Requirement {i}: outdoor coating, plasticizer about {p}, binder on "
    "the firm side, {s} solvent.\n",
)


def generate_instances(seed: int, count: int) -> tuple[Instance, ...]:
    rng = np.random.default_rng(seed)
    instances = []
    for i in range(count):
        plasticizer = 2.0 + float(rng.integers(0, 21)) / 10.0
        solvent = SOLVENTS[int(rng.integers(0, len(SOLVENTS)))]
        prompt = _PROMPTS[i % len(_PROMPTS)].format(
            i=i, p=f"{plasticizer:.1f}", s=solvent)
        instances.append(Instance(
            input=prompt,
            gold=None,
            meta=(("plasticizer", f"{plasticizer:.1f}"),
                  ("solvent", solvent),
                  ("blend_conflict", "yes" if i % 5 == 0 else "no")),
        ))
    return tuple(instances)


def formulation_oracle_script(instance: Instance) -> MockScript:
    """Scripted responder; conflicted instances overdose the curing agent.

    The overdosed value passes the token-level range check but breaks
    the blend rule, so the validate loop retries and then settles.
    """
    meta = dict(instance.meta)
    directives: list = [PreferText("4.0" if meta["blend_conflict"] == "yes"
                                   else meta["plasticizer"])]
    if meta["blend_conflict"] == "yes":
        directives.append(FailValidationTimes(times=1, failing="5.0",
                                              passing="2.0"))
    else:
        directives.append(PreferText("2.0"))
    directives.append(PreferText("1.5"))
    directives.append(PreferText(meta["solvent"]))
    return MockScript(tuple(directives))


def build_formulation_pack(seed: int = 0, count: int = 12) -> TaskPack:
    instances = generate_instances(seed, count)
    script_texts = []
    for instance in instances:
        for directive in formulation_oracle_script(instance).directives:
            if isinstance(directive, PreferText):
                script_texts.append(directive.text)
            else:
                script_texts.extend((directive.failing, directive.passing))
    vocab = vocab_for_texts(
        [FORMULATION_PROGRAM, *arm_suffix_texts(FORMULATION_PROGRAM),
         *script_texts, *(inst.input for inst in instances)])
    return TaskPack(
        id="formulation",
        program=FORMULATION_PROGRAM,
        vocab=vocab,
        validity=FormulationValidity(FIELDS),
        scorer=None,
        instances=instances,
    )
