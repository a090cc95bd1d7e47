"""Ablation arms as program-to-program transformations.

Each arm removes one rule layer from a program and compensates in the
prompt, so different arms stay comparable on the same task:

- ``full``   keeps the program as written.
- ``wo_rt``  drops fixed scaffolding; the scaffold text moves into the
  prompt and one free generation produces the whole response.
- ``wo_rm``  drops validation loops; branches survive.
- ``wo_rb``  drops token-level constraints; regex generations become
  stop-string generations and selects become free generations, with the
  choice lists spelled out in the prompt instead.
- ``vanilla`` runs no program at all (handled by the harness).

Stripping returns the transformed program plus a prompt suffix carrying
whatever guidance was removed from the enforced side.
"""

from __future__ import annotations

from dataclasses import replace

from scidc.errors import ArmStripError
from scidc.rule_ir import (Branch, BranchArm, EmitFixed, Gen, RuleProgram,
                           Select, Step, ValidateLoop, all_steps)

ARMS = ("vanilla", "full", "wo_rt", "wo_rm", "wo_rb")

FREE_GEN_BUDGET = 48  # replaces a select when its options move to the prompt
UNIVERSAL_REGEX = "[\\s\\S]*"


def strip_program(program: RuleProgram, arm: str) -> tuple[RuleProgram, str]:
    """Transform ``program`` for ``arm``; also return the prompt suffix."""
    if arm not in ARMS:
        raise ArmStripError(f"unknown arm {arm!r}; expected one of {ARMS}")
    if arm == "vanilla":
        raise ArmStripError("the vanilla arm runs without a program")
    if arm == "full":
        return program, ""
    if arm == "wo_rt":
        return _strip_templates(program)
    if arm == "wo_rm":
        return _strip_middle(program)
    return _strip_bottom(program)


def total_token_budget(program: RuleProgram) -> int:
    """Upper bound on generated tokens, used to cap unstructured arms."""
    budget = 0
    for step in all_steps(program):
        body = step.body
        if isinstance(body, Gen):
            budget += body.max_tokens
        elif isinstance(body, (EmitFixed, Select)):
            budget += 16
    return max(budget, 16)


def _strip_templates(program: RuleProgram) -> tuple[RuleProgram, str]:
    scaffold = [step.body.text for step in all_steps(program)
                if isinstance(step.body, EmitFixed)]
    suffix = ""
    if scaffold:
        suffix = ("\nFollow this response scaffold:\n"
                  + "".join(scaffold).strip() + "\n")
    free = Step("response", Gen(regex=UNIVERSAL_REGEX,
                                max_tokens=total_token_budget(program)))
    stripped = RuleProgram(name=program.name + "_wo_rt", steps=(free,),
                           metadata=program.metadata)
    return stripped, suffix


def _strip_middle(program: RuleProgram) -> tuple[RuleProgram, str]:
    def walk(steps) -> tuple:
        kept = []
        for step in steps:
            if isinstance(step.body, ValidateLoop):
                continue
            if isinstance(step.body, Branch):
                arms = tuple(BranchArm(arm.guard, walk(arm.steps))
                             for arm in step.body.arms)
                otherwise = walk(step.body.otherwise)
                kept.append(replace(step, body=Branch(arms, otherwise)))
            else:
                kept.append(step)
        return tuple(kept)

    stripped = RuleProgram(name=program.name + "_wo_rm",
                           steps=walk(program.steps),
                           metadata=program.metadata)
    return stripped, ""


def _strip_bottom(program: RuleProgram) -> tuple[RuleProgram, str]:
    notes: list[str] = []

    def relax(step: Step) -> Step:
        body = step.body
        if isinstance(body, Gen) and body.regex is not None:
            stop = body.stop if body.stop is not None else "\n"
            return replace(step, body=replace(body, regex=None, stop=stop))
        if isinstance(body, Select):
            notes.extend(_render_select(step.name, body))
            return replace(step, body=Gen(stop="\n",
                                          max_tokens=FREE_GEN_BUDGET,
                                          temperature=body.temperature))
        return step

    def walk(steps) -> tuple:
        out = []
        for step in steps:
            if isinstance(step.body, Branch):
                arms = tuple(BranchArm(arm.guard, walk(arm.steps))
                             for arm in step.body.arms)
                otherwise = walk(step.body.otherwise)
                out.append(replace(step, body=Branch(arms, otherwise)))
            else:
                out.append(relax(step))
        return tuple(out)

    stripped = RuleProgram(name=program.name + "_wo_rb",
                           steps=walk(program.steps),
                           metadata=program.metadata)
    suffix = ""
    if notes:
        suffix = "\nValid choices:\n" + "\n".join(notes) + "\n"
    return stripped, suffix


def _render_select(name: str, body: Select) -> list[str]:
    if body.options is not None:
        return [f"{name}: " + " | ".join(body.options)]
    if body.dynamic is None:
        raise ArmStripError(f"select step {name!r} carries no options")
    lines = []
    for guard, options in body.dynamic.guards:
        lines.append(f"{name} if {guard.source}: " + " | ".join(options))
    lines.append(f"{name} otherwise: " + " | ".join(body.dynamic.default))
    return lines
