"""The two-stage compile pipeline and the expert verification loop.

Stage 1 (decompose_task) turns a knowledge document plus a problem-class
description into a CotFramework; stage 2 (generate_rule_program) turns
the framework into a lint-clean RuleProgram. Each stage grants the GLLM
one self-repair round with the rejection attached, then fails loudly.
explain_program and apply_expert_feedback cover the human verification
dialogue: a deterministic plain-language rendering out, a revised
program back in, rejected unless it stays lint-clean and keeps every
variable the current program binds.
"""

from __future__ import annotations

from dataclasses import dataclass

from scidc.errors import (
    LintErrors,
    MalformedFrameworkReply,
    RevisionRejected,
    RuleSyntaxError,
    ScidcError,
    UnparseableProgram,
)
from scidc.rule_ir import (
    Branch,
    EmitFixed,
    Gen,
    RuleProgram,
    Select,
    ValidateLoop,
    all_steps,
    errors_only,
    lint_program,
    parse_program,
    serialize_program,
)

from .framework import CotFramework, parse_framework_reply, render_framework
from .gllm import GllmClient
from .prompts import (
    render_prompt1,
    render_prompt2,
    render_repair,
    render_revision,
)


@dataclass(frozen=True)
class KnowledgeDoc:
    """The domain document a compile run starts from."""

    text: str
    provenance: str = ""

    @property
    def token_estimate(self) -> int:
        # 4 bytes per token is the usual planning figure
        return max(1, len(self.text) // 4)


@dataclass(frozen=True)
class ModelExplanation:
    text: str


@dataclass(frozen=True)
class ExpertSuggestion:
    text: str


@dataclass(frozen=True)
class VerificationTranscript:
    """Alternating explanation/suggestion turns, expert capped at two."""

    turns: tuple = ()

    def validate(self) -> None:
        experts = 0
        for i, turn in enumerate(self.turns):
            expected = ModelExplanation if i % 2 == 0 else ExpertSuggestion
            if not isinstance(turn, expected):
                raise ValueError(
                    f"turn {i + 1} must be a {expected.__name__}; transcripts "
                    "alternate starting with the model's explanation")
            if isinstance(turn, ExpertSuggestion):
                experts += 1
        if experts > 2:
            raise ValueError("a transcript carries at most 2 expert turns")

    @property
    def suggestions(self) -> tuple[str, ...]:
        return tuple(t.text for t in self.turns
                     if isinstance(t, ExpertSuggestion))


def decompose_task(doc: KnowledgeDoc, problem_class: str,
                   gllm: GllmClient) -> CotFramework:
    """Stage 1: document + problem class -> validated CotFramework."""
    if not doc.text.strip():
        raise ValueError("the knowledge document is empty")
    prompt = render_prompt1(doc.text, problem_class)
    reply = gllm.complete(prompt)
    try:
        return _read_framework(reply)
    except MalformedFrameworkReply as first:
        repair = render_repair(prompt, str(first), reply)
        retry = gllm.complete(repair)
        try:
            return _read_framework(retry)
        except MalformedFrameworkReply as second:
            raise MalformedFrameworkReply(
                f"after one repair round: {second}") from first


def _read_framework(reply: str) -> CotFramework:
    framework = parse_framework_reply(reply)
    framework.validate()
    return framework


def generate_rule_program(doc: KnowledgeDoc, question_class: str,
                          framework: CotFramework,
                          gllm: GllmClient) -> RuleProgram:
    """Stage 2: framework -> lint-clean RuleProgram in scidc-ir v1."""
    framework.validate()
    prompt = render_prompt2(doc.text, question_class,
                            render_framework(framework))
    reply = gllm.complete(prompt)
    program, failure = _read_program(reply)
    if program is not None:
        return program
    repair = render_repair(prompt, str(failure), reply)
    retry = gllm.complete(repair)
    program, failure = _read_program(retry)
    if program is not None:
        return program
    raise failure


def _read_program(reply: str) -> tuple[RuleProgram | None, ScidcError | None]:
    source = extract_code_block(reply)
    try:
        program = parse_program(source)
    except RuleSyntaxError as exc:
        return None, UnparseableProgram(
            f"reply does not parse as scidc-ir v1: {exc}")
    findings = errors_only(lint_program(program))
    if findings:
        return None, LintErrors(findings)
    return program, None


def extract_code_block(reply: str) -> str:
    """The first fenced block, or the whole reply when there is no fence."""
    marker = "```"
    start = reply.find(marker)
    if start < 0:
        return reply.strip()
    start = reply.find("\n", start)
    if start < 0:
        return reply.strip()
    end = reply.find(marker, start)
    if end < 0:
        return reply[start + 1:].strip()
    return reply[start + 1:end].strip()


def explain_program(program: RuleProgram) -> str:
    """Deterministic plain-language rendering, one sentence per step."""
    findings = errors_only(lint_program(program))
    if findings:
        raise LintErrors(findings)
    lines = [f"The program {program.name} proceeds as follows:"]
    _explain_steps(program.steps, lines, indent="")
    return "\n".join(lines) + "\n"


def _explain_steps(steps, lines: list[str], indent: str) -> None:
    for step in steps:
        body = step.body
        if isinstance(body, EmitFixed):
            lines.append(f"{indent}- The program then writes the fixed text "
                         f"{body.text!r}.")
        elif isinstance(body, Gen):
            if body.regex is not None:
                lines.append(
                    f"{indent}- Step {step.name} generates text matching the "
                    f"pattern {body.regex!r}, at most {body.max_tokens} "
                    "tokens.")
            else:
                lines.append(
                    f"{indent}- Step {step.name} generates free text until "
                    f"{body.stop!r}, at most {body.max_tokens} tokens.")
        elif isinstance(body, Select):
            lines.append(f"{indent}- {_explain_select(step.name, body)}")
        elif isinstance(body, Branch):
            for i, arm in enumerate(body.arms):
                lead = "When" if i == 0 else "Or, when"
                lines.append(f"{indent}- {lead} {pred_words(arm.guard)}, "
                             "the program runs:")
                _explain_steps(arm.steps, lines, indent + "  ")
            if body.otherwise:
                lines.append(f"{indent}- Otherwise, the program runs:")
                _explain_steps(body.otherwise, lines, indent + "  ")
        elif isinstance(body, ValidateLoop):
            lines.append(f"{indent}- {_explain_validate(step.name, body)}")


def _explain_select(name: str, body: Select) -> str:
    if body.options is not None:
        return f"Step {name} selects one of: {', '.join(body.options)}."
    clauses = [f"when {pred_words(guard)} then one of: {', '.join(opts)}"
               for guard, opts in body.dynamic.guards]
    clauses.append(f"otherwise one of: {', '.join(body.dynamic.default)}")
    return (f"Step {name} selects depending on earlier answers: "
            f"{'; '.join(clauses)}.")


def _explain_validate(name: str, body: ValidateLoop) -> str:
    sentence = (f"Step {name} checks that {pred_words(body.predicate)}; on "
                f"failure it rewinds to step {body.anchor} and regenerates, "
                f"up to {body.max_retries} times")
    if body.fallback:
        pairs = ", ".join(f"{var} = {value}" for var, value in body.fallback)
        sentence += f", then falls back to {pairs}"
    return sentence + "."


_CMP_WORDS = {"==": "equals", "!=": "differs from", "<": "is smaller than",
              "<=": "is at most", ">": "is greater than", ">=": "is at least"}
_ARITH_WORDS = {"+": "plus", "-": "minus", "*": "times", "/": "over"}


def pred_words(pred) -> str:
    """A predicate in words, e.g. 'size is smaller than 1'."""
    return _words(pred.expr)


def _words(node) -> str:
    kind = node[0]
    if kind == "var":
        return str(node[1])
    if kind == "num":
        value = node[1]
        return f"{value:g}" if isinstance(value, float) else str(value)
    if kind == "str":
        return repr(node[1])
    if kind == "set":
        return ", ".join(_words(item) for item in node[1])
    if kind == "cmp":
        _, op, left, right = node
        return f"{_words(left)} {_CMP_WORDS[op]} {_words(right)}"
    if kind == "arith":
        _, op, left, right = node
        return f"{_words(left)} {_ARITH_WORDS[op]} {_words(right)}"
    if kind == "in":
        return f"{_words(node[1])} is one of {_words(node[2])}"
    if kind == "and":
        return " and ".join(_words(term) for term in node[1])
    if kind == "or":
        return " or ".join(_words(term) for term in node[1])
    if kind == "not":
        return f"it is not the case that {_words(node[1])}"
    raise AssertionError(kind)


def apply_expert_feedback(program: RuleProgram,
                          transcript: VerificationTranscript,
                          gllm: GllmClient) -> RuleProgram:
    """Revise the program per the transcript's latest expert suggestion."""
    transcript.validate()
    suggestions = transcript.suggestions
    suggestion = suggestions[-1] if suggestions else ""
    if not suggestion.strip():
        return program
    prompt = render_revision(serialize_program(program),
                             explain_program(program), suggestion)
    reply = gllm.complete(prompt)
    source = extract_code_block(reply)
    try:
        revised = parse_program(source)
    except RuleSyntaxError as exc:
        raise RevisionRejected([f"revision does not parse: {exc}"]) from exc
    findings = errors_only(lint_program(revised))
    if findings:
        raise RevisionRejected(findings)
    kept = {step.name for step in all_steps(revised) if step.binds}
    dropped = sorted({step.name for step in all_steps(program)
                      if step.binds} - kept)
    if dropped:
        raise RevisionRejected(
            [f"revision drops the bound variable {name!r}" for name in dropped])
    return revised
