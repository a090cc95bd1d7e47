"""Task packs: instances, program, vocabulary, validity and scoring.

A pack is the self-contained unit the harness evaluates: one rule
program (instances may override it), the instances with gold labels, a
validity spec, an optional match scorer, and the vocabulary every arm
shares. Packs serialize to one JSON file so a run is reproducible
without the builder that made it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from scidc.errors import LintErrors, PackError
from scidc.rule_ir import errors_only, lint_program, parse_program
from scidc.token_model import Vocabulary, vocabulary_from_strings

from .scoring import Scorer, scorer_from_json
from .specs import ValiditySpec, validity_from_json
from .strip import strip_program

PACK_FORMAT = "scidc-pack v1"
EOS_TOKEN = "<|eos|>"

# always available so rendered retry counters and numbers tokenize
_ALWAYS_CHARS = "0123456789 \n"

_STRIPPED_ARMS = ("wo_rt", "wo_rm", "wo_rb")


@dataclass(frozen=True)
class Instance:
    """One task item: prompt text, gold label, and builder metadata."""

    input: str
    gold: str | None = None
    meta: tuple = ()  # tuple[tuple[str, str], ...]
    program: str | None = None  # overrides the pack program when set


@dataclass(frozen=True)
class TaskPack:
    id: str
    program: str
    vocab: Vocabulary
    validity: ValiditySpec
    scorer: Scorer | None
    instances: tuple[Instance, ...]

    def program_for(self, instance: Instance) -> str:
        return instance.program if instance.program is not None \
            else self.program

    def program_texts(self) -> list[str]:
        """Unique program texts in first-use order."""
        texts = [self.program]
        for instance in self.instances:
            if instance.program is not None and instance.program not in texts:
                texts.append(instance.program)
        return texts

    def validate(self) -> None:
        """Raise PackError or LintErrors when the pack cannot be run."""
        if not self.id:
            raise PackError("pack id is empty")
        if not self.instances:
            raise PackError(f"pack {self.id!r} has no instances")
        if self.scorer is not None:
            for i, instance in enumerate(self.instances):
                if not instance.gold:
                    raise PackError(
                        f"pack {self.id!r} instance {i} has no gold label "
                        "but the pack declares a scorer")
        for instance in self.instances:
            self.vocab.tokenize(instance.input)
        for text in self.program_texts():
            program = parse_program(text)
            findings = errors_only(lint_program(program, self.vocab))
            if findings:
                raise LintErrors(findings)
            for arm in _STRIPPED_ARMS:
                stripped, suffix = strip_program(program, arm)
                self.vocab.tokenize(suffix)
                findings = errors_only(lint_program(stripped, self.vocab))
                if findings:
                    raise LintErrors(findings)

    def to_json_obj(self) -> dict:
        return {
            "format": PACK_FORMAT,
            "id": self.id,
            "program": self.program,
            "vocab": _vocab_to_json_obj(self.vocab),
            "validity": self.validity.to_json_obj(),
            "scorer": None if self.scorer is None
            else self.scorer.to_json_obj(),
            "instances": [
                {"input": inst.input, "gold": inst.gold,
                 "meta": dict(inst.meta), "program": inst.program}
                for inst in self.instances
            ],
        }

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_obj(), fh, ensure_ascii=False, indent=2)
            fh.write("\n")


def _vocab_to_json_obj(vocab: Vocabulary) -> dict:
    return {
        "tokens": [tok.decode("utf-8", "surrogateescape")
                   for tok in vocab.tokens],
        "special": sorted(vocab.special),
        "eos": vocab.eos_id,
    }


def _vocab_from_json_obj(doc: dict) -> Vocabulary:
    eos = doc.get("eos")
    return vocabulary_from_strings(
        list(doc["tokens"]),
        special=set(int(s) for s in doc.get("special", [])),
        eos_id=int(eos) if eos is not None else None)


def pack_from_json_obj(doc: dict) -> TaskPack:
    if doc.get("format") != PACK_FORMAT:
        raise PackError(f"not a task pack: format {doc.get('format')!r}")
    instances = tuple(
        Instance(input=entry["input"], gold=entry.get("gold"),
                 meta=tuple((str(k), str(v))
                            for k, v in (entry.get("meta") or {}).items()),
                 program=entry.get("program"))
        for entry in doc["instances"])
    return TaskPack(
        id=doc["id"],
        program=doc["program"],
        vocab=_vocab_from_json_obj(doc["vocab"]),
        validity=validity_from_json(doc["validity"]),
        scorer=scorer_from_json(doc.get("scorer")),
        instances=instances,
    )


def load_pack(path: str) -> TaskPack:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return pack_from_json_obj(doc)


def vocab_for_texts(texts, extra_tokens=()) -> Vocabulary:
    """Character vocabulary covering ``texts``, eos first at id 0.

    ``extra_tokens`` adds multi-character tokens (category names and the
    like) after eos; masked-out scores then resolve ties toward eos, and
    category names decode in one step.
    """
    chars = set(_ALWAYS_CHARS)
    for text in texts:
        chars.update(text)
    tokens = [EOS_TOKEN]
    for token in (*extra_tokens, *sorted(chars)):
        if token not in tokens:
            tokens.append(token)
    return vocabulary_from_strings(tokens, special={0}, eos_id=0)


def arm_suffix_texts(program_text: str) -> list[str]:
    """Prompt suffixes every stripped arm of ``program_text`` can emit."""
    program = parse_program(program_text)
    return [strip_program(program, arm)[1] for arm in _STRIPPED_ARMS]


def pack_ids() -> tuple[str, ...]:
    return ("tnm", "retro", "formulation")


def build_pack(pack_id: str, *, seed: int = 0,
               count: int | None = None) -> TaskPack:
    """Build a bundled pack by id; ``count`` overrides the default size."""
    from . import formulation_pack, rewrite, staging
    builders = {
        "tnm": staging.build_tnm_pack,
        "retro": rewrite.build_retro_pack,
        "formulation": formulation_pack.build_formulation_pack,
    }
    if pack_id not in builders:
        raise PackError(
            f"unknown pack {pack_id!r}; bundled packs: "
            + ", ".join(pack_ids()))
    if count is None:
        return builders[pack_id](seed=seed)
    return builders[pack_id](seed=seed, count=count)
