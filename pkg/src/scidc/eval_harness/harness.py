"""Run task packs across ablation arms and aggregate per-arm metrics.

One engine is compiled per (program, arm) and rebound to each run's
backend, so per-instance programs stay affordable. Runs are sequential
and the aggregation is a plain mean over instances and seeds; nothing
here depends on wall-clock order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from statistics import fmean

from scidc.backends import MockBackend, MockScript, UniformNoise
from scidc.engine import Engine
from scidc.errors import PackError
from scidc.rule_ir import parse_program

from .packs import TaskPack
from .specs import score_validity
from .strip import ARMS, strip_program, total_token_budget


@dataclass(frozen=True)
class ArmMetrics:
    runs: int
    validity_pct: float
    match_pct: float | None
    mean_regenerations: float
    mean_output_tokens: float
    mean_discarded_tokens: float

    def to_json_obj(self) -> dict:
        return {
            "runs": self.runs,
            "validity_pct": self.validity_pct,
            "match_pct": self.match_pct,
            "mean_regenerations": self.mean_regenerations,
            "mean_output_tokens": self.mean_output_tokens,
            "mean_discarded_tokens": self.mean_discarded_tokens,
        }


@dataclass(frozen=True)
class MetricsReport:
    pack_id: str
    seeds: tuple[int, ...]
    arms: tuple  # tuple[tuple[str, ArmMetrics], ...]

    def arm(self, name: str) -> ArmMetrics:
        for arm, metrics in self.arms:
            if arm == name:
                return metrics
        raise KeyError(f"arm {name!r} not in the report")

    def to_json_obj(self) -> dict:
        return {
            "pack": self.pack_id,
            "seeds": list(self.seeds),
            "arms": {arm: metrics.to_json_obj()
                     for arm, metrics in self.arms},
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json_text())
            fh.write("\n")


@dataclass
class _RunRow:
    valid: bool
    matched: bool | None
    regenerations: int
    output_tokens: int
    discarded_tokens: int


def run_pack(pack: TaskPack, backend, arms=("full",),
             seeds=(0, 1, 2)) -> MetricsReport:
    """Evaluate every instance under every requested arm and seed.

    ``backend`` is either one DecoderBackend shared across runs or a
    factory called as ``backend(instance, arm, seed)``; factories let
    scripted mocks follow the instance at hand. Backends exposing
    ``reset()`` are rewound before each run.
    """
    arms = tuple(arms)
    seeds = tuple(int(s) for s in seeds)
    if not arms:
        raise PackError("no arms requested")
    unknown = [a for a in arms if a not in ARMS]
    if unknown:
        raise PackError(f"unknown arms {unknown}; valid arms: {ARMS}")
    if len(set(arms)) != len(arms):
        raise PackError("duplicate arms requested")
    if not seeds:
        raise PackError("no seeds requested")
    pack.validate()

    factory = backend if callable(backend) else \
        (lambda instance, arm, seed: backend)
    programs: dict[str, object] = {}
    stripped: dict[tuple[str, str], tuple] = {}
    engines: dict[tuple[str, str], Engine] = {}
    budgets: dict[str, int] = {}

    def program_for(text: str):
        if text not in programs:
            programs[text] = parse_program(text)
        return programs[text]

    rows: dict[str, list[_RunRow]] = {arm: [] for arm in arms}
    for arm in arms:
        for seed in seeds:
            for instance in pack.instances:
                bk = factory(instance, arm, seed)
                reset = getattr(bk, "reset", None)
                if callable(reset):
                    reset()
                text = pack.program_for(instance)
                if arm == "vanilla":
                    rows[arm].append(_run_vanilla(
                        pack, instance, bk, program_for(text), budgets, text))
                    continue
                key = (text, arm)
                if key not in stripped:
                    stripped[key] = strip_program(program_for(text), arm)
                program, suffix = stripped[key]
                engine = engines.get(key)
                if engine is None:
                    engine = Engine(program, bk, prelint=False)
                    engines[key] = engine
                else:
                    engine.rebind_backend(bk)
                result = engine.run(instance.input + suffix, seed)
                rows[arm].append(_score_row(
                    pack, instance, result.output,
                    regenerations=result.trace.regenerations,
                    output_tokens=result.output_tokens,
                    discarded_tokens=result.trace.discarded_tokens))
    return MetricsReport(
        pack_id=pack.id, seeds=seeds,
        arms=tuple((arm, _aggregate(rows[arm])) for arm in arms))


def _run_vanilla(pack, instance, bk, program, budgets, text) -> _RunRow:
    if text not in budgets:
        budgets[text] = total_token_budget(program)
    output = bk.generate_unconstrained(instance.input,
                                       max_tokens=budgets[text],
                                       temperature=0.0)
    return _score_row(pack, instance, output, regenerations=0,
                      output_tokens=len(pack.vocab.tokenize(output)),
                      discarded_tokens=0)


def _score_row(pack, instance, output, *, regenerations, output_tokens,
               discarded_tokens) -> _RunRow:
    spec = pack.validity.for_instance(instance)
    valid, _ = score_validity(output, spec)
    matched = None
    if pack.scorer is not None:
        matched = pack.scorer.hit(output, instance.gold, spec)
    return _RunRow(valid=valid, matched=matched,
                   regenerations=regenerations,
                   output_tokens=output_tokens,
                   discarded_tokens=discarded_tokens)


def _aggregate(rows: list[_RunRow]) -> ArmMetrics:
    if not rows:
        raise PackError("no runs to aggregate")
    match_pct = None
    if rows[0].matched is not None:
        match_pct = 100.0 * fmean(1.0 if r.matched else 0.0 for r in rows)
    return ArmMetrics(
        runs=len(rows),
        validity_pct=100.0 * fmean(1.0 if r.valid else 0.0 for r in rows),
        match_pct=match_pct,
        mean_regenerations=fmean(r.regenerations for r in rows),
        mean_output_tokens=fmean(r.output_tokens for r in rows),
        mean_discarded_tokens=fmean(r.discarded_tokens for r in rows))


def oracle_backend_factory(pack: TaskPack):
    """Backend factory whose script answers each instance correctly."""
    from . import formulation_pack, rewrite, staging
    scripts = {
        "tnm": staging.tnm_oracle_script,
        "retro": rewrite.retro_oracle_script,
        "formulation": formulation_pack.formulation_oracle_script,
    }
    if pack.id not in scripts:
        raise PackError(f"no bundled oracle script for pack {pack.id!r}")
    build_script = scripts[pack.id]

    def factory(instance, arm, seed):
        return MockBackend(pack.vocab, build_script(instance))

    return factory


def uniform_backend_factory(pack: TaskPack):
    """Backend factory serving seed-keyed uniform noise; no script."""

    def factory(instance, arm, seed):
        return MockBackend(pack.vocab, MockScript((UniformNoise(seed),)))

    return factory
