"""Desk-scale task packs, ablation arms, and metric aggregation.

Three bundled packs exercise the rule layers from different angles:
``tnm`` (staging triples with an exact-match gold), ``retro`` (rewrite
proposals scored hit@1), and ``formulation`` (validity-only fraction
cards). ``run_pack`` evaluates a pack across ablation arms and seeds
and returns a per-arm metrics report.
"""

from .harness import (
    ArmMetrics,
    MetricsReport,
    oracle_backend_factory,
    run_pack,
    uniform_backend_factory,
)
from .packs import (
    Instance,
    TaskPack,
    build_pack,
    load_pack,
    pack_from_json_obj,
    pack_ids,
    vocab_for_texts,
)
from .scoring import (
    ExactMatch,
    HitAtK,
    parse_proposals,
    score_exact,
    score_hit_at_k,
)
from .specs import (
    FormulationValidity,
    RewriteValidity,
    StagingValidity,
    score_validity,
)
from .strip import ARMS, strip_program, total_token_budget

__all__ = [
    "ARMS",
    "ArmMetrics",
    "ExactMatch",
    "FormulationValidity",
    "HitAtK",
    "Instance",
    "MetricsReport",
    "RewriteValidity",
    "StagingValidity",
    "TaskPack",
    "build_pack",
    "load_pack",
    "oracle_backend_factory",
    "pack_from_json_obj",
    "pack_ids",
    "parse_proposals",
    "run_pack",
    "score_exact",
    "score_hit_at_k",
    "score_validity",
    "strip_program",
    "total_token_budget",
    "uniform_backend_factory",
    "vocab_for_texts",
]
