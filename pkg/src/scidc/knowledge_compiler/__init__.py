"""Compile domain knowledge into rule programs via a general LLM.

The pipeline runs in two stages. decompose_task asks the GLLM to break
a problem class into a chain-of-thought framework of extract/judge/
conclude steps; generate_rule_program asks it to compile that framework
into scidc-ir v1, and rejects anything that fails the linter. A
deterministic explain_program rendering plus apply_expert_feedback
close the loop with a domain expert.
"""

from .framework import (
    KINDS,
    CotFramework,
    CotStep,
    parse_framework_reply,
    render_framework,
)
from .gllm import (
    FixtureGllm,
    GllmClient,
    HttpGllm,
    ScriptedGllm,
    record_fixture,
    request_hash,
)
from .pipeline import (
    ExpertSuggestion,
    KnowledgeDoc,
    ModelExplanation,
    VerificationTranscript,
    apply_expert_feedback,
    decompose_task,
    explain_program,
    extract_code_block,
    generate_rule_program,
    pred_words,
)
from .prompts import (
    PROMPT1_SKELETONS,
    PROMPT1_TEMPLATE,
    PROMPT2_SKELETONS,
    PROMPT2_TEMPLATE,
    REVISION_TEMPLATE,
    render_prompt1,
    render_prompt2,
    render_repair,
    render_revision,
)

__all__ = [
    "KINDS",
    "CotFramework",
    "CotStep",
    "ExpertSuggestion",
    "FixtureGllm",
    "GllmClient",
    "HttpGllm",
    "KnowledgeDoc",
    "ModelExplanation",
    "PROMPT1_SKELETONS",
    "PROMPT1_TEMPLATE",
    "PROMPT2_SKELETONS",
    "PROMPT2_TEMPLATE",
    "REVISION_TEMPLATE",
    "ScriptedGllm",
    "VerificationTranscript",
    "apply_expert_feedback",
    "decompose_task",
    "explain_program",
    "extract_code_block",
    "generate_rule_program",
    "parse_framework_reply",
    "pred_words",
    "record_fixture",
    "render_framework",
    "render_prompt1",
    "render_prompt2",
    "render_repair",
    "render_revision",
    "request_hash",
]
