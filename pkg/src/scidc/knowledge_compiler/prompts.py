"""Prompt templates for the two-stage compile pipeline.

Stage 1 asks the GLLM to decompose a problem class into a reusable
chain-of-thought framework; stage 2 turns that framework into a rule
program. Both templates are program data: tests pin their skeleton
sections byte-for-byte, so edit them only with the goldens. Rendering
is plain placeholder substitution ({domain_doc} and friends), never
str.format, because the bodies are full of literal braces.
"""

from __future__ import annotations

import re

PROMPT1_TEMPLATE = r"""# Role Definition
You are an expert in reasoning framework design. Your task is:
Given a knowledge document [DOC] and a description of a problem class [Q],
design a general-purpose Chain-of-Thought Framework (CoT Framework)
that describes the standard reasoning path for solving this class of problems.
This framework does not target any specific case. It is a reusable solution blueprint that:
- Defines WHAT variables need to be extracted from any concrete problem instance
- Defines WHAT intermediate conclusions need to be derived and WHICH prior variables they depend on
- Defines HOW the final answer is inferred from the above variables and intermediate conclusions

# Input Format
[DOC]: A knowledge document defining the rules, constraints, standards, or background knowledge required to solve the problem.
[Q]: A description of a CLASS of problems (not a specific case), outlining the typical structure and objective of such problems.

# Framework Step Specification
Every step you design must belong to exactly one of the following three types:

Type 1 · Information Extraction Step (Extract)
- Goal: Define the variables that must be identified and extracted from any concrete instance of this problem class.
- Requirements:
  - Assign a named variable to each item to be extracted (e.g., VAR_Amount, VAR_ApprovalStatus).
  - Describe the meaning of the variable and its possible value domain or data type.
  - Specify the extraction source: from [DOC] (fixed values / thresholds defined by the document) or from the problem instance (values that vary across cases).
- Format:
  [Extract] Variable: <VAR_xxx>
  Meaning: <what this variable represents>
  Source: <Document / Problem Instance>
  Domain/Type: <enumeration | numeric range | boolean | text | etc.>

Type 2 · Intermediate Judgment Step (Judge)
- Goal: Define an intermediate conclusion or intermediate value that must be derived, and describe its inference logic.
- Requirements:
  - Assign a named variable to the intermediate conclusion (e.g., MID_AmountCompliant).
  - Explicitly state the derivation logic (conditional expression / rule mapping / comparison).
  - Explicitly list all variables this step depends on: they must be VAR_ or MID_ variables already defined in prior steps.
- Format:
  [Judge] Intermediate Conclusion: <MID_xxx>
  Inference Logic: <if VAR_xx meets condition -> Outcome A; otherwise -> Outcome B>
  Depends On: <VAR_xxx, MID_xxx, ...>

Type 3 · Final Conclusion Step (Conclude)
- Goal: Define how the final answer is derived.
- Requirements:
  - Explicitly list all variables depended upon (both VAR_ and MID_).
  - Describe the synthesis logic: how these variables jointly produce the final answer.
  - Describe the form of the final answer (e.g., yes/no judgment | numeric value | classification label | textual explanation).
  - If edge cases exist that are not covered by the document, specify a fallback handling rule.
- Format:
  [Conclude] Final Answer: <ANS_xxx>
  Synthesis Logic: <description of how MID_xx and VAR_xx are combined to reach the answer>
  Depends On: <VAR_xxx, MID_xxx, ...>
  Answer Form: <output type and format of the answer>
  Fallback Rule: <how to handle cases where information is insufficient or not covered>

# Output Format
## Problem Class Understanding
<Summarize in 2-3 sentences the core structure of the problem class described by [Q]: what the input is, what the goal is, and where the key difficulty lies.>

## Reasoning Framework
Step 1: [Extract] ...
Step 2: [Extract] ...
Step 3: [Judge] ...
Step 4: [Judge] ...
...
Step N: [Conclude] ...

Knowledge Document [DOC]: {domain_doc}
Problem Class [Q]: {_user_prompt}
"""

PROMPT2_TEMPLATE = r"""# Role Definition
You are a code generation expert specializing in rule programs for Small Language Models (SLMs). Your task is: Given a domain knowledge specification [DOMAIN], a domain question [Q], and an ordered Chain-of-Thought [CoT], produce an executable rule program in the scidc-ir v1 syntax that drives an SLM through structured, step-by-step reasoning.
The generated program must be deterministic, constraint-respecting, and self-validating. It is a reusable generation blueprint that:
- Converts each CoT step into a templated emit / gen / select step
- Enforces finite-domain constraints via select and numeric constraints via gen with a regex
- Propagates upstream answers into downstream option sets via dynamic dependency logic
- Detects and repairs multi-variable constraint violations via cyclic validation loops

# Input Format
[DOMAIN]: A knowledge specification defining allowed enumerations, numeric ranges, and inter-variable dependency rules.
[Q]: The domain question or problem instance to be solved.
[CoT]: An ordered list of reasoning steps describing how to reach the final answer.

# Code Block Specification
Every step in [CoT] must be translated into exactly one of the following three block types:

Block Type 1 · Reasoning Step (Step Block)
- Format:
  step intro_i: emit
    text = "Step i Question: <question>? Candidates: <candidates>\nStep i Answer: "
  step answer_i: select
    options = ["<candidate>", "<candidate>"]
  or, when the answer is numeric rather than enumerable:
  step answer_i: gen
    regex = "<pattern>"
    max_tokens = 8

Block Type 2 · Dynamic Dependency Block
- Format (upstream answers choose the downstream option set):
  step answer_i: select
    dynamic {
      when answer_j == "X" -> ["A", "B"]
      when answer_j == "Y" -> ["C", "D"]
      else -> ["E"]
    }

Block Type 3 · Cyclic Validation Block
- Format (the template default is MAX_RETRIES = 5; write it as max_retries):
  step check_i: validate
    pred = <combined constraint over answer_i and its upstream answers>
    max_retries = 5
    anchor = answer_a
    retry_message = "\n[Retry {retry}] Previous attempt failed: the answers violated <constraint description>. Adjustment needed.\n"
    fallback {
      answer_a = "<first valid option of a>"
      answer_b = "<first valid option of b>"
    }
  The anchor names the earliest step to regenerate; every step the loop
  regenerates needs a fallback value that satisfies its own constraint.

# Output Format
Reply with exactly one fenced code block containing only the program:
- the first line inside the fence is: scidc-ir v1
- then: program <name>
- then the ordered steps, one block per CoT step plus any emit scaffolding.
Escape rules inside quoted strings: \n is a newline, and regex backslashes
are doubled (write \\d for a digit class).

Domain Knowledge [DOMAIN]: {domain_knowledge}
Domain Question [Q]: {domain_question}
Chain of Thought [CoT]: {chain_of_thought}
"""

REVISION_TEMPLATE = r"""# Role Definition
You are revising a rule program written in scidc-ir v1 after expert review.

# Current Program
```
{current_program}
```

# Program Explanation
{explanation}

# Expert Suggestion
{suggestion}

# Output Format
Reply with exactly one fenced code block containing the full revised
scidc-ir v1 program. Keep every variable step the current program binds;
you may add steps, options, or checks, but do not drop the steps that
produce the final answer.
"""

REPAIR_HEADER = "\n\n# Repair\nYour previous reply was rejected: "

# pinned by the golden-file tests; every rendered prompt must contain its row
PROMPT1_SKELETONS = (
    "# Role Definition",
    "Type 1 · Information Extraction Step (Extract)",
    "Type 2 · Intermediate Judgment Step (Judge)",
    "Type 3 · Final Conclusion Step (Conclude)",
    "## Problem Class Understanding",
    "## Reasoning Framework",
)
PROMPT2_SKELETONS = (
    "# Role Definition",
    "Block Type 1 · Reasoning Step (Step Block)",
    "Block Type 2 · Dynamic Dependency Block",
    "Block Type 3 · Cyclic Validation Block",
    "MAX_RETRIES = 5",
    "[Retry {retry}] Previous attempt failed",
)


def _fill(template: str, values: dict[str, str]) -> str:
    # single pass: substituted values are never rescanned for placeholders
    for placeholder in values:
        if template.count(placeholder) != 1:
            raise ValueError(f"template must contain {placeholder} exactly once")
    pattern = re.compile("|".join(re.escape(p) for p in values))
    return pattern.sub(lambda m: values[m.group(0)], template)


def render_prompt1(domain_doc: str, user_prompt: str) -> str:
    """The task-decomposition prompt for one document and problem class."""
    return _fill(PROMPT1_TEMPLATE, {"{domain_doc}": domain_doc,
                                    "{_user_prompt}": user_prompt})


def render_prompt2(domain_knowledge: str, domain_question: str,
                   chain_of_thought: str) -> str:
    """The program-generation prompt for one framework."""
    return _fill(PROMPT2_TEMPLATE, {
        "{domain_knowledge}": domain_knowledge,
        "{domain_question}": domain_question,
        "{chain_of_thought}": chain_of_thought,
    })


def render_revision(current_program: str, explanation: str,
                    suggestion: str) -> str:
    """The expert-feedback revision prompt."""
    return _fill(REVISION_TEMPLATE, {
        "{current_program}": current_program,
        "{explanation}": explanation,
        "{suggestion}": suggestion,
    })


def render_repair(prompt: str, violation: str, reply: str) -> str:
    """The original prompt plus the rejection, for the one retry round."""
    return (f"{prompt}{REPAIR_HEADER}{violation}\n"
            f"Previous reply:\n{reply}\n"
            "Produce a corrected reply that follows the output format "
            "exactly.\n")
