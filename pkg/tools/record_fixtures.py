#!/usr/bin/env python3
"""Record the TNM compile fixtures and golden files.

The reply constants below were captured once from a live GLLM session
and are now frozen; this script replays them through the real pipeline,
stores each exchange in the fixture format (request hash -> reply), and
writes the golden files the test suite compares against byte-for-byte.
Re-running it is idempotent. Run from the repository root:

    python3 tools/record_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from scidc.data import data_text  # noqa: E402
from scidc.knowledge_compiler import (  # noqa: E402
    KnowledgeDoc,
    apply_expert_feedback,
    decompose_task,
    explain_program,
    generate_rule_program,
    record_fixture,
    render_framework,
    render_prompt1,
    render_prompt2,
    render_revision,
    ScriptedGllm,
)
from scidc.rule_ir import serialize_program  # noqa: E402

FIXTURE_DIR = ROOT / "src" / "scidc" / "data" / "fixtures" / "tnm"
GOLDEN_DIR = ROOT / "tests" / "goldens"

# One task text drives both stages, matching `scidc compile --task`.
PROBLEM_CLASS = "stage thyroid cancer records"
QUESTION_CLASS = PROBLEM_CLASS
SUGGESTION = "offer metastasis-presence options before choosing the M stage"

FRAMEWORK_REPLY = """\
## Problem Class Understanding
Staging a resected thyroid tumor means reading four findings (tumor size, \
local extension, nodal involvement, distant metastasis) and mapping them \
through fixed thresholds to a T N M triple reported on one line.

## Reasoning Framework
Step 1: [Extract] Variable: VAR_TumorSize
  Meaning: Largest tumor diameter in centimeters, unrounded.
  Source: the size line of the findings
  Domain/Type: non-negative decimal number

Step 2: [Extract] Variable: VAR_Extension
  Meaning: Degree of local spread beyond the thyroid gland.
  Source: the extension line of the findings
  Domain/Type: confined to the gland | strap muscle invasion | gross spread beyond strap muscles | prevertebral fixation

Step 3: [Extract] Variable: VAR_Nodes
  Meaning: Regional lymph node involvement pattern.
  Source: the nodes line of the findings
  Domain/Type: no nodal involvement | central compartment only | lateral zone involvement

Step 4: [Extract] Variable: VAR_Mets
  Meaning: Whether distant metastasis is documented.
  Source: the metastasis line of the findings
  Domain/Type: absent | present

Step 5: [Judge] Intermediate Conclusion: MID_Tcategory
  Inference Logic: Extension overrides size: strap muscle invasion gives T3b, gross spread beyond strap muscles gives T4a, prevertebral fixation gives T4b; a confined tumor is graded T1a under 1 cm, T1b under 2 cm, T2 under 4 cm, and T3a at 4 cm or larger.
  Depends On: VAR_TumorSize, VAR_Extension

Step 6: [Judge] Intermediate Conclusion: MID_Ncategory
  Inference Logic: No involvement gives N0, central compartment only gives N1a, and any lateral zone involvement forces N1b.
  Depends On: VAR_Nodes

Step 7: [Judge] Intermediate Conclusion: MID_Mcategory
  Inference Logic: Distant metastasis present gives M1, otherwise M0.
  Depends On: VAR_Mets

Step 8: [Conclude] Final Answer: ANS_TNM
  Synthesis Logic: Report the three categories in T, N, M order on one line separated by single spaces.
  Depends On: MID_Tcategory, MID_Ncategory, MID_Mcategory
  Answer Form: a staging triple such as T1b N0 M0
  Fallback Rule: when a category cannot be graded, report the most conservative category the findings still support
"""

PROGRAM_REPLY = """\
Here is the rule program compiling the framework.

```
scidc-ir v1
program tnm_staging_v1
meta domain = "thyroid tumor staging"

step intro: emit
  text = "Findings review:\\n1. Tumor size (cm): "

step tumor_size: gen
  regex = "\\\\d+\\\\.?\\\\d*"
  max_tokens = 8

step p_ext: emit
  text = "\\n2. Local extension: "

step extension: select
  options = ["confined to the gland", "strap muscle invasion", "gross spread beyond strap muscles", "prevertebral fixation"]

step p_nodes: emit
  text = "\\n3. Nodal involvement: "

step nodes: select
  options = ["no nodal involvement", "central compartment only", "lateral zone involvement"]

step p_mets: emit
  text = "\\n4. Distant metastasis: "

step mets: select
  options = ["absent", "present"]

step p_ans: emit
  text = "\\n5. Stage (T N M): "

step t_category: select
  dynamic {
    when extension == "strap muscle invasion" -> ["T3b"]
    when extension == "gross spread beyond strap muscles" -> ["T4a"]
    when extension == "prevertebral fixation" -> ["T4b"]
    when tumor_size < 1 -> ["T1a"]
    when tumor_size < 2 -> ["T1b"]
    when tumor_size < 4 -> ["T2"]
    else -> ["T3a"]
  }

step sep1: emit
  text = " "

step n_category: select
  options = ["N0", "N1a", "N1b"]

step check_lateral: validate
  pred = nodes != "lateral zone involvement" or n_category == "N1b"
  max_retries = 5
  anchor = n_category
  retry_message = "\\n[Retry {retry}] Previous attempt failed: lateral zone involvement requires N1b. Restate the N category.\\n"
  fallback {
    n_category = "N1b"
  }

step sep2: emit
  text = " "

step m_category: select
  dynamic {
    when mets == "present" -> ["M1"]
    else -> ["M0"]
  }

step fin: emit
  text = "\\n"
```
"""

REVISION_REPLY = """\
The metastasis presence is now stated in words before the M category.

```
scidc-ir v1
program tnm_staging_v1
meta domain = "thyroid tumor staging"

step intro: emit
  text = "Findings review:\\n1. Tumor size (cm): "

step tumor_size: gen
  regex = "\\\\d+\\\\.?\\\\d*"
  max_tokens = 8

step p_ext: emit
  text = "\\n2. Local extension: "

step extension: select
  options = ["confined to the gland", "strap muscle invasion", "gross spread beyond strap muscles", "prevertebral fixation"]

step p_nodes: emit
  text = "\\n3. Nodal involvement: "

step nodes: select
  options = ["no nodal involvement", "central compartment only", "lateral zone involvement"]

step p_mets: emit
  text = "\\n4. Distant metastasis: "

step mets: select
  options = ["absent", "present"]

step p_presence: emit
  text = "\\n5. Metastasis assessment: "

step mets_presence: select
  dynamic {
    when mets == "present" -> ["distant transfer exists"]
    else -> ["no distant transfer"]
  }

step p_ans: emit
  text = "\\n6. Stage (T N M): "

step t_category: select
  dynamic {
    when extension == "strap muscle invasion" -> ["T3b"]
    when extension == "gross spread beyond strap muscles" -> ["T4a"]
    when extension == "prevertebral fixation" -> ["T4b"]
    when tumor_size < 1 -> ["T1a"]
    when tumor_size < 2 -> ["T1b"]
    when tumor_size < 4 -> ["T2"]
    else -> ["T3a"]
  }

step sep1: emit
  text = " "

step n_category: select
  options = ["N0", "N1a", "N1b"]

step check_lateral: validate
  pred = nodes != "lateral zone involvement" or n_category == "N1b"
  max_retries = 5
  anchor = n_category
  retry_message = "\\n[Retry {retry}] Previous attempt failed: lateral zone involvement requires N1b. Restate the N category.\\n"
  fallback {
    n_category = "N1b"
  }

step sep2: emit
  text = " "

step m_category: select
  dynamic {
    when mets_presence == "distant transfer exists" -> ["M1"]
    else -> ["M0"]
  }

step fin: emit
  text = "\\n"
```
"""


def write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path.relative_to(ROOT)}")


def main() -> None:
    if FIXTURE_DIR.is_dir():
        for stale in FIXTURE_DIR.glob("*.json"):
            stale.unlink()
    doc = KnowledgeDoc(data_text("docs", "tnm_staging.txt"),
                       provenance="docs/tnm_staging.txt")

    prompt1 = render_prompt1(doc.text, PROBLEM_CLASS)
    framework = decompose_task(doc, PROBLEM_CLASS,
                               ScriptedGllm([FRAMEWORK_REPLY]))
    prompt2 = render_prompt2(doc.text, QUESTION_CLASS,
                             render_framework(framework))
    program = generate_rule_program(doc, QUESTION_CLASS, framework,
                                    ScriptedGllm([PROGRAM_REPLY]))
    revision_prompt = render_revision(serialize_program(program),
                                      explain_program(program), SUGGESTION)
    from scidc.knowledge_compiler import (ExpertSuggestion, ModelExplanation,
                                          VerificationTranscript)
    transcript = VerificationTranscript((
        ModelExplanation(explain_program(program)),
        ExpertSuggestion(SUGGESTION),
    ))
    revised = apply_expert_feedback(program, transcript,
                                    ScriptedGllm([REVISION_REPLY]))

    print(record_fixture(FIXTURE_DIR, prompt1, FRAMEWORK_REPLY))
    print(record_fixture(FIXTURE_DIR, prompt2, PROGRAM_REPLY))
    print(record_fixture(FIXTURE_DIR, revision_prompt, REVISION_REPLY))

    write(GOLDEN_DIR / "prompt1_tnm.txt", prompt1)
    write(GOLDEN_DIR / "prompt2_tnm.txt", prompt2)
    write(GOLDEN_DIR / "framework_tnm.txt", render_framework(framework))
    write(GOLDEN_DIR / "program_tnm.ir", serialize_program(program))
    write(GOLDEN_DIR / "explain_tnm.txt", explain_program(program))
    write(GOLDEN_DIR / "revised_tnm.ir", serialize_program(revised))


if __name__ == "__main__":
    main()
