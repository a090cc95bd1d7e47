"""Knowledge compiler tests: prompts, framework parsing, pipeline, feedback.

The golden files under tests/goldens/ and the fixtures under
src/scidc/data/fixtures/tnm/ are produced by tools/record_fixtures.py
and frozen; the tests here replay the pipeline against them and require
byte-for-byte agreement.
"""

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scidc.backends.mock import MockBackend, MockScript, PreferText
from scidc.backends.remote import RemoteConfig
from scidc.backends.stub_server import StubServer
from scidc.data import data_path, data_text
from scidc.errors import (
    GllmTransport,
    LintErrors,
    MalformedFrameworkReply,
    RevisionRejected,
    UnparseableProgram,
)
from scidc.knowledge_compiler import (
    CotFramework,
    CotStep,
    ExpertSuggestion,
    FixtureGllm,
    HttpGllm,
    KnowledgeDoc,
    ModelExplanation,
    PROMPT1_SKELETONS,
    PROMPT2_SKELETONS,
    ScriptedGllm,
    VerificationTranscript,
    apply_expert_feedback,
    decompose_task,
    explain_program,
    extract_code_block,
    generate_rule_program,
    parse_framework_reply,
    record_fixture,
    render_framework,
    render_prompt1,
    render_prompt2,
    render_repair,
    render_revision,
    request_hash,
)
from scidc.knowledge_compiler.prompts import _fill
from scidc.rule_ir import (
    all_steps,
    errors_only,
    lint_program,
    parse_program,
    serialize_program,
)
from scidc.token_model import vocabulary_from_strings

GOLDENS = Path(__file__).parent / "goldens"

# Inputs matching the recorded fixtures (see tools/record_fixtures.py).
PROBLEM_CLASS = "stage thyroid cancer records"
QUESTION_CLASS = PROBLEM_CLASS
SUGGESTION = "offer metastasis-presence options before choosing the M stage"


def golden(name: str) -> str:
    return (GOLDENS / name).read_text(encoding="utf-8")


def tnm_doc() -> KnowledgeDoc:
    return KnowledgeDoc(data_text("docs", "tnm_staging.txt"),
                        provenance="docs/tnm_staging.txt")


def fixture_gllm() -> FixtureGllm:
    return FixtureGllm(data_path("fixtures", "tnm"))


def compile_tnm():
    doc = tnm_doc()
    gllm = fixture_gllm()
    framework = decompose_task(doc, PROBLEM_CLASS, gllm)
    program = generate_rule_program(doc, QUESTION_CLASS, framework, gllm)
    return doc, framework, program


# A small but valid framework for synthetic tests.
def toy_framework() -> CotFramework:
    return CotFramework(
        problem_class="classify a number",
        steps=(
            CotStep("extract", "VAR_Value", "the number", source="input",
                    domain="decimal"),
            CotStep("judge", "MID_Sign", "negative or not",
                    depends=("VAR_Value",)),
            CotStep("conclude", "ANS_Label", "state the sign",
                    depends=("MID_Sign",), domain="one word"),
        ))


class TestFramework:
    def test_golden_round_trip(self):
        text = golden("framework_tnm.txt")
        assert render_framework(parse_framework_reply(text)) == text

    def test_parsed_structure(self):
        fw = parse_framework_reply(golden("framework_tnm.txt"))
        fw.validate()
        kinds = [s.kind for s in fw.steps]
        assert kinds == ["extract"] * 4 + ["judge"] * 3 + ["conclude"]
        names = [s.name for s in fw.steps]
        assert "VAR_TumorSize" in names
        assert "MID_Tcategory" in names
        assert fw.conclude.name == "ANS_TNM"
        assert fw.steps[4].depends == ("VAR_TumorSize", "VAR_Extension")

    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_render_parse_inverse(self, data):
        word = st.text(alphabet="abcdefghjk", min_size=1, max_size=6)
        line = st.text(alphabet="abcdefghjk ,.0123456789",
                       min_size=1, max_size=40).map(str.strip).filter(bool)
        n_extract = data.draw(st.integers(1, 3), label="extracts")
        n_judge = data.draw(st.integers(0, 3), label="judges")
        suffixes = data.draw(st.lists(word, min_size=n_extract + n_judge + 1,
                                      max_size=n_extract + n_judge + 1,
                                      unique=True), label="names")
        steps = []
        defined = []
        for i in range(n_extract):
            steps.append(CotStep(
                "extract", f"VAR_{suffixes[i]}", data.draw(line),
                source=data.draw(st.one_of(st.just(""), line)),
                domain=data.draw(st.one_of(st.just(""), line))))
            defined.append(steps[-1].name)
        for i in range(n_judge):
            deps = data.draw(st.lists(st.sampled_from(defined), min_size=1,
                                      unique=True))
            steps.append(CotStep("judge", f"MID_{suffixes[n_extract + i]}",
                                 data.draw(line), depends=tuple(deps)))
            defined.append(steps[-1].name)
        deps = data.draw(st.lists(st.sampled_from(defined), min_size=1,
                                  unique=True))
        steps.append(CotStep("conclude", f"ANS_{suffixes[-1]}",
                             data.draw(line), depends=tuple(deps),
                             domain=data.draw(st.one_of(st.just(""), line)),
                             fallback=data.draw(st.one_of(st.just(""), line))))
        fw = CotFramework(problem_class=data.draw(line), steps=tuple(steps))
        fw.validate()
        assert parse_framework_reply(render_framework(fw)) == fw

    @pytest.mark.parametrize("mutate, message", [
        (lambda s: (), "no steps"),
        (lambda s: (CotStep("guess", "VAR_x", "t"),) + s[1:], "unknown kind"),
        (lambda s: (CotStep("extract", "MID_x", "t"),) + s[1:],
         "must bind a VAR_"),
        (lambda s: (CotStep("extract", "VAR_", "t"),) + s[1:],
         "must bind a VAR_"),
        (lambda s: (s[0], s[0], *s[1:]), "defined twice"),
        (lambda s: (CotStep("extract", "VAR_Value", "t",
                            depends=("MID_Sign",)),) + s[1:],
         "declares dependencies"),
        (lambda s: (s[0], CotStep("judge", "MID_Sign", "t",
                                  depends=("MID_Later",)), s[2]),
         "depends on 'MID_Later' before it is defined"),
        (lambda s: s[:2], "exactly one Conclude"),
        (lambda s: (s[0], CotStep("conclude", "ANS_A", "t"),
                    CotStep("conclude", "ANS_B", "t")), "exactly one Conclude"),
        (lambda s: (s[0], CotStep("conclude", "ANS_Label", "t"), s[1]),
         "must come last"),
    ])
    def test_validate_violations(self, mutate, message):
        base = toy_framework().steps
        fw = CotFramework("classify a number", tuple(mutate(base)))
        with pytest.raises(MalformedFrameworkReply, match=message):
            fw.validate()

    def test_parse_requires_headings(self):
        with pytest.raises(MalformedFrameworkReply,
                           match="Problem Class Understanding"):
            parse_framework_reply("## Reasoning Framework\nStep 1: x")
        with pytest.raises(MalformedFrameworkReply,
                           match="Reasoning Framework"):
            parse_framework_reply("## Problem Class Understanding\nwords")

    def test_parse_requires_steps(self):
        reply = ("## Problem Class Understanding\nwords\n\n"
                 "## Reasoning Framework\nnothing here\n")
        with pytest.raises(MalformedFrameworkReply, match="no framework steps"):
            parse_framework_reply(reply)

    def test_unknown_fields_are_dropped(self):
        text = golden("framework_tnm.txt").replace(
            "  Meaning: Largest tumor diameter in centimeters, unrounded.",
            "  Meaning: Largest tumor diameter in centimeters, unrounded.\n"
            "  Mood: optimistic")
        fw = parse_framework_reply(text)
        assert fw == parse_framework_reply(golden("framework_tnm.txt"))


class TestPrompts:
    def test_prompt1_golden(self):
        doc = tnm_doc()
        assert render_prompt1(doc.text, PROBLEM_CLASS) == golden(
            "prompt1_tnm.txt")

    def test_prompt2_golden(self):
        doc, framework, _ = compile_tnm()
        rendered = render_prompt2(doc.text, QUESTION_CLASS,
                                  render_framework(framework))
        assert rendered == golden("prompt2_tnm.txt")

    def test_prompt1_skeletons(self):
        rendered = render_prompt1("doc body", "the task")
        for skeleton in PROMPT1_SKELETONS:
            assert skeleton in rendered
        assert rendered.count("doc body") == 1
        assert rendered.count("the task") == 1

    def test_prompt2_skeletons(self):
        rendered = render_prompt2("doc body", "the question", "the chain")
        for skeleton in PROMPT2_SKELETONS:
            assert skeleton in rendered
        assert "scidc-ir v1" in rendered

    def test_fill_rejects_missing_placeholder(self):
        with pytest.raises(ValueError, match="once"):
            _fill("no slots here", {"{a}": "x"})
        with pytest.raises(ValueError, match="once"):
            _fill("{a} and {a}", {"{a}": "x"})

    def test_fill_value_containing_placeholder(self):
        # replacement values must never be rescanned for placeholders
        out = _fill("first {a} then {b}", {"{a}": "{b}", "{b}": "end"})
        assert out == "first {b} then end"

    def test_repair_prompt_keeps_parts(self):
        out = render_repair("the prompt", "the violation", "{reply} text")
        assert "the prompt" in out
        assert "# Repair" in out
        assert "the violation" in out
        assert "{reply} text" in out

    def test_revision_prompt_quotes_program(self):
        out = render_revision("scidc-ir v1\nprogram p\n", "explained",
                              "do better")
        assert "scidc-ir v1\nprogram p" in out
        assert "explained" in out
        assert "do better" in out


class TestGllmClients:
    def test_request_hash_shape(self):
        h = request_hash("hello")
        assert len(h) == 16 and set(h) <= set("0123456789abcdef")
        assert h == request_hash("hello")
        assert h != request_hash("hello!")

    def test_scripted_order_and_exhaustion(self):
        gllm = ScriptedGllm(["one", "two"])
        assert gllm.complete("a") == "one"
        assert gllm.complete("b") == "two"
        assert gllm.prompts == ["a", "b"]
        with pytest.raises(GllmTransport, match="no replies left"):
            gllm.complete("c")

    def test_fixture_round_trip(self, tmp_path):
        path = record_fixture(tmp_path, "the prompt", "the reply")
        assert path.name == f"{request_hash('the prompt')}.json"
        assert FixtureGllm(tmp_path).complete("the prompt") == "the reply"

    def test_fixture_missing(self, tmp_path):
        with pytest.raises(GllmTransport, match="no recorded reply"):
            FixtureGllm(tmp_path).complete("never recorded")

    def test_fixture_integrity(self, tmp_path):
        # a fixture renamed onto another request's hash must be refused
        path = record_fixture(tmp_path, "prompt A", "reply A")
        path.rename(tmp_path / f"{request_hash('prompt B')}.json")
        with pytest.raises(GllmTransport, match="different request"):
            FixtureGllm(tmp_path).complete("prompt B")

    def test_http_round_trip(self):
        chars = sorted(set("hi there"))
        vocab = vocabulary_from_strings(
            chars + ["<|eos|>"], special={len(chars)}, eos_id=len(chars))
        mock = MockBackend(vocab, MockScript((PreferText("hi"),)))
        with StubServer(mock) as server:
            gllm = HttpGllm(RemoteConfig(endpoint=server.endpoint),
                            max_tokens=16)
            assert gllm.complete("hi there") == "hi"

    def test_http_auth_required(self):
        chars = sorted(set("hi there"))
        vocab = vocabulary_from_strings(
            chars + ["<|eos|>"], special={len(chars)}, eos_id=len(chars))
        mock = MockBackend(vocab, MockScript((PreferText("hi"),)))
        with StubServer(mock, token="sekrit") as server:
            bare = HttpGllm(RemoteConfig(endpoint=server.endpoint),
                            max_tokens=16)
            with pytest.raises(GllmTransport, match="401"):
                bare.complete("hi there")

    def test_http_unreachable(self):
        gllm = HttpGllm(RemoteConfig(endpoint="http://127.0.0.1:9",
                                     timeout=0.2))
        with pytest.raises(GllmTransport):
            gllm.complete("hello")


class TestDecompose:
    def test_fixture_replay_matches_golden(self):
        framework = decompose_task(tnm_doc(), PROBLEM_CLASS, fixture_gllm())
        assert render_framework(framework) == golden("framework_tnm.txt")

    def test_empty_doc_fails_before_any_call(self):
        gllm = ScriptedGllm(["unused"])
        with pytest.raises(ValueError, match="empty"):
            decompose_task(KnowledgeDoc("   \n"), PROBLEM_CLASS, gllm)
        assert gllm.prompts == []

    def test_repair_round_recovers(self):
        good = golden("framework_tnm.txt")
        # first reply lacks the Conclude step entirely
        bad = good[:good.index("Step 8:")]
        gllm = ScriptedGllm([bad, good])
        framework = decompose_task(tnm_doc(), PROBLEM_CLASS, gllm)
        assert render_framework(framework) == good
        assert len(gllm.prompts) == 2
        assert "# Repair" in gllm.prompts[1]
        assert "exactly one Conclude" in gllm.prompts[1]
        assert gllm.prompts[0] in gllm.prompts[1]

    def test_two_bad_replies_fail(self):
        good = golden("framework_tnm.txt")
        bad = good[:good.index("Step 8:")]
        gllm = ScriptedGllm([bad, bad])
        with pytest.raises(MalformedFrameworkReply,
                           match="after one repair round"):
            decompose_task(tnm_doc(), PROBLEM_CLASS, gllm)


class TestGenerate:
    def test_fixture_replay_matches_golden(self):
        _, _, program = compile_tnm()
        assert serialize_program(program) == golden("program_tnm.ir")
        assert errors_only(lint_program(program)) == []

    def test_select_domains_cover_categories(self):
        _, _, program = compile_tnm()
        options: set = set()
        for step in all_steps(program):
            body = step.body
            if getattr(body, "options", None):
                options.update(body.options)
            if getattr(body, "dynamic", None):
                options.update(body.dynamic.default)
                for _, opts in body.dynamic.guards:
                    options.update(opts)
        assert {"T1a", "T1b", "T2", "T3a", "T3b", "T4a", "T4b"} <= options
        assert {"N0", "N1a", "N1b"} <= options
        assert {"M0", "M1"} <= options

    def test_invalid_framework_rejected_first(self):
        fw = CotFramework("x", ())
        gllm = ScriptedGllm(["unused"])
        with pytest.raises(MalformedFrameworkReply):
            generate_rule_program(tnm_doc(), QUESTION_CLASS, fw, gllm)
        assert gllm.prompts == []

    def test_missing_max_retries_triggers_lint_repair(self):
        good = golden("program_tnm.ir")
        bad = "```\n" + good.replace("  max_retries = 5\n", "") + "\n```"
        gllm = ScriptedGllm([bad, f"```\n{good}\n```"])
        doc, framework, _ = compile_tnm()
        program = generate_rule_program(doc, QUESTION_CLASS, framework, gllm)
        assert serialize_program(program) == good
        assert len(gllm.prompts) == 2
        assert "validate requires max_retries" in gllm.prompts[1]

    def test_lint_failure_after_repair_raises(self):
        good = golden("program_tnm.ir")
        bad = "```\n" + good.replace("  max_retries = 5\n", "") + "\n```"
        doc, framework, _ = compile_tnm()
        with pytest.raises(LintErrors, match="validate requires max_retries"):
            generate_rule_program(doc, QUESTION_CLASS, framework,
                                  ScriptedGllm([bad, bad]))

    def test_lookahead_regex_rejected(self):
        good = golden("program_tnm.ir")
        bad = "```\n" + good.replace('regex = "\\\\d+\\\\.?\\\\d*"',
                                     'regex = "(?=\\\\d)\\\\d+"') + "\n```"
        assert "(?=" in bad
        doc, framework, _ = compile_tnm()
        with pytest.raises(LintErrors, match="not supported"):
            generate_rule_program(doc, QUESTION_CLASS, framework,
                                  ScriptedGllm([bad, bad]))

    def test_unparseable_reply_raises(self):
        doc, framework, _ = compile_tnm()
        gllm = ScriptedGllm(["no code here", "still no code"])
        with pytest.raises(UnparseableProgram):
            generate_rule_program(doc, QUESTION_CLASS, framework, gllm)
        assert len(gllm.prompts) == 2

    def test_extract_code_block(self):
        assert extract_code_block("pre\n```scidc\nbody\n```\npost") == "body"
        assert extract_code_block("```\nbody\n```") == "body"
        assert extract_code_block("just text") == "just text"
        assert extract_code_block("open\n```\nnever closed") == "never closed"


class TestExplain:
    def test_golden(self):
        _, _, program = compile_tnm()
        assert explain_program(program) == golden("explain_tnm.txt")

    def test_threshold_sentence_names_options_and_bound(self):
        explanation = golden("explain_tnm.txt")
        line = next(l for l in explanation.splitlines() if "t_category" in l)
        assert "T1a" in line and "T1b" in line
        assert "tumor_size is smaller than 1" in line

    def test_emit_sentence(self):
        assert ("The program then writes the fixed text"
                in golden("explain_tnm.txt"))

    def test_validate_sentence(self):
        line = next(l for l in golden("explain_tnm.txt").splitlines()
                    if "check_lateral" in l)
        assert "up to 5 times" in line
        assert "falls back to n_category = N1b" in line
        assert "rewinds to step n_category" in line

    def test_branch_rendering(self):
        src = r'''scidc-ir v1
program branchy

step flag: select
  options = ["yes", "no"]

step router: branch
  when flag == "yes" {
    step a: emit
      text = "aye\n"
  }
  else {
    step b: emit
      text = "nay\n"
  }
'''
        text = explain_program(parse_program(src))
        assert "When flag equals 'yes', the program runs:" in text
        assert "Otherwise, the program runs:" in text
        assert "'aye\\n'" in text

    def test_rejects_lint_broken_program(self):
        src = 'scidc-ir v1\nprogram p\n\nstep g: gen\n  regex = "(?=a)b"\n'
        with pytest.raises(LintErrors):
            explain_program(parse_program(src))


class TestTranscript:
    def test_valid_shapes(self):
        VerificationTranscript(()).validate()
        VerificationTranscript((ModelExplanation("e"),)).validate()
        VerificationTranscript((
            ModelExplanation("e"), ExpertSuggestion("s"),
            ModelExplanation("e2"), ExpertSuggestion("s2"))).validate()

    def test_must_start_with_explanation(self):
        with pytest.raises(ValueError, match="ModelExplanation"):
            VerificationTranscript((ExpertSuggestion("s"),)).validate()

    def test_must_alternate(self):
        with pytest.raises(ValueError, match="ExpertSuggestion"):
            VerificationTranscript((
                ModelExplanation("a"), ModelExplanation("b"))).validate()

    def test_expert_turn_budget(self):
        turns = (ModelExplanation("a"), ExpertSuggestion("b")) * 3
        with pytest.raises(ValueError, match="at most 2 expert turns"):
            VerificationTranscript(turns).validate()

    def test_suggestions_property(self):
        t = VerificationTranscript((
            ModelExplanation("a"), ExpertSuggestion("b"),
            ModelExplanation("c"), ExpertSuggestion("d")))
        assert t.suggestions == ("b", "d")


class TestFeedback:
    def transcript(self, program, suggestion=SUGGESTION):
        return VerificationTranscript((
            ModelExplanation(explain_program(program)),
            ExpertSuggestion(suggestion)))

    def test_fixture_replay_matches_golden(self):
        _, _, program = compile_tnm()
        revised = apply_expert_feedback(program, self.transcript(program),
                                        fixture_gllm())
        assert serialize_program(revised) == golden("revised_tnm.ir")
        assert errors_only(lint_program(revised)) == []

    def test_revision_inserts_presence_select(self):
        _, _, program = compile_tnm()
        revised = apply_expert_feedback(program, self.transcript(program),
                                        fixture_gllm())
        names = [s.name for s in all_steps(revised)]
        assert "mets_presence" in names
        assert names.index("mets_presence") < names.index("m_category")
        presence = next(s for s in all_steps(revised)
                        if s.name == "mets_presence")
        options = {o for _, opts in presence.body.dynamic.guards for o in opts}
        options.update(presence.body.dynamic.default)
        assert options == {"no distant transfer", "distant transfer exists"}
        # every originally bound variable survives
        old = {s.name for s in all_steps(program) if s.binds}
        assert old <= {s.name for s in all_steps(revised) if s.binds}

    def test_empty_suggestion_is_identity(self):
        _, _, program = compile_tnm()
        gllm = ScriptedGllm(["unused"])
        out = apply_expert_feedback(program, self.transcript(program, "  "),
                                    gllm)
        assert out is program
        assert gllm.prompts == []

    def test_no_suggestions_is_identity(self):
        _, _, program = compile_tnm()
        t = VerificationTranscript((ModelExplanation("e"),))
        assert apply_expert_feedback(program, t, ScriptedGllm([])) is program

    def test_unparseable_revision_rejected(self):
        _, _, program = compile_tnm()
        gllm = ScriptedGllm(["not a program at all"])
        with pytest.raises(RevisionRejected, match="does not parse"):
            apply_expert_feedback(program, self.transcript(program), gllm)

    def test_lint_broken_revision_rejected(self):
        _, _, program = compile_tnm()
        bad = golden("program_tnm.ir").replace("  max_retries = 5\n", "")
        gllm = ScriptedGllm([f"```\n{bad}\n```"])
        with pytest.raises(RevisionRejected, match="max_retries"):
            apply_expert_feedback(program, self.transcript(program), gllm)

    def test_dropped_binding_rejected(self):
        _, _, program = compile_tnm()
        # lint-clean revision that silently deletes the mets variable
        source = golden("program_tnm.ir")
        cut = source.replace(
            '\nstep p_mets: emit\n  text = "\\n4. Distant metastasis: "\n'
            '\nstep mets: select\n  options = ["absent", "present"]\n', "\n")
        cut = cut.replace(
            'step m_category: select\n  dynamic {\n'
            '    when (mets == "present") -> ["M1"]\n    else -> ["M0"]\n  }',
            'step m_category: select\n  options = ["M0", "M1"]')
        assert "mets:" not in cut
        revised = parse_program(cut)
        assert errors_only(lint_program(revised)) == []
        gllm = ScriptedGllm([f"```\n{cut}\n```"])
        with pytest.raises(RevisionRejected, match="mets"):
            apply_expert_feedback(program, self.transcript(program), gllm)

    def test_invalid_transcript_rejected(self):
        _, _, program = compile_tnm()
        t = VerificationTranscript((ExpertSuggestion("s"),))
        with pytest.raises(ValueError):
            apply_expert_feedback(program, t, ScriptedGllm([]))


class TestOfflineDeterminism:
    def test_pipeline_is_byte_deterministic(self):
        outputs = []
        for _ in range(2):
            doc = tnm_doc()
            gllm = fixture_gllm()
            framework = decompose_task(doc, PROBLEM_CLASS, gllm)
            program = generate_rule_program(doc, QUESTION_CLASS, framework,
                                            gllm)
            revised = apply_expert_feedback(
                program,
                VerificationTranscript((
                    ModelExplanation(explain_program(program)),
                    ExpertSuggestion(SUGGESTION))),
                fixture_gllm())
            outputs.append((render_framework(framework),
                            serialize_program(program),
                            explain_program(program),
                            serialize_program(revised)))
        assert outputs[0] == outputs[1]

    def test_token_estimate(self):
        assert KnowledgeDoc("x").token_estimate == 1
        assert KnowledgeDoc("a" * 400).token_estimate == 100
