"""Eval harness: validity specs, scorers, packs, arm stripping, reports."""

from __future__ import annotations

from dataclasses import replace

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from oracles import forward_rewrites, oracle_fullmatch
from scidc.backends import MockBackend, MockScript, PreferText, UniformNoise
from scidc.engine import Engine
from scidc.errors import (
    ArmStripError,
    CapabilityError,
    EngineError,
    LintErrors,
    PackError,
)
from scidc.eval_harness import (
    ARMS,
    ExactMatch,
    FormulationValidity,
    HitAtK,
    Instance,
    RewriteValidity,
    StagingValidity,
    TaskPack,
    build_pack,
    load_pack,
    oracle_backend_factory,
    pack_ids,
    parse_proposals,
    run_pack,
    score_exact,
    score_hit_at_k,
    score_validity,
    strip_program,
    total_token_budget,
    uniform_backend_factory,
)
from scidc.eval_harness.formulation_pack import (
    FIELDS,
    FORMULATION_PROGRAM,
    build_formulation_pack,
)
from scidc.eval_harness.rewrite import (
    TEMPLATES,
    build_retro_pack,
    enumerate_candidates,
)
from scidc.eval_harness.scoring import scorer_from_json
from scidc.eval_harness.specs import validity_from_json
from scidc.eval_harness.staging import (
    EXTENSIONS,
    M_CATEGORIES,
    METS,
    N_CATEGORIES,
    NODES,
    T_CATEGORIES,
    TNM_PROGRAM,
    build_tnm_pack,
    make_record,
    reference_stage,
    tnm_oracle_script,
)
from scidc.rule_ir import Gen, Select, Step, all_steps, parse_program
from scidc.token_model import vocabulary_from_strings

STAGING_SPEC = StagingValidity(T_CATEGORIES, N_CATEGORIES, M_CATEGORIES)


# --- staging validity -------------------------------------------------------


def test_staging_accepts_single_triple():
    valid, violations = score_validity(
        "assessment complete: stage T1a N0 M0 overall", STAGING_SPEC)
    assert valid and violations == []


def test_staging_flags_duplicate_category():
    violations = STAGING_SPEC.check("T1a N0 M0, though T2 was considered")
    assert any("2 T categories" in v for v in violations)


def test_staging_flags_missing_axes():
    violations = STAGING_SPEC.check("no staging offered")
    assert {"no T category in the output", "no N category in the output",
            "no M category in the output",
            "no complete staging triple"} == set(violations)


def test_staging_requires_contiguous_triple():
    violations = STAGING_SPEC.check("T1a with nodes N0 and distant M0")
    assert violations == ["no complete staging triple"]


def test_staging_extract_triple_normalizes_spacing():
    assert STAGING_SPEC.extract_triple("Stage: T3b N1b M1") == "T3bN1bM1"
    assert STAGING_SPEC.extract_triple("T1aN0M0") == "T1aN0M0"
    assert STAGING_SPEC.extract_triple("T1a N0 M0 or T2 N0 M0") is None
    assert STAGING_SPEC.extract_triple("nothing staged") is None


@given(t=st.sampled_from(T_CATEGORIES), n=st.sampled_from(N_CATEGORIES),
       m=st.sampled_from(M_CATEGORIES),
       lead=st.text(alphabet="abcdefgh ,.", max_size=20),
       trail=st.text(alphabet="abcdefgh ,.", max_size=20),
       gap1=st.sampled_from(["", " "]), gap2=st.sampled_from(["", " "]))
def test_staging_triple_property(t, n, m, lead, trail, gap1, gap2):
    output = f"{lead}{t}{gap1}{n}{gap2}{m}{trail}"
    assert STAGING_SPEC.check(output) == []
    assert STAGING_SPEC.extract_triple(output) == t + n + m


# --- formulation validity ---------------------------------------------------


def _card(p: str, c: str, b: str) -> str:
    return (f"Formulation:\nplasticizer: {p}\ncuring agent: {c}\n"
            f"binder: {b}\nsolvent: aqueous\n")


def test_formulation_accepts_in_range_card():
    valid, violations = score_validity(_card("2.5", "2.0", "1.5"),
                                       FormulationValidity(FIELDS))
    assert valid and violations == []


def test_formulation_total_violation_names_the_rule():
    spec = FormulationValidity(fields=(("a: ", 0.0, 200.0),
                                       ("b: ", 0.0, 200.0)),
                               total_max=100.0)
    valid, violations = score_validity("a: 51.6\nb: 51.6\n", spec)
    assert not valid
    assert violations == ["mass fractions exceed 100"]


def test_formulation_flags_missing_and_unparsable_fields():
    spec = FormulationValidity(FIELDS)
    violations = spec.check("Formulation:\nplasticizer: soon\nbinder: 2.0\n")
    assert "field 'plasticizer:' does not parse as a number" in violations
    assert "field 'curing agent:' missing" in violations


def test_formulation_flags_out_of_range_value():
    violations = FormulationValidity(FIELDS).check(_card("9.9", "2.0", "1.5"))
    assert violations == [
        "field 'plasticizer:' value 9.9 outside [2, 4.8]"]


@given(p=st.integers(20, 48), c=st.integers(5, 50), b=st.integers(10, 35))
def test_formulation_in_range_cards_always_valid(p, c, b):
    card = _card(f"{p / 10:.1f}", f"{c / 10:.1f}", f"{b / 10:.1f}")
    assert FormulationValidity(FIELDS).check(card) == []


@given(c=st.integers(51, 99))
def test_formulation_out_of_range_flags_exactly_one_field(c):
    violations = FormulationValidity(FIELDS).check(
        _card("2.5", f"{c / 10:.1f}", "1.5"))
    assert len(violations) == 1 and "curing agent" in violations[0]


# --- rewrite validity -------------------------------------------------------


def test_rewrite_accepts_candidates_rejects_strangers():
    product = "ce"
    spec = RewriteValidity(TEMPLATES, product=product)
    for candidate in enumerate_candidates(product):
        assert spec.check(f"1. {candidate}\n") == []
    valid, violations = score_validity("1. ffffff\n", spec)
    assert not valid
    assert "rewrites to the product under no template" in violations[0]


def test_rewrite_requires_bound_product_and_proposals():
    unbound = RewriteValidity(TEMPLATES)
    assert unbound.check("1. ab\n") == ["no product bound to the rewrite spec"]
    bound = unbound.for_instance(Instance(input="", meta=(("product", "ce"),)))
    assert bound.product == "ce"
    assert bound.check("no list here") == ["no proposals found in the output"]


@given(data=st.data())
def test_rewrite_spec_agrees_with_forward_oracle(data):
    reactant = data.draw(st.text(alphabet="abcdef", min_size=2, max_size=8))
    reachable = forward_rewrites(reactant, TEMPLATES)
    assume(reachable)
    product = data.draw(st.sampled_from(sorted(reachable)))
    spec = RewriteValidity(TEMPLATES, product=product)
    assert spec.check(f"1. {reactant}\n") == []
    unreachable = product + "zz"
    assert unreachable not in reachable
    stranger = RewriteValidity(TEMPLATES, product=unreachable)
    assert stranger.check(f"1. {reactant}\n") != []


# --- scorers ----------------------------------------------------------------


def test_parse_proposals_reads_numbered_lines():
    text = "Proposals:\n1. abc\n2. def\nnot a proposal\n 3.  ghi \n"
    assert parse_proposals(text) == ["abc", "def", "ghi"]


def test_exact_match_text_and_staging_canon():
    assert ExactMatch().hit(" T1a N0 M0 ", "T1a N0 M0")
    staged = ExactMatch(canon="staging")
    assert staged.hit("Stage: T1a N0 M0 done", "T1aN0M0",
                      validity=STAGING_SPEC)
    assert staged.hit("Stage: T1a N0 M0 done", "T1a N0 M0",
                      validity=STAGING_SPEC)
    assert not staged.hit("T1a N0 M0 or T2 N0 M0", "T1aN0M0",
                          validity=STAGING_SPEC)
    with pytest.raises(ValueError):
        staged.hit("T1a N0 M0", "T1aN0M0")


def test_hit_at_k_positions():
    output = "1. aa\n2. bb\n"
    assert score_hit_at_k([output], ["bb"], k=1) == 0.0
    assert score_hit_at_k([output], ["bb"], k=2) == 100.0


def test_score_exact_single_instance():
    assert score_exact(["T1a N0 M0"], ["T1a N0 M0"]) == 100.0


def test_score_helpers_reject_bad_shapes():
    with pytest.raises(ValueError):
        score_exact(["a"], [])
    with pytest.raises(ValueError):
        score_hit_at_k([], [])


def test_scorer_and_validity_json_round_trips():
    for scorer in (ExactMatch(), ExactMatch(canon="staging"), HitAtK(k=3)):
        assert scorer_from_json(scorer.to_json_obj()) == scorer
    assert scorer_from_json(None) is None
    assert scorer_from_json({"kind": "validity"}) is None
    for spec in (STAGING_SPEC, FormulationValidity(FIELDS),
                 RewriteValidity(TEMPLATES)):
        assert validity_from_json(spec.to_json_obj()) == spec
    with pytest.raises(ValueError):
        validity_from_json({"kind": "nonsense"})


# --- staging pack -----------------------------------------------------------


def test_reference_stage_point_cases():
    assert reference_stage(0.8, EXTENSIONS[0], NODES[0], "absent") \
        == ("T1a", "N0", "M0")
    assert reference_stage(1.5, EXTENSIONS[0], NODES[1], "absent") \
        == ("T1b", "N1a", "M0")
    assert reference_stage(2.5, EXTENSIONS[0], NODES[2], "present") \
        == ("T2", "N1b", "M1")
    assert reference_stage(5.0, EXTENSIONS[0], NODES[0], "absent")[0] == "T3a"
    assert reference_stage(0.5, "strap muscle invasion", NODES[0],
                           "absent")[0] == "T3b"
    assert reference_stage(0.5, "gross spread beyond strap muscles", NODES[0],
                           "absent")[0] == "T4a"
    assert reference_stage(0.5, "prevertebral fixation", NODES[0],
                           "absent")[0] == "T4b"


def test_lateral_nodes_always_stage_n1b():
    for size in (0.5, 3.0, 6.0):
        for ext in EXTENSIONS:
            assert reference_stage(size, ext, NODES[2], "absent")[1] == "N1b"


def test_tnm_pack_is_seed_deterministic():
    assert build_tnm_pack(seed=7, count=6) == build_tnm_pack(seed=7, count=6)
    assert build_tnm_pack(seed=7, count=6) != build_tnm_pack(seed=8, count=6)


def test_tnm_records_never_mention_categories():
    pack = build_tnm_pack(seed=1, count=20)
    for instance in pack.instances:
        for category in (*T_CATEGORIES, *N_CATEGORIES, *M_CATEGORIES):
            assert category not in instance.input


def test_tnm_pack_validates():
    build_tnm_pack(seed=0, count=5).validate()


# --- retro pack -------------------------------------------------------------


def test_retro_candidates_agree_with_forward_oracle():
    pack = build_retro_pack(seed=2, count=20)
    for instance in pack.instances:
        product = dict(instance.meta)["product"]
        candidates = enumerate_candidates(product)
        assert instance.gold in candidates
        assert len(candidates) == len(set(candidates)) >= 2
        for candidate in candidates:
            assert product in forward_rewrites(candidate, TEMPLATES)


def test_retro_pack_validates():
    build_retro_pack(seed=0, count=6).validate()


def test_retro_hit_at_one_equals_forward_oracle_agreement():
    pack = build_retro_pack(seed=5, count=24)
    scripts = {}
    expected_hits = []
    for i, instance in enumerate(pack.instances):
        product = dict(instance.meta)["product"]
        candidates = enumerate_candidates(product)
        first = instance.gold if i % 2 == 0 else \
            next(c for c in candidates if c != instance.gold)
        second = next(c for c in candidates if c != first)
        assert product in forward_rewrites(first, TEMPLATES)
        scripts[instance] = MockScript((PreferText(first),
                                        PreferText(second)))
        expected_hits.append(first == instance.gold)

    report = run_pack(
        pack, lambda inst, arm, seed: MockBackend(pack.vocab, scripts[inst]),
        arms=("full",), seeds=(0,))
    expected = 100.0 * sum(expected_hits) / len(expected_hits)
    assert report.arm("full").match_pct == pytest.approx(expected)
    assert report.arm("full").validity_pct == 100.0


# --- formulation pack -------------------------------------------------------


def test_formulation_regexes_encode_declared_ranges():
    program = parse_program(FORMULATION_PROGRAM)
    regex_by_step = {step.name: step.body.regex
                     for step in all_steps(program)
                     if isinstance(step.body, Gen) and step.body.regex}
    for (label, lo, hi), step_name in zip(FIELDS, ("plasticizer", "curing",
                                                   "binder")):
        pattern = regex_by_step[step_name]
        for tenths in range(0, 100):
            value = f"{tenths / 10:.1f}"
            in_language = oracle_fullmatch(pattern, value.encode())
            assert in_language == (lo <= tenths / 10 <= hi), (label, value)


def test_formulation_oracle_run_exercises_validate_loop():
    pack = build_formulation_pack(seed=0, count=12)
    report = run_pack(pack, oracle_backend_factory(pack),
                      arms=("full",), seeds=(0,))
    metrics = report.arm("full")
    assert metrics.validity_pct == 100.0
    assert metrics.match_pct is None
    assert metrics.mean_regenerations == pytest.approx(0.25)
    assert metrics.mean_discarded_tokens > 0


def test_formulation_uniform_validity_is_structural():
    pack = build_formulation_pack(seed=0, count=6)
    report = run_pack(pack, uniform_backend_factory(pack),
                      arms=("full", "wo_rb"), seeds=(0, 1))
    assert report.arm("full").validity_pct == 100.0
    assert report.arm("wo_rb").validity_pct < 100.0


# --- arm stripping ----------------------------------------------------------


def test_strip_full_is_identity():
    program = parse_program(TNM_PROGRAM)
    stripped, suffix = strip_program(program, "full")
    assert stripped is program and suffix == ""


def test_strip_rejects_unknown_and_vanilla():
    program = parse_program(TNM_PROGRAM)
    with pytest.raises(ArmStripError):
        strip_program(program, "small")
    with pytest.raises(ArmStripError):
        strip_program(program, "vanilla")


def test_wo_rt_collapses_to_one_free_gen():
    program = parse_program(TNM_PROGRAM)
    stripped, suffix = strip_program(program, "wo_rt")
    assert [s.kind for s in all_steps(stripped)] == ["gen"]
    gen = stripped.steps[0].body
    assert gen.regex == "[\\s\\S]*"
    assert gen.max_tokens == total_token_budget(program)
    assert "Findings:" in suffix and "Stage:" in suffix


def test_wo_rm_drops_validates_only():
    program = parse_program(TNM_PROGRAM)
    stripped, suffix = strip_program(program, "wo_rm")
    kinds = [s.kind for s in all_steps(stripped)]
    assert "validate" not in kinds
    assert suffix == ""
    assert len(kinds) == len(all_steps(program)) - 1


def test_wo_rb_relaxes_constraints_into_prompt():
    program = parse_program(TNM_PROGRAM)
    stripped, suffix = strip_program(program, "wo_rb")
    for step in all_steps(stripped):
        assert not isinstance(step.body, Select)
        if isinstance(step.body, Gen):
            assert step.body.regex is None and step.body.stop is not None
    assert "nodes: no nodal involvement | central compartment only | " \
        "lateral zone involvement" in suffix
    assert 't_cat if extension == "strap muscle invasion": T3b' in suffix
    assert "t_cat otherwise: T3a" in suffix


def test_wo_rb_needs_renderable_options():
    bare = replace(parse_program(TNM_PROGRAM),
                   steps=(Step("pick", Select()),))
    with pytest.raises(ArmStripError):
        strip_program(bare, "wo_rb")


def test_stripped_arms_stay_lint_clean_across_packs():
    for pack_id in pack_ids():
        build_pack(pack_id, seed=0, count=4).validate()


# --- engine rebinding -------------------------------------------------------


def test_rebind_backend_matches_fresh_engine():
    pack = build_tnm_pack(seed=0, count=2)
    program = parse_program(pack.program)
    first, second = pack.instances
    engine = Engine(program, MockBackend(pack.vocab,
                                         tnm_oracle_script(first)))
    engine.run(first.input, 0)
    engine.rebind_backend(MockBackend(pack.vocab, tnm_oracle_script(second)))
    rebound = engine.run(second.input, 0)
    fresh = Engine(program, MockBackend(pack.vocab,
                                        tnm_oracle_script(second)))
    assert rebound.to_json_text() == fresh.run(second.input, 0).to_json_text()


def test_rebind_backend_rejects_other_vocab():
    pack = build_tnm_pack(seed=0, count=1)
    engine = Engine(parse_program(pack.program), MockBackend(pack.vocab))
    other = vocabulary_from_strings(["<|eos|>", "a"], special={0}, eos_id=0)
    with pytest.raises(EngineError):
        engine.rebind_backend(MockBackend(other))


def test_rebind_backend_rejects_logitless_decoder():
    pack = build_tnm_pack(seed=0, count=1)
    engine = Engine(parse_program(pack.program), MockBackend(pack.vocab))
    degraded = MockBackend(pack.vocab, supports_logits=False)
    with pytest.raises(CapabilityError):
        engine.rebind_backend(degraded)


# --- pack container ---------------------------------------------------------


@pytest.mark.parametrize("pack_id", ["tnm", "retro", "formulation"])
def test_pack_json_round_trip(tmp_path, pack_id):
    pack = build_pack(pack_id, seed=3, count=4)
    path = tmp_path / f"{pack_id}.json"
    pack.save(str(path))
    assert load_pack(str(path)) == pack


def test_load_pack_rejects_other_documents(tmp_path):
    path = tmp_path / "not_a_pack.json"
    path.write_text('{"format": "something else"}')
    with pytest.raises(PackError):
        load_pack(str(path))


def test_pack_validate_rejects_broken_packs():
    pack = build_tnm_pack(seed=0, count=2)
    with pytest.raises(PackError):
        replace(pack, instances=()).validate()
    goldless = replace(pack.instances[0], gold=None)
    with pytest.raises(PackError):
        replace(pack, instances=(goldless,)).validate()
    mutated = pack.program.replace(r'regex = "\\d+\\.?\\d*"',
                                   'regex = "[z]"')
    assert mutated != pack.program
    with pytest.raises(LintErrors):
        replace(pack, program=mutated).validate()


def test_build_pack_registry():
    assert set(pack_ids()) == {"tnm", "retro", "formulation"}
    with pytest.raises(PackError):
        build_pack("unknown")


# --- run_pack ---------------------------------------------------------------


def test_run_pack_rejects_bad_requests():
    pack = build_tnm_pack(seed=0, count=1)
    backend = oracle_backend_factory(pack)
    with pytest.raises(PackError):
        run_pack(pack, backend, arms=())
    with pytest.raises(PackError):
        run_pack(pack, backend, arms=("full", "full"))
    with pytest.raises(PackError):
        run_pack(pack, backend, arms=("warp",))
    with pytest.raises(PackError):
        run_pack(pack, backend, arms=("full",), seeds=())


def test_single_scripted_instance_scores_exact_match():
    base = build_tnm_pack(seed=0, count=4)
    record = make_record(0, 50, 0.8, EXTENSIONS[0], NODES[0], METS[0])
    instance = Instance(
        input=record, gold="T1a N0 M0",
        meta=(("size", "0.8"), ("extension", EXTENSIONS[0]),
              ("nodes", NODES[0]), ("mets", METS[0]), ("chat_alt", "")))
    pack = replace(base, instances=(instance,))
    report = run_pack(pack, oracle_backend_factory(pack),
                      arms=("full",), seeds=(0,))
    assert report.arm("full").match_pct == 100.0
    assert report.arm("full").validity_pct == 100.0


def test_tnm_full_oracle_reaches_exact_match():
    pack = build_tnm_pack(seed=0, count=12)
    report = run_pack(pack, oracle_backend_factory(pack),
                      arms=("full", "wo_rm"), seeds=(0,))
    for arm in ("full", "wo_rm"):
        assert report.arm(arm).validity_pct == 100.0
        assert report.arm(arm).match_pct == 100.0


def test_tnm_wo_rb_oracle_leaks_commentary():
    pack = build_tnm_pack(seed=0, count=12)
    chatty = sum(1 for inst in pack.instances
                 if dict(inst.meta)["chat_alt"])
    assert chatty > 0
    report = run_pack(pack, oracle_backend_factory(pack),
                      arms=("wo_rb",), seeds=(0,))
    expected = 100.0 * (len(pack.instances) - chatty) / len(pack.instances)
    assert report.arm("wo_rb").validity_pct == pytest.approx(expected)
    assert report.arm("wo_rb").validity_pct < 100.0


def test_tnm_uniform_full_arm_validity_is_structural():
    pack = build_tnm_pack(seed=0, count=8)
    report = run_pack(pack, uniform_backend_factory(pack),
                      arms=("full",), seeds=(0, 1, 2))
    metrics = report.arm("full")
    assert metrics.validity_pct == 100.0
    assert metrics.runs == 24


def test_tnm_uniform_unstructured_arms_break_validity():
    pack = build_tnm_pack(seed=0, count=8)
    report = run_pack(pack, uniform_backend_factory(pack),
                      arms=("wo_rb", "vanilla"), seeds=(0,))
    assert report.arm("wo_rb").validity_pct < 100.0
    assert report.arm("vanilla").validity_pct < 100.0
    assert report.arm("vanilla").mean_regenerations == 0.0


def test_run_pack_accepts_shared_backend_instance():
    pack = build_tnm_pack(seed=0, count=3)
    backend = MockBackend(pack.vocab, MockScript((UniformNoise(11),)))
    first = run_pack(pack, backend, arms=("full",), seeds=(0,))
    second = run_pack(pack, backend, arms=("full",), seeds=(0,))
    assert first.to_json_text() == second.to_json_text()


def test_run_pack_is_deterministic():
    pack = build_tnm_pack(seed=1, count=5)
    runs = [run_pack(pack, oracle_backend_factory(pack),
                     arms=("full", "wo_rt", "wo_rm", "wo_rb", "vanilla"),
                     seeds=(0, 1)).to_json_text()
            for _ in range(2)]
    assert runs[0] == runs[1]


def test_report_schema_and_lookup():
    pack = build_tnm_pack(seed=0, count=2)
    report = run_pack(pack, oracle_backend_factory(pack),
                      arms=("full", "vanilla"), seeds=(0,))
    doc = report.to_json_obj()
    assert doc["pack"] == "tnm"
    assert doc["seeds"] == [0]
    assert set(doc["arms"]) == {"full", "vanilla"}
    for arm_doc in doc["arms"].values():
        assert set(arm_doc) == {"runs", "validity_pct", "match_pct",
                                "mean_regenerations", "mean_output_tokens",
                                "mean_discarded_tokens"}
        assert 0.0 <= arm_doc["validity_pct"] <= 100.0
        if arm_doc["match_pct"] is not None:
            assert 0.0 <= arm_doc["match_pct"] <= 100.0
    with pytest.raises(KeyError):
        report.arm("wo_rt")


def test_report_save(tmp_path):
    pack = build_tnm_pack(seed=0, count=1)
    report = run_pack(pack, oracle_backend_factory(pack),
                      arms=("full",), seeds=(0,))
    path = tmp_path / "report.json"
    report.save(str(path))
    assert '"pack": "tnm"' in path.read_text()


def test_oracle_factory_needs_a_bundled_pack():
    pack = replace(build_tnm_pack(seed=0, count=1), id="mystery")
    with pytest.raises(PackError):
        oracle_backend_factory(pack)


def test_arm_vocabulary_is_closed():
    assert ARMS == ("vanilla", "full", "wo_rt", "wo_rm", "wo_rb")
