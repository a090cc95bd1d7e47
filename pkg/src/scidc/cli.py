"""Command-line interface.

Subcommands:
  compile     knowledge document + task -> rule program (via a GLLM)
  explain     plain-language rendering of a rule program
  revise      apply one expert suggestion to a rule program
  lint        check a rule program, exit 1 on ERROR findings
  run         execute a rule program against a mock or remote backend
  eval        run a task pack across ablation arms and seeds
  serve-stub  reference inference server over the mock backend
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from scidc.errors import ScidcError


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScidcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scidc", description="rule-program compiler and decoder")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile",
                       help="compile a knowledge document into a rule program")
    p.add_argument("--doc", required=True, help="knowledge document file")
    p.add_argument("--task", required=True,
                   help="problem-class description handed to the GLLM")
    p.add_argument("--fixtures", help="replay recorded GLLM fixtures "
                                      "from this directory")
    p.add_argument("--endpoint", help="live GLLM endpoint (POST /v1/generate)")
    p.add_argument("--model", default="default")
    p.add_argument("--auth-env", help="environment variable holding the "
                                      "bearer token")
    p.add_argument("--out", help="write the program here (default: stdout)")
    p.add_argument("--framework-out",
                   help="also write the intermediate reasoning framework")
    p.set_defaults(func=_cmd_compile)

    p = sub.add_parser("explain",
                       help="describe a rule program in plain language")
    p.add_argument("program", help="rule program file (.ir)")
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("revise", help="apply one expert suggestion")
    p.add_argument("program", help="rule program file (.ir)")
    p.add_argument("--suggestion", required=True)
    p.add_argument("--fixtures", help="replay recorded GLLM fixtures")
    p.add_argument("--endpoint", help="live GLLM endpoint")
    p.add_argument("--model", default="default")
    p.add_argument("--auth-env")
    p.add_argument("--out", help="write the revision here (default: stdout)")
    p.set_defaults(func=_cmd_revise)

    p = sub.add_parser("lint", help="lint a rule program")
    p.add_argument("program", help="rule program file (.ir)")
    p.set_defaults(func=_cmd_lint)

    p = sub.add_parser("run", help="execute a rule program")
    p.add_argument("--program", required=True, help="rule program file (.ir)")
    p.add_argument("--prompt", default="", help="prompt text")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", choices=("mock", "remote"), default="mock")
    p.add_argument("--vocab", help="vocabulary JSON (default for mock: "
                                   "character vocabulary covering the "
                                   "program and prompt)")
    p.add_argument("--endpoint", help="remote backend endpoint")
    p.add_argument("--model", default="default")
    p.add_argument("--auth-env")
    p.add_argument("--json", action="store_true",
                   help="print the full run result as JSON")
    p.add_argument("--bindings", help="write bound variables to this JSON file")
    p.add_argument("--trace", help="write the decode trace to this JSONL file")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("eval", help="evaluate a task pack")
    p.add_argument("--pack", required=True,
                   help="bundled pack id (tnm, retro, formulation) or a "
                        "pack JSON file")
    p.add_argument("--backend", choices=("mock", "remote"), default="mock")
    p.add_argument("--mock-style", choices=("oracle", "uniform"),
                   default="oracle",
                   help="mock backends: follow per-instance oracle scripts "
                        "or emit uniform noise")
    p.add_argument("--endpoint", help="remote backend endpoint")
    p.add_argument("--model", default="default")
    p.add_argument("--auth-env")
    p.add_argument("--arms", default="full",
                   help="comma-separated subset of: " + ",".join(_arm_names()))
    p.add_argument("--seeds", type=int, default=3,
                   help="number of seeds (0..N-1)")
    p.add_argument("--count", type=int,
                   help="instance count for bundled packs")
    p.add_argument("--pack-seed", type=int, default=0,
                   help="generation seed for bundled packs")
    p.add_argument("--report", help="write the metrics report JSON here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve-stub",
                       help="serve the v1 wire protocol over a mock backend")
    p.add_argument("--vocab", required=True, help="vocabulary JSON file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8731)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--token", help="require this bearer token")
    p.set_defaults(func=_cmd_serve_stub)

    return parser


def _arm_names() -> tuple:
    from scidc.eval_harness import ARMS
    return ARMS


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _gllm(args):
    from scidc.backends.remote import RemoteConfig
    from scidc.knowledge_compiler import FixtureGllm, HttpGllm
    if args.fixtures and args.endpoint:
        raise ValueError("--fixtures and --endpoint are mutually exclusive")
    if args.fixtures:
        return FixtureGllm(args.fixtures)
    if args.endpoint:
        return HttpGllm(RemoteConfig(endpoint=args.endpoint, model=args.model,
                                     auth_env=args.auth_env))
    raise ValueError("one of --fixtures or --endpoint is required")


def _cmd_compile(args) -> int:
    from scidc.knowledge_compiler import (
        KnowledgeDoc, decompose_task, generate_rule_program, render_framework)
    from scidc.rule_ir import serialize_program
    gllm = _gllm(args)
    doc = KnowledgeDoc(_read(args.doc), provenance=args.doc)
    framework = decompose_task(doc, args.task, gllm)
    if args.framework_out:
        Path(args.framework_out).write_text(render_framework(framework),
                                            encoding="utf-8")
    program = generate_rule_program(doc, args.task, framework, gllm)
    _write_or_print(serialize_program(program), args.out)
    return 0


def _cmd_explain(args) -> int:
    from scidc.knowledge_compiler import explain_program
    from scidc.rule_ir import parse_program
    sys.stdout.write(explain_program(parse_program(_read(args.program))))
    return 0


def _cmd_revise(args) -> int:
    from scidc.knowledge_compiler import (
        ExpertSuggestion, ModelExplanation, VerificationTranscript,
        apply_expert_feedback, explain_program)
    from scidc.rule_ir import parse_program, serialize_program
    gllm = _gllm(args)
    program = parse_program(_read(args.program))
    transcript = VerificationTranscript((
        ModelExplanation(explain_program(program)),
        ExpertSuggestion(args.suggestion)))
    revised = apply_expert_feedback(program, transcript, gllm)
    _write_or_print(serialize_program(revised), args.out)
    return 0


def _cmd_lint(args) -> int:
    from scidc.rule_ir import lint_program, parse_program
    findings = lint_program(parse_program(_read(args.program)))
    for finding in findings:
        print(finding)
    if any(f.severity == "ERROR" for f in findings):
        return 1
    print("ok" if not findings else "ok (warnings only)")
    return 0


def _make_run_backend(args, program_text: str):
    from scidc.token_model import load_vocabulary
    if args.backend == "remote":
        from scidc.backends.remote import RemoteBackend, RemoteConfig
        if not args.endpoint:
            raise ValueError("--backend remote requires --endpoint")
        if not args.vocab:
            raise ValueError("--backend remote requires --vocab")
        vocab = load_vocabulary(args.vocab)
        return RemoteBackend(vocab, RemoteConfig(
            endpoint=args.endpoint, model=args.model, auth_env=args.auth_env))
    from scidc.backends.mock import MockBackend, MockScript, UniformNoise
    if args.vocab:
        vocab = load_vocabulary(args.vocab)
    else:
        from scidc.eval_harness import vocab_for_texts
        vocab = vocab_for_texts([program_text, args.prompt])
    return MockBackend(vocab, MockScript((UniformNoise(args.seed),)))


def _cmd_run(args) -> int:
    from scidc.engine import Engine
    from scidc.rule_ir import parse_program
    source = _read(args.program)
    program = parse_program(source)
    backend = _make_run_backend(args, source)
    result = Engine(program, backend).run(args.prompt, seed=args.seed)
    if args.bindings:
        import json
        doc = json.dumps(result.bindings, indent=2, sort_keys=True,
                         ensure_ascii=False)
        Path(args.bindings).write_text(doc + "\n", encoding="utf-8")
    if args.trace:
        Path(args.trace).write_text(result.trace.to_jsonl(), encoding="utf-8")
    if args.json:
        sys.stdout.write(result.to_json_text() + "\n")
    else:
        sys.stdout.write(result.output)
    return 0


def _cmd_eval(args) -> int:
    from scidc.eval_harness import (
        build_pack, load_pack, oracle_backend_factory, pack_ids, run_pack,
        uniform_backend_factory)
    if args.pack in pack_ids():
        kwargs = {"seed": args.pack_seed}
        if args.count is not None:
            kwargs["count"] = args.count
        pack = build_pack(args.pack, **kwargs)
    else:
        pack = load_pack(args.pack)
    if args.backend == "remote":
        from scidc.backends.remote import RemoteBackend, RemoteConfig
        if not args.endpoint:
            raise ValueError("--backend remote requires --endpoint")
        backend = RemoteBackend(pack.vocab, RemoteConfig(
            endpoint=args.endpoint, model=args.model, auth_env=args.auth_env))
    elif args.mock_style == "oracle":
        backend = oracle_backend_factory(pack)
    else:
        backend = uniform_backend_factory(pack)
    arms = tuple(a.strip() for a in args.arms.split(",") if a.strip())
    report = run_pack(pack, backend, arms=arms,
                      seeds=tuple(range(args.seeds)))
    for arm, metrics in report.arms:
        match = ("-" if metrics.match_pct is None
                 else f"{metrics.match_pct:.1f}")
        print(f"{arm:10s} validity {metrics.validity_pct:6.1f}  "
              f"match {match:>6s}  runs {metrics.runs:4d}  "
              f"regens/run {metrics.mean_regenerations:.2f}  "
              f"tokens/run {metrics.mean_output_tokens:.1f}")
    if args.report:
        report.save(args.report)
        print(f"report written to {args.report}")
    return 0


def _cmd_serve_stub(args) -> int:
    from scidc.backends.mock import MockBackend, MockScript, UniformNoise
    from scidc.backends.stub_server import StubServer
    from scidc.token_model import load_vocabulary
    vocab = load_vocabulary(args.vocab)
    backend = MockBackend(vocab, MockScript((UniformNoise(args.seed),)))
    server = StubServer(backend, host=args.host, port=args.port,
                        token=args.token)
    server.start()
    print(f"serving {server.endpoint} (vocab size {vocab.size}); Ctrl-C stops")
    try:
        import time
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
