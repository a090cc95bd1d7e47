"""Program execution over a decoder backend.

The engine walks the program top to bottom. Fixed text is forced into
the context verbatim, generation spans decode token by token under
budget-aware masks, and validate loops check their predicate after the
guarded span ran, erasing back to the anchor and regenerating on
failure. Every constraint the program states is enforced during
decoding, never after.

Setup is eager: every regex, option list, fixed text, fallback literal,
and retry message is compiled or tokenized before the first backend
call, so a program that cannot run is refused up front. Runtime
predicate type errors never reject a run; a predicate that cannot be
evaluated counts as false.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..backends import DecoderBackend
from ..errors import (
    AnchorOrder,
    CapabilityError,
    EngineError,
    LintErrors,
    MaxTokensInNonAcceptingState,
    PredicateTypeError,
    UnsatisfiableConstraint,
    UnspellableText,
)
from ..rule_ir import (
    Branch,
    EmitFixed,
    Gen,
    Predicate,
    RuleProgram,
    Select,
    Step,
    ValidateLoop,
    errors_only,
    iter_steps,
    lint_program,
)
from ..rule_ir.lint import MAX_BRANCH_DEPTH, MAX_RETRY_BOUND
from ..token_model import TokenAutomaton, apply_mask, compile_regex, compile_select
from .policy import Greedy, Sample, decode_policy
from .trace import (
    BacktrackPerformed,
    DecodeTrace,
    FallbackApplied,
    MaskApplied,
    StepCompleted,
    StepStarted,
    TokensEmitted,
    ValidationFailed,
    event_to_obj,
)


class Bindings:
    """Insertion-ordered variable store; one write per name per pass."""

    def __init__(self):
        self._values: dict[str, str] = {}

    def bind(self, name: str, value: str) -> None:
        if name in self._values:
            raise EngineError(f"variable {name!r} bound twice in one pass",
                              step=name)
        self._values[name] = value

    def truncate(self, size: int) -> None:
        # backtracking erases everything bound after the snapshot
        for name in list(self._values)[size:]:
            del self._values[name]

    def names(self) -> list[str]:
        return list(self._values)

    def get(self, name: str) -> str | None:
        return self._values.get(name)

    def as_dict(self) -> dict[str, str]:
        return dict(self._values)

    def view(self) -> dict[str, str]:
        return self._values

    def __len__(self) -> int:
        return len(self._values)

    def __contains__(self, name: str) -> bool:
        return name in self._values


@dataclass(frozen=True)
class Termination:
    kind: str  # Completed | FallbackCompleted | Aborted
    reason: str = ""


@dataclass(frozen=True)
class RunResult:
    output: str
    bindings: dict[str, str]
    trace: DecodeTrace
    termination: Termination
    output_tokens: int

    def to_json_obj(self) -> dict:
        return {
            "output": self.output,
            "bindings": self.bindings,
            "termination": {"kind": self.termination.kind,
                            "reason": self.termination.reason},
            "counters": {
                "total_tokens": self.trace.total_tokens,
                "discarded_tokens": self.trace.discarded_tokens,
                "regenerations": self.trace.regenerations,
                "output_tokens": self.output_tokens,
            },
            "events": [event_to_obj(e) for e in self.trace.events],
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True,
                          ensure_ascii=False)


@dataclass
class _Segment:
    step: str
    tokens: list[int]
    text: str


@dataclass(frozen=True)
class _Snapshot:
    ctx: int
    seg: int
    bound: int


class Engine:
    """Executes one program against one backend, one run at a time.

    Ablation switches exist for controlled comparisons: ``masks=False``
    drops token-level constraints, ``validate=False`` skips check loops,
    ``scaffold=False`` suppresses fixed text. All default on.
    """

    def __init__(self, program: RuleProgram, backend: DecoderBackend, *,
                 prelint: bool = True, masks: bool = True,
                 validate: bool = True, scaffold: bool = True):
        self.program = program
        self.backend = backend
        self.vocab = backend.vocab
        self._masks = masks
        self._validate = validate
        self._scaffold = scaffold
        if prelint:
            findings = errors_only(lint_program(program, self.vocab))
            if findings:
                raise LintErrors(findings)
        self._gen_autos: dict[str, TokenAutomaton] = {}
        self._select_autos: dict[tuple[str, ...], TokenAutomaton] = {}
        self._emit_tokens: dict[str, tuple[int, ...]] = {}
        self._needs_logits = False
        self._setup()
        # mutable per-run state
        self._context: list[int] = []
        self._segments: list[_Segment] = []
        self._bindings = Bindings()
        self._trace = DecodeTrace()
        self._seed = 0
        self._retry_bias = 0

    # -- setup ------------------------------------------------------------

    def _setup(self) -> None:
        seen: set[str] = set()
        supports_logits = self.backend.capability.supports_logits
        for step, scope, depth in iter_steps(self.program.steps):
            if step.name in seen:
                raise EngineError(f"duplicate step name {step.name!r}",
                                  step=step.name)
            seen.add(step.name)
            body = step.body
            if isinstance(body, EmitFixed):
                self._emit_tokens[step.name] = tuple(
                    self.vocab.tokenize(body.text))
            elif isinstance(body, Gen):
                self._setup_gen(step, body, supports_logits)
            elif isinstance(body, Select):
                self._setup_select(step, body)
            elif isinstance(body, Branch):
                if depth >= MAX_BRANCH_DEPTH:
                    raise EngineError(
                        f"branch nesting exceeds depth {MAX_BRANCH_DEPTH}",
                        step=step.name)
            elif isinstance(body, ValidateLoop):
                self._setup_validate(step, body, scope)

    def _setup_gen(self, step: Step, gen: Gen, supports_logits: bool) -> None:
        if gen.max_tokens < 1:
            raise EngineError("max_tokens must be at least 1", step=step.name)
        if gen.regex is None and gen.stop is None:
            raise EngineError("gen needs a regex or a stop string",
                              step=step.name)
        self._needs_logits = True
        if not supports_logits:
            raise CapabilityError(
                f"step {step.name!r} needs per-token logits but the backend "
                "does not serve them")
        if gen.regex is not None:
            auto = compile_regex(gen.regex, self.vocab)
            shortest = auto.min_tokens_to_accept(auto.start)
            if shortest > gen.max_tokens:
                raise MaxTokensInNonAcceptingState(
                    f"step {step.name!r}: max_tokens {gen.max_tokens} is "
                    f"below the shortest match ({shortest} tokens)",
                    step=step.name)
            self._gen_autos[step.name] = auto

    def _setup_select(self, step: Step, sel: Select) -> None:
        lists: list[tuple[str, ...]] = []
        if sel.options is not None:
            lists.append(tuple(sel.options))
        if sel.dynamic is not None:
            lists.extend(tuple(opts) for _, opts in sel.dynamic.guards)
            lists.append(tuple(sel.dynamic.default))
        if not lists:
            raise EngineError("select has neither options nor dynamic lists",
                              step=step.name)
        for options in lists:
            if not options:
                raise EngineError("empty option list", step=step.name)
            if options not in self._select_autos:
                self._select_autos[options] = compile_select(
                    list(options), self.vocab)

    def _setup_validate(self, step: Step, loop: ValidateLoop,
                        scope: tuple[Step, ...]) -> None:
        if loop.max_retries is None:
            raise EngineError("validate requires max_retries",
                              step=step.name)
        if loop.max_retries < 1:
            raise EngineError("max_retries must be at least 1",
                              step=step.name)
        if loop.max_retries > MAX_RETRY_BOUND:
            raise EngineError(
                f"max_retries must be at most {MAX_RETRY_BOUND}",
                step=step.name)
        names = [s.name for s in scope]
        idx = names.index(step.name)
        if loop.anchor not in names[:idx]:
            raise AnchorOrder(
                f"anchor {loop.anchor!r} must precede loop {step.name!r} "
                "in its scope", step=step.name)
        span = scope[names.index(loop.anchor):idx]
        span_binds = {s.name for s, _, _ in iter_steps(span) if s.binds}
        if not span_binds and not loop.fallback:
            raise EngineError(
                "validate loop regenerates no variables and declares no "
                "fallback", step=step.name)
        for _, value in loop.fallback:
            self.vocab.tokenize(value)
        if loop.retry_message is not None:
            for attempt in range(1, loop.max_retries):
                try:
                    rendered = loop.retry_message.format(retry=attempt)
                except (KeyError, IndexError, ValueError) as exc:
                    raise EngineError(
                        f"retry message does not render: {exc}",
                        step=step.name) from exc
                self.vocab.tokenize(rendered)

    def rebind_backend(self, backend: DecoderBackend) -> None:
        """Swap the decoder between runs without recompiling automata.

        The replacement must score the same vocabulary, and when the
        program generates per-token it must serve logits.
        """
        if backend.vocab != self.vocab:
            raise EngineError("backend vocabulary differs from the engine's")
        if self._needs_logits and not backend.capability.supports_logits:
            raise CapabilityError(
                "the program needs per-token logits but the replacement "
                "backend does not serve them")
        self.backend = backend

    # -- run --------------------------------------------------------------

    def run(self, prompt: str = "", seed: int = 0) -> RunResult:
        self._context = list(self.vocab.tokenize(prompt))
        self._segments = []
        self._bindings = Bindings()
        self._trace = DecodeTrace()
        self._seed = seed
        self._retry_bias = 0
        self._run_range(self.program.steps, {}, 0, len(self.program.steps))
        output = "".join(seg.text for seg in self._segments)
        output_tokens = sum(len(seg.tokens) for seg in self._segments)
        kind = ("FallbackCompleted"
                if self._trace.count(FallbackApplied) else "Completed")
        return RunResult(output=output, bindings=self._bindings.as_dict(),
                         trace=self._trace, termination=Termination(kind),
                         output_tokens=output_tokens)

    # -- step dispatch ----------------------------------------------------

    def _run_range(self, steps: tuple[Step, ...],
                   snaps: dict[str, _Snapshot], start: int, end: int) -> None:
        for i in range(start, end):
            step = steps[i]
            snaps[step.name] = self._snapshot()
            if isinstance(step.body, ValidateLoop):
                self._run_validate(step, steps, i, snaps)
            else:
                self._exec_step(step)

    def _exec_step(self, step: Step) -> None:
        body = step.body
        if isinstance(body, EmitFixed):
            self._exec_emit(step, body)
        elif isinstance(body, Gen):
            self._exec_gen(step, body)
        elif isinstance(body, Select):
            self._exec_select(step, body)
        elif isinstance(body, Branch):
            self._exec_branch(step, body)
        else:
            raise EngineError(f"cannot execute step kind {step.kind!r}",
                              step=step.name)

    def _exec_emit(self, step: Step, body: EmitFixed) -> None:
        self._trace.add(StepStarted(step.name))
        if self._scaffold:
            tokens = list(self._emit_tokens[step.name])
            self._context.extend(tokens)
            self._trace.total_tokens += len(tokens)
            self._add_segment(step.name, tokens, body.text)
        self._trace.add(StepCompleted(step.name))

    # -- generation spans ---------------------------------------------------

    def _exec_gen(self, step: Step, gen: Gen) -> None:
        self._trace.add(StepStarted(step.name))
        if gen.regex is not None and self._masks:
            tokens, text = self._gen_regex(step, gen)
        else:
            tokens, text = self._gen_free(step, gen)
        self._add_segment(step.name, tokens, text)
        self._bindings.bind(step.name, text)
        self._trace.add(TokensEmitted(step.name, tuple(tokens), text))
        self._trace.add(StepCompleted(step.name))

    def _gen_regex(self, step: Step, gen: Gen) -> tuple[list[int], str]:
        auto = self._gen_autos[step.name]
        stop_bytes = (gen.stop.encode("utf-8", "surrogateescape")
                      if gen.stop else None)
        eos = self.vocab.eos_id
        state = auto.start
        tokens: list[int] = []
        while True:
            budget = gen.max_tokens - len(tokens)
            accepting = auto.is_accepting(state)
            allowed = (auto.allowed_tokens_within(state, budget)
                       if budget > 0 else frozenset())
            if accepting:
                if budget <= 0:
                    break
                ext = set(allowed)
                if eos is not None:
                    ext.add(eos)
                if not ext:
                    break
                choice = self._choose(step, gen.temperature, ext)
                if choice == eos:
                    break
                if stop_bytes is not None:
                    candidate = (self.vocab.detokenize_bytes(tokens)
                                 + self.vocab.token_bytes(choice))
                    if stop_bytes in candidate:
                        break
            else:
                if not allowed:
                    if auto.allowed_tokens(state):
                        raise MaxTokensInNonAcceptingState(
                            f"step {step.name!r} ran out of budget before "
                            "the pattern could complete", step=step.name)
                    raise UnsatisfiableConstraint(
                        f"step {step.name!r}: no token can continue the "
                        "pattern", step=step.name)
                choice = self._choose(step, gen.temperature, allowed)
            self._push(choice, tokens)
            state = auto.advance(state, choice)
        return tokens, self.vocab.detokenize(tokens)

    def _gen_free(self, step: Step, gen: Gen) -> tuple[list[int], str]:
        """Stop-string mode, also serving as the unmasked ablation path."""
        eos = self.vocab.eos_id
        allowed = set(self.vocab.matchable_ids())
        if eos is not None:
            allowed.add(eos)
        stop_bytes = (gen.stop.encode("utf-8", "surrogateescape")
                      if gen.stop else None)
        tokens: list[int] = []
        while len(tokens) < gen.max_tokens:
            choice = self._choose(step, gen.temperature, allowed)
            if choice == eos:
                break
            self._push(choice, tokens)
            if stop_bytes is not None:
                data = self.vocab.detokenize_bytes(tokens)
                if stop_bytes in data:
                    return self._truncate_at_stop(tokens, data, stop_bytes)
        return tokens, self.vocab.detokenize(tokens)

    def _truncate_at_stop(self, tokens: list[int], data: bytes,
                          stop_bytes: bytes) -> tuple[list[int], str]:
        """Cut the span before the stop string and realign the context."""
        prefix = len(self._context) - len(tokens)
        kept_text = data[:data.find(stop_bytes)].decode(
            "utf-8", "surrogateescape")
        try:
            kept = list(self.vocab.tokenize(kept_text))
        except UnspellableText:
            # byte-level cut is not spellable: back off whole tokens
            kept = list(tokens)
            while kept and stop_bytes in self.vocab.detokenize_bytes(kept):
                kept.pop()
            kept_text = self.vocab.detokenize(kept)
        del self._context[prefix:]
        self._context.extend(kept)
        self._trace.discarded_tokens += len(tokens) - len(kept)
        return kept, kept_text

    # -- select spans -------------------------------------------------------

    def _exec_select(self, step: Step, sel: Select) -> None:
        self._trace.add(StepStarted(step.name))
        options = self._resolve_options(sel)
        if not self.backend.capability.supports_logits:
            idx = self.backend.select_choice(self._context, options)
            if not 0 <= idx < len(options):
                raise EngineError(
                    f"backend chose option {idx} of {len(options)}",
                    step=step.name)
            text = options[idx]
            tokens: list[int] = []
            for tok in self.vocab.tokenize(text):
                self._push(tok, tokens)
        elif self._masks:
            tokens, text = self._select_decode(step, sel, options)
        else:
            cap = max(len(o.encode("utf-8", "surrogateescape"))
                      for o in options)
            tokens, text = self._gen_free(step, Gen(stop=None, max_tokens=cap,
                                                    temperature=sel.temperature))
        self._add_segment(step.name, tokens, text)
        self._bindings.bind(step.name, text)
        self._trace.add(TokensEmitted(step.name, tuple(tokens), text))
        self._trace.add(StepCompleted(step.name))

    def _resolve_options(self, sel: Select) -> tuple[str, ...]:
        if sel.dynamic is None:
            return tuple(sel.options or ())
        for guard, options in sel.dynamic.guards:
            if self._predicate_holds(guard):
                return tuple(options)
        return tuple(sel.dynamic.default)

    def _select_decode(self, step: Step, sel: Select,
                       options: tuple[str, ...]) -> tuple[list[int], str]:
        auto = self._select_autos[options]
        eos = self.vocab.eos_id
        state = auto.start
        tokens: list[int] = []
        while True:
            allowed = auto.allowed_tokens(state)
            if auto.is_accepting(state):
                ext = set(allowed)
                if eos is not None:
                    ext.add(eos)
                if not ext:
                    break
                choice = self._choose(step, sel.temperature, ext)
                if choice == eos:
                    break
            else:
                if not allowed:
                    raise UnsatisfiableConstraint(
                        f"step {step.name!r}: no token continues any option",
                        step=step.name)
                choice = self._choose(step, sel.temperature, allowed)
            self._push(choice, tokens)
            state = auto.advance(state, choice)
        return tokens, self.vocab.detokenize(tokens)

    # -- branches -----------------------------------------------------------

    def _exec_branch(self, step: Step, branch: Branch) -> None:
        self._trace.add(StepStarted(step.name))
        chosen: tuple[Step, ...] = branch.otherwise
        for arm in branch.arms:
            if self._predicate_holds(arm.guard):
                chosen = arm.steps
                break
        self._run_range(chosen, {}, 0, len(chosen))
        self._trace.add(StepCompleted(step.name))

    # -- validate loops -------------------------------------------------------

    def _run_validate(self, step: Step, steps: tuple[Step, ...], idx: int,
                      snaps: dict[str, _Snapshot]) -> None:
        loop = step.body
        assert isinstance(loop, ValidateLoop)
        self._trace.add(StepStarted(step.name))
        if not self._validate:
            self._trace.add(StepCompleted(step.name))
            return
        names = [s.name for s in steps[:idx]]
        if loop.anchor not in names:
            raise AnchorOrder(
                f"anchor {loop.anchor!r} did not run before loop "
                f"{step.name!r}", step=step.name)
        anchor_idx = names.index(loop.anchor)
        snap = snaps[loop.anchor]
        saved_bias = self._retry_bias
        try:
            for attempt in range(1, loop.max_retries + 1):
                if self._predicate_holds(loop.predicate):
                    self._trace.add(StepCompleted(step.name))
                    return
                self._trace.add(ValidationFailed(
                    step.name, attempt, loop.predicate.source))
                if attempt == loop.max_retries:
                    break
                erased = self._restore(snap)
                self._trace.add(BacktrackPerformed(loop.anchor, erased))
                self._trace.regenerations += 1
                if loop.retry_message is not None:
                    self._inject_preamble(
                        loop.retry_message.format(retry=attempt))
                self._retry_bias = saved_bias + attempt
                self._run_range(steps, snaps, anchor_idx, idx)
            self._apply_fallback(step, loop, steps, anchor_idx, idx, snap)
            self._trace.add(StepCompleted(step.name))
        finally:
            self._retry_bias = saved_bias

    def _apply_fallback(self, step: Step, loop: ValidateLoop,
                        steps: tuple[Step, ...], anchor_idx: int, idx: int,
                        snap: _Snapshot) -> None:
        last = {name: self._bindings.get(name)
                for name in self._bindings.names()[snap.bound:]}
        declared = dict(loop.fallback)
        self._restore(snap)
        self._force_range(steps[anchor_idx:idx], declared, last)

    def _force_range(self, steps: tuple[Step, ...], declared: dict[str, str],
                     last: dict[str, str | None]) -> None:
        """Re-emit a failed span with fallback values, no backend calls."""
        for step in steps:
            body = step.body
            if isinstance(body, EmitFixed):
                self._exec_emit(step, body)
            elif isinstance(body, (Gen, Select)):
                value = declared.get(step.name)
                if value is None:
                    value = last.get(step.name)
                if value is None:
                    # never bound on the last attempt: decode normally
                    self._exec_step(step)
                    continue
                self._trace.add(StepStarted(step.name))
                tokens: list[int] = []
                for tok in self.vocab.tokenize(value):
                    self._push(tok, tokens)
                self._add_segment(step.name, tokens, value)
                self._bindings.bind(step.name, value)
                self._trace.add(TokensEmitted(step.name, tuple(tokens), value))
                # kept-last-value rewrites are reported too, so a
                # FallbackCompleted run always carries the event
                self._trace.add(FallbackApplied(step.name, value))
                self._trace.add(StepCompleted(step.name))
            elif isinstance(body, Branch):
                chosen: tuple[Step, ...] = body.otherwise
                for arm in body.arms:
                    if self._predicate_holds(arm.guard):
                        chosen = arm.steps
                        break
                self._force_range(chosen, declared, last)
            elif isinstance(body, ValidateLoop):
                # the outer fallback is final: nested checks are skipped
                continue

    # -- shared helpers -------------------------------------------------------

    def _predicate_holds(self, predicate: Predicate) -> bool:
        try:
            return bool(predicate.evaluate(self._bindings.view()))
        except PredicateTypeError:
            return False

    def _choose(self, step: Step, temperature: float, allowed) -> int:
        logits = self.backend.next_logits(self._context)
        masked = apply_mask(logits, allowed)
        self._trace.add(MaskApplied(step.name, len(allowed)))
        if temperature <= 0:
            return decode_policy(masked, Greedy())
        return decode_policy(masked, Sample(temperature, self._derive_seed()))

    def _derive_seed(self) -> int:
        raw = (self._seed + self._retry_bias) * 1000003 + len(self._context)
        return raw & 0x7FFFFFFF

    def _push(self, token: int, span: list[int]) -> None:
        self._context.append(token)
        span.append(token)
        self._trace.total_tokens += 1

    def _add_segment(self, step: str, tokens: list[int], text: str) -> None:
        self._segments.append(_Segment(step, tokens, text))

    def _snapshot(self) -> _Snapshot:
        return _Snapshot(ctx=len(self._context), seg=len(self._segments),
                         bound=len(self._bindings))

    def _restore(self, snap: _Snapshot) -> int:
        erased = sum(len(seg.tokens) for seg in self._segments[snap.seg:])
        del self._segments[snap.seg:]
        del self._context[snap.ctx:]
        self._bindings.truncate(snap.bound)
        self._trace.discarded_tokens += erased
        return erased

    def _inject_preamble(self, text: str) -> None:
        # preambles steer regeneration; they are context-only
        tokens = self.vocab.tokenize(text)
        self._context.extend(tokens)
        self._trace.total_tokens += len(tokens)
        self._trace.discarded_tokens += len(tokens)


def run_program(program: RuleProgram, backend: DecoderBackend,
                prompt: str = "", seed: int = 0, *,
                prelint: bool = True) -> RunResult:
    """One-shot convenience wrapper around Engine."""
    return Engine(program, backend, prelint=prelint).run(prompt, seed)
