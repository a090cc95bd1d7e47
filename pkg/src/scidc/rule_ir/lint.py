"""Structural validator for rule programs.

ERROR findings are contract violations: a program with any of them may be
rejected by the executor. WARNING findings are heuristic quality signals.
Passing a Vocabulary enables the token-level checks (constraint languages,
spellability, budgets), mirroring exactly what executor setup enforces.
"""

from __future__ import annotations

from scidc.errors import (
    EmptyLanguage,
    ScidcError,
    UnspellableText,
    UnsupportedRegexFeature,
    UntokenizableOption,
)
from scidc.rule_ir.ast import (
    Branch,
    DynamicOptions,
    EmitFixed,
    Finding,
    Gen,
    RuleProgram,
    Select,
    Step,
    ValidateLoop,
    iter_steps,
)
from scidc.rule_ir.predicate import Predicate, numeric_value
from scidc.token_model.chardfa import (
    CharDfa,
    compile_char_dfa,
    dfa_disjoint,
    dfa_included,
)
from scidc.token_model.automaton import compile_regex, compile_select

MAX_BRANCH_DEPTH = 4
MAX_RETRY_BOUND = 99

_COERCIBLE = compile_char_dfa(r"\s*-?\d+\.?\d*\s*")

_BOOL_SHAPED = ("cmp", "in", "and", "or", "not")


def _merge_type(a: str, b: str) -> str:
    return a if a == b else "any"


def _gen_type(body: Gen) -> str:
    if body.regex is None:
        return "any"
    try:
        dfa = compile_char_dfa(body.regex)
    except ScidcError:
        return "any"
    if dfa_included(dfa, _COERCIBLE):
        return "num"
    if dfa_disjoint(dfa, _COERCIBLE):
        return "str"
    return "any"


def _options_type(options) -> str:
    kinds = {"num" if numeric_value(o) is not None else "str" for o in options}
    return kinds.pop() if len(kinds) == 1 else "any"


def _safe_options_type(options) -> str:
    return _options_type(options) if options else "any"


def _select_type(body: Select) -> str:
    if body.options is not None:
        return _safe_options_type(body.options)
    t = _safe_options_type(body.dynamic.default)
    for _, opts in body.dynamic.guards:
        t = _merge_type(t, _safe_options_type(opts))
    return t


def _literal_type(literal: str) -> str:
    return "num" if numeric_value(literal) is not None else "str"


class _Linter:
    def __init__(self, program: RuleProgram, vocab):
        self.program = program
        self.vocab = vocab
        self.findings: list[Finding] = []

    def error(self, step: str | None, message: str):
        self.findings.append(Finding("ERROR", step, message))

    def warn(self, step: str | None, message: str):
        self.findings.append(Finding("WARNING", step, message))

    # -- predicates ----------------------------------------------------------

    def _check_pred(self, pred: Predicate, step: str, bound: set, types: dict,
                    what: str):
        unbound = sorted(pred.variables() - bound)
        for var in unbound:
            self.error(step, f"{what} references unbound variable {var!r}")
        if pred.expr[0] not in _BOOL_SHAPED:
            self.error(step, f"{what} does not reduce to a boolean")
        self._check_types(pred.expr, step, types, what)

    def _shape(self, node, types: dict) -> str:
        kind = node[0]
        if kind in _BOOL_SHAPED:
            return "bool"
        if kind == "num":
            return "num"
        if kind == "str":
            return "num" if numeric_value(node[1]) is not None else "str"
        if kind == "set":
            return "set"
        if kind == "var":
            return types.get(node[1], "any")
        if kind == "arith":
            return "num"
        raise AssertionError(kind)

    def _check_types(self, node, step: str, types: dict, what: str):
        kind = node[0]
        if kind in ("and", "or"):
            for term in node[1]:
                if self._shape(term, types) != "bool":
                    self.error(step, f"{what}: operand of '{kind}' is not a comparison")
                self._check_types(term, step, types, what)
        elif kind == "not":
            if self._shape(node[1], types) != "bool":
                self.error(step, f"{what}: operand of 'not' is not a comparison")
            self._check_types(node[1], step, types, what)
        elif kind == "cmp":
            _, op, left, right = node
            for side in (left, right):
                shape = self._shape(side, types)
                if shape in ("bool", "set"):
                    self.error(step, f"{what}: {op!r} applied to a non-scalar")
                elif op not in ("==", "!=") and shape == "str":
                    self.error(step, f"{what}: {op!r} needs numeric operands")
                self._check_types(side, step, types, what)
        elif kind == "in":
            if self._shape(node[1], types) in ("bool", "set"):
                self.error(step, f"{what}: left side of 'in' must be a scalar")
            self._check_types(node[1], step, types, what)
        elif kind == "arith":
            _, op, left, right = node
            for side in (left, right):
                shape = self._shape(side, types)
                if shape in ("bool", "set", "str"):
                    self.error(step, f"{what}: {op!r} needs numeric operands")
                self._check_types(side, step, types, what)

    # -- token-level checks --------------------------------------------------

    def _check_spellable(self, step: str, text: str, what: str):
        if self.vocab is None:
            return
        try:
            self.vocab.tokenize(text)
        except UnspellableText as exc:
            self.error(step, f"{what} is not spellable: {exc}")

    def _check_option_list(self, step: str, options, what: str):
        if not options:
            self.error(step, f"{what} is empty")
            return
        if self.vocab is None:
            return
        try:
            compile_select(list(options), self.vocab)
        except (UntokenizableOption, EmptyLanguage) as exc:
            self.error(step, f"{what}: {exc}")

    # -- steps ----------------------------------------------------------------

    def lint(self) -> list[Finding]:
        seen: dict[str, int] = {}
        for step, _, _ in iter_steps(self.program.steps):
            seen[step.name] = seen.get(step.name, 0) + 1
        for name, count in seen.items():
            if count > 1:
                self.error(name, f"step name {name!r} appears {count} times")
        if not self.program.steps:
            self.error(None, "program has no steps")
        self._walk(self.program.steps, 0, set(), {})
        return self.findings

    def _walk(self, steps, depth: int, bound: set, types: dict):
        """Lint one scope; mutates bound/types to reflect its effects."""
        names = [s.name for s in steps]
        for idx, step in enumerate(steps):
            body = step.body
            if isinstance(body, EmitFixed):
                self._check_spellable(step.name, body.text, "fixed text")
            elif isinstance(body, Gen):
                self._lint_gen(step, body)
                bound.add(step.name)
                types[step.name] = _gen_type(body)
            elif isinstance(body, Select):
                self._lint_select(step, body, bound, types)
                bound.add(step.name)
                types[step.name] = _select_type(body) if (
                    body.options or body.dynamic) else "any"
            elif isinstance(body, Branch):
                self._lint_branch(step, body, depth, bound, types)
            elif isinstance(body, ValidateLoop):
                self._lint_validate(step, body, steps, names, idx, bound, types)
            if isinstance(body, Select) and idx + 1 < len(steps):
                nxt = steps[idx + 1].body
                if self._is_single_option(body) and isinstance(nxt, Gen) \
                        and nxt.regex is None:
                    self.warn(step.name,
                              "single-option select followed by free generation")

    @staticmethod
    def _is_single_option(body: Select) -> bool:
        if body.options is not None:
            return len(body.options) == 1
        if body.dynamic is not None:
            lists = [body.dynamic.default] + [o for _, o in body.dynamic.guards]
            return all(len(o) == 1 for o in lists)
        return False

    def _lint_gen(self, step: Step, body: Gen):
        if body.regex is None and body.stop is None:
            self.error(step.name, "gen step needs a regex or a stop string")
        if body.max_tokens < 1:
            self.error(step.name, "max_tokens must be >= 1")
        if body.temperature < 0:
            self.error(step.name, "temperature must be >= 0")
        if body.regex is not None:
            try:
                if self.vocab is not None:
                    auto = compile_regex(body.regex, self.vocab)
                    need = auto.min_tokens_to_accept()
                    if need > body.max_tokens:
                        self.error(step.name,
                                   f"max_tokens={body.max_tokens} below the "
                                   f"shortest match ({need} tokens)")
                else:
                    compile_char_dfa(body.regex)
            except (UnsupportedRegexFeature, EmptyLanguage) as exc:
                self.error(step.name, str(exc))

    def _lint_select(self, step: Step, body: Select, bound: set, types: dict):
        if body.options is None and body.dynamic is None:
            self.error(step.name, "select step needs options or a dynamic block")
            return
        if body.options is not None:
            self._check_option_list(step.name, body.options, "option list")
        if body.temperature < 0:
            self.error(step.name, "temperature must be >= 0")
        if body.dynamic is not None:
            dyn: DynamicOptions = body.dynamic
            constant_true_seen = False
            for i, (guard, opts) in enumerate(dyn.guards):
                self._check_pred(guard, step.name, bound, types, f"guard {i}")
                self._check_option_list(step.name, opts, f"guard {i} options")
                const = guard.constant_value()
                if const is False:
                    self.warn(step.name, f"guard {i} is constant-false")
                if constant_true_seen:
                    self.warn(step.name, f"guard {i} is unreachable")
                if const is True:
                    constant_true_seen = True
            self._check_option_list(step.name, dyn.default, "default options")
            if constant_true_seen:
                self.warn(step.name, "default options are unreachable")

    def _lint_branch(self, step: Step, body: Branch, depth: int, bound: set,
                     types: dict):
        if depth >= MAX_BRANCH_DEPTH:
            self.error(step.name,
                       f"branch nesting exceeds depth {MAX_BRANCH_DEPTH}")
        results = []
        constant_true_seen = False
        for i, arm in enumerate(body.arms):
            self._check_pred(arm.guard, step.name, bound, types, f"arm {i} guard")
            const = arm.guard.constant_value()
            if const is False:
                self.warn(step.name, f"arm {i} is unreachable (constant-false)")
            if constant_true_seen:
                self.warn(step.name, f"arm {i} is unreachable")
            if const is True:
                constant_true_seen = True
            arm_bound, arm_types = set(bound), dict(types)
            self._walk(arm.steps, depth + 1, arm_bound, arm_types)
            results.append((arm_bound, arm_types))
        if constant_true_seen and body.otherwise:
            self.warn(step.name, "else block is unreachable")
        other_bound, other_types = set(bound), dict(types)
        self._walk(body.otherwise, depth + 1, other_bound, other_types)
        results.append((other_bound, other_types))
        new_bound = set.intersection(*(r[0] for r in results))
        for var in new_bound - bound:
            merged = results[0][1].get(var, "any")
            for _, t in results[1:]:
                merged = _merge_type(merged, t.get(var, "any"))
            types[var] = merged
        bound |= new_bound

    def _lint_validate(self, step: Step, body: ValidateLoop, steps, names,
                       idx: int, bound: set, types: dict):
        if body.max_retries is None:
            self.error(step.name, "validate requires max_retries")
        elif body.max_retries < 1:
            self.error(step.name, "max_retries must be >= 1")
        elif body.max_retries > MAX_RETRY_BOUND:
            self.error(step.name,
                       f"max_retries must be <= {MAX_RETRY_BOUND}")
        if body.anchor not in names[:idx]:
            if body.anchor in names[idx:]:
                self.error(step.name, "anchor must precede loop")
            elif any(s.name == body.anchor
                     for s, _, _ in iter_steps(self.program.steps)):
                self.error(step.name,
                           f"anchor {body.anchor!r} is not in this scope")
            else:
                self.error(step.name, f"anchor {body.anchor!r} does not exist")
            span = ()
        else:
            span = tuple(steps[names.index(body.anchor):idx])
        self._check_pred(body.predicate, step.name, bound, types, "predicate")
        const = body.predicate.constant_value()
        if const is True:
            self.warn(step.name, "predicate is constant-true")
        if const is False:
            self.warn(step.name, "predicate is constant-false; the loop "
                                 "always exhausts its retries")
        span_steps = {s.name: s for s, _, _ in iter_steps(span) if s.binds}
        span_unconditional = {s.name for s in span if s.binds}
        if span and not span_steps and not body.fallback:
            self.error(step.name, "loop regenerates no variables and "
                                  "declares no fallback")
        if const is None and span and not (
                body.predicate.variables() & set(span_steps)):
            self.warn(step.name,
                      "predicate does not depend on any regenerated step")
        fallback_vars = [var for var, _ in body.fallback]
        for var in sorted(set(fallback_vars)):
            if fallback_vars.count(var) > 1:
                self.error(step.name, f"duplicate fallback for {var!r}")
        for var, literal in body.fallback:
            owner = span_steps.get(var)
            if owner is None:
                self.error(step.name,
                           f"fallback for {var!r}, which is not regenerated "
                           "by this loop")
                continue
            self._check_fallback_literal(step.name, owner, literal)
            types[var] = _merge_type(types.get(var, "any"), _literal_type(literal))
        for var in sorted(span_unconditional - set(fallback_vars)):
            self.error(step.name, f"no fallback for regenerated variable {var!r}")
        if body.retry_message is not None and body.max_retries is not None:
            # the engine renders one preamble per retry: check each
            for k in range(1, min(body.max_retries, MAX_RETRY_BOUND + 1)):
                try:
                    rendered = body.retry_message.format(retry=k)
                except (KeyError, IndexError, ValueError) as exc:
                    self.error(step.name, f"bad retry message template: {exc}")
                    break
                self._check_spellable(step.name, rendered, "retry message")

    def _check_fallback_literal(self, loop: str, owner: Step, literal: str):
        body = owner.body
        if isinstance(body, Gen):
            if body.regex is not None:
                try:
                    dfa = compile_char_dfa(body.regex)
                except ScidcError:
                    return
                if not dfa.fullmatch(literal.encode("utf-8", "surrogateescape")):
                    self.error(loop, f"fallback for {owner.name!r} does not "
                                     f"match its regex: {literal!r}")
            elif body.stop is not None and body.stop in literal:
                self.error(loop, f"fallback for {owner.name!r} contains the "
                                 f"step's stop string")
        elif isinstance(body, Select):
            lists = []
            if body.options is not None:
                lists.append(body.options)
            if body.dynamic is not None:
                lists.append(body.dynamic.default)
                lists.extend(opts for _, opts in body.dynamic.guards)
            for opts in lists:
                if literal not in opts:
                    self.error(loop, f"fallback for {owner.name!r} is not "
                                     f"among its options: {literal!r}")
                    return
        self._check_spellable(loop, literal, f"fallback for {owner.name!r}")


def lint_program(program: RuleProgram, vocab=None) -> list[Finding]:
    """All invariant violations (ERROR) and heuristic findings (WARNING)."""
    return _Linter(program, vocab).lint()


def errors_only(findings) -> list[Finding]:
    return [f for f in findings if f.severity == "ERROR"]
