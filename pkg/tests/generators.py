"""Random rule-program construction and mutation for fuzz-style tests.

``random_clean_program`` emits source that parses and lints clean against
the vocabulary ``program_vocab`` derives from it. The mutation operators
corrupt that source while keeping it parseable, so linting and execution
stay comparable on every mutant.
"""

from __future__ import annotations

import random
import re

WORDS = ("alpha", "beta", "gamma", "delta", "low", "high", "mid")

# numeric regexes paired with a literal that full-matches each
NUM_GENS = (
    (r"\d+", "7"),
    (r"\d\d", "42"),
    (r"\d+\.?\d*", "2.5"),
    (r"[0-9]{1,3}", "81"),
)

EMIT_TEXTS = (
    "\n-- mark --\n",
    "result: ",
    "\nnext item\n",
    "; then ",
    "\nStage: ",
)


class _Builder:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.blocks: list[str] = []
        # ordered (name, safe fallback literal or None) for top-level steps
        self.top: list[tuple[str, str | None]] = []
        self.numeric: list[str] = []
        self.words: list[str] = []
        self.n = 0

    def fresh(self, prefix: str) -> str:
        self.n += 1
        return f"{prefix}{self.n}"

    def add(self, block: str, name: str, fallback: str | None) -> None:
        self.blocks.append(block)
        self.top.append((name, fallback))

    def emit(self) -> None:
        name = self.fresh("e")
        text = self.rng.choice(EMIT_TEXTS)
        self.add(f'step {name}: emit\n  text = "{_esc(text)}"\n', name, None)

    def gen_numeric(self) -> None:
        name = self.fresh("g")
        regex, literal = self.rng.choice(NUM_GENS)
        cap = self.rng.randint(4, 8)
        self.add(f'step {name}: gen\n  regex = "{_esc(regex)}"\n'
                 f"  max_tokens = {cap}\n", name, literal)
        self.numeric.append(name)

    def gen_free(self) -> None:
        name = self.fresh("f")
        cap = self.rng.randint(3, 6)
        self.add(f'step {name}: gen\n  stop = "\\n"\n'
                 f"  max_tokens = {cap}\n", name, "na")

    def select_static(self) -> None:
        name = self.fresh("w")
        options = self.rng.sample(WORDS, self.rng.randint(2, 3))
        rendered = ", ".join(f'"{o}"' for o in options)
        self.add(f"step {name}: select\n  options = [{rendered}]\n",
                 name, self.rng.choice(options))
        self.words.append(name)

    def select_dynamic(self) -> None:
        if not self.numeric and not self.words:
            return self.select_static()
        name = self.fresh("w")
        guard = self._pred()
        # "mid" appears in every list so a fallback is always legal
        first = sorted({self.rng.choice(WORDS), "mid"})
        second = sorted({self.rng.choice(WORDS), "mid"})
        self.add(
            f"step {name}: select\n  dynamic {{\n"
            f"    when {guard} -> [{_opts(first)}]\n"
            f"    else -> [{_opts(second)}]\n  }}\n",
            name, "mid")
        self.words.append(name)

    def branch(self) -> None:
        if not self.numeric and not self.words:
            return self.emit()
        name = self.fresh("b")
        arm = self.fresh("e")
        other = self.fresh("e")
        self.add(
            f"step {name}: branch\n  when {self._pred()} {{\n"
            f'    step {arm}: emit\n      text = "yes path "\n  }}\n'
            f"  else {{\n"
            f'    step {other}: emit\n      text = "no path "\n  }}\n',
            name, None)

    def validate(self) -> None:
        if not self.numeric:
            return self.gen_numeric()
        name = self.fresh("v")
        names = [n for n, _ in self.top]
        anchor_pos = self.rng.randint(
            max(0, len(self.top) - 3), len(self.top) - 1)
        span = self.top[anchor_pos:]
        span_numeric = [n for n, _ in span if n in self.numeric]
        if not span_numeric:
            span = self.top[names.index(self.numeric[-1]):]
            span_numeric = [n for n, _ in span if n in self.numeric]
        var = self.rng.choice(span_numeric)
        lines = [f"step {name}: validate",
                 f"  pred = {var} <= {self.rng.randint(3, 200)}",
                 f"  anchor = {span[0][0]}",
                 f"  max_retries = {self.rng.randint(1, 5)}"]
        if self.rng.random() < 0.5:
            lines.append('  retry_message = "\\n[retry {retry}] again\\n"')
        fallbacks = [(n, lit) for n, lit in span if lit is not None]
        if fallbacks:
            lines.append("  fallback {")
            lines.extend(f'    {n} = "{lit}"' for n, lit in fallbacks)
            lines.append("  }")
        self.add("\n".join(lines) + "\n", name, None)


def _esc(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def _opts(options) -> str:
    return ", ".join(f'"{o}"' for o in options)


def _pred_for(rng: random.Random, numeric, words) -> str:
    if numeric and (not words or rng.random() < 0.6):
        var = rng.choice(numeric)
        op = rng.choice(("<=", ">", "<", ">=", "==", "!="))
        return f"{var} {op} {rng.randint(0, 99)}"
    var = rng.choice(words)
    op = rng.choice(("==", "!="))
    return f'{var} {op} "{rng.choice(WORDS)}"'


_Builder._pred = lambda self: _pred_for(self.rng, self.numeric, self.words)

KINDS_CONSTRAINED = ("gen", "select")
KINDS_ALL = ("gen", "select", "dynamic", "branch", "validate", "free")


def random_clean_program(rng: random.Random,
                         kinds=KINDS_ALL,
                         steps: int | None = None) -> str:
    """Source text of a random program that parses and lints clean."""
    b = _Builder(rng)
    b.emit()
    moves = {"gen": b.gen_numeric, "select": b.select_static,
             "dynamic": b.select_dynamic, "branch": b.branch,
             "validate": b.validate, "free": b.gen_free}
    for _ in range(steps if steps is not None else rng.randint(3, 7)):
        moves[rng.choice(kinds)]()
        if rng.random() < 0.6:
            b.emit()
    b.emit()
    header = f"scidc-ir v1\nprogram fuzz_{rng.randint(0, 10**6)}\n\n"
    return header + "\n".join(b.blocks)


def program_vocab(source: str, extra: tuple[str, ...] = ()):
    from scidc.eval_harness import vocab_for_texts
    return vocab_for_texts([source], extra_tokens=extra)


# ---------------------------------------------------------------------------
# mutation operators: each returns mutated source or None when inapplicable


def _line_sub(text: str, pattern: str, repl, count: int = 1) -> str | None:
    out, n = re.subn(pattern, repl, text, count=count, flags=re.M)
    return out if n else None


def mut_drop_max_retries(rng, text):
    return _line_sub(text, r"^  max_retries = \d+\n", "")


def mut_zero_max_tokens(rng, text):
    return _line_sub(text, r"^  max_tokens = \d+$", "  max_tokens = 0")


def mut_huge_max_retries(rng, text):
    return _line_sub(text, r"^  max_retries = \d+$", "  max_retries = 500")


def mut_ghost_anchor(rng, text):
    return _line_sub(text, r"^  anchor = \w+$", "  anchor = ghost_step")


def mut_anchor_forward(rng, text):
    pos = text.find("  anchor = ")
    if pos < 0:
        return None
    later = re.findall(r"^step (\w+):", text[pos:], flags=re.M)
    if len(later) < 2:
        return None
    return _line_sub(text, r"^  anchor = \w+$", f"  anchor = {later[-1]}")


def mut_ghost_pred_var(rng, text):
    return _line_sub(text, r"(pred = |when )[gwf]\d+", r"\1ghost")


def mut_letters_regex(rng, text):
    return _line_sub(text, r'^  regex = "\\\\d.*"$', '  regex = "[a-z]+"')


def mut_lookahead_regex(rng, text):
    return _line_sub(text, r'^  regex = ".*"$', r'  regex = "(?=1)\\d+"')


def mut_unspellable_emit(rng, text):
    return _line_sub(text, r'^(  text = ".*)("\n)', r"\1\u00a4\2")


def mut_unspellable_option(rng, text):
    return _line_sub(text, r'^(  options = \[.*)\]$', r'\1, "q\u00a4"]')


def mut_empty_options(rng, text):
    return _line_sub(text, r"^  options = \[.*\]$", "  options = []")


def mut_fallback_mismatch(rng, text):
    return _line_sub(text, r'^(    \w+ = )".*"$', r'\1"zz9"')


def mut_drop_fallback(rng, text):
    return _line_sub(text, r"^  fallback \{\n(    .*\n)*  \}\n", "")


def mut_bad_retry_template(rng, text):
    return _line_sub(text, r"\{retry\}", "{bogus}")


def mut_flip_cmp(rng, text):
    return _line_sub(text, r"(pred = \w+) <= ", r"\1 > ")


def _blocks(text: str) -> tuple[str, list[str]]:
    header, _, rest = text.partition("\n\n")
    return header + "\n\n", rest.split("\n\n")


def mut_duplicate_block(rng, text):
    header, blocks = _blocks(text)
    i = rng.randrange(len(blocks))
    blocks.insert(i + 1, blocks[i])
    return header + "\n\n".join(blocks)


def mut_drop_block(rng, text):
    header, blocks = _blocks(text)
    if len(blocks) < 2:
        return None
    del blocks[rng.randrange(len(blocks))]
    return header + "\n\n".join(blocks)


def mut_swap_adjacent(rng, text):
    header, blocks = _blocks(text)
    if len(blocks) < 2:
        return None
    i = rng.randrange(len(blocks) - 1)
    blocks[i], blocks[i + 1] = blocks[i + 1], blocks[i]
    return header + "\n\n".join(blocks)


MUTATORS = (
    ("drop_max_retries", mut_drop_max_retries),
    ("zero_max_tokens", mut_zero_max_tokens),
    ("huge_max_retries", mut_huge_max_retries),
    ("ghost_anchor", mut_ghost_anchor),
    ("anchor_forward", mut_anchor_forward),
    ("ghost_pred_var", mut_ghost_pred_var),
    ("letters_regex", mut_letters_regex),
    ("lookahead_regex", mut_lookahead_regex),
    ("unspellable_emit", mut_unspellable_emit),
    ("unspellable_option", mut_unspellable_option),
    ("empty_options", mut_empty_options),
    ("fallback_mismatch", mut_fallback_mismatch),
    ("drop_fallback", mut_drop_fallback),
    ("bad_retry_template", mut_bad_retry_template),
    ("flip_cmp", mut_flip_cmp),
    ("duplicate_block", mut_duplicate_block),
    ("drop_block", mut_drop_block),
    ("swap_adjacent", mut_swap_adjacent),
)


def random_mutant(rng: random.Random, source: str) -> tuple[str, str]:
    """Apply one randomly chosen applicable operator; returns (name, text)."""
    order = list(MUTATORS)
    rng.shuffle(order)
    for name, op in order:
        mutated = op(rng, source)
        if mutated is not None and mutated != source:
            return name, mutated
    raise AssertionError("no mutation operator applied")
