"""Parser for the supported regex subset.

Supported: literals (UTF-8, multi-byte characters expand to byte sequences),
character classes over single bytes (ranges, negation, the usual escapes),
``.``, ``*``, ``+``, ``?``, bounded repetition ``{m}``/``{m,}``/``{m,n}``,
alternation, and grouping. Patterns are matched against the full string;
anchors are implicit at both ends.

Rejected with :class:`UnsupportedRegexFeature`: backreferences, lookaround,
named groups, explicit anchors, non-greedy quantifiers, inline flags, word
boundaries. These either leave the regular languages or add nothing under
full-match semantics.

The AST is a small tagged tree over byte sets:

    ("lit", frozenset[int])      one byte drawn from the set
    ("cat", [node, ...])         concatenation
    ("alt", [node, ...])         alternation
    ("rep", node, lo, hi|None)   repetition, hi=None means unbounded
"""

from __future__ import annotations

from scidc.errors import UnsupportedRegexFeature

MAX_REPEAT = 256

_ALL_BYTES = frozenset(range(256))
DOT = frozenset(b for b in range(256) if b != 0x0A)
DIGIT = frozenset(range(0x30, 0x3A))
WORD = frozenset(
    list(range(0x30, 0x3A)) + list(range(0x41, 0x5B)) + list(range(0x61, 0x7B)) + [0x5F]
)
SPACE = frozenset(b" \t\n\r\f\v")

_CLASS_ESCAPES = {
    "d": DIGIT,
    "D": _ALL_BYTES - DIGIT,
    "w": WORD,
    "W": _ALL_BYTES - WORD,
    "s": SPACE,
    "S": _ALL_BYTES - SPACE,
}
_CHAR_ESCAPES = {
    "n": 0x0A,
    "t": 0x09,
    "r": 0x0D,
    "f": 0x0C,
    "v": 0x0B,
    "0": 0x00,
    "a": 0x07,
    "b": 0x08,  # inside classes only; bare \b is a word boundary and rejected
}
_LITERAL_PUNCT = set("\\^$.|?*+()[]{}-/'\"!#%&,:;<=>@_`~ ")


class _Scanner:
    def __init__(self, pattern: str):
        self.src = pattern
        self.pos = 0

    def peek(self) -> str | None:
        return self.src[self.pos] if self.pos < len(self.src) else None

    def next(self) -> str:
        ch = self.src[self.pos]
        self.pos += 1
        return ch

    def eat(self, ch: str) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def fail(self, why: str):
        raise UnsupportedRegexFeature(f"{why} at position {self.pos} in {self.src!r}")


def parse_regex(pattern: str):
    """Parse ``pattern`` into the byte-level AST. Raises UnsupportedRegexFeature."""
    sc = _Scanner(pattern)
    node = _parse_alt(sc)
    if sc.pos != len(sc.src):
        sc.fail("unbalanced ')'" if sc.peek() == ")" else "trailing input")
    return node


def _parse_alt(sc: _Scanner):
    branches = [_parse_cat(sc)]
    while sc.eat("|"):
        branches.append(_parse_cat(sc))
    return branches[0] if len(branches) == 1 else ("alt", branches)


def _parse_cat(sc: _Scanner):
    parts = []
    while True:
        ch = sc.peek()
        if ch is None or ch in "|)":
            break
        parts.append(_parse_quantified(sc))
    if not parts:
        return ("cat", [])
    return parts[0] if len(parts) == 1 else ("cat", parts)


def _parse_quantified(sc: _Scanner):
    atom = _parse_atom(sc)
    while True:
        ch = sc.peek()
        if ch == "*":
            sc.next()
            atom = ("rep", atom, 0, None)
        elif ch == "+":
            sc.next()
            atom = ("rep", atom, 1, None)
        elif ch == "?":
            sc.next()
            atom = ("rep", atom, 0, 1)
        elif ch == "{":
            bounds = _try_parse_bounds(sc)
            if bounds is None:
                break
            atom = ("rep", atom, bounds[0], bounds[1])
        else:
            break
        if sc.peek() == "?":
            sc.fail("non-greedy quantifiers are not supported")
    return atom


def _try_parse_bounds(sc: _Scanner):
    # A '{' not opening a valid bound is a literal brace, like re does.
    save = sc.pos
    sc.next()
    lo_digits = ""
    while sc.peek() is not None and sc.peek().isdigit():
        lo_digits += sc.next()
    if not lo_digits:
        sc.pos = save
        return None
    lo = int(lo_digits)
    hi = lo
    if sc.eat(","):
        hi_digits = ""
        while sc.peek() is not None and sc.peek().isdigit():
            hi_digits += sc.next()
        hi = int(hi_digits) if hi_digits else None
    if not sc.eat("}"):
        sc.pos = save
        return None
    if hi is not None and hi < lo:
        sc.fail(f"bad repetition bounds {{{lo},{hi}}}")
    if lo > MAX_REPEAT or (hi is not None and hi > MAX_REPEAT):
        sc.fail(f"repetition bound exceeds {MAX_REPEAT}")
    return lo, hi


def _parse_atom(sc: _Scanner):
    ch = sc.next()
    if ch == "(":
        if sc.peek() == "?":
            sc.next()
            if not sc.eat(":"):
                sc.fail("lookaround / named groups are not supported")
        node = _parse_alt(sc)
        if not sc.eat(")"):
            sc.fail("unterminated group")
        return node
    if ch == "[":
        return ("lit", _parse_class(sc))
    if ch == ".":
        return ("lit", DOT)
    if ch == "\\":
        return _parse_escape(sc, in_class=False)
    if ch in "*+?":
        sc.fail(f"quantifier {ch!r} with nothing to repeat")
    if ch in "^$":
        sc.fail("explicit anchors are not supported (full match is implicit)")
    return _literal_node(ch)


def _literal_node(ch: str):
    encoded = ch.encode("utf-8")
    if len(encoded) == 1:
        return ("lit", frozenset(encoded))
    return ("cat", [("lit", frozenset((b,))) for b in encoded])


def _parse_escape(sc: _Scanner, in_class: bool):
    if sc.peek() is None:
        sc.fail("dangling backslash")
    ch = sc.next()
    if ch in _CLASS_ESCAPES:
        return ("lit", _CLASS_ESCAPES[ch])
    if ch == "x":
        hexits = ""
        for _ in range(2):
            if sc.peek() is None or sc.peek() not in "0123456789abcdefABCDEF":
                sc.fail("\\x expects two hex digits")
            hexits += sc.next()
        return ("lit", frozenset((int(hexits, 16),)))
    if ch in _CHAR_ESCAPES:
        if ch == "b" and not in_class:
            sc.fail("word boundaries are not supported")
        return ("lit", frozenset((_CHAR_ESCAPES[ch],)))
    if ch.isdigit():
        sc.fail("backreferences are not supported")
    if ch in ("A", "Z", "B"):
        sc.fail(f"\\{ch} is not supported")
    if ch in _LITERAL_PUNCT:
        return ("lit", frozenset((ord(ch),)))
    sc.fail(f"unknown escape \\{ch}")


def _class_member_byte(sc: _Scanner) -> int:
    ch = sc.next()
    if ch == "\\":
        node = _parse_escape(sc, in_class=True)
        byts = node[1]
        if len(byts) != 1:
            # multi-byte class escapes like \d are handled by the caller
            raise _MultiByteEscape(byts)
        return next(iter(byts))
    code = ord(ch)
    if code > 127:
        sc.fail("non-ASCII characters in classes are not supported (use \\xNN)")
    return code


class _MultiByteEscape(Exception):
    def __init__(self, byts):
        self.bytes = byts


def _parse_class(sc: _Scanner) -> frozenset:
    negate = sc.eat("^")
    members: set[int] = set()
    first = True
    while True:
        ch = sc.peek()
        if ch is None:
            sc.fail("unterminated character class")
        if ch == "]" and not first:
            sc.next()
            break
        first = False
        try:
            lo = _class_member_byte(sc)
        except _MultiByteEscape as esc:
            members.update(esc.bytes)
            continue
        if sc.peek() == "-" and sc.src[sc.pos + 1 : sc.pos + 2] not in ("]", ""):
            sc.next()
            try:
                hi = _class_member_byte(sc)
            except _MultiByteEscape:
                sc.fail("class range endpoint must be a single byte")
            if hi < lo:
                sc.fail(f"reversed class range {chr(lo)}-{chr(hi)}")
            members.update(range(lo, hi + 1))
        else:
            members.add(lo)
    result = frozenset(members)
    return frozenset(_ALL_BYTES - result) if negate else result
