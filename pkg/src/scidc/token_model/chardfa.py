"""Byte-level DFA construction from the regex AST.

Thompson construction to an NFA with byte-set edges, then subset construction.
State count stays small for the supported subset because bounded repetition is
expanded with a hard cap at parse time.
"""

from __future__ import annotations

from dataclasses import dataclass

from scidc.errors import UnsupportedRegexFeature
from scidc.token_model.regex_parse import parse_regex

_NFA_STATE_CAP = 20000


class _Nfa:
    def __init__(self):
        self.edges: list[list[tuple[frozenset, int]]] = []
        self.eps: list[list[int]] = []

    def state(self) -> int:
        if len(self.edges) >= _NFA_STATE_CAP:
            raise UnsupportedRegexFeature("pattern expands to too many states")
        self.edges.append([])
        self.eps.append([])
        return len(self.edges) - 1

    def add(self, src: int, byts: frozenset, dst: int):
        self.edges[src].append((byts, dst))

    def add_eps(self, src: int, dst: int):
        self.eps[src].append(dst)


def _build(nfa: _Nfa, node) -> tuple[int, int]:
    kind = node[0]
    if kind == "lit":
        s, e = nfa.state(), nfa.state()
        nfa.add(s, node[1], e)
        return s, e
    if kind == "cat":
        s = e = nfa.state()
        for child in node[1]:
            cs, ce = _build(nfa, child)
            nfa.add_eps(e, cs)
            e = ce
        return s, e
    if kind == "alt":
        s, e = nfa.state(), nfa.state()
        for child in node[1]:
            cs, ce = _build(nfa, child)
            nfa.add_eps(s, cs)
            nfa.add_eps(ce, e)
        return s, e
    if kind == "rep":
        _, child, lo, hi = node
        s = e = nfa.state()
        for _ in range(lo):
            cs, ce = _build(nfa, child)
            nfa.add_eps(e, cs)
            e = ce
        if hi is None:
            cs, ce = _build(nfa, child)
            nfa.add_eps(e, cs)
            nfa.add_eps(ce, cs)
            end = nfa.state()
            nfa.add_eps(e, end)
            nfa.add_eps(ce, end)
            return s, end
        tail_ends = [e]
        for _ in range(hi - lo):
            cs, ce = _build(nfa, child)
            nfa.add_eps(e, cs)
            e = ce
            tail_ends.append(e)
        end = nfa.state()
        for t in tail_ends:
            nfa.add_eps(t, end)
        return s, end
    raise AssertionError(f"unknown AST node {kind}")


def _closure(nfa: _Nfa, states: frozenset) -> frozenset:
    seen = set(states)
    stack = list(states)
    while stack:
        for nxt in nfa.eps[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return frozenset(seen)


@dataclass(frozen=True)
class CharDfa:
    """Deterministic byte-level automaton. Full-match semantics: a string is
    in the language iff walking all its bytes from ``start`` lands in an
    accepting state."""

    transitions: tuple  # tuple[dict[int, int], ...], index = state
    start: int
    accepting: frozenset

    def step(self, state: int, byte: int) -> int | None:
        return self.transitions[state].get(byte)

    def walk(self, state: int, data: bytes) -> int | None:
        """Walk every byte of ``data``; None as soon as a step is undefined."""
        for b in data:
            state = self.transitions[state].get(b)
            if state is None:
                return None
        return state

    def fullmatch(self, data: bytes) -> bool:
        end = self.walk(self.start, data)
        return end is not None and end in self.accepting

    def live_states(self) -> frozenset:
        """States from which an accepting state is reachable in >= 0 steps."""
        back: dict[int, set[int]] = {i: set() for i in range(len(self.transitions))}
        for src, edges in enumerate(self.transitions):
            for dst in edges.values():
                back[dst].add(src)
        live = set(self.accepting)
        stack = list(self.accepting)
        while stack:
            for prev in back[stack.pop()]:
                if prev not in live:
                    live.add(prev)
                    stack.append(prev)
        return frozenset(live)


def compile_char_dfa(pattern: str) -> CharDfa:
    """Compile ``pattern`` to a byte-level DFA with dead states removed."""
    nfa = _Nfa()
    start, end = _build(nfa, parse_regex(pattern))

    start_set = _closure(nfa, frozenset((start,)))
    index = {start_set: 0}
    order = [start_set]
    transitions: list[dict[int, int]] = [{}]
    todo = [start_set]
    while todo:
        cur = todo.pop()
        cur_id = index[cur]
        by_byte: dict[int, set[int]] = {}
        for st in cur:
            for byts, dst in nfa.edges[st]:
                for b in byts:
                    by_byte.setdefault(b, set()).add(dst)
        for b, dsts in by_byte.items():
            nxt = _closure(nfa, frozenset(dsts))
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
                transitions.append({})
                todo.append(nxt)
            transitions[cur_id][b] = index[nxt]

    accepting = frozenset(i for i, s in enumerate(order) if end in s)
    dfa = CharDfa(tuple(transitions), 0, accepting)
    return _prune(dfa)


def dfa_included(a: CharDfa, b: CharDfa) -> bool:
    """Whether L(a) is a subset of L(b)."""
    seen = {(a.start, b.start)}
    todo = [(a.start, b.start)]
    while todo:
        sa, sb = todo.pop()
        if sa in a.accepting and (sb is None or sb not in b.accepting):
            return False
        for byte, na in a.transitions[sa].items():
            nb = None if sb is None else b.transitions[sb].get(byte)
            if (na, nb) not in seen:
                seen.add((na, nb))
                todo.append((na, nb))
    return True


def dfa_disjoint(a: CharDfa, b: CharDfa) -> bool:
    """Whether L(a) and L(b) share no string."""
    seen = {(a.start, b.start)}
    todo = [(a.start, b.start)]
    while todo:
        sa, sb = todo.pop()
        if sa in a.accepting and sb in b.accepting:
            return False
        for byte, na in a.transitions[sa].items():
            nb = b.transitions[sb].get(byte)
            if nb is not None and (na, nb) not in seen:
                seen.add((na, nb))
                todo.append((na, nb))
    return True


def _prune(dfa: CharDfa) -> CharDfa:
    live = dfa.live_states()
    if dfa.start not in live:
        # keep the bare start so callers can observe the empty language
        return CharDfa(({},), 0, frozenset())
    keep = sorted(live)
    remap = {old: new for new, old in enumerate(keep)}
    transitions = tuple(
        {b: remap[dst] for b, dst in dfa.transitions[old].items() if dst in live}
        for old in keep
    )
    accepting = frozenset(remap[s] for s in dfa.accepting if s in live)
    return CharDfa(transitions, remap[dfa.start], accepting)
