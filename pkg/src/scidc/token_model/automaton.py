"""Token-level constraint automata.

A TokenAutomaton is the product of a byte-level DFA with the vocabulary's
token strings: state s steps to state s' on token t iff walking every byte of
t from s through the char DFA lands on s'. Dead states are pruned at build
time, so every reachable state can still reach an accepting state and the
per-state valid-token sets are never a trap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from scidc.errors import (
    EmptyLanguage,
    InvalidTransition,
    UnknownState,
    UntokenizableOption,
)
from scidc.token_model.chardfa import CharDfa, compile_char_dfa
from scidc.token_model.vocab import Vocabulary, _to_bytes

_UNREACHABLE = -1


@dataclass(frozen=True)
class TokenAutomaton:
    """Deterministic automaton over vocabulary token ids."""

    transitions: tuple  # tuple[dict[int, int], ...], index = state
    start: int
    accepting: frozenset
    dist: tuple  # min tokens from state to an accepting state
    vocab_size: int
    _valid_cache: dict = field(
        default_factory=dict, init=False, repr=False, compare=False, hash=False
    )

    @property
    def n_states(self) -> int:
        return len(self.transitions)

    @property
    def live(self) -> frozenset:
        # pruning guarantees every kept state reaches acceptance
        return frozenset(range(self.n_states))

    def check_state(self, state: int):
        if not isinstance(state, int) or not 0 <= state < self.n_states:
            raise UnknownState(f"state {state!r} not in automaton")

    def allowed_tokens(self, state: int) -> frozenset:
        self.check_state(state)
        return frozenset(self.transitions[state])

    def allowed_tokens_within(self, state: int, budget: int) -> tuple:
        """Token ids usable when only ``budget`` tokens remain in the span."""
        self.check_state(state)
        return tuple(
            tid for tid, nxt in self.transitions[state].items()
            if self.dist[nxt] <= budget - 1
        )

    def valid_array(self, state: int) -> np.ndarray:
        """Sorted ndarray of allowed ids, cached per state."""
        arr = self._valid_cache.get(state)
        if arr is None:
            self.check_state(state)
            arr = np.fromiter(sorted(self.transitions[state]), dtype=np.int64)
            self._valid_cache[state] = arr
        return arr

    def advance(self, state: int, token_id: int) -> int:
        self.check_state(state)
        nxt = self.transitions[state].get(token_id)
        if nxt is None:
            raise InvalidTransition(f"token {token_id} not allowed in state {state}")
        return nxt

    def is_accepting(self, state: int) -> bool:
        return state in self.accepting

    def min_tokens_to_accept(self, state: int = None) -> int:
        if state is None:
            state = self.start
        self.check_state(state)
        return self.dist[state]

    def walk(self, token_ids) -> int | None:
        """Follow a full token path from start; None if any step is invalid."""
        state = self.start
        for tid in token_ids:
            state = self.transitions[state].get(tid)
            if state is None:
                return None
        return state

    def accepts(self, token_ids) -> bool:
        end = self.walk(token_ids)
        return end is not None and end in self.accepting


def _product(dfa: CharDfa, vocab: Vocabulary) -> tuple:
    tokens = [(tid, vocab.tokens[tid]) for tid in vocab.matchable_ids()]
    index = {dfa.start: 0}
    order = [dfa.start]
    transitions: list[dict[int, int]] = [{}]
    todo = [dfa.start]
    while todo:
        src = todo.pop()
        row = transitions[index[src]]
        for tid, tok in tokens:
            dst = dfa.walk(src, tok)
            if dst is None:
                continue
            if dst not in index:
                index[dst] = len(order)
                order.append(dst)
                transitions.append({})
                todo.append(dst)
            row[tid] = index[dst]
    accepting = frozenset(index[s] for s in order if s in dfa.accepting)
    return transitions, accepting


def _distances(transitions: list, accepting: frozenset) -> list[int]:
    back: dict[int, set[int]] = {i: set() for i in range(len(transitions))}
    for src, row in enumerate(transitions):
        for dst in row.values():
            back[dst].add(src)
    dist = [_UNREACHABLE] * len(transitions)
    frontier = sorted(accepting)
    for s in frontier:
        dist[s] = 0
    depth = 0
    while frontier:
        depth += 1
        nxt = []
        for s in frontier:
            for prev in back[s]:
                if dist[prev] == _UNREACHABLE:
                    dist[prev] = depth
                    nxt.append(prev)
        frontier = nxt
    return dist


def _finish(transitions: list, accepting: frozenset, vocab: Vocabulary,
            what: str) -> TokenAutomaton:
    dist = _distances(transitions, accepting)
    if not accepting or dist[0] == _UNREACHABLE:
        raise EmptyLanguage(f"{what} matches no token sequence in this vocabulary")
    keep = [s for s in range(len(transitions)) if dist[s] != _UNREACHABLE]
    remap = {old: new for new, old in enumerate(keep)}
    pruned = tuple(
        {tid: remap[dst] for tid, dst in transitions[old].items()
         if dist[dst] != _UNREACHABLE}
        for old in keep
    )
    return TokenAutomaton(
        transitions=pruned,
        start=remap[0],
        accepting=frozenset(remap[s] for s in accepting),
        dist=tuple(dist[old] for old in keep),
        vocab_size=vocab.size,
    )


def compile_regex(pattern: str, vocab: Vocabulary) -> TokenAutomaton:
    """Compile a full-match regex constraint to a token automaton."""
    dfa = compile_char_dfa(pattern)
    transitions, accepting = _product(dfa, vocab)
    return _finish(transitions, accepting, vocab, f"pattern {pattern!r}")


def compile_select(options: list, vocab: Vocabulary) -> TokenAutomaton:
    """Compile an option set; the automaton accepts exactly the token paths
    spelling one complete option."""
    if not options:
        raise ValueError("options must be nonempty")
    for opt in options:
        if not _spellable(_to_bytes(opt), vocab):
            raise UntokenizableOption(opt)
    dfa = _trie_dfa([_to_bytes(o) for o in options])
    transitions, accepting = _product(dfa, vocab)
    return _finish(transitions, accepting, vocab, f"options {options!r}")


def _spellable(data: bytes, vocab: Vocabulary) -> bool:
    n = len(data)
    ok = [False] * (n + 1)
    ok[n] = True
    ids = vocab.matchable_ids()
    for pos in range(n - 1, -1, -1):
        for tid in ids:
            tok = vocab.tokens[tid]
            if ok[pos]:
                break
            if pos + len(tok) <= n and data.startswith(tok, pos) and ok[pos + len(tok)]:
                ok[pos] = True
    return ok[0]


def _trie_dfa(strings: list) -> CharDfa:
    transitions: list[dict[int, int]] = [{}]
    accepting = set()
    for s in strings:
        state = 0
        for b in s:
            nxt = transitions[state].get(b)
            if nxt is None:
                nxt = len(transitions)
                transitions.append({})
                transitions[state][b] = nxt
            state = nxt
        accepting.add(state)
    return CharDfa(tuple(transitions), 0, frozenset(accepting))
