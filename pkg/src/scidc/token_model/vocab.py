"""Tokenizer vocabulary model.

A vocabulary is an immutable dense mapping token-id -> byte string plus a set
of special token ids (chat markers, end-of-sequence) that are excluded from
constrained matching.

File format: one JSON object whose decimal-string keys map token-id to token
text. Non-UTF-8 bytes are written with lone-surrogate escapes (``\\udc80`` for
byte 0x80, the ``surrogateescape`` convention). Two reserved keys:

* ``"special"``: list of special token ids.
* ``"eos"``: optional end-of-sequence token id; must also be special.

The loader also accepts the common tokenizer export that maps token text ->
id (merges, if any, are ignored); in that form tokens shaped like ``<...>`` or
``<|...|>`` are treated as special.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from scidc.errors import UnspellableText

_MARKER_RE = re.compile(r"<\|[^|<>]+\|>|</?[A-Za-z_][\w.-]*>")


def _to_bytes(text: str) -> bytes:
    return text.encode("utf-8", errors="surrogateescape")


def _to_text(data: bytes) -> str:
    return data.decode("utf-8", errors="surrogateescape")


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token-id <-> byte-string mapping."""

    tokens: tuple[bytes, ...]
    special: frozenset[int] = field(default_factory=frozenset)
    eos_id: int | None = None

    def __post_init__(self):
        for tid, tok in enumerate(self.tokens):
            if not tok and tid not in self.special:
                raise ValueError(f"token {tid} is empty but not special")
        for tid in self.special:
            if not 0 <= tid < len(self.tokens):
                raise ValueError(f"special id {tid} out of range")
        if self.eos_id is not None:
            if not 0 <= self.eos_id < len(self.tokens):
                raise ValueError(f"eos id {self.eos_id} out of range")
            if self.eos_id not in self.special:
                raise ValueError("eos token must be listed as special")

    @property
    def size(self) -> int:
        return len(self.tokens)

    def token_bytes(self, token_id: int) -> bytes:
        return self.tokens[token_id]

    def token_text(self, token_id: int) -> str:
        return _to_text(self.tokens[token_id])

    def matchable_ids(self) -> tuple[int, ...]:
        """Ids usable inside constrained spans (non-special, nonempty)."""
        return tuple(
            tid for tid, tok in enumerate(self.tokens)
            if tid not in self.special and tok
        )

    def _first_byte_index(self) -> dict[int, list[int]]:
        index: dict[int, list[int]] = {}
        for tid in self.matchable_ids():
            index.setdefault(self.tokens[tid][0], []).append(tid)
        # longest token first so greedy matching scans in preference order
        for bucket in index.values():
            bucket.sort(key=lambda t: len(self.tokens[t]), reverse=True)
        return index

    def tokenize(self, text: str | bytes) -> list[int]:
        """Spell ``text`` as token ids.

        Policy: greedy longest match at each position. If greedy hits a dead
        end the spelling falls back to a dynamic program over all token
        paths, so every spellable text tokenizes. Special tokens never
        participate.
        """
        data = _to_bytes(text) if isinstance(text, str) else bytes(text)
        index = _index_for(self)
        out: list[int] = []
        pos = 0
        while pos < len(data):
            hit = None
            for tid in index.get(data[pos], ()):
                tok = self.tokens[tid]
                if data.startswith(tok, pos):
                    hit = tid
                    break
            if hit is None:
                return self._tokenize_dp(data)
            out.append(hit)
            pos += len(self.tokens[hit])
        return out

    def _tokenize_dp(self, data: bytes) -> list[int]:
        # best[i] = (token count from i to end, token id taken at i)
        n = len(data)
        index = _index_for(self)
        best: list[tuple[int, int] | None] = [None] * (n + 1)
        best[n] = (0, -1)
        for pos in range(n - 1, -1, -1):
            for tid in index.get(data[pos], ()):
                tok = self.tokens[tid]
                nxt = pos + len(tok)
                if nxt <= n and best[nxt] is not None and data.startswith(tok, pos):
                    cand = (best[nxt][0] + 1, tid)
                    if best[pos] is None or cand[0] < best[pos][0]:
                        best[pos] = cand
        if best[0] is None:
            # report the furthest position any token cover reaches from 0
            reach = {0}
            frontier = [0]
            while frontier:
                pos = frontier.pop()
                for tid in index.get(data[pos], ()) if pos < n else ():
                    tok = self.tokens[tid]
                    nxt = pos + len(tok)
                    if nxt <= n and nxt not in reach and data.startswith(tok, pos):
                        reach.add(nxt)
                        frontier.append(nxt)
            raise UnspellableText(_to_text(data), max(reach))
        out = []
        pos = 0
        while pos < n:
            tid = best[pos][1]
            out.append(tid)
            pos += len(self.tokens[tid])
        return out

    def detokenize(self, ids: list[int] | tuple[int, ...]) -> str:
        return _to_text(b"".join(self.tokens[t] for t in ids))

    def detokenize_bytes(self, ids: list[int] | tuple[int, ...]) -> bytes:
        return b"".join(self.tokens[t] for t in ids)


def _index_for(vocab: Vocabulary) -> dict[int, list[int]]:
    idx = vocab.__dict__.get("_byte_index")
    if idx is None:
        idx = vocab._first_byte_index()
        object.__setattr__(vocab, "_byte_index", idx)
    return idx


def vocabulary_from_strings(
    tokens: list[str],
    special: set[int] | frozenset[int] = frozenset(),
    eos_id: int | None = None,
) -> Vocabulary:
    return Vocabulary(tuple(_to_bytes(t) for t in tokens), frozenset(special), eos_id)


def load_vocabulary(path: str) -> Vocabulary:
    """Load a vocabulary JSON file (either supported form)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: vocabulary document must be a JSON object")
    return vocabulary_from_json(doc, origin=path)


def vocabulary_from_json(doc: dict, origin: str = "<memory>") -> Vocabulary:
    id_keyed = {k: v for k, v in doc.items() if k not in ("special", "eos")}
    if id_keyed and all(isinstance(v, str) for v in id_keyed.values()):
        return _load_id_keyed(doc, id_keyed, origin)
    if id_keyed and all(isinstance(v, int) for v in id_keyed.values()):
        return _load_text_keyed(id_keyed, origin)
    raise ValueError(f"{origin}: unrecognized vocabulary format")


def _load_id_keyed(doc: dict, entries: dict, origin: str) -> Vocabulary:
    by_id: dict[int, bytes] = {}
    for key, text in entries.items():
        try:
            tid = int(key)
        except ValueError:
            raise ValueError(f"{origin}: non-numeric token id {key!r}") from None
        by_id[tid] = _to_bytes(text)
    if sorted(by_id) != list(range(len(by_id))):
        raise ValueError(f"{origin}: token ids must be dense in [0, size)")
    special = frozenset(int(s) for s in doc.get("special", []))
    eos = doc.get("eos")
    eos_id = int(eos) if eos is not None else None
    tokens = tuple(by_id[i] for i in range(len(by_id)))
    return Vocabulary(tokens, special, eos_id)


def _load_text_keyed(entries: dict, origin: str) -> Vocabulary:
    if sorted(entries.values()) != list(range(len(entries))):
        raise ValueError(f"{origin}: token ids must be dense in [0, size)")
    tokens: list[bytes] = [b""] * len(entries)
    special = set()
    eos_id = None
    for text, tid in entries.items():
        tokens[tid] = _to_bytes(text)
        if _MARKER_RE.fullmatch(text):
            special.add(tid)
            if text in ("</s>", "<|endoftext|>", "<eos>", "<|im_end|>") and eos_id is None:
                eos_id = tid
    return Vocabulary(tuple(tokens), frozenset(special), eos_id)
