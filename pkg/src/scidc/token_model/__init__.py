"""Vocabulary model and bottom-layer constraint compilation.

Constraints compile in two stages: regex or option set -> byte-level DFA,
then DFA x vocabulary product -> token automaton whose per-state transition
sets are the valid-token sets used for logit masking.
"""

from scidc.token_model.automaton import (
    TokenAutomaton,
    compile_regex,
    compile_select,
)
from scidc.token_model.mask import FORBIDDEN, MaskedLogits, apply_mask
from scidc.token_model.vocab import (
    Vocabulary,
    load_vocabulary,
    vocabulary_from_json,
    vocabulary_from_strings,
)

__all__ = [
    "FORBIDDEN",
    "MaskedLogits",
    "TokenAutomaton",
    "Vocabulary",
    "apply_mask",
    "compile_regex",
    "compile_select",
    "load_vocabulary",
    "vocabulary_from_json",
    "vocabulary_from_strings",
]
