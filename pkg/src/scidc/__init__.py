"""scidc: compile domain knowledge into three-layer rule programs and execute
them as hard constraints over a token-level decoder."""

__version__ = "0.1.0"
