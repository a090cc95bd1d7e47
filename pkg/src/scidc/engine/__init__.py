"""Program execution: constrained decoding, validation loops, tracing."""

from .checker import check_output, checked_bindings
from .policy import Greedy, Sample, decode_policy
from .runner import Bindings, Engine, RunResult, Termination, run_program
from .trace import (
    BacktrackPerformed,
    DecodeTrace,
    FallbackApplied,
    MaskApplied,
    StepCompleted,
    StepStarted,
    TokensEmitted,
    ValidationFailed,
)

__all__ = [
    "BacktrackPerformed",
    "Bindings",
    "DecodeTrace",
    "Engine",
    "FallbackApplied",
    "Greedy",
    "MaskApplied",
    "RunResult",
    "Sample",
    "StepCompleted",
    "StepStarted",
    "Termination",
    "TokensEmitted",
    "ValidationFailed",
    "check_output",
    "checked_bindings",
    "decode_policy",
    "run_program",
]
