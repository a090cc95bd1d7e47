"""Exception taxonomy shared across the package.

Parse/lint errors carry source positions where available; engine errors carry
the offending step name so traces stay debuggable.
"""

from __future__ import annotations


class ScidcError(Exception):
    """Base class for every error raised by this package."""


# --- rule program text format ---------------------------------------------


class RuleSyntaxError(ScidcError):
    """Malformed rule-program source. Carries 1-based line/column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class DuplicateStepName(RuleSyntaxError):
    pass


class UnknownStepKind(RuleSyntaxError):
    pass


class LintErrors(ScidcError):
    """Raised when an operation requires an ERROR-clean program and got one
    with ERROR findings attached."""

    def __init__(self, findings):
        self.findings = list(findings)
        lines = "; ".join(str(f) for f in self.findings)
        super().__init__(f"program has lint errors: {lines}")


# --- predicates -------------------------------------------------------------


class PredicateSyntaxError(ScidcError):
    pass


class PredicateTypeError(ScidcError):
    """A bound value was used numerically but does not parse as a number."""


# --- token model ------------------------------------------------------------


class UnsupportedRegexFeature(ScidcError):
    pass


class EmptyLanguage(ScidcError):
    """The constraint admits no token sequence under the given vocabulary."""


class UntokenizableOption(ScidcError):
    def __init__(self, option: str):
        super().__init__(f"option not spellable with this vocabulary: {option!r}")
        self.option = option


class UnknownState(ScidcError):
    pass


class InvalidTransition(ScidcError):
    """A token outside allowed_tokens was fed to advance(). Signals an engine
    bug: masked sampling must make this unreachable."""


class EmptyValidSet(ScidcError):
    pass


class UnspellableText(ScidcError):
    def __init__(self, text: str, at: int):
        super().__init__(f"no token covers byte {at} of {text!r}")
        self.text = text
        self.at = at


# --- decode engine ----------------------------------------------------------


class EngineError(ScidcError):
    def __init__(self, message: str, step: str | None = None):
        super().__init__(message if step is None else f"[step {step}] {message}")
        self.step = step


class UnsatisfiableConstraint(EngineError):
    """The valid-token set became empty mid-decode."""


class MaxTokensInNonAcceptingState(EngineError):
    """The step's token budget cannot reach an accepting state. Signals a
    budget/constraint mismatch in the program."""


class UnboundVariable(EngineError):
    """A predicate or guard referenced a variable with no binding. Must be
    lint-prevented; reaching it at run time is a program defect."""


class AnchorOrder(EngineError):
    """Backtrack anchor was not executed before its loop. Engine-internal
    consistency violation; lint prevents it for well-formed programs."""


# --- backends ---------------------------------------------------------------


class BackendFailure(ScidcError):
    pass


class ContextOverflow(BackendFailure):
    pass


class TransportError(BackendFailure):
    pass


class ServerError(BackendFailure):
    def __init__(self, status: int, body: str):
        super().__init__(f"server returned {status}: {body[:200]}")
        self.status = status
        self.body = body


class CapabilityError(BackendFailure):
    """Backend cannot serve the requested operation (e.g. raw logits)."""


# --- knowledge compiler -----------------------------------------------------


class GllmTransport(ScidcError):
    pass


class MalformedFrameworkReply(ScidcError):
    pass


class UnparseableProgram(ScidcError):
    pass


class RevisionRejected(ScidcError):
    def __init__(self, findings):
        self.findings = list(findings)
        super().__init__(
            "revised program rejected: " + "; ".join(str(f) for f in self.findings)
        )


# --- eval harness -----------------------------------------------------------


class ArmStripError(ScidcError):
    pass


class PackError(ScidcError):
    """A task pack is internally inconsistent or fails validation."""
