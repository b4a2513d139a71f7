"""Exception hierarchy shared by all sewkit modules."""

from __future__ import annotations


class SewkitError(Exception):
    """Base class for all library errors."""


class PreconditionError(SewkitError):
    """An operation was invoked on inputs that violate its contract.

    Carries a machine-readable ``reason`` slug plus free-form detail so the
    CLI can map it to exit code 2.
    """

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}: {detail}" if detail else reason)


class NonConvergenceError(SewkitError):
    """A series or iteration failed its convergence check."""


class BootstrapError(SewkitError):
    """Multiplicative refinement blew past its magnitude ceiling.

    Raised when the running supremum of iterate magnitudes exceeds the
    configured ceiling, which signals that the interval is too long for the
    germ's growth; retry with :func:`sewkit.multiplicative.windowed_sew`
    on shorter windows.
    """

    def __init__(self, message: str, level: int, magnitude: float):
        self.level = level
        self.magnitude = magnitude
        super().__init__(message)


class GermEvaluationError(SewkitError):
    """A germ evaluator raised; the offending interval is attached."""

    def __init__(self, a: float, b: float, cause: BaseException):
        self.interval = (a, b)
        super().__init__(f"germ evaluation failed on ({a!r}, {b!r}): {cause!r}")
