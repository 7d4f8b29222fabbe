"""Exception hierarchy shared by every module.

The CLI maps these onto its exit codes, so keep the split between
input problems (``ValidationError``/``DomainError``) and numerical
failures (``NumericalError``) intact.
"""


class IrsGameError(Exception):
    """Base class for all package errors."""


class ValidationError(IrsGameError, ValueError):
    """A configuration or input violates a documented invariant."""


class ScenarioParseError(ValidationError):
    """The scenario file could not be parsed as a key/value tree."""


class DomainError(IrsGameError, ValueError):
    """A function was evaluated outside its mathematical domain."""


class NumericalError(IrsGameError, RuntimeError):
    """An algorithm failed numerically."""


class BlowUpError(NumericalError):
    """An integration diverged (usually the step is too large)."""


class NonConvergenceError(NumericalError):
    """An iteration exhausted its budget before meeting its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
