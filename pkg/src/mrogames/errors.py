"""Exception types shared across the package."""

from __future__ import annotations


class MrogamesError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(MrogamesError):
    """An argument violates an operation's preconditions."""


class DimensionMismatchError(MrogamesError):
    """Shapes of policies, mixtures or matrices do not line up.

    The message names the offending object and index.
    """


class UnsupportedConfigurationError(MrogamesError):
    """A structurally valid configuration that the implementation rejects."""


class InvalidStateError(MrogamesError):
    """An operation was invoked in a state where it has no defined result."""


class DuplicatePolicyError(MrogamesError):
    """A policy identical to a registered one was offered for registration."""

    def __init__(self, player: str, index: int):
        self.player = player
        self.index = index
        super().__init__(
            f"policy is identical to {player} registry entry {index}"
        )


class SolverError(MrogamesError):
    """The linear-programming solver failed; carries the residuals."""

    def __init__(self, message: str, residuals: dict[str, float] | None = None):
        self.residuals = dict(residuals or {})
        if self.residuals:
            detail = ", ".join(f"{k}={v:.3e}" for k, v in self.residuals.items())
            message = f"{message} ({detail})"
        super().__init__(message)


class StateSpaceCapError(MrogamesError):
    """An enumerated state space exceeds the configured cap."""

    def __init__(self, required: int, cap: int):
        self.required = required
        self.cap = cap
        super().__init__(
            f"enumerated state space needs {required} states, cap is {cap}"
        )


class ConfigError(MrogamesError):
    """A run configuration failed validation; carries the field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class ParseError(MrogamesError):
    """A structured-text file could not be parsed."""

    def __init__(self, source: str, line: int, message: str):
        self.source = source
        self.line = line
        super().__init__(f"{source}:{line}: {message}")
