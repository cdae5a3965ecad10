"""Exception types shared across the package."""


class SignTNError(Exception):
    """Base class for all package errors."""


class ArgumentError(SignTNError, ValueError):
    """An argument is outside the domain an operation accepts."""


class ContractError(SignTNError, ValueError):
    """Legs paired for contraction have mismatched dimensions."""


class SizeError(SignTNError, RuntimeError):
    """An exact computation would exceed its size guard."""


class ConfigError(SignTNError, ValueError):
    """An experiment configuration failed validation.

    ``field`` names the offending configuration entry.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class FormatError(SignTNError, ValueError):
    """A result file lacks the columns an operation expects."""
