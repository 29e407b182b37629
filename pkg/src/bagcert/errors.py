"""Exception types shared across bagcert."""


class BagcertError(Exception):
    """Base class for all bagcert errors."""


class ValidationError(BagcertError, ValueError):
    """Input violates a documented precondition."""


class ParseError(ValidationError):
    """A text input could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(ValidationError):
    """A binary input does not follow the expected layout."""


class DomainError(BagcertError, ValueError):
    """Numeric argument outside the domain of a function."""


class BudgetExceeded(BagcertError):
    """An exhaustive enumeration would exceed the configured budget."""
