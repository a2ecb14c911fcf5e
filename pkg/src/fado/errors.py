"""Exception types raised across the package.

``FadoValidationError`` and its subclasses signal bad user input (the CLI maps
them to exit code 1); anything else escaping a command is a runtime failure.
"""


class FadoValidationError(ValueError):
    """Input violates a documented precondition."""


class SchemaError(FadoValidationError):
    """A column named in a schema is missing or roles overlap."""


class ParseError(FadoValidationError):
    """A CSV cell could not be parsed."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column
