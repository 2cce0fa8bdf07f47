"""Exception hierarchy. The CLI maps each class to a stable exit code."""


class CausalCiteError(Exception):
    exit_code = 5


class FormatError(CausalCiteError):
    """Input does not match a declared file format."""

    exit_code = 3

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConflictError(FormatError):
    """Two input rows claim the same identity with different content."""


class ContractError(CausalCiteError, ValueError):
    exit_code = 4


class NotFoundError(CausalCiteError, KeyError):
    exit_code = 4

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "not found"


class MissingEmbeddingError(ContractError):
    """The treated paper has no confounder vector."""
