"""Exception hierarchy.

``DataError`` subclasses describe problems with the input data (the CLI maps
them to exit status 2); argument problems raise plain ``ValueError``.
"""


class TradeplexError(Exception):
    """Base class for all package errors."""


class DataError(TradeplexError):
    """The data cannot support the requested computation."""


class StructuralError(DataError, ValueError):
    """Matrices of mismatched shape or invalid structure."""


class EmptyLayerError(DataError):
    """A layer-year has no positive weight."""

    def __init__(self, year, layer, message=None):
        self.year = year
        self.layer = layer
        super().__init__(message or f"layer {layer!r} in year {year} is empty")


class ParseError(DataError):
    def __init__(self, line, column, message):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column!r}: {message}")


class ValidationError(DataError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class IngestionError(DataError):
    pass


class ConflictError(DataError):
    """Duplicate flow records under the ``error`` duplicate policy."""

    def __init__(self, keys):
        self.keys = list(keys)
        shown = ", ".join(map(str, self.keys[:10]))
        more = "" if len(self.keys) <= 10 else f" (+{len(self.keys) - 10} more)"
        super().__init__(f"duplicate flow records: {shown}{more}")


class ConvergenceError(DataError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"power iteration did not converge in {iterations} iterations "
            f"(L1 residual {residual:.3e})"
        )
