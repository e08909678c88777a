"""Exception types shared across the package."""

from __future__ import annotations


class PlsStopError(Exception):
    """Base class for all package errors."""


class ZeroVarianceColumn(PlsStopError):
    def __init__(self, column: int):
        super().__init__(f"predictor column {column} has zero variance")
        self.column = column


class DimensionMismatch(PlsStopError):
    pass


class InvalidDataset(PlsStopError):
    pass


class SingularDesign(PlsStopError):
    pass


class FoldTooSmall(PlsStopError):
    pass


class DegenerateVariances(PlsStopError):
    pass


class ZeroDenominator(PlsStopError):
    pass


class InvalidArgs(PlsStopError, ValueError):
    pass


class ParseError(PlsStopError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
