"""Exception hierarchy.

Two families: :class:`ValidationError` for bad inputs (CLI exit code 2) and
:class:`NumericalError` for degenerate designs detected during estimation
(CLI exit code 3).
"""

from __future__ import annotations


class PanelError(Exception):
    """Base class for every error raised by this package."""

    def __init__(self, message: str, *, stage: str | None = None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    def __str__(self) -> str:
        if self.stage:
            return f"[{self.stage}] {self.message}"
        return self.message


class ValidationError(PanelError, ValueError):
    pass


class DimensionError(ValidationError):
    pass


class UnsupportedShapeError(ValidationError):
    pass


class InvalidPeriodError(ValidationError):
    pass


class UnbalancedPanelError(ValidationError):
    def __init__(self, message: str, *, panel_id: str | None = None, **kw):
        super().__init__(message, **kw)
        self.panel_id = panel_id


class CsvParseError(ValidationError):
    def __init__(self, message: str, *, row: int | None = None, **kw):
        super().__init__(message, **kw)
        self.row = row


class ConfigError(ValidationError):
    pass


class SerializationError(ValidationError):
    pass


class NumericalError(PanelError, ArithmeticError):
    pass


class SingularDesignError(NumericalError):
    """A Gram or design matrix is singular or too badly conditioned."""

    def __init__(self, message: str, *, index: int | None = None, matrix: str | None = None, **kw):
        super().__init__(message, **kw)
        self.index = index
        self.matrix = matrix


class TooFewSlowMoversError(SingularDesignError):
    """Local polynomial design at D = 0 is singular; ``counts`` gives the groups."""

    def __init__(self, message: str, *, counts: dict | None = None, **kw):
        if counts:
            message = f"{message}; counts: " + ", ".join(f"{k}={v}" for k, v in counts.items())
        super().__init__(message, **kw)
        self.counts = counts


class CollinearTimeShiftError(SingularDesignError):
    pass


class InsufficientMoverVariationError(SingularDesignError):
    pass


class NoMoversError(NumericalError):
    pass


class DegenerateSampleError(NumericalError):
    pass


class StudyFailedError(NumericalError):
    def __init__(self, message: str, *, diagnostics: list[str] | None = None, **kw):
        super().__init__(message, **kw)
        self.diagnostics = diagnostics or []
