"""Semantic exception hierarchy shared across the package.

Public functions raise these instead of bare ValueError/KeyError so callers
(CLI, service) can map failures to exit codes and HTTP statuses without
string matching.
"""


class CladError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(CladError, ValueError):
    """A field or record violates its declared domain (names the field)."""


class SchemaError(CladError):
    """A tabular file's header does not match the expected schema."""


class ParseError(CladError):
    """A cell could not be parsed; message carries row (and column)."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class DegenerateCostError(CladError):
    """Both misclassification costs are zero; no decision threshold exists."""


class DegenerateAgreementError(CladError):
    """Chance agreement is 1 (degenerate marginals); kappa is undefined."""


class ModelFormatError(CladError):
    """Model file is corrupt, truncated, or of an unsupported version."""


class TrainingError(CladError):
    """Training failed (divergence, non-finite inputs, empty search...)."""


class NotFoundError(CladError):
    """Unknown record, model, or session id."""


class ConflictError(CladError):
    """State conflict: double-decide, closed session, duplicate id."""
