"""Domain error hierarchy.

Every error carries a stable ``code`` used by the CLI (stderr) and the
HTTP service ({code, message, detail} bodies), so the two surfaces stay
in sync without mapping tables.
"""

from __future__ import annotations


class CropSelectError(Exception):
    """Base class for all domain errors."""

    code = "Error"

    def __init__(self, message: str, detail: str | None = None):
        super().__init__(message)
        self.message = message
        self.detail = detail

    def to_wire(self) -> dict:
        return {"code": self.code, "message": self.message, "detail": self.detail}


class SchemaSyntaxError(CropSelectError):
    """Malformed criteria-taxonomy document; carries line/column."""

    code = "Syntax"

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class NotFoundError(CropSelectError):
    code = "NotFound"

    def __init__(self, message: str, suggestions: list[str] | None = None):
        detail = None
        if suggestions:
            detail = "did you mean: " + ", ".join(suggestions)
        super().__init__(message, detail)
        self.suggestions = suggestions or []


class ValidationError(CropSelectError):
    code = "Validation"


class SchemaMismatchError(CropSelectError):
    code = "SchemaMismatch"


class FormatError(CropSelectError):
    code = "Format"


class DuplicateIdError(CropSelectError):
    code = "DuplicateId"


class UnresolvedTargetError(CropSelectError):
    code = "UnresolvedTarget"


class KindMismatchError(CropSelectError):
    code = "KindMismatch"


class ArityError(CropSelectError):
    code = "Arity"


class ClockSkewError(CropSelectError):
    code = "ClockSkew"


class ConflictError(CropSelectError):
    code = "Conflict"


class NothingToRelaxError(CropSelectError):
    code = "NothingToRelax"


class StoreError(CropSelectError):
    code = "Store"
