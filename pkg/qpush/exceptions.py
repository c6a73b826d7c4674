"""
Domain errors for the quantized push-sum simulator.

Every error carries a human-readable ``detail`` and a ``status_code`` so the
HTTP layer can turn it into an HTTPException without a lookup table.
"""

from typing import Dict, List, Optional


class QPushError(Exception):
    """Base class for all simulator errors."""

    status_code: int = 400

    def __init__(self, detail: str, status_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if status_code is not None:
            self.status_code = status_code


class InvalidGraph(QPushError):
    pass


class NotStronglyConnected(QPushError):
    pass


class NoConvergence(QPushError):
    status_code = 422


class DegenerateSpectrum(QPushError):
    status_code = 422


class MalformedMessage(QPushError):
    pass


class DimensionMismatch(QPushError):
    pass


class ReplicaDivergence(QPushError):
    status_code = 500


class EmptyDataset(QPushError):
    pass


class NonPositiveValues(QPushError):
    status_code = 422


class OutputError(QPushError):
    status_code = 500


class ConfigInvalid(QPushError):
    """Raised with one message per offending config field."""

    def __init__(self, errors: Dict[str, str]):
        self.errors = errors
        lines: List[str] = [f"{field}: {message}" for field, message in errors.items()]
        super().__init__("Invalid experiment config - " + "; ".join(lines))
