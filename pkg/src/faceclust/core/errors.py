# errors.py
# SPDX-License-Identifier: MIT
"""Exception hierarchy shared by all faceclust modules.

Every error derives from :class:`FaceclustError`, itself a ``ValueError``,
so callers that only care about "bad input" can catch one type while the
CLI can still tell usage problems (:class:`InvalidConfig`) from data
problems (everything else).
"""

from __future__ import annotations

__all__ = [
    "FaceclustError",
    "EmptyTemplate",
    "DimensionMismatch",
    "ZeroVector",
    "FormatError",
    "InvalidStop",
    "EmptyInput",
    "InvalidK",
    "EmptySet",
    "EmptyClass",
    "BadFeature",
    "MissingLabel",
    "InvalidInput",
    "NoMatedProbes",
    "NotOpenSet",
    "InvalidConfig",
]


class FaceclustError(ValueError):
    """Base class for all faceclust errors."""


class EmptyTemplate(FaceclustError):
    """Raised when a template has no samples to average."""


class DimensionMismatch(FaceclustError):
    """Raised when vectors that must share a dimension do not."""


class ZeroVector(FaceclustError):
    """Raised when a direction is requested for a zero-norm vector."""


class FormatError(FaceclustError):
    """Raised when an on-disk artifact does not match its declared format.

    Attributes:
        path (str | None): File that failed to parse.
        offset (int | None): Byte offset of the first offending byte.
        line (int | None): 1-based line number for text formats.
    """

    def __init__(
        self,
        message: str,
        *,
        path: str | None = None,
        offset: int | None = None,
        line: int | None = None,
    ) -> None:
        self.path = path
        self.offset = offset
        self.line = line
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte {offset}")
        if line is not None:
            where.append(f"line {line}")
        full = f"{message} ({', '.join(where)})" if where else message
        super().__init__(full)


class InvalidStop(FaceclustError):
    """Raised when a clustering stop criterion cannot be met."""


class EmptyInput(FaceclustError):
    """Raised when an algorithm receives no items."""


class InvalidK(FaceclustError):
    """Raised when a requested cluster count is outside 1..n."""


class EmptySet(FaceclustError):
    """Raised when an aggregation receives no features."""


class EmptyClass(FaceclustError):
    """Raised when an SVM training class has no samples."""


class BadFeature(FaceclustError):
    """Raised when a feature vector contains NaN or infinity."""


class MissingLabel(FaceclustError):
    """Raised when an item lacks a ground-truth class."""


class InvalidInput(FaceclustError):
    """Raised when a scalar argument is outside its documented domain."""


class NoMatedProbes(FaceclustError):
    """Raised when rank metrics are requested without any mated probe."""


class NotOpenSet(FaceclustError):
    """Raised when FPIR is requested for a table without non-mated probes."""


class InvalidConfig(FaceclustError):
    """Raised when a run configuration holds out-of-domain values."""
