# naming.py
# SPDX-License-Identifier: MIT
"""Scheme labels and filesystem-safe names for per-partition outputs."""

from __future__ import annotations

import re
import unicodedata
from collections.abc import Iterable, Sequence

__all__ = ["sanitize_component", "partition_slug", "partition_filenames", "scheme_label"]

BASE_SCHEME = "base"

_UNSAFE_RX = re.compile(r"[^A-Za-z0-9_\-]+")
_UNDERSCORES_RX = re.compile(r"_{2,}")


def sanitize_component(s: str | None, *, lower: bool = True, maxlen: int = 64) -> str:
    """Reduce ``s`` to ASCII letters, digits, ``-`` and ``_``.

    Anything else becomes a single ``_``. Empty results map to ``unknown``.
    """
    if not s:
        return "unknown"
    text = unicodedata.normalize("NFKD", s).encode("ascii", "ignore").decode("ascii")
    if lower:
        text = text.lower()
    text = _UNSAFE_RX.sub("_", text).strip("_")
    text = _UNDERSCORES_RX.sub("_", text)
    return (text or "unknown")[:maxlen]


def scheme_label(keys: Sequence[str]) -> str:
    """``gender,skin_tone`` for a keyed scheme, ``base`` for no keys."""
    return ",".join(keys) if keys else BASE_SCHEME


def partition_slug(label: str) -> str:
    """Filename token for a partition label: ``male·3`` -> ``male-3``."""
    return sanitize_component(label.replace("·", "-"))


def partition_filenames(stem: str, labels: Iterable[str], suffix: str = ".csv") -> dict[str, str]:
    """Map each partition label to ``<stem>_<slug><suffix>``.

    Labels whose slugs collide get ``-2``, ``-3``... in label order, so no
    partition overwrites another's file.
    """
    names: dict[str, str] = {}
    taken: set[str] = set()
    for label in sorted(labels):
        slug = partition_slug(label)
        candidate, n = slug, 1
        while candidate in taken:
            n += 1
            candidate = f"{slug}-{n}"
        taken.add(candidate)
        names[label] = f"{stem}_{candidate}{suffix}"
    return names
