# atomic.py
# SPDX-License-Identifier: MIT
"""Write-to-temp-then-rename file handles shared by every writer."""
from __future__ import annotations

import contextlib
import json
import os
from collections.abc import Iterator, Mapping
from pathlib import Path
from typing import IO, Any, Self

__all__ = ["AtomicFile", "atomic_text", "atomic_binary", "write_json"]


class AtomicFile:
    """File handle that only appears at its final path once closed cleanly.

    Data goes to ``<name>.tmp`` beside the destination; a clean close moves
    it into place with :func:`os.replace`, an exception discards it.
    """

    def __init__(self, out_path: str | os.PathLike[str], *, binary: bool = False) -> None:
        self._path = Path(out_path)
        self._binary = binary
        self._tmp_path: Path | None = None
        self._fp: IO[Any] | None = None

    @property
    def path(self) -> Path:
        return self._path

    def open(self) -> IO[Any]:
        """Create the temp file and return its handle."""
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._tmp_path = self._path.parent / f"{self._path.name}.tmp"
        if self._binary:
            self._fp = open(self._tmp_path, "wb")
        else:
            self._fp = open(self._tmp_path, "w", encoding="utf-8", newline="")
        return self._fp

    def close(self, *, commit: bool = True) -> None:
        """Close the handle and move (or discard) the temp file."""
        if not self._fp:
            return
        try:
            self._fp.close()
        finally:
            self._fp = None
        if self._tmp_path is None:
            return
        if commit:
            os.replace(self._tmp_path, self._path)
        else:
            with contextlib.suppress(OSError):
                self._tmp_path.unlink()
        self._tmp_path = None

    def __enter__(self) -> Self:
        self.open()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close(commit=exc_type is None)

    @property
    def handle(self) -> IO[Any]:
        assert self._fp is not None
        return self._fp


@contextlib.contextmanager
def atomic_text(path: str | os.PathLike[str]) -> Iterator[IO[str]]:
    with AtomicFile(path) as af:
        yield af.handle


@contextlib.contextmanager
def atomic_binary(path: str | os.PathLike[str]) -> Iterator[IO[bytes]]:
    with AtomicFile(path, binary=True) as af:
        yield af.handle


def write_json(path: str | os.PathLike[str], payload: Mapping[str, Any]) -> Path:
    """Write ``payload`` as sorted, indented JSON with a trailing newline."""
    with atomic_text(path) as fp:
        fp.write(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    return Path(path)
