# femb.py
# SPDX-License-Identifier: MIT
"""Readers for FEMB embedding files and the sample metadata CSV."""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Any

import numpy as np

from ..core.errors import FaceclustError, FormatError
from ..core.log import get_logger
from ..core.records import AttributeRecord, Dataset, Gender, Modality, Sample
from ..sinks.femb import FEMB_HEADER, FEMB_MAGIC, FEMB_VERSION, METADATA_COLUMNS, sidecar_path

__all__ = ["read_femb", "read_metadata_csv", "load_dataset"]

log = get_logger(__name__)


def read_femb(path: str | os.PathLike[str]) -> np.ndarray:
    """Read a FEMB file into a read-only (count, dim) float32 array.

    Raises:
        FormatError: On bad magic or version, a short header, a zero
            dimension, or a payload that does not hold exactly
            ``count * dim`` floats. The error carries the byte offset.
    """
    name = str(path)
    data = Path(path).read_bytes()
    if len(data) < FEMB_HEADER.size:
        raise FormatError(
            f"truncated header: {len(data)} of {FEMB_HEADER.size} bytes",
            path=name,
            offset=len(data),
        )
    magic, version, dim, count = FEMB_HEADER.unpack_from(data, 0)
    if magic != FEMB_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FEMB_MAGIC!r}", path=name, offset=0)
    if version != FEMB_VERSION:
        raise FormatError(f"unsupported version {version}", path=name, offset=4)
    if dim < 1:
        raise FormatError("dimension must be >= 1", path=name, offset=8)
    row_bytes = 4 * dim
    expected = FEMB_HEADER.size + count * row_bytes
    if len(data) < expected:
        present = (len(data) - FEMB_HEADER.size) // row_bytes
        raise FormatError(
            f"header declares {count} rows but only {present} are present",
            path=name,
            offset=FEMB_HEADER.size + present * row_bytes,
        )
    if len(data) > expected:
        raise FormatError(
            f"{len(data) - expected} trailing bytes after {count} rows", path=name, offset=expected
        )
    rows = np.frombuffer(data, dtype="<f4", count=count * dim, offset=FEMB_HEADER.size)
    return rows.reshape(count, dim).astype(np.float32)


def _optional_int(raw: str, column: str, *, path: str, line: int) -> int | None:
    raw = raw.strip()
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise FormatError(
            f"{column} must be an integer; got {raw!r}", path=path, line=line
        ) from exc


def read_metadata_csv(path: str | os.PathLike[str]) -> list[dict[str, Any]]:
    """Parse metadata rows into typed dicts (embedding not attached).

    Raises:
        FormatError: On a wrong header or an unparsable field, with the line.
    """
    name = str(path)
    rows: list[dict[str, Any]] = []
    with open(path, encoding="utf-8", newline="") as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != METADATA_COLUMNS:
            raise FormatError(f"expected header {','.join(METADATA_COLUMNS)}", path=name, line=1)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(METADATA_COLUMNS):
                raise FormatError(
                    f"expected {len(METADATA_COLUMNS)} fields, got {len(row)}", path=name, line=line
                )
            fields = dict(zip(METADATA_COLUMNS, row))
            try:
                modality = Modality(fields["modality"].strip())
                gender_raw = fields["gender"].strip()
                gender = Gender(gender_raw) if gender_raw else Gender.UNKNOWN
                attributes = AttributeRecord(
                    gender=gender,
                    skin_tone=_optional_int(fields["skin_tone"], "skin_tone", path=name, line=line),
                )
            except FormatError:
                raise
            except (ValueError, FaceclustError) as exc:
                raise FormatError(str(exc), path=name, line=line) from exc
            ids = {
                column: _optional_int(fields[column], column, path=name, line=line)
                for column in ("sample_id", "subject_id", "template_id", "media_id")
            }
            for column in ("sample_id", "template_id", "media_id"):
                if ids[column] is None:
                    raise FormatError(f"{column} is required", path=name, line=line)
            rows.append({**ids, "modality": modality, "attributes": attributes})
    return rows


def load_dataset(
    embeddings_path: str | os.PathLike[str],
    metadata_path: str | os.PathLike[str],
) -> Dataset:
    """Load FEMB vectors and metadata into a validated :class:`Dataset`.

    The provenance digest comes from the ``.meta.json`` sidecar when present.

    Raises:
        FormatError: If either file is malformed or their row counts differ.
    """
    matrix = read_femb(embeddings_path)
    meta = read_metadata_csv(metadata_path)
    if len(meta) != matrix.shape[0]:
        raise FormatError(
            f"metadata has {len(meta)} rows but embeddings hold {matrix.shape[0]}",
            path=str(metadata_path),
        )
    provenance = ""
    sidecar = sidecar_path(embeddings_path)
    if sidecar.exists():
        try:
            provenance = str(json.loads(sidecar.read_text(encoding="utf-8")).get("provenance", ""))
        except (json.JSONDecodeError, AttributeError) as exc:
            raise FormatError(f"unreadable sidecar: {exc}", path=str(sidecar)) from exc
    samples = tuple(Sample(embedding=matrix[i], **row) for i, row in enumerate(meta))
    dataset = Dataset(samples=samples, dimension=int(matrix.shape[1]), provenance=provenance)
    log.info("Loaded %d samples (d=%d) from %s", len(dataset), dataset.dimension, embeddings_path)
    return dataset
