# femb.py
# SPDX-License-Identifier: MIT
"""Writers for the FEMB embedding file and the sample metadata CSV.

FEMB layout: ``b"FEMB"``, then little-endian u32 version (1), u32
dimension, u64 row count, then ``count * dim`` little-endian float32
values in row-major order. Rows follow metadata order.
"""
from __future__ import annotations

import csv
import os
import struct
from collections.abc import Iterable
from pathlib import Path

import numpy as np

from ..core.log import get_logger
from ..core.records import Dataset, Sample
from .atomic import atomic_binary, atomic_text, write_json

__all__ = [
    "FEMB_MAGIC",
    "FEMB_VERSION",
    "FEMB_HEADER",
    "METADATA_COLUMNS",
    "write_femb",
    "write_metadata_csv",
    "save_dataset",
    "sidecar_path",
]

log = get_logger(__name__)

FEMB_MAGIC = b"FEMB"
FEMB_VERSION = 1
FEMB_HEADER = struct.Struct("<4sIIQ")
METADATA_COLUMNS = (
    "sample_id",
    "subject_id",
    "template_id",
    "media_id",
    "modality",
    "gender",
    "skin_tone",
)


def sidecar_path(embeddings_path: str | os.PathLike[str]) -> Path:
    """Provenance sidecar written next to a FEMB file."""
    p = Path(embeddings_path)
    return p.with_name(f"{p.name}.meta.json")


def write_femb(path: str | os.PathLike[str], matrix: np.ndarray) -> Path:
    """Write an (n, d) matrix as FEMB."""
    rows = np.ascontiguousarray(matrix, dtype="<f4")
    if rows.ndim != 2:
        raise ValueError(f"expected an (n, d) matrix; got shape {rows.shape}")
    count, dim = rows.shape
    with atomic_binary(path) as fp:
        fp.write(FEMB_HEADER.pack(FEMB_MAGIC, FEMB_VERSION, dim, count))
        fp.write(rows.tobytes(order="C"))
    return Path(path)


def _blank(value: object) -> str:
    return "" if value is None else str(value)


def write_metadata_csv(path: str | os.PathLike[str], samples: Iterable[Sample]) -> Path:
    """Write one metadata row per sample; UNKNOWN values are empty fields."""
    with atomic_text(path) as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(METADATA_COLUMNS)
        for s in samples:
            gender = s.attributes.value_of("gender")
            writer.writerow(
                [
                    s.sample_id,
                    _blank(s.subject_id),
                    s.template_id,
                    s.media_id,
                    s.modality.value,
                    gender.value if gender is not None else "",
                    _blank(s.attributes.skin_tone),
                ]
            )
    return Path(path)


def save_dataset(
    dataset: Dataset,
    embeddings_path: str | os.PathLike[str],
    metadata_path: str | os.PathLike[str],
) -> tuple[Path, Path]:
    """Write a dataset as FEMB + metadata CSV plus a provenance sidecar."""
    write_femb(embeddings_path, dataset.matrix())
    write_metadata_csv(metadata_path, dataset.samples)
    write_json(
        sidecar_path(embeddings_path),
        {"count": len(dataset), "dimension": dataset.dimension, "provenance": dataset.provenance},
    )
    log.info("Saved %d samples (d=%d) to %s", len(dataset), dataset.dimension, embeddings_path)
    return Path(embeddings_path), Path(metadata_path)
