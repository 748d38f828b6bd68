# tables.py
# SPDX-License-Identifier: MIT
"""Readers for split and clustering CSVs and association JSON inputs.

Association sets JSON::

    {"positives": [...], "negatives": [...], "background": [...], "candidates": [...]}

Box JSON (one entry per frame, boxes as ``[x, y, w, h]``)::

    {"frames": [{"track": [x, y, w, h] | null,
                 "detections": [{"id": 7, "box": [x, y, w, h]}, ...]}, ...]}

Ids in both files are sample ids of the loaded dataset.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Any

from ..core.errors import FaceclustError, FormatError
from ..core.hac import Clustering
from ..core.records import Role, SplitEntry
from ..core.svmassoc import AssociationSets, Box

__all__ = ["read_splits_csv", "read_clustering_csv", "read_sets_json", "read_boxes_json"]


def _rows(path: str | os.PathLike[str], header: tuple[str, ...]) -> list[tuple[int, list[str]]]:
    name = str(path)
    with open(path, encoding="utf-8", newline="") as fp:
        reader = csv.reader(fp)
        first = next(reader, None)
        if first is None or tuple(h.strip() for h in first) != header:
            raise FormatError(f"expected header {','.join(header)}", path=name, line=1)
        out = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(
                    f"expected {len(header)} fields, got {len(row)}", path=name, line=line
                )
            out.append((line, [cell.strip() for cell in row]))
    return out


def read_splits_csv(path: str | os.PathLike[str]) -> list[SplitEntry]:
    """Parse ``template_id,role,mated_gallery_template_id`` rows."""
    entries = []
    header = ("template_id", "role", "mated_gallery_template_id")
    for line, (tid, role, mate) in _rows(path, header):
        try:
            entries.append(SplitEntry(int(tid), Role(role), int(mate) if mate else None))
        except ValueError as exc:
            raise FormatError(str(exc), path=str(path), line=line) from exc
    return entries


def read_clustering_csv(path: str | os.PathLike[str]) -> Clustering:
    """Parse ``item_id,cluster_id`` rows into a densely relabeled clustering."""
    labels: dict[int, int] = {}
    for line, (item, cluster) in _rows(path, ("item_id", "cluster_id")):
        try:
            key = int(item)
            value = int(cluster)
        except ValueError as exc:
            raise FormatError(str(exc), path=str(path), line=line) from exc
        if key in labels:
            raise FormatError(f"item {key} labeled twice", path=str(path), line=line)
        labels[key] = value
    return Clustering.from_labels(labels)


def _load_json(path: str | os.PathLike[str]) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, path=str(path), line=exc.lineno) from exc


def _id_list(payload: dict[str, Any], key: str, path: str) -> list[int]:
    raw = payload.get(key, [])
    if not isinstance(raw, list) or not all(isinstance(i, int) for i in raw):
        raise FormatError(f"{key!r} must be a list of integer ids", path=path)
    return list(raw)


def read_sets_json(path: str | os.PathLike[str]) -> tuple[AssociationSets, list[int]]:
    """Return the association sets and the candidate pool."""
    payload = _load_json(path)
    name = str(path)
    if not isinstance(payload, dict):
        raise FormatError("top-level JSON must be an object", path=name)
    try:
        sets = AssociationSets(
            positives=frozenset(_id_list(payload, "positives", name)),
            negatives=frozenset(_id_list(payload, "negatives", name)),
            background=frozenset(_id_list(payload, "background", name)),
        )
    except FormatError:
        raise
    except FaceclustError as exc:
        raise FormatError(str(exc), path=name) from exc
    return sets, _id_list(payload, "candidates", name)


def _box(raw: Any, path: str) -> Box:
    if not isinstance(raw, list) or len(raw) != 4:
        raise FormatError(f"box must be [x, y, w, h]; got {raw!r}", path=path)
    try:
        return Box(*(float(v) for v in raw))
    except (TypeError, ValueError) as exc:
        raise FormatError(str(exc), path=path) from exc


def read_boxes_json(
    path: str | os.PathLike[str],
) -> tuple[list[Box | None], list[list[tuple[int, Box]]]]:
    """Return per-frame track boxes and (detection id, box) lists."""
    payload = _load_json(path)
    name = str(path)
    frames = payload.get("frames") if isinstance(payload, dict) else None
    if not isinstance(frames, list):
        raise FormatError("expected an object with a 'frames' list", path=name)
    tracks: list[Box | None] = []
    detections: list[list[tuple[int, Box]]] = []
    for frame in frames:
        if not isinstance(frame, dict):
            raise FormatError("each frame must be an object", path=name)
        track = frame.get("track")
        tracks.append(None if track is None else _box(track, name))
        dets = []
        for det in frame.get("detections", []):
            if not isinstance(det, dict) or not isinstance(det.get("id"), int):
                raise FormatError("each detection needs an integer 'id'", path=name)
            dets.append((det["id"], _box(det.get("box"), name)))
        detections.append(dets)
    return tracks, detections
