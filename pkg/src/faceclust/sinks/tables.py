# tables.py
# SPDX-License-Identifier: MIT
"""CSV writers for splits, clusterings and metric tables."""
from __future__ import annotations

import csv
import os
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

from ..core.aggregate import AVERAGE_LABEL, SweepRow
from ..core.hac import Clustering
from ..core.metrics import FPIR_TARGETS, RANKS, IdentReport
from ..core.records import SplitEntry
from .atomic import atomic_text

__all__ = [
    "format_rate",
    "row_label",
    "report_columns",
    "write_splits_csv",
    "write_clustering_csv",
    "write_merge_trace_csv",
    "write_ident_csv",
    "write_cmc_csv",
    "write_sweep_csv",
    "write_rows_csv",
]


def format_rate(value: float) -> str:
    return f"{value:.10g}"


def row_label(key: str) -> str:
    """Display label for a gallery key: ``gallery1`` -> ``Gallery 1``."""
    if key == AVERAGE_LABEL:
        return "Average"
    if key.startswith("gallery") and key[len("gallery"):].isdigit():
        return f"Gallery {key[len('gallery'):]}"
    return key


def report_columns(
    ranks: Sequence[int] = RANKS,
    targets: Sequence[float] = FPIR_TARGETS,
    *,
    style: str = "table",
) -> list[str]:
    """Metric column names, ``Rank-1``/``TPIR@0.1`` or ``rank1``/``tpir_fpir_0.1``."""
    if style == "table":
        return [f"Rank-{k}" for k in ranks] + [f"TPIR@{t:g}" for t in targets]
    return [f"rank{k}" for k in ranks] + [f"tpir_fpir_{t:g}" for t in targets]


def _report_cells(report: IdentReport, ranks: Sequence[int], targets: Sequence[float]) -> list[str]:
    cells = [format_rate(report.rank_k[k]) for k in ranks]
    cells += [
        format_rate(report.tpir_at_fpir[t]) if t in report.tpir_at_fpir else "" for t in targets
    ]
    return cells


def write_splits_csv(path: str | os.PathLike[str], splits: Iterable[SplitEntry]) -> Path:
    with atomic_text(path) as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["template_id", "role", "mated_gallery_template_id"])
        for entry in splits:
            mate = entry.mated_gallery_template_id
            writer.writerow([entry.template_id, entry.role.value, "" if mate is None else mate])
    return Path(path)


def write_clustering_csv(path: str | os.PathLike[str], clustering: Clustering) -> Path:
    with atomic_text(path) as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["item_id", "cluster_id"])
        for item in sorted(clustering.labels):
            writer.writerow([item, clustering.labels[item]])
    return Path(path)


def write_merge_trace_csv(path: str | os.PathLike[str], clustering: Clustering) -> Path:
    with atomic_text(path) as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["step", "a", "b", "distance"])
        for step, merge in enumerate(clustering.merge_trace):
            writer.writerow([step, merge.a, merge.b, repr(merge.distance)])
    return Path(path)


def write_ident_csv(
    path: str | os.PathLike[str],
    reports: Mapping[str, IdentReport],
    *,
    ranks: Sequence[int] = RANKS,
    targets: Sequence[float] = FPIR_TARGETS,
) -> Path:
    """One row per gallery (then Average), columns Rank-k and TPIR@FPIR."""
    ordered = sorted(k for k in reports if k != AVERAGE_LABEL)
    if AVERAGE_LABEL in reports:
        ordered.append(AVERAGE_LABEL)
    with atomic_text(path) as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["gallery", *report_columns(ranks, targets)])
        for key in ordered:
            writer.writerow([row_label(key), *_report_cells(reports[key], ranks, targets)])
    return Path(path)


def write_cmc_csv(
    path: str | os.PathLike[str],
    curves: Mapping[str, Sequence[tuple[int, float]]],
) -> Path:
    """Plot-ready CMC points: gallery,k,rate."""
    with atomic_text(path) as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["gallery", "k", "rate"])
        for key in sorted(curves):
            for k, rate in curves[key]:
                writer.writerow([row_label(key), k, format_rate(rate)])
    return Path(path)


def write_sweep_csv(
    path: str | os.PathLike[str],
    rows: Sequence[SweepRow],
    *,
    ranks: Sequence[int] = RANKS,
    targets: Sequence[float] = FPIR_TARGETS,
) -> Path:
    """k,rank1,...,tpir_fpir_0.01 per gallery and averaged."""
    with atomic_text(path) as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["gallery", "k", *report_columns(ranks, targets, style="sweep")])
        keys = sorted({key for row in rows for key in row.reports if key != AVERAGE_LABEL})
        if any(AVERAGE_LABEL in row.reports for row in rows):
            keys.append(AVERAGE_LABEL)
        for key in keys:
            for row in rows:
                if key in row.reports:
                    writer.writerow(
                        [row_label(key), row.k, *_report_cells(row.reports[key], ranks, targets)]
                    )
    return Path(path)


def write_rows_csv(
    path: str | os.PathLike[str],
    header: Sequence[str],
    rows: Iterable[Sequence[object]],
) -> Path:
    """Write a header and rows; floats are formatted with :func:`format_rate`."""
    with atomic_text(path) as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_rate(v) if isinstance(v, float) else v for v in row])
    return Path(path)
