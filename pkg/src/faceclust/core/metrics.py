# metrics.py
# SPDX-License-Identifier: MIT
"""Clustering and open-set identification metrics.

Pairwise precision/recall/F-measure score a clustering against ground-truth
classes. Probe-vs-gallery score tables feed the rank-k cumulative match
characteristic and TPIR at fixed FPIR operating points.

Conventions:

- a mated probe's rank is ``1 + #{other gallery entries scoring >= the
  mated entry}``, so ties rank pessimistically;
- FPIR thresholds use each non-mated probe's top-1 score; TPIR counts a
  mated probe only when its mated entry is rank 1 and clears the threshold.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInput,
    InvalidInput,
    MissingLabel,
    NoMatedProbes,
    NotOpenSet,
)
from .hac import Clustering
from .log import get_logger
from .records import Template
from .vectors import normalize_rows

__all__ = [
    "RANKS",
    "FPIR_TARGETS",
    "Fusion",
    "PairwiseScores",
    "ScoreTable",
    "IdentReport",
    "pairwise_prf",
    "f_beta",
    "score_probes",
    "probe_ranks",
    "cmc",
    "cmc_curve",
    "tpir_fpir",
    "evaluate_identification",
    "average_reports",
]

log = get_logger(__name__)

RANKS: tuple[int, ...] = (1, 5, 10, 25, 50)
FPIR_TARGETS: tuple[float, ...] = (0.1, 0.01)


class Fusion(str, Enum):
    MAX = "max"
    MEAN = "mean"


@dataclass(frozen=True, slots=True)
class PairwiseScores:
    precision: float
    recall: float
    f1: float


def _pairs(counts: Iterable[int]) -> int:
    return sum(c * (c - 1) // 2 for c in counts)


def pairwise_prf(
    pred: Clustering | Mapping[int, int],
    truth: Mapping[int, Hashable | None],
) -> PairwiseScores:
    """Pairwise precision, recall and F1 of a clustering.

    Counts come from the cluster/class contingency table, so the cost is
    linear in the item count. An empty pair set yields 1 for its ratio.

    Raises:
        MissingLabel: If a clustered item has no ground-truth class.
    """
    labels = pred.labels if isinstance(pred, Clustering) else pred
    cells: Counter[tuple[int, Hashable]] = Counter()
    for item, cluster in labels.items():
        cls = truth.get(item)
        if cls is None:
            raise MissingLabel(f"item {item} has no ground-truth class")
        cells[(cluster, cls)] += 1
    cluster_sizes: Counter[int] = Counter()
    class_sizes: Counter[Hashable] = Counter()
    for (cluster, cls), count in cells.items():
        cluster_sizes[cluster] += count
        class_sizes[cls] += count

    same_both = _pairs(cells.values())
    same_cluster = _pairs(cluster_sizes.values())
    same_class = _pairs(class_sizes.values())
    precision = same_both / same_cluster if same_cluster else 1.0
    recall = same_both / same_class if same_class else 1.0
    return PairwiseScores(precision, recall, f_beta(precision, recall, 1.0))


def f_beta(p: float, r: float, beta: float = 1.0) -> float:
    """Weighted harmonic mean ``(β²+1)pr / (β²p + r)``; 0 when undefined.

    Raises:
        InvalidInput: If p or r is outside [0, 1] or beta <= 0.
    """
    if not (0.0 <= p <= 1.0) or not (0.0 <= r <= 1.0):
        raise InvalidInput(f"precision and recall must lie in [0, 1]; got p={p}, r={r}")
    if not beta > 0.0:
        raise InvalidInput(f"beta must be > 0; got {beta}")
    b2 = beta * beta
    denom = b2 * p + r
    if denom == 0.0:
        return 0.0
    return (b2 + 1.0) * p * r / denom


@dataclass(frozen=True, slots=True)
class ScoreTable:
    """Probe x gallery similarity matrix with mated annotations.

    Attributes:
        probe_ids (tuple[int, ...]): Probe template ids (row order).
        gallery_ids (tuple[int, ...]): Gallery template ids (column order).
        scores (np.ndarray): (P, G) float64 scores, higher is more similar.
        mated (tuple[int | None, ...]): Mated gallery id per probe, None for
            non-mated (open-set) probes.
    """

    probe_ids: tuple[int, ...]
    gallery_ids: tuple[int, ...]
    scores: np.ndarray
    mated: tuple[int | None, ...]

    def __post_init__(self) -> None:
        scores = np.array(self.scores, dtype=np.float64)
        object.__setattr__(self, "probe_ids", tuple(int(p) for p in self.probe_ids))
        object.__setattr__(self, "gallery_ids", tuple(int(g) for g in self.gallery_ids))
        object.__setattr__(self, "mated", tuple(self.mated))
        if scores.shape != (len(self.probe_ids), len(self.gallery_ids)):
            raise DimensionMismatch(
                f"scores shape {scores.shape} does not match "
                f"{len(self.probe_ids)} probes x {len(self.gallery_ids)} gallery"
            )
        if len(self.mated) != len(self.probe_ids):
            raise InvalidInput("one mated entry is required per probe")
        if not self.gallery_ids:
            raise EmptyInput("gallery is empty")
        if not np.all(np.isfinite(scores)):
            raise InvalidInput("scores must be finite")
        gallery = set(self.gallery_ids)
        for probe, mate in zip(self.probe_ids, self.mated):
            if mate is not None and mate not in gallery:
                raise InvalidInput(f"probe {probe}: mated id {mate} is not in the gallery")
        scores.flags.writeable = False
        object.__setattr__(self, "scores", scores)

    def mated_columns(self) -> np.ndarray:
        """Column index of each probe's mate, -1 for non-mated probes."""
        col = {g: i for i, g in enumerate(self.gallery_ids)}
        return np.array([col[m] if m is not None else -1 for m in self.mated], dtype=np.int64)

    @property
    def num_mated(self) -> int:
        return sum(m is not None for m in self.mated)

    @property
    def num_nonmated(self) -> int:
        return len(self.mated) - self.num_mated


@dataclass(frozen=True, slots=True)
class IdentReport:
    """Rank-k rates and TPIR at FPIR operating points.

    ``tpir_at_fpir`` is empty for closed-set tables.
    """

    rank_k: Mapping[int, float]
    tpir_at_fpir: Mapping[float, float] = field(default_factory=dict)
    num_mated: int = 0
    num_nonmated: int = 0


def score_probes(
    probes: Sequence[Template],
    gallery: Sequence[Template],
    fusion: Fusion | str = Fusion.MAX,
    *,
    mates: Mapping[int, int | None] | None = None,
) -> ScoreTable:
    """Cosine-score every probe representation against every gallery template.

    Each gallery template contributes one representation; a probe row is
    the max (or mean) over its representations.

    Args:
        probes (Sequence[Template]): Probe templates (any representation count).
        gallery (Sequence[Template]): Gallery templates, one representation each.
        fusion (Fusion | str): Reduction over probe representations.
        mates (Mapping[int, int | None] | None): Explicit mated gallery id per
            probe id. When omitted, the mate is the first gallery template
            with the probe's subject id.

    Raises:
        EmptyInput: If the gallery is empty.
        DimensionMismatch: If dimensions differ.
        ZeroVector: If any representation has zero norm.
    """
    fusion = Fusion(fusion)
    if not gallery:
        raise EmptyInput("gallery is empty")
    for g in gallery:
        if len(g.representations) != 1:
            raise InvalidInput(
                f"gallery template {g.template_id} has {len(g.representations)} representations"
            )
    dim = gallery[0].dimension
    g_unit = normalize_rows(np.stack([g.representations[0] for g in gallery]))
    if g_unit.shape[1] != dim or any(g.dimension != dim for g in gallery):
        raise DimensionMismatch("gallery templates differ in dimension")

    rows = np.empty((len(probes), len(gallery)), dtype=np.float64)
    for row, probe in enumerate(probes):
        if probe.dimension != dim:
            raise DimensionMismatch(
                f"probe {probe.template_id} has dimension {probe.dimension}, gallery has {dim}"
            )
        sims = np.clip(normalize_rows(probe.matrix()) @ g_unit.T, -1.0, 1.0)
        rows[row] = sims.max(axis=0) if fusion is Fusion.MAX else sims.mean(axis=0)

    if mates is None:
        first_by_subject: dict[int, int] = {}
        for g in gallery:
            if g.subject_id is not None:
                first_by_subject.setdefault(g.subject_id, g.template_id)
        mated = tuple(
            first_by_subject.get(p.subject_id) if p.subject_id is not None else None
            for p in probes
        )
    else:
        mated = tuple(mates.get(p.template_id) for p in probes)
    return ScoreTable(
        probe_ids=tuple(p.template_id for p in probes),
        gallery_ids=tuple(g.template_id for g in gallery),
        scores=rows,
        mated=mated,
    )


def probe_ranks(table: ScoreTable) -> np.ndarray:
    """Pessimistic rank of every mated probe, in probe order.

    Raises:
        NoMatedProbes: If no probe has a mate.
    """
    cols = table.mated_columns()
    rows = np.flatnonzero(cols >= 0)
    if rows.size == 0:
        raise NoMatedProbes("no probe has a mated gallery template")
    mated_scores = table.scores[rows, cols[rows]]
    # The mated entry itself always satisfies >=; it accounts for the leading 1.
    return (table.scores[rows] >= mated_scores[:, None]).sum(axis=1).astype(np.int64)


def cmc(table: ScoreTable, ranks: Sequence[int] = RANKS) -> dict[int, float]:
    """Rank-k identification rate over mated probes for each k in ``ranks``."""
    r = probe_ranks(table)
    return {int(k): float(np.count_nonzero(r <= k)) / r.size for k in ranks}


def cmc_curve(table: ScoreTable) -> list[tuple[int, float]]:
    """Full CMC curve for k = 1..|gallery|."""
    r = probe_ranks(table)
    counts = np.bincount(r, minlength=len(table.gallery_ids) + 1)[1:]
    cumulative = np.cumsum(counts)[: len(table.gallery_ids)]
    return [(k + 1, float(c) / r.size) for k, c in enumerate(cumulative)]


def _threshold(nonmated_top: np.ndarray, target: float) -> float:
    allowed = math.floor(target * nonmated_top.size + 1e-9)
    if allowed >= nonmated_top.size:
        return -math.inf
    descending = np.sort(nonmated_top)[::-1]
    return float(np.nextafter(descending[allowed], np.inf))


def tpir_fpir(
    table: ScoreTable,
    fpir_targets: Sequence[float] = FPIR_TARGETS,
) -> dict[float, float]:
    """TPIR at each FPIR target.

    The threshold τ is the smallest value at which at most
    ``floor(target * N_nonmated)`` non-mated top-1 scores reach τ.

    Raises:
        NotOpenSet: If every probe is mated.
        NoMatedProbes: If no probe is mated.
    """
    cols = table.mated_columns()
    nonmated = cols < 0
    if not np.any(nonmated):
        raise NotOpenSet("TPIR at FPIR needs at least one non-mated probe")
    if np.all(nonmated):
        raise NoMatedProbes("TPIR at FPIR needs at least one mated probe")
    nonmated_top = table.scores[nonmated].max(axis=1)
    rows = np.flatnonzero(~nonmated)
    mated_scores = table.scores[rows, cols[rows]]
    rank_one = probe_ranks(table) == 1

    out: dict[float, float] = {}
    for target in fpir_targets:
        if not 0.0 <= target <= 1.0:
            raise InvalidInput(f"FPIR target must lie in [0, 1]; got {target}")
        tau = _threshold(nonmated_top, target)
        hits = np.count_nonzero(rank_one & (mated_scores >= tau))
        out[float(target)] = float(hits) / rows.size
    return out


def evaluate_identification(
    table: ScoreTable,
    *,
    ranks: Sequence[int] = RANKS,
    fpir_targets: Sequence[float] = FPIR_TARGETS,
) -> IdentReport:
    """Rank-k CMC plus TPIR@FPIR; closed-set tables report no TPIR."""
    rank_k = cmc(table, ranks)
    tpir: dict[float, float] = {}
    if table.num_nonmated:
        tpir = tpir_fpir(table, fpir_targets)
    else:
        log.warning("Score table has no non-mated probes; TPIR at FPIR is not reported.")
    return IdentReport(
        rank_k=rank_k,
        tpir_at_fpir=tpir,
        num_mated=table.num_mated,
        num_nonmated=table.num_nonmated,
    )


def average_reports(reports: Sequence[IdentReport]) -> IdentReport:
    """Element-wise mean of reports over the keys they all share."""
    if not reports:
        raise EmptyInput("average_reports needs at least one report")
    rank_keys = sorted(set.intersection(*(set(r.rank_k) for r in reports)))
    tpir_keys = sorted(
        set.intersection(*(set(r.tpir_at_fpir) for r in reports)), reverse=True
    )
    n = len(reports)
    return IdentReport(
        rank_k={k: sum(r.rank_k[k] for r in reports) / n for k in rank_keys},
        tpir_at_fpir={t: sum(r.tpir_at_fpir[t] for r in reports) / n for t in tpir_keys},
        num_mated=sum(r.num_mated for r in reports),
        num_nonmated=sum(r.num_nonmated for r in reports),
    )
