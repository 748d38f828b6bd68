# aggregate.py
# SPDX-License-Identifier: MIT
"""Template aggregation: plain averaging and k-means cluster centers.

Mean aggregation collapses a probe's features into one vector. Cluster
aggregation keeps ``min(k, |features|)`` k-means centers so a probe that
mixes several appearance modes keeps one representation per mode. The
k-sweep harness re-aggregates every probe for each k and scores the result
against one or more galleries.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .concurrency import map_ordered
from .errors import BadFeature, EmptySet, InvalidInput
from .kmeans import ForestParams, KMeansMode, Seeding, ann_kmeans
from .log import get_logger
from .metrics import Fusion, IdentReport, average_reports, evaluate_identification, score_probes
from .records import AttributeRecord, Template
from .rng import derive_seed

__all__ = [
    "AVERAGE_LABEL",
    "AggregationMethod",
    "AggregationSpec",
    "ClusterParams",
    "SweepRow",
    "mean_aggregate",
    "cluster_aggregate",
    "aggregate_template",
    "aggregate_probes",
    "gallery_scorer",
    "sweep_k",
]

log = get_logger(__name__)

AVERAGE_LABEL = "average"


class AggregationMethod(str, Enum):
    MEAN = "mean"
    CLUSTER = "cluster"


@dataclass(frozen=True, slots=True)
class AggregationSpec:
    """Aggregation method, cluster count and sweep range."""

    method: AggregationMethod = AggregationMethod.CLUSTER
    k: int = 7
    k_max_sweep: int = 20
    k_min_sweep: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", AggregationMethod(self.method))
        if self.k < 1:
            raise InvalidInput(f"k must be >= 1; got {self.k}")
        if self.k_min_sweep < 1 or self.k_max_sweep < self.k_min_sweep:
            raise InvalidInput(
                f"sweep range must satisfy 1 <= k_min <= k_max; got "
                f"{self.k_min_sweep}..{self.k_max_sweep}"
            )

    @property
    def sweep_range(self) -> range:
        return range(self.k_min_sweep, self.k_max_sweep + 1)


@dataclass(frozen=True, slots=True)
class ClusterParams:
    """k-means settings used by cluster aggregation."""

    forest: ForestParams = field(default_factory=ForestParams)
    max_iters: int = 100
    tol: float = 1e-4
    mode: KMeansMode = KMeansMode.ANN
    seeding: Seeding = Seeding.KMEANSPP


@dataclass(frozen=True, slots=True)
class SweepRow:
    """Reports for one k, keyed by gallery label plus ``average``."""

    k: int
    reports: Mapping[str, IdentReport]


def _feature_matrix(features: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    rows = [np.asarray(f, dtype=np.float64).ravel() for f in features]
    if not rows:
        raise EmptySet("aggregation needs at least one feature")
    x = np.stack(rows)
    if not np.all(np.isfinite(x)):
        raise BadFeature("features must be finite")
    return x


def mean_aggregate(
    features: Sequence[np.ndarray] | np.ndarray,
    *,
    template_id: int = 0,
    subject_id: int | None = None,
    attributes: AttributeRecord | None = None,
) -> Template:
    """Average features into a single-representation template.

    Rows are sorted lexicographically before summation so the result does
    not depend on input order.

    Raises:
        EmptySet: If ``features`` is empty.
        BadFeature: If any feature is non-finite.
    """
    x = _feature_matrix(features)
    ordered = x[np.lexsort(x.T[::-1])]
    return Template(
        template_id=template_id,
        subject_id=subject_id,
        representations=(ordered.mean(axis=0),),
        attributes=attributes or AttributeRecord(),
    )


def cluster_aggregate(
    features: Sequence[np.ndarray] | np.ndarray,
    k: int,
    params: ClusterParams | None = None,
    seed: int = 0,
    *,
    template_id: int = 0,
    subject_id: int | None = None,
    attributes: AttributeRecord | None = None,
) -> Template:
    """Represent features by ``min(k, |features|)`` k-means centers.

    A single effective cluster returns :func:`mean_aggregate` directly.

    Raises:
        EmptySet: If ``features`` is empty.
        InvalidInput: If ``k`` < 1.
    """
    if k < 1:
        raise InvalidInput(f"k must be >= 1; got {k}")
    x = _feature_matrix(features)
    effective = min(k, x.shape[0])
    if effective < k:
        log.debug("cluster_aggregate: k=%d clipped to %d feature(s)", k, effective)
    if effective == 1:
        return mean_aggregate(
            x, template_id=template_id, subject_id=subject_id, attributes=attributes
        )
    params = params or ClusterParams()
    result = ann_kmeans(
        x,
        effective,
        params.forest,
        max_iters=params.max_iters,
        tol=params.tol,
        mode=params.mode,
        seed=seed,
        seeding=params.seeding,
    )
    return Template(
        template_id=template_id,
        subject_id=subject_id,
        representations=tuple(result.centers),
        attributes=attributes or AttributeRecord(),
    )


def aggregate_template(
    raw: Template,
    method: AggregationMethod | str,
    k: int = 1,
    params: ClusterParams | None = None,
    seed: int = 0,
) -> Template:
    """Aggregate a template whose representations are its raw features."""
    method = AggregationMethod(method)
    common = {
        "template_id": raw.template_id,
        "subject_id": raw.subject_id,
        "attributes": raw.attributes,
    }
    if method is AggregationMethod.MEAN:
        return mean_aggregate(raw.representations, **common)  # type: ignore[arg-type]
    return cluster_aggregate(
        raw.representations,
        k,
        params,
        derive_seed(seed, raw.template_id, k),
        **common,  # type: ignore[arg-type]
    )


def aggregate_probes(
    probes: Sequence[Template],
    method: AggregationMethod | str,
    k: int = 1,
    params: ClusterParams | None = None,
    seed: int = 0,
    *,
    max_workers: int = 1,
) -> list[Template]:
    """Aggregate every raw probe template; output order follows ``probes``.

    Each probe draws from ``derive_seed(seed, template_id, k)``.
    """
    return map_ordered(
        list(probes),
        lambda raw: aggregate_template(raw, method, k, params, seed),
        max_workers=max_workers,
    )


Scorer = Callable[[Sequence[Template]], Mapping[str, IdentReport]]


def gallery_scorer(
    galleries: Mapping[str, Sequence[Template]],
    fusion: Fusion | str = Fusion.MAX,
    *,
    mates: Mapping[str, Mapping[int, int | None]] | None = None,
) -> Scorer:
    """Build a scorer evaluating probes against each gallery separately.

    The scorer returns one report per gallery label and, with more than one
    gallery, their element-wise mean under ``average``.
    """
    labels = sorted(galleries)

    def _score(probes: Sequence[Template]) -> dict[str, IdentReport]:
        out: dict[str, IdentReport] = {}
        for label in labels:
            table = score_probes(
                probes,
                galleries[label],
                fusion,
                mates=mates.get(label) if mates is not None else None,
            )
            out[label] = evaluate_identification(table)
        if len(labels) > 1:
            out[AVERAGE_LABEL] = average_reports([out[label] for label in labels])
        return out

    return _score


def sweep_k(
    probes: Sequence[Template],
    k_range: Sequence[int],
    scorer: Scorer,
    params: ClusterParams | None = None,
    seed: int = 0,
    *,
    max_workers: int = 1,
) -> list[SweepRow]:
    """Cluster-aggregate every probe at each k and score the result.

    Args:
        probes (Sequence[Template]): Raw probe templates whose representations
            are their individual features.
        k_range (Sequence[int]): Cluster counts, typically 1..20.
        scorer (Scorer): Maps aggregated probes to per-gallery reports.
        params (ClusterParams | None): k-means settings.
        seed (int): Base seed.
        max_workers (int): Thread cap for per-probe aggregation.

    Returns:
        list[SweepRow]: One row per k in ``k_range`` order.
    """
    rows: list[SweepRow] = []
    for k in k_range:
        aggregated = aggregate_probes(
            probes, AggregationMethod.CLUSTER, k, params, seed, max_workers=max_workers
        )
        rows.append(SweepRow(k=int(k), reports=scorer(aggregated)))
        log.info("sweep k=%d done", k)
    return rows
