# hac.py
# SPDX-License-Identifier: MIT
"""Hierarchical agglomerative clustering.

Every item starts as its own cluster; the closest pair of clusters under
the chosen linkage is merged until a target cluster count is reached or
no pair lies within a distance threshold. Inter-cluster distances are kept
in a full float64 matrix and updated with the Lance-Williams recurrence;
a per-row nearest-distance cache keeps most merge steps linear in n.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DimensionMismatch, EmptyInput, InvalidStop, MissingLabel, ZeroVector
from .log import get_logger

__all__ = [
    "Linkage",
    "Metric",
    "LinkageSpec",
    "Merge",
    "Clustering",
    "TIE_TOLERANCE",
    "distance_matrix",
    "hac_cluster",
    "squared_error",
]

log = get_logger(__name__)

TIE_TOLERANCE = 1e-12
_ROW_CHUNK = 1024


class Linkage(str, Enum):
    SINGLE = "single"
    COMPLETE = "complete"
    AVERAGE = "average"


class Metric(str, Enum):
    COSINE = "cosine"
    EUCLIDEAN = "euclidean"


@dataclass(frozen=True, slots=True)
class LinkageSpec:
    """Linkage, metric and stop criterion of one clustering run.

    Exactly one of ``num_clusters`` (stop at K clusters) and ``threshold``
    (merge while the closest pair is within τ) must be set.
    """

    linkage: Linkage = Linkage.AVERAGE
    metric: Metric = Metric.COSINE
    num_clusters: int | None = None
    threshold: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "linkage", Linkage(self.linkage))
        object.__setattr__(self, "metric", Metric(self.metric))
        if (self.num_clusters is None) == (self.threshold is None):
            raise InvalidStop("set exactly one of num_clusters and threshold")
        if self.num_clusters is not None and self.num_clusters < 1:
            raise InvalidStop(f"num_clusters must be >= 1; got {self.num_clusters}")
        if self.threshold is not None and not self.threshold >= 0.0:
            raise InvalidStop(f"threshold must be >= 0; got {self.threshold}")

    @property
    def stops_at_count(self) -> bool:
        return self.num_clusters is not None

    def with_num_clusters(self, k: int) -> LinkageSpec:
        return LinkageSpec(self.linkage, self.metric, num_clusters=k)


@dataclass(frozen=True, slots=True)
class Merge:
    """One merge step; clusters are named by their smallest item id."""

    a: int
    b: int
    distance: float


@dataclass(frozen=True, slots=True)
class Clustering:
    """Partition of item ids into dense cluster labels.

    Attributes:
        labels (Mapping[int, int]): item id -> cluster id in [0, num_clusters).
        num_clusters (int): Number of clusters.
        merge_trace (tuple[Merge, ...]): Merges in execution order.
    """

    labels: Mapping[int, int]
    num_clusters: int
    merge_trace: tuple[Merge, ...] = field(default_factory=tuple)

    def clusters(self) -> dict[int, list[int]]:
        """Return cluster id -> member item ids, both ascending."""
        out: dict[int, list[int]] = {c: [] for c in range(self.num_clusters)}
        for item in sorted(self.labels):
            out[self.labels[item]].append(item)
        return out

    @classmethod
    def from_labels(cls, labels: Mapping[int, object]) -> Clustering:
        """Build a clustering from arbitrary cluster keys.

        Keys are relabeled densely in order of their first item id.
        """
        dense: dict[object, int] = {}
        out: dict[int, int] = {}
        for item in sorted(labels):
            out[item] = dense.setdefault(labels[item], len(dense))
        return cls(labels=out, num_clusters=len(dense))


def distance_matrix(vectors: np.ndarray, metric: Metric | str) -> np.ndarray:
    """Return the full (n, n) float64 distance matrix.

    Raises:
        ZeroVector: If ``metric`` is cosine and a row has zero norm.
    """
    metric = Metric(metric)
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch(f"expected an (n, d) matrix; got shape {x.shape}")
    if x.shape[0] < 2:
        return np.zeros((x.shape[0], x.shape[0]), dtype=np.float64)
    if metric is Metric.COSINE:
        norms = np.sqrt(np.einsum("ij,ij->i", x, x))
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise ZeroVector(f"row {int(zero[0])} has zero norm; cosine is undefined")
        condensed = np.clip(pdist(x, metric="cosine"), 0.0, 2.0)
    else:
        condensed = pdist(x, metric="euclidean")
    return squareform(condensed, checks=False)


def _right_minima(dist: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Minimum of each listed row over the columns to its right."""
    n = dist.shape[1]
    cols = np.arange(n)
    out = np.full(rows.size, np.inf)
    for start in range(0, rows.size, _ROW_CHUNK):
        part = rows[start : start + _ROW_CHUNK]
        block = dist[part]
        block[cols[None, :] <= part[:, None]] = np.inf
        out[start : start + part.size] = block.min(axis=1)
    return out


def hac_cluster(
    item_ids: Sequence[int],
    vectors: np.ndarray,
    spec: LinkageSpec,
) -> Clustering:
    """Agglomerate items bottom-up until the stop criterion holds.

    Clusters are named by their smallest item id. Among candidate merges
    within ``TIE_TOLERANCE`` of the closest distance, the pair with the
    lexicographically smallest (lower id, higher id) wins, whatever order
    the items arrive in.

    Each active row caches its minimum distance to the clusters on its
    right. A merge rescans only the merged row and the rows whose cached
    minimum pointed at one of the two merged clusters.

    Args:
        item_ids (Sequence[int]): Item identifiers, one per row.
        vectors (np.ndarray): (n, d) item vectors.
        spec (LinkageSpec): Linkage, metric and stop criterion.

    Returns:
        Clustering: Labels dense in order of each cluster's smallest id.

    Raises:
        EmptyInput: If there are no items.
        InvalidStop: If ``spec.num_clusters`` exceeds the item count.
        ZeroVector: If the metric is cosine and an item has zero norm.
    """
    raw_ids = [int(i) for i in item_ids]
    n = len(raw_ids)
    if n == 0:
        raise EmptyInput("hac_cluster needs at least one item")
    if len(set(raw_ids)) != n:
        raise MissingLabel("item ids must be unique")
    x = np.asarray(vectors, dtype=np.float64)
    if x.shape[0] != n:
        raise DimensionMismatch(f"{n} ids but {x.shape[0]} vectors")
    if spec.num_clusters is not None and spec.num_clusters > n:
        raise InvalidStop(f"num_clusters={spec.num_clusters} exceeds item count {n}")
    if spec.metric is Metric.COSINE and x.ndim == 2:
        zero = np.flatnonzero(~np.any(x != 0.0, axis=1))
        if zero.size:
            raise ZeroVector(f"item {raw_ids[int(zero[0])]} has zero norm; cosine is undefined")

    order = sorted(range(n), key=raw_ids.__getitem__)
    ids = [raw_ids[k] for k in order]
    dist = distance_matrix(x[order], spec.metric)
    np.fill_diagonal(dist, np.inf)

    target = spec.num_clusters if spec.num_clusters is not None else 1
    sizes = np.ones(n, dtype=np.float64)
    active = np.ones(n, dtype=bool)
    members: list[list[int]] = [[i] for i in range(n)]
    nearest = _right_minima(dist, np.arange(n))
    trace: list[Merge] = []
    remaining = n

    while remaining > target:
        best = float(nearest.min())
        if spec.threshold is not None and best > spec.threshold:
            break
        limit = best + TIE_TOLERANCE
        if spec.threshold is not None:
            limit = min(limit, spec.threshold)
        i = int(np.flatnonzero(nearest <= limit)[0])
        j = i + 1 + int(np.flatnonzero(dist[i, i + 1 :] <= limit)[0])
        distance = float(dist[i, j])

        old_i, old_j = dist[i].copy(), dist[j].copy()
        if spec.linkage is Linkage.SINGLE:
            merged = np.minimum(old_i, old_j)
        elif spec.linkage is Linkage.COMPLETE:
            merged = np.maximum(old_i, old_j)
        else:
            merged = (sizes[i] * old_i + sizes[j] * old_j) / (sizes[i] + sizes[j])
        merged[i] = np.inf
        merged[j] = np.inf
        dist[i, :] = merged
        dist[:, i] = merged
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        active[j] = False

        # Rows left of i see both merged columns; rows between see only j.
        head = nearest[:i]
        improved = merged[:i] < head
        stale = active[:i] & ~improved & ((head == old_i[:i]) | (head == old_j[:i]))
        head[improved] = merged[:i][improved]
        between = active[i + 1 : j] & (nearest[i + 1 : j] == old_j[i + 1 : j])
        rows = np.concatenate([np.flatnonzero(stale), i + 1 + np.flatnonzero(between)])
        nearest[rows] = _right_minima(dist, rows)
        nearest[i] = merged[i + 1 :].min()
        nearest[j] = np.inf

        sizes[i] += sizes[j]
        members[i].extend(members[j])
        members[j] = []
        trace.append(Merge(a=ids[i], b=ids[j], distance=distance))
        remaining -= 1

    labels: dict[int, int] = {}
    cluster = 0
    for root in range(n):
        if not members[root]:
            continue
        for pos in members[root]:
            labels[ids[pos]] = cluster
        cluster += 1
    log.debug(
        "HAC %s/%s: %d items -> %d clusters in %d merges",
        spec.linkage.value,
        spec.metric.value,
        n,
        cluster,
        len(trace),
    )
    return Clustering(labels=labels, num_clusters=cluster, merge_trace=tuple(trace))


def squared_error(
    item_ids: Sequence[int],
    vectors: np.ndarray,
    clustering: Clustering,
) -> float:
    """Sum over clusters of squared Euclidean distances to the cluster mean.

    Raises:
        MissingLabel: If an item has no label in ``clustering``.
    """
    x = np.asarray(vectors, dtype=np.float64)
    try:
        labels = np.array([clustering.labels[int(i)] for i in item_ids], dtype=np.int64)
    except KeyError as exc:
        raise MissingLabel(f"item {exc.args[0]} is not labeled") from exc
    total = 0.0
    for c in np.unique(labels):
        block = x[labels == c]
        total += float(np.sum((block - block.mean(axis=0)) ** 2))
    return total
