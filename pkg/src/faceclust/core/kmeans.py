# kmeans.py
# SPDX-License-Identifier: MIT
"""k-means++ seeding and Lloyd iterations with optional ANN assignment.

The objective is the squared-error criterion: the sum over clusters of
squared Euclidean distances from each point to its cluster mean. In ANN
mode the assignment step searches a kd-forest built over the current
centers, but only when there are more than ``ForestParams.min_centers``
of them; smaller center sets are searched exhaustively.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, EmptyInput, InvalidInput, InvalidK
from .kdforest import DEFAULT_MAX_COMPARISONS, DEFAULT_TREES, build_forest, squared_distances
from .log import get_logger
from .rng import SplitMix64, derive_seed

__all__ = [
    "KMeansMode",
    "Seeding",
    "ForestParams",
    "KMeansResult",
    "kmeanspp_seed",
    "ann_kmeans",
]

log = get_logger(__name__)


class KMeansMode(str, Enum):
    EXACT = "exact"
    ANN = "ann"


class Seeding(str, Enum):
    KMEANSPP = "kmeans++"
    FARTHEST = "farthest"


@dataclass(frozen=True, slots=True)
class ForestParams:
    """kd-forest settings used by the ANN assignment step."""

    num_trees: int = DEFAULT_TREES
    max_comparisons: int = DEFAULT_MAX_COMPARISONS
    min_centers: int = 64


@dataclass(frozen=True, slots=True)
class KMeansResult:
    """Outcome of :func:`ann_kmeans`.

    Attributes:
        centers (np.ndarray): (k, d) float64 cluster means.
        assignment (np.ndarray): Center index per point.
        objective (float): Squared error of ``assignment`` around ``centers``.
        iterations (int): Lloyd iterations run.
        converged (bool): Whether the relative-decrease test stopped the loop.
        objective_trace (tuple[float, ...]): Objective after each assignment step.
    """

    centers: np.ndarray
    assignment: np.ndarray
    objective: float
    iterations: int
    converged: bool
    objective_trace: tuple[float, ...] = ()

    @property
    def k(self) -> int:
        return int(self.centers.shape[0])


def _as_points(points: np.ndarray) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch(f"expected an (n, d) matrix; got shape {x.shape}")
    if x.shape[0] == 0:
        raise EmptyInput("no points")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("points must be finite")
    return x


def _check_k(k: int, n: int) -> None:
    if k < 1 or k > n:
        raise InvalidK(f"k must lie in 1..{n}; got {k}")


def kmeanspp_seed(
    points: np.ndarray,
    k: int,
    rng_seed: int = 0,
    *,
    seeding: Seeding | str = Seeding.KMEANSPP,
) -> np.ndarray:
    """Choose ``k`` distinct point indices as initial centers.

    The first index is uniform. With ``kmeans++`` each next index is drawn
    with probability proportional to its squared distance to the nearest
    chosen point; ``farthest`` takes the arg-max instead. Points at
    distance 0 are never drawn while positive mass remains; once all mass
    is zero the lowest unchosen index is taken.

    Returns:
        np.ndarray: int64 indices in selection order.

    Raises:
        InvalidK: If ``k`` is outside 1..n.
    """
    x = _as_points(points)
    n = x.shape[0]
    _check_k(k, n)
    seeding = Seeding(seeding)
    rng = SplitMix64(rng_seed)

    chosen = [rng.randbelow(n)]
    taken = np.zeros(n, dtype=bool)
    taken[chosen[0]] = True
    d2 = squared_distances(x, x[chosen[0]])
    d2[taken] = 0.0
    while len(chosen) < k:
        if seeding is Seeding.FARTHEST:
            idx = int(np.argmax(d2))
            if d2[idx] <= 0.0:
                idx = int(np.flatnonzero(~taken)[0])
        else:
            cumulative = np.cumsum(d2)
            total = float(cumulative[-1])
            if total <= 0.0:
                idx = int(np.flatnonzero(~taken)[0])
            else:
                u = rng.uniform() * total
                idx = int(np.searchsorted(cumulative, u, side="right"))
                if idx >= n:
                    idx = int(np.flatnonzero(d2 > 0.0)[-1])
        chosen.append(idx)
        taken[idx] = True
        d2 = np.minimum(d2, squared_distances(x, x[idx]))
        d2[taken] = 0.0
    return np.asarray(chosen, dtype=np.int64)


def _assign_exact(x: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dist = np.empty((x.shape[0], centers.shape[0]), dtype=np.float64)
    for c in range(centers.shape[0]):
        dist[:, c] = squared_distances(x, centers[c])
    assignment = np.argmin(dist, axis=1).astype(np.int64)
    return assignment, dist[np.arange(x.shape[0]), assignment]


def _assign_ann(
    x: np.ndarray,
    centers: np.ndarray,
    params: ForestParams,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    forest = build_forest(
        centers,
        num_trees=params.num_trees,
        rng_seed=seed,
        max_comparisons=params.max_comparisons,
    )
    assignment = np.empty(x.shape[0], dtype=np.int64)
    dist = np.empty(x.shape[0], dtype=np.float64)
    for i in range(x.shape[0]):
        assignment[i], dist[i] = forest.search(x[i])
    return assignment, dist


def _update(
    x: np.ndarray,
    assignment: np.ndarray,
    dist: np.ndarray,
    k: int,
) -> np.ndarray:
    """Recompute means in place of ``assignment``; empty clusters take far points."""
    counts = np.bincount(assignment, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        farthest = np.argsort(-dist, kind="stable")
        cursor = 0
        for c in empty:
            while counts[assignment[farthest[cursor]]] <= 1:
                cursor += 1
            p = int(farthest[cursor])
            cursor += 1
            counts[assignment[p]] -= 1
            assignment[p] = c
            counts[c] = 1
            dist[p] = 0.0
        log.debug("Re-seeded %d empty cluster(s).", empty.size)
    sums = np.zeros((k, x.shape[1]), dtype=np.float64)
    np.add.at(sums, assignment, x)
    return sums / counts[:, None]


def ann_kmeans(
    points: np.ndarray,
    k: int,
    forest_params: ForestParams | None = None,
    max_iters: int = 100,
    tol: float = 1e-4,
    mode: KMeansMode | str = KMeansMode.ANN,
    *,
    seed: int = 0,
    seeding: Seeding | str = Seeding.KMEANSPP,
) -> KMeansResult:
    """Lloyd iterations from a k-means++ start.

    Each iteration assigns points to their nearest center, records the
    objective, stops when the relative decrease falls below ``tol``, and
    moves every center to the mean of its points. The returned centers are
    the means of the returned assignment.

    Raises:
        InvalidK: If ``k`` is outside 1..n.
    """
    x = _as_points(points)
    n = x.shape[0]
    _check_k(k, n)
    if max_iters < 1:
        raise InvalidInput(f"max_iters must be >= 1; got {max_iters}")
    params = forest_params or ForestParams()
    mode = KMeansMode(mode)
    use_forest = mode is KMeansMode.ANN and k > params.min_centers

    centers = x[kmeanspp_seed(x, k, derive_seed(seed, 0), seeding=seeding)].copy()
    trace: list[float] = []
    converged = False
    assignment = np.zeros(n, dtype=np.int64)
    iterations = 0
    for iterations in range(1, max_iters + 1):
        if use_forest:
            assignment, dist = _assign_ann(x, centers, params, derive_seed(seed, iterations))
        else:
            assignment, dist = _assign_exact(x, centers)
        objective = float(dist.sum())
        if trace:
            previous = trace[-1]
            converged = previous <= 0.0 or (previous - objective) < tol * previous
        trace.append(objective)
        centers = _update(x, assignment, dist, k)
        if converged:
            break

    residual = x - centers[assignment]
    final = float(np.sum(residual * residual))
    log.debug(
        "k-means k=%d mode=%s: %d iteration(s), objective %.6g, converged=%s",
        k,
        mode.value,
        iterations,
        final,
        converged,
    )
    centers.flags.writeable = False
    assignment.flags.writeable = False
    return KMeansResult(
        centers=centers,
        assignment=assignment,
        objective=final,
        iterations=iterations,
        converged=converged,
        objective_trace=tuple(trace),
    )
