# kdforest.py
# SPDX-License-Identifier: MIT
"""Randomized k-d tree forest for budgeted approximate nearest neighbors.

Each tree splits on a dimension drawn uniformly from the five
highest-variance dimensions at the node, at the median. A query descends
every tree and then explores pending branches best-bin-first through one
priority queue shared by all trees, stopping after ``max_comparisons``
distance evaluations. Distances are squared Euclidean throughout.

A built forest is immutable; per-query state (heap, visited marks) lives
inside :meth:`KdForest.search`, so one forest can serve many threads.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput, InvalidInput
from .log import get_logger
from .rng import SplitMix64, derive_seed

__all__ = [
    "DEFAULT_TREES",
    "DEFAULT_MAX_COMPARISONS",
    "SPLIT_CANDIDATES",
    "KdTree",
    "KdForest",
    "build_forest",
    "ann_search",
    "squared_distances",
    "brute_force_nn",
]

log = get_logger(__name__)

DEFAULT_TREES = 2
DEFAULT_MAX_COMPARISONS = 100
SPLIT_CANDIDATES = 5


def squared_distances(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Row-wise squared Euclidean distance from ``query``, in float64."""
    diff = np.asarray(points, dtype=np.float64) - np.asarray(query, dtype=np.float64)
    return np.sum(diff * diff, axis=1)


def brute_force_nn(points: np.ndarray, query: np.ndarray) -> tuple[int, float]:
    """Exact nearest neighbor; ties go to the lower row index."""
    d = squared_distances(points, query)
    idx = int(np.argmin(d))
    return idx, float(d[idx])


@dataclass(frozen=True, slots=True)
class KdTree:
    """Flat array encoding of one randomized k-d tree.

    Node ``i`` is a leaf when ``split_dim[i] == -1``; its points are
    ``order[leaf_lo[i]:leaf_hi[i]]`` (ascending ids). Internal nodes send
    a value left when it is ``< split_value`` (``<=`` when
    ``left_inclusive``).
    """

    split_dim: np.ndarray
    split_value: np.ndarray
    left_inclusive: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_lo: np.ndarray
    leaf_hi: np.ndarray
    order: np.ndarray

    @property
    def num_nodes(self) -> int:
        return int(self.split_dim.shape[0])

    def goes_left(self, node: int, value: float) -> bool:
        if self.left_inclusive[node]:
            return bool(value <= self.split_value[node])
        return bool(value < self.split_value[node])


def _build_tree(points: np.ndarray, rng: SplitMix64) -> KdTree:
    split_dim: list[int] = []
    split_value: list[float] = []
    inclusive: list[bool] = []
    left: list[int] = []
    right: list[int] = []
    leaf_lo: list[int] = []
    leaf_hi: list[int] = []
    order: list[int] = []

    def new_node() -> int:
        split_dim.append(-1)
        split_value.append(0.0)
        inclusive.append(False)
        left.append(-1)
        right.append(-1)
        leaf_lo.append(0)
        leaf_hi.append(0)
        return len(split_dim) - 1

    root = new_node()
    stack: list[tuple[int, np.ndarray]] = [(root, np.arange(points.shape[0], dtype=np.int64))]
    while stack:
        node, idx = stack.pop()
        block = points[idx]
        variances = block.var(axis=0) if idx.size > 1 else np.zeros(points.shape[1])
        varying = np.flatnonzero(variances > 0.0)
        if varying.size == 0:
            leaf_lo[node] = len(order)
            order.extend(int(i) for i in np.sort(idx))
            leaf_hi[node] = len(order)
            continue
        # Highest variance first; ties by lower dimension.
        ranked = varying[np.argsort(-variances[varying], kind="stable")]
        candidates = ranked[:SPLIT_CANDIDATES]
        dim = int(candidates[rng.randbelow(int(candidates.size))])
        values = block[:, dim]
        median = float(np.median(values))
        mask = values < median
        is_inclusive = not bool(mask.any())
        if is_inclusive:
            mask = values <= median
        split_dim[node] = dim
        split_value[node] = median
        inclusive[node] = is_inclusive
        lchild, rchild = new_node(), new_node()
        left[node], right[node] = lchild, rchild
        # Right pushed first so the left subtree is laid out first.
        stack.append((rchild, idx[~mask]))
        stack.append((lchild, idx[mask]))

    return KdTree(
        split_dim=np.asarray(split_dim, dtype=np.int64),
        split_value=np.asarray(split_value, dtype=np.float64),
        left_inclusive=np.asarray(inclusive, dtype=bool),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        leaf_lo=np.asarray(leaf_lo, dtype=np.int64),
        leaf_hi=np.asarray(leaf_hi, dtype=np.int64),
        order=np.asarray(order, dtype=np.int64),
    )


@dataclass(frozen=True, slots=True)
class KdForest:
    """Ensemble of randomized k-d trees over one point set.

    Attributes:
        points (np.ndarray): Read-only (n, d) float64 points.
        trees (tuple[KdTree, ...]): One tree per ``num_trees``.
        num_trees (int): Tree count (default 2).
        max_comparisons (int): Default search budget (default 100).
        rng_seed (int): Seed the trees were built from.
    """

    points: np.ndarray
    trees: tuple[KdTree, ...]
    num_trees: int = DEFAULT_TREES
    max_comparisons: int = DEFAULT_MAX_COMPARISONS
    rng_seed: int = 0

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    def search(self, query: np.ndarray, max_comparisons: int | None = None) -> tuple[int, float]:
        """Return (point index, squared distance) of the best candidate found.

        At most ``max_comparisons`` distances are evaluated. Subtrees whose
        lower bound exceeds the best distance are pruned, so a budget of at
        least ``size`` returns the exact nearest neighbor (ties to the lower
        index).
        """
        budget = self.max_comparisons if max_comparisons is None else int(max_comparisons)
        if budget < 1:
            raise InvalidInput(f"max_comparisons must be >= 1; got {budget}")
        q = np.asarray(query, dtype=np.float64).ravel()
        if q.shape[0] != self.points.shape[1]:
            raise DimensionMismatch(
                f"query has dimension {q.shape[0]}, forest has {self.points.shape[1]}"
            )

        visited = np.zeros(self.size, dtype=bool)
        best_id, best_d = -1, np.inf
        checks = 0
        seq = 0
        heap: list[tuple[float, int, int, int]] = []
        for t in range(len(self.trees)):
            heap.append((0.0, seq, t, 0))
            seq += 1
        heapq.heapify(heap)

        while heap and checks < budget:
            bound, _, t, node = heapq.heappop(heap)
            if bound > best_d:
                break
            tree = self.trees[t]
            while tree.split_dim[node] >= 0:
                dim = int(tree.split_dim[node])
                diff = q[dim] - float(tree.split_value[node])
                if tree.goes_left(node, q[dim]):
                    near, far = int(tree.left[node]), int(tree.right[node])
                else:
                    near, far = int(tree.right[node]), int(tree.left[node])
                heapq.heappush(heap, (max(bound, diff * diff), seq, t, far))
                seq += 1
                node = near

            members = tree.order[tree.leaf_lo[node]:tree.leaf_hi[node]]
            fresh = members[~visited[members]]
            if fresh.size == 0:
                continue
            fresh = fresh[: budget - checks]
            visited[fresh] = True
            checks += int(fresh.size)
            dists = squared_distances(self.points[fresh], q)
            for pid, d in zip(fresh.tolist(), dists.tolist()):
                if d < best_d or (d == best_d and pid < best_id):
                    best_id, best_d = pid, d

        return best_id, float(best_d)


def build_forest(
    points: np.ndarray,
    num_trees: int = DEFAULT_TREES,
    rng_seed: int = 0,
    *,
    max_comparisons: int = DEFAULT_MAX_COMPARISONS,
) -> KdForest:
    """Build ``num_trees`` randomized k-d trees over ``points``.

    Tree ``t`` draws its split dimensions from the stream
    ``derive_seed(rng_seed, t)``.

    Raises:
        EmptyInput: If ``points`` is empty.
    """
    pts = np.array(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if pts.size else pts.reshape(0, 1)
    if pts.shape[0] == 0:
        raise EmptyInput("build_forest needs at least one point")
    if num_trees < 1:
        raise InvalidInput(f"num_trees must be >= 1; got {num_trees}")
    if not np.all(np.isfinite(pts)):
        raise InvalidInput("points must be finite")
    pts.flags.writeable = False
    trees = tuple(
        _build_tree(pts, SplitMix64(derive_seed(rng_seed, t))) for t in range(num_trees)
    )
    log.debug("Built %d kd-trees over %d points (d=%d).", num_trees, pts.shape[0], pts.shape[1])
    return KdForest(
        points=pts,
        trees=trees,
        num_trees=num_trees,
        max_comparisons=max_comparisons,
        rng_seed=rng_seed,
    )


def ann_search(
    forest: KdForest,
    query: np.ndarray,
    max_comparisons: int | None = None,
) -> tuple[int, float]:
    """Budgeted nearest-neighbor search; see :meth:`KdForest.search`."""
    return forest.search(query, max_comparisons)
