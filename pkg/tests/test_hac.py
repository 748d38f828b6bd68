import itertools

import numpy as np
import pytest
from scipy.cluster.hierarchy import linkage as scipy_linkage
from scipy.spatial.distance import cdist

from faceclust.core.errors import EmptyInput, InvalidStop, MissingLabel, ZeroVector
from faceclust.core.hac import (
    Clustering,
    Linkage,
    LinkageSpec,
    Metric,
    distance_matrix,
    hac_cluster,
    squared_error,
)


def _partition(clustering: Clustering) -> set[frozenset[int]]:
    return {frozenset(members) for members in clustering.clusters().values()}


def test_two_well_separated_pairs() -> None:
    points = np.array([[0, 0.01], [0, 0], [10, 10], [10, 10.01]], dtype=np.float64)
    spec = LinkageSpec(Linkage.AVERAGE, Metric.EUCLIDEAN, num_clusters=2)
    result = hac_cluster([0, 1, 2, 3], points, spec)
    assert result.num_clusters == 2
    assert _partition(result) == {frozenset({0, 1}), frozenset({2, 3})}
    assert result.labels == {0: 0, 1: 0, 2: 1, 3: 1}


def test_k_equals_n_and_k_equals_one() -> None:
    rng = np.random.default_rng(0)
    points = rng.normal(size=(6, 3))
    ids = list(range(100, 106))
    singletons = hac_cluster(ids, points, LinkageSpec(num_clusters=6))
    assert singletons.num_clusters == 6
    assert singletons.merge_trace == ()
    everything = hac_cluster(ids, points, LinkageSpec(num_clusters=1))
    assert everything.num_clusters == 1
    assert len(everything.merge_trace) == 5
    assert set(everything.labels.values()) == {0}


def test_stop_validation() -> None:
    with pytest.raises(InvalidStop):
        LinkageSpec()
    with pytest.raises(InvalidStop):
        LinkageSpec(num_clusters=2, threshold=0.5)
    with pytest.raises(InvalidStop):
        LinkageSpec(num_clusters=0)
    with pytest.raises(InvalidStop):
        LinkageSpec(threshold=-1.0)
    with pytest.raises(InvalidStop):
        hac_cluster([1, 2], np.eye(2), LinkageSpec(num_clusters=3))
    with pytest.raises(EmptyInput):
        hac_cluster([], np.zeros((0, 2)), LinkageSpec(num_clusters=1))
    with pytest.raises(MissingLabel):
        hac_cluster([1, 1], np.eye(2), LinkageSpec(num_clusters=1))


def test_cosine_rejects_zero_rows() -> None:
    with pytest.raises(ZeroVector):
        distance_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]), Metric.COSINE)


def test_threshold_stop_leaves_no_pair_within_tau() -> None:
    rng = np.random.default_rng(3)
    points = rng.normal(size=(25, 4))
    tau = 2.0
    for linkage in Linkage:
        result = hac_cluster(
            list(range(25)), points, LinkageSpec(linkage, Metric.EUCLIDEAN, threshold=tau)
        )
        assert all(m.distance <= tau for m in result.merge_trace)
        clusters = [np.array(m) for m in result.clusters().values()]
        for a, b in itertools.combinations(clusters, 2):
            d = cdist(points[a], points[b])
            if linkage is Linkage.SINGLE:
                value = d.min()
            elif linkage is Linkage.COMPLETE:
                value = d.max()
            else:
                value = d.mean()
            assert value > tau


@pytest.mark.parametrize("n", [2, 30, 200, 500])
@pytest.mark.parametrize("linkage", list(Linkage))
@pytest.mark.parametrize("metric", list(Metric))
def test_merge_distances_are_non_decreasing(linkage: Linkage, metric: Metric, n: int) -> None:
    rng = np.random.default_rng(11 + n)
    points = rng.normal(size=(n, 5))
    ids = [int(v) for v in rng.permutation(n)]
    result = hac_cluster(ids, points, LinkageSpec(linkage, metric, num_clusters=1))
    assert len(result.merge_trace) == n - 1
    distances = [m.distance for m in result.merge_trace]
    assert all(b >= a - 1e-12 for a, b in zip(distances, distances[1:]))


def _linkage_value(block: np.ndarray, linkage: Linkage) -> float:
    if linkage is Linkage.SINGLE:
        return float(block.min())
    if linkage is Linkage.COMPLETE:
        return float(block.max())
    return float(block.mean())


def _exhaustive_trace(
    ids: list[int], points: np.ndarray, linkage: Linkage
) -> list[tuple[int, int, float]]:
    d = cdist(points, points)
    row = {item: k for k, item in enumerate(ids)}
    groups = {item: [row[item]] for item in ids}
    trace = []
    while len(groups) > 1:
        scored = [
            (_linkage_value(d[np.ix_(groups[a], groups[b])], linkage), a, b)
            for a, b in itertools.combinations(sorted(groups), 2)
        ]
        best = min(value for value, _, _ in scored)
        a, b = min((a, b) for value, a, b in scored if value <= best + 1e-12)
        trace.append((a, b, best))
        groups[a] = groups[a] + groups.pop(b)
    return trace


@pytest.mark.parametrize("linkage", list(Linkage))
def test_merge_sequence_matches_exhaustive_search(linkage: Linkage) -> None:
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(2, 13))
        ids = [int(v) for v in rng.choice(1000, size=n, replace=False)]
        points = rng.normal(size=(n, 3))
        result = hac_cluster(ids, points, LinkageSpec(linkage, Metric.EUCLIDEAN, num_clusters=1))
        expected = _exhaustive_trace(ids, points, linkage)
        assert [(m.a, m.b) for m in result.merge_trace] == [(a, b) for a, b, _ in expected]
        for merge, (_, _, value) in zip(result.merge_trace, expected):
            assert merge.distance == pytest.approx(value, abs=1e-9)


@pytest.mark.parametrize("linkage", list(Linkage))
def test_first_merge_is_globally_closest_pair(linkage: Linkage) -> None:
    rng = np.random.default_rng(6)
    for _ in range(10):
        n = int(rng.integers(3, 13))
        points = rng.normal(size=(n, 3))
        result = hac_cluster(
            list(range(n)), points, LinkageSpec(linkage, Metric.EUCLIDEAN, num_clusters=n - 1)
        )
        d = cdist(points, points)
        np.fill_diagonal(d, np.inf)
        i, j = divmod(int(np.argmin(d)), n)
        merged = [members for members in result.clusters().values() if len(members) == 2]
        assert merged == [sorted((i, j))]


def test_average_linkage_matches_direct_group_mean() -> None:
    rng = np.random.default_rng(21)
    for n in (8, 20, 64):
        points = rng.normal(size=(n, 3))
        d = cdist(points, points)
        result = hac_cluster(
            list(range(n)), points, LinkageSpec(Linkage.AVERAGE, Metric.EUCLIDEAN, num_clusters=1)
        )
        groups: dict[int, list[int]] = {i: [i] for i in range(n)}
        for merge in result.merge_trace:
            a, b = groups.pop(merge.a), groups.pop(merge.b)
            direct = d[np.ix_(a, b)].mean()
            assert merge.distance == pytest.approx(direct, abs=1e-9)
            groups[merge.a] = a + b


def test_permutation_gives_same_partition_without_ties() -> None:
    rng = np.random.default_rng(8)
    points = rng.normal(size=(20, 3))
    ids = list(range(20))
    spec = LinkageSpec(Linkage.AVERAGE, Metric.COSINE, num_clusters=5)
    base = _partition(hac_cluster(ids, points, spec))
    order = rng.permutation(20)
    shuffled = hac_cluster([ids[i] for i in order], points[order], spec)
    assert _partition(shuffled) == base


def test_ties_merge_lowest_pair_first() -> None:
    points = np.array([[0.0], [1.0], [2.0], [3.0]])
    result = hac_cluster([0, 1, 2, 3], points, LinkageSpec(Linkage.SINGLE, Metric.EUCLIDEAN, num_clusters=3))
    assert result.merge_trace[0].a == 0 and result.merge_trace[0].b == 1


def test_ties_follow_ids_not_input_order() -> None:
    points = np.array([[0.0], [1.0], [2.0], [3.0]])
    spec = LinkageSpec(Linkage.SINGLE, Metric.EUCLIDEAN, num_clusters=1)
    result = hac_cluster([3, 2, 1, 0], points, spec)
    assert [(m.a, m.b) for m in result.merge_trace] == [(0, 1), (0, 2), (0, 3)]

    first = hac_cluster([3, 2, 1, 0], points, spec.with_num_clusters(3))
    assert (first.merge_trace[0].a, first.merge_trace[0].b) == (0, 1)
    assert first.labels == {0: 0, 1: 0, 2: 1, 3: 2}


def test_zero_vector_error_names_the_item() -> None:
    points = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ZeroVector, match="item 7"):
        hac_cluster([4, 7, 2], points, LinkageSpec(num_clusters=1))


def test_squared_error_examples() -> None:
    points = np.array([[0.0, 0.0], [2.0, 0.0], [5.0, 5.0], [5.0, 5.0]])
    ids = [0, 1, 2, 3]
    assert squared_error(ids, points, Clustering.from_labels({i: i for i in ids})) == 0.0
    two = Clustering.from_labels({0: "a", 1: "a", 2: "b", 3: "b"})
    assert squared_error(ids, points, two) == pytest.approx(2.0)
    with pytest.raises(MissingLabel):
        squared_error([0, 9], points[:2], two)


def test_from_labels_relabels_densely() -> None:
    c = Clustering.from_labels({5: "x", 2: "y", 9: "y"})
    assert c.labels == {2: 0, 5: 1, 9: 0}
    assert c.num_clusters == 2
    assert c.clusters() == {0: [2, 9], 1: [5]}


@pytest.mark.parametrize("linkage", list(Linkage))
def test_merge_heights_match_scipy_linkage_at_scale(linkage: Linkage) -> None:
    rng = np.random.default_rng(17)
    points = rng.normal(size=(1500, 8))
    result = hac_cluster(
        list(range(1500)), points, LinkageSpec(linkage, Metric.EUCLIDEAN, num_clusters=1)
    )
    reference = scipy_linkage(points, method=linkage.value, metric="euclidean")[:, 2]
    heights = np.array([m.distance for m in result.merge_trace])
    np.testing.assert_allclose(np.sort(heights), np.sort(reference), rtol=0, atol=1e-9)
