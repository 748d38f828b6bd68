import csv
import itertools
from pathlib import Path

import numpy as np
import pytest

from faceclust.core.errors import (
    DimensionMismatch,
    InvalidInput,
    MissingLabel,
    NoMatedProbes,
    NotOpenSet,
)
from faceclust.core.hac import Clustering
from faceclust.core.metrics import (
    Fusion,
    IdentReport,
    ScoreTable,
    average_reports,
    cmc,
    cmc_curve,
    evaluate_identification,
    f_beta,
    pairwise_prf,
    probe_ranks,
    score_probes,
    tpir_fpir,
)
from faceclust.core.records import Template

GOLDEN = Path(__file__).resolve().parent / "data" / "open_set_scores.csv"


def _golden_table() -> ScoreTable:
    with GOLDEN.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return ScoreTable(
        probe_ids=tuple(int(r[0]) for r in rows),
        gallery_ids=tuple(int(h[1:]) for h in header[2:]),
        scores=np.array([[float(v) for v in r[2:]] for r in rows]),
        mated=tuple(int(r[1]) if r[1] else None for r in rows),
    )


def _brute_prf(labels: dict[int, int], truth: dict[int, int]) -> tuple[float, float]:
    both = same_cluster = same_class = 0
    for a, b in itertools.combinations(sorted(labels), 2):
        c = labels[a] == labels[b]
        t = truth[a] == truth[b]
        same_cluster += c
        same_class += t
        both += c and t
    precision = both / same_cluster if same_cluster else 1.0
    recall = both / same_class if same_class else 1.0
    return precision, recall


def test_prf_perfect_and_hand_counted() -> None:
    truth = {0: "x", 1: "x", 2: "y", 3: "y"}
    perfect = pairwise_prf(Clustering.from_labels(truth), truth)
    assert (perfect.precision, perfect.recall, perfect.f1) == (1.0, 1.0, 1.0)
    lumped = pairwise_prf({0: 0, 1: 0, 2: 0, 3: 0}, truth)
    assert lumped.precision == pytest.approx(2 / 6)
    assert lumped.recall == 1.0
    assert lumped.f1 == pytest.approx(0.5)


def test_prf_singletons_follow_empty_pair_convention() -> None:
    truth = {0: 1, 1: 1, 2: 2, 3: 2}
    scores = pairwise_prf({i: i for i in truth}, truth)
    assert scores.precision == 1.0
    assert scores.recall == 0.0
    assert scores.f1 == 0.0
    with pytest.raises(MissingLabel):
        pairwise_prf({0: 0, 9: 0}, truth)


def test_prf_matches_pair_enumeration() -> None:
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 80))
        labels = {i: int(c) for i, c in enumerate(rng.integers(0, rng.integers(1, 10), size=n))}
        truth = {i: int(c) for i, c in enumerate(rng.integers(0, rng.integers(1, 10), size=n))}
        got = pairwise_prf(labels, truth)
        precision, recall = _brute_prf(labels, truth)
        assert got.precision == pytest.approx(precision)
        assert got.recall == pytest.approx(recall)


def test_f_beta() -> None:
    assert f_beta(0.4, 0.4) == pytest.approx(0.4)
    assert f_beta(0.5, 1.0) == pytest.approx(2 / 3)
    assert f_beta(0.0, 0.7) == 0.0
    assert f_beta(0.7, 0.0) == 0.0
    assert f_beta(0.5, 1.0, beta=2.0) == pytest.approx(5 * 0.5 / (4 * 0.5 + 1.0))
    with pytest.raises(InvalidInput):
        f_beta(1.5, 0.5)
    with pytest.raises(InvalidInput):
        f_beta(0.5, 0.5, beta=0.0)


def _one(tid: int, subject: int | None, *vectors) -> Template:
    return Template(
        template_id=tid,
        subject_id=subject,
        representations=tuple(np.asarray(v, dtype=np.float32) for v in vectors),
    )


def test_score_probes_cosine_and_fusion() -> None:
    gallery = [_one(100, 1, [1, 0, 0]), _one(101, 2, [0, 1, 0]), _one(102, 3, [0, 0, 1])]
    probe = _one(1, 1, [1, 0, 0])
    table = score_probes([probe], gallery)
    assert table.scores[0].tolist() == pytest.approx([1.0, 0.0, 0.0])
    assert table.mated == (100,)

    first, second = np.array([1.0, 1.0, 0.0]), np.array([0.0, 0.2, 1.0])
    both = score_probes([_one(1, 1, first, second)], gallery, Fusion.MAX).scores[0]
    a = score_probes([_one(1, 1, first)], gallery).scores[0]
    b = score_probes([_one(1, 1, second)], gallery).scores[0]
    assert np.array_equal(both, np.maximum(a, b))
    mean = score_probes([_one(1, 1, first, second)], gallery, "mean").scores[0]
    assert np.allclose(mean, (a + b) / 2)

    duplicated = score_probes([_one(1, 1, first, second, second)], gallery, Fusion.MAX)
    assert np.array_equal(duplicated.scores[0], both)


def test_score_probes_mates_and_errors() -> None:
    gallery = [_one(100, 1, [1, 0]), _one(101, 2, [0, 1])]
    probes = [_one(1, 2, [1, 1]), _one(2, 9, [1, 1]), _one(3, None, [1, 1])]
    assert score_probes(probes, gallery).mated == (101, None, None)
    explicit = score_probes(probes, gallery, mates={1: 100})
    assert explicit.mated == (100, None, None)
    with pytest.raises(DimensionMismatch):
        score_probes([_one(1, 1, [1, 0, 0])], gallery)
    with pytest.raises(InvalidInput):
        score_probes(probes, [_one(100, 1, [1, 0], [0, 1])])


def test_score_table_validation() -> None:
    with pytest.raises(DimensionMismatch):
        ScoreTable((1,), (100, 101), np.zeros((1, 3)), (None,))
    with pytest.raises(InvalidInput):
        ScoreTable((1,), (100,), np.array([[np.nan]]), (None,))
    with pytest.raises(InvalidInput):
        ScoreTable((1,), (100,), np.zeros((1, 1)), (555,))


def test_rank_hand_count_and_pessimistic_ties() -> None:
    table = ScoreTable((1,), (100, 101, 102), np.array([[0.9, 0.5, 0.1]]), (101,))
    assert probe_ranks(table).tolist() == [2]
    rates = cmc(table)
    assert rates[1] == 0.0
    assert rates[5] == 1.0
    tied = ScoreTable((1,), (100, 101, 102), np.array([[0.5, 0.5, 0.1]]), (100,))
    assert probe_ranks(tied).tolist() == [2]
    with pytest.raises(NoMatedProbes):
        cmc(ScoreTable((1,), (100,), np.zeros((1, 1)), (None,)))


def test_cmc_is_monotone_and_reaches_one_at_gallery_size() -> None:
    rng = np.random.default_rng(1)
    gallery_ids = tuple(range(100, 130))
    scores = rng.uniform(-1, 1, size=(40, 30))
    mated = tuple(int(rng.choice(gallery_ids)) for _ in range(40))
    table = ScoreTable(tuple(range(40)), gallery_ids, scores, mated)
    rates = list(cmc(table).values())
    assert all(b >= a for a, b in zip(rates, rates[1:]))
    curve = cmc_curve(table)
    assert len(curve) == 30
    assert curve[-1] == (30, 1.0)
    assert all(b[1] >= a[1] for a, b in zip(curve, curve[1:]))


def test_golden_open_set_table() -> None:
    table = _golden_table()
    assert table.scores.shape == (10, 5)
    assert table.num_nonmated == 5
    assert table.num_mated == 5
    assert probe_ranks(table).tolist() == [1, 1, 1, 2, 1]
    # Five non-mated probes: both default targets put τ just above the top score 0.95.
    tpir = tpir_fpir(table)
    assert tpir[0.1] == pytest.approx(0.4)
    assert tpir[0.01] == pytest.approx(0.4)
    assert tpir_fpir(table, (0.2, 0.6)) == {0.2: pytest.approx(0.6), 0.6: pytest.approx(0.8)}
    report = evaluate_identification(table)
    assert report.rank_k[1] == pytest.approx(0.8)
    assert report.rank_k[5] == 1.0
    assert report.tpir_at_fpir == tpir


def test_tpir_separable_and_never_top_one() -> None:
    separable = ScoreTable(
        (1, 2, 3, 4),
        (100, 101),
        np.array([[0.9, 0.1], [0.1, 0.8], [0.3, 0.2], [0.2, 0.4]]),
        (100, 101, None, None),
    )
    assert tpir_fpir(separable) == {0.1: 1.0, 0.01: 1.0}
    hopeless = ScoreTable(
        (1, 2, 3),
        (100, 101),
        np.array([[0.1, 0.9], [0.2, 0.8], [0.3, 0.2]]),
        (100, 100, None),
    )
    assert tpir_fpir(hopeless) == {0.1: 0.0, 0.01: 0.0}


def test_tpir_monotone_in_fpir_target() -> None:
    rng = np.random.default_rng(2)
    gallery_ids = tuple(range(100, 120))
    for _ in range(30):
        scores = rng.uniform(-1, 1, size=(60, 20))
        mated = tuple(int(rng.choice(gallery_ids)) if i < 40 else None for i in range(60))
        rates = tpir_fpir(ScoreTable(tuple(range(60)), gallery_ids, scores, mated))
        assert rates[0.1] >= rates[0.01]


def test_tpir_errors() -> None:
    closed = ScoreTable((1,), (100,), np.ones((1, 1)), (100,))
    with pytest.raises(NotOpenSet):
        tpir_fpir(closed)
    assert evaluate_identification(closed).tpir_at_fpir == {}
    with pytest.raises(NoMatedProbes):
        tpir_fpir(ScoreTable((1,), (100,), np.ones((1, 1)), (None,)))


def test_average_reports() -> None:
    a = IdentReport(rank_k={1: 0.5, 5: 1.0}, tpir_at_fpir={0.1: 0.2}, num_mated=4, num_nonmated=2)
    b = IdentReport(rank_k={1: 0.7, 5: 0.9}, tpir_at_fpir={0.1: 0.4}, num_mated=6, num_nonmated=3)
    avg = average_reports([a, b])
    assert avg.rank_k == pytest.approx({1: 0.6, 5: 0.95})
    assert avg.tpir_at_fpir == pytest.approx({0.1: 0.3})
    assert (avg.num_mated, avg.num_nonmated) == (10, 5)
