import numpy as np
import pytest

from faceclust.core.errors import EmptyInput, InvalidInput
from faceclust.core.hac import Linkage, LinkageSpec, Metric, hac_cluster
from faceclust.core.partition import (
    KPolicy,
    PartitionScheme,
    class_count_sweep,
    cluster_partitioned,
    partition_templates,
    resolve_k,
    restrict_templates,
    score_partitions,
)
from faceclust.core.records import AttributeRecord, Gender, Template


def _template(tid: int, subject: int | None, vec, gender=Gender.MALE, tone: int | None = 1) -> Template:
    return Template(
        template_id=tid,
        subject_id=subject,
        representations=(np.asarray(vec, dtype=np.float32),),
        attributes=AttributeRecord(gender=gender, skin_tone=tone),
    )


def _blobs(rng: np.random.Generator) -> list[Template]:
    # Five subjects: 0-2 male tone 1, 3-4 female tone 3; three templates each.
    centers = rng.normal(size=(5, 8))
    out = []
    tid = 0
    for subject in range(5):
        gender = Gender.MALE if subject < 3 else Gender.FEMALE
        tone = 1 if subject < 3 else 3
        for _ in range(3):
            out.append(_template(tid, subject, centers[subject] + 0.01 * rng.normal(size=8), gender, tone))
            tid += 1
    return out


def test_scheme_validation_and_parse() -> None:
    assert PartitionScheme.parse("gender, skin_tone").keys == ("gender", "skin_tone")
    assert PartitionScheme(("gender",)).label == "gender"
    with pytest.raises(InvalidInput):
        PartitionScheme(())
    with pytest.raises(InvalidInput):
        PartitionScheme(("gender", "gender"))
    with pytest.raises(InvalidInput):
        PartitionScheme(("age",))


def test_partition_by_gender() -> None:
    templates = [
        _template(0, 1, [1, 0], Gender.MALE),
        _template(1, 2, [0, 1], Gender.MALE),
        _template(2, 3, [1, 1], Gender.FEMALE),
    ]
    parts = partition_templates(templates, PartitionScheme(("gender",)))
    assert {k: [t.template_id for t in v] for k, v in parts.subsets.items()} == {
        "female": [2],
        "male": [0, 1],
    }
    assert parts.skipped == ()


def test_partition_by_gender_and_tone_labels() -> None:
    templates = [
        _template(0, 1, [1, 0], Gender.MALE, 1),
        _template(1, 2, [0, 1], Gender.MALE, 3),
        _template(2, 3, [1, 1], Gender.FEMALE, 1),
    ]
    parts = partition_templates(templates, PartitionScheme(("gender", "skin_tone")))
    assert list(parts.subsets) == ["female·1", "male·1", "male·3"]
    assert [t.template_id for t in parts.subsets["male·3"]] == [1]


def test_unknown_attribute_is_skipped() -> None:
    templates = [
        _template(0, 1, [1, 0], Gender.MALE),
        _template(1, 2, [0, 1], Gender.UNKNOWN),
    ]
    parts = partition_templates(templates, PartitionScheme(("gender",)))
    assert parts.skipped == (1,)
    assert sum(len(v) for v in parts.subsets.values()) == 1


def test_restrict_templates() -> None:
    templates = [
        _template(0, 1, [1, 0], Gender.MALE, 1),
        _template(1, 2, [0, 1], Gender.MALE, 3),
        _template(2, 3, [1, 1], Gender.FEMALE, 3),
    ]
    kept = restrict_templates(templates, {"gender": "male", "skin_tone": "3"})
    assert [t.template_id for t in kept] == [1]
    with pytest.raises(InvalidInput):
        restrict_templates(templates, {"gender": "unknown"})


def test_ground_truth_k_policy_counts_subjects() -> None:
    rng = np.random.default_rng(0)
    parts = partition_templates(_blobs(rng), PartitionScheme(("gender",)))
    resolved, warnings = resolve_k(parts.subsets, KPolicy.GROUND_TRUTH)
    assert resolved == {"female": 2, "male": 3}
    assert warnings == []


def test_ground_truth_k_ignores_unknown_subjects() -> None:
    subsets = {
        "male": [
            _template(0, 4, [1.0, 0.0]),
            _template(1, 4, [1.0, 0.1]),
            _template(2, None, [0.0, 1.0]),
            _template(3, None, [0.1, 1.0]),
        ],
        "female": [_template(4, None, [1.0, 1.0]), _template(5, None, [1.0, 2.0])],
    }
    resolved, warnings = resolve_k(subsets, KPolicy.GROUND_TRUTH)
    assert resolved == {"male": 1, "female": 1}
    assert warnings == []


def test_proportional_policy_uses_largest_remainder_and_clips() -> None:
    subsets = {
        "a": [_template(i, i, [1.0, float(i)]) for i in range(6)],
        "b": [_template(10 + i, 10 + i, [1.0, float(i)]) for i in range(3)],
    }
    resolved, _ = resolve_k(subsets, KPolicy.PROPORTIONAL, global_k=5)
    assert resolved == {"a": 3, "b": 2}
    clipped, warnings = resolve_k(subsets, KPolicy.PROPORTIONAL, global_k=30)
    assert clipped == {"a": 6, "b": 3}
    assert len(warnings) == 2
    with pytest.raises(InvalidInput):
        resolve_k(subsets, KPolicy.PROPORTIONAL)


def test_cluster_partitioned_recovers_subjects_and_never_crosses_partitions() -> None:
    rng = np.random.default_rng(1)
    templates = _blobs(rng)
    spec = LinkageSpec(Linkage.AVERAGE, Metric.COSINE, num_clusters=1)
    result = cluster_partitioned(
        partition_templates(templates, PartitionScheme(("gender",))), spec, KPolicy.GROUND_TRUTH
    )
    assert result.resolved_k == {"female": 2, "male": 3}
    assert result.combined.num_clusters == 5
    gender_of = {t.template_id: t.attributes.gender for t in templates}
    for members in result.combined.clusters().values():
        assert len({gender_of[m] for m in members}) == 1
    truth = {t.template_id: t.subject_id for t in templates}
    scores = score_partitions(result, truth)
    assert all(s.f1 == pytest.approx(1.0) for s in scores.values())


def test_single_subset_matches_plain_hac() -> None:
    rng = np.random.default_rng(2)
    templates = _blobs(rng)
    spec = LinkageSpec(Linkage.AVERAGE, Metric.COSINE, num_clusters=4)
    partitioned = cluster_partitioned(
        {"base": templates}, spec, KPolicy.PROPORTIONAL, global_k=4
    )
    plain = hac_cluster(
        [t.template_id for t in templates],
        np.stack([t.representations[0] for t in templates]),
        spec,
    )
    assert partitioned.combined.labels == plain.labels
    assert partitioned.combined.merge_trace == plain.merge_trace


def test_threads_do_not_change_results() -> None:
    rng = np.random.default_rng(4)
    templates = _blobs(rng)
    parts = partition_templates(templates, PartitionScheme(("gender", "skin_tone")))
    spec = LinkageSpec(Linkage.COMPLETE, Metric.EUCLIDEAN, num_clusters=1)
    one = cluster_partitioned(parts, spec, KPolicy.GROUND_TRUTH, max_workers=1)
    many = cluster_partitioned(parts, spec, KPolicy.GROUND_TRUTH, max_workers=4)
    assert one.combined == many.combined


def test_empty_partitions_raise() -> None:
    with pytest.raises(EmptyInput):
        cluster_partitioned({"a": []}, LinkageSpec(num_clusters=1))


def test_class_count_sweep_is_seeded_and_sized() -> None:
    rng = np.random.default_rng(6)
    templates = _blobs(rng)
    spec = LinkageSpec(Linkage.AVERAGE, Metric.COSINE, num_clusters=1)
    points = class_count_sweep(templates, [2, 4], spec, seed=3)
    assert [p.num_classes for p in points] == [2, 4]
    assert [p.num_templates for p in points] == [6, 12]
    assert all(p.scores.f1 == pytest.approx(1.0) for p in points)
    again = class_count_sweep(templates, [2, 4], spec, seed=3, max_workers=2)
    assert again == points
    with pytest.raises(InvalidInput):
        class_count_sweep(templates, [6], spec)
