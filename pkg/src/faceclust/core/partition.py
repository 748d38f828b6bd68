# partition.py
# SPDX-License-Identifier: MIT
"""Attribute partitioning of templates and per-partition clustering.

Templates are split into disjoint subsets by ground-truth attributes
(gender, skin tone or both) and each subset is clustered independently.
A combined clustering with globally unique cluster ids is assembled in
partition-label order.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .concurrency import map_ordered
from .errors import EmptyInput, InvalidInput
from .hac import Clustering, LinkageSpec, Merge, hac_cluster
from .log import WarningLog, get_logger
from .metrics import PairwiseScores, pairwise_prf
from .records import Gender, Template
from .rng import SplitMix64, derive_seed

__all__ = [
    "ATTRIBUTE_KEYS",
    "PartitionScheme",
    "KPolicy",
    "Partitions",
    "PartitionedClustering",
    "ClassCountPoint",
    "restrict_templates",
    "partition_templates",
    "resolve_k",
    "cluster_templates",
    "cluster_partitioned",
    "score_partitions",
    "class_count_sweep",
]

log = get_logger(__name__)

ATTRIBUTE_KEYS = ("gender", "skin_tone")
LABEL_SEP = "·"


def _parse_value(key: str, raw: str) -> Gender | int:
    if key == "gender":
        try:
            gender = Gender(raw.strip().lower())
        except ValueError as exc:
            raise InvalidInput(f"unknown gender {raw!r}") from exc
        if gender is Gender.UNKNOWN:
            raise InvalidInput("cannot restrict to an UNKNOWN gender")
        return gender
    if key == "skin_tone":
        try:
            return int(raw)
        except ValueError as exc:
            raise InvalidInput(f"skin_tone must be an integer bucket; got {raw!r}") from exc
    raise InvalidInput(f"unknown attribute {key!r}; expected one of {ATTRIBUTE_KEYS}")


def _value_token(value: Gender | int) -> str:
    return value.value if isinstance(value, Gender) else str(value)


@dataclass(frozen=True, slots=True)
class PartitionScheme:
    """Ordered, unique attribute keys drawn from ``ATTRIBUTE_KEYS``."""

    keys: tuple[str, ...]

    def __post_init__(self) -> None:
        keys = tuple(self.keys)
        if not keys:
            raise InvalidInput("a partition scheme needs at least one key")
        if len(set(keys)) != len(keys):
            raise InvalidInput(f"partition keys must be unique; got {list(keys)}")
        for key in keys:
            if key not in ATTRIBUTE_KEYS:
                raise InvalidInput(f"unknown attribute {key!r}; expected one of {ATTRIBUTE_KEYS}")
        object.__setattr__(self, "keys", keys)

    @classmethod
    def parse(cls, text: str) -> PartitionScheme:
        """Parse a comma list such as ``gender,skin_tone``."""
        return cls(tuple(part.strip() for part in text.split(",") if part.strip()))

    @property
    def label(self) -> str:
        return ",".join(self.keys)


class KPolicy(str, Enum):
    GROUND_TRUTH = "ground_truth"
    PROPORTIONAL = "proportional"


@dataclass(frozen=True, slots=True)
class Partitions:
    """Disjoint template subsets keyed by partition label, plus skipped ids."""

    subsets: Mapping[str, tuple[Template, ...]]
    skipped: tuple[int, ...] = ()


@dataclass(frozen=True, slots=True)
class PartitionedClustering:
    """Independent clusterings of every subset and their disjoint union.

    Attributes:
        per_partition (Mapping[str, Clustering]): Clustering per label.
        combined (Clustering): Union with cluster ids offset per partition
            in label order.
        resolved_k (Mapping[str, int]): Cluster count used per subset
            (absent for threshold runs).
        warnings (tuple[str, ...]): Clipping and policy notes.
        skipped (tuple[int, ...]): Template ids excluded for UNKNOWN values.
    """

    per_partition: Mapping[str, Clustering]
    combined: Clustering
    resolved_k: Mapping[str, int] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()
    skipped: tuple[int, ...] = ()


@dataclass(frozen=True, slots=True)
class ClassCountPoint:
    num_classes: int
    num_templates: int
    scores: PairwiseScores


def restrict_templates(
    templates: Sequence[Template],
    restrict: Mapping[str, str],
) -> list[Template]:
    """Keep templates whose attributes equal every ``restrict`` value."""
    wanted = {key: _parse_value(key, raw) for key, raw in restrict.items()}
    return [
        t for t in templates
        if all(t.attributes.value_of(key) == value for key, value in wanted.items())
    ]


def partition_templates(templates: Sequence[Template], scheme: PartitionScheme) -> Partitions:
    """Split templates into disjoint subsets by the scheme's attribute values.

    Labels join the values with ``·`` in key order, e.g. ``male·3``.
    Templates with an UNKNOWN value on any key are reported as skipped.
    Subsets are ordered by label.
    """
    buckets: dict[tuple[str, ...], list[Template]] = {}
    skipped: list[int] = []
    for template in templates:
        values = [template.attributes.value_of(key) for key in scheme.keys]
        if any(v is None for v in values):
            skipped.append(template.template_id)
            continue
        token = tuple(_value_token(v) for v in values)  # type: ignore[arg-type]
        buckets.setdefault(token, []).append(template)
    if skipped:
        log.warning(
            "Scheme %s skipped %d template(s) with UNKNOWN attributes.", scheme.label, len(skipped)
        )
    subsets = {
        LABEL_SEP.join(token): tuple(buckets[token])
        for token in sorted(buckets, key=LABEL_SEP.join)
    }
    return Partitions(subsets=subsets, skipped=tuple(skipped))


def _distinct_subjects(templates: Sequence[Template]) -> int:
    return max(1, len({t.subject_id for t in templates if t.subject_id is not None}))


def _largest_remainder(total: int, sizes: Mapping[str, int]) -> dict[str, int]:
    n = sum(sizes.values())
    quotas = {label: total * size / n for label, size in sizes.items()}
    shares = {label: int(np.floor(q)) for label, q in quotas.items()}
    leftover = total - sum(shares.values())
    order = sorted(sizes, key=lambda lb: (-(quotas[lb] - shares[lb]), lb))
    for label in order[:leftover]:
        shares[label] += 1
    return shares


def resolve_k(
    subsets: Mapping[str, Sequence[Template]],
    policy: KPolicy | str,
    *,
    global_k: int | None = None,
) -> tuple[dict[str, int], list[str]]:
    """Resolve a cluster count per subset.

    GROUND_TRUTH uses the number of distinct subjects in each subset.
    PROPORTIONAL splits ``global_k`` by subset size (largest remainder).
    Counts are clipped to [1, subset size]; every clip is reported.

    Returns:
        tuple[dict[str, int], list[str]]: Counts per label and warnings.
    """
    policy = KPolicy(policy)
    if policy is KPolicy.GROUND_TRUTH:
        wanted = {label: _distinct_subjects(ts) for label, ts in subsets.items()}
    else:
        if global_k is None or global_k < 1:
            raise InvalidInput("PROPORTIONAL k-policy needs a global K >= 1")
        wanted = _largest_remainder(global_k, {label: len(ts) for label, ts in subsets.items()})

    resolved: dict[str, int] = {}
    notes = WarningLog(log)
    for label, templates in subsets.items():
        k = wanted[label]
        if k > len(templates):
            notes.warn("%s: K=%d clipped to subset size %d", label, k, len(templates))
            k = len(templates)
        if k < 1:
            notes.warn("%s: K=%d raised to 1", label, k)
            k = 1
        resolved[label] = k
    return resolved, list(notes.messages)


def cluster_templates(templates: Sequence[Template], spec: LinkageSpec) -> Clustering:
    """Cluster templates by their first representation."""
    if not templates:
        raise EmptyInput("no templates to cluster")
    ids = [t.template_id for t in templates]
    vectors = np.stack([t.representations[0] for t in templates])
    return hac_cluster(ids, vectors, spec)


def _combine(per_partition: Mapping[str, Clustering]) -> Clustering:
    labels: dict[int, int] = {}
    trace: list[Merge] = []
    offset = 0
    for label in sorted(per_partition):
        clustering = per_partition[label]
        for item, cid in clustering.labels.items():
            labels[item] = cid + offset
        trace.extend(clustering.merge_trace)
        offset += clustering.num_clusters
    return Clustering(labels=labels, num_clusters=offset, merge_trace=tuple(trace))


def cluster_partitioned(
    subsets: Mapping[str, Sequence[Template]] | Partitions,
    spec: LinkageSpec,
    k_policy: KPolicy | str = KPolicy.GROUND_TRUTH,
    *,
    global_k: int | None = None,
    max_workers: int = 1,
) -> PartitionedClustering:
    """Cluster every subset independently and merge the results.

    With a threshold stop the subsets share ``spec`` unchanged; with a
    count stop each subset gets the count resolved by ``k_policy``.
    Jobs run on up to ``max_workers`` threads; results are merged in label
    order.
    """
    skipped: tuple[int, ...] = ()
    if isinstance(subsets, Partitions):
        skipped = subsets.skipped
        subsets = subsets.subsets
    labels = sorted(label for label, ts in subsets.items() if ts)
    if not labels:
        raise EmptyInput("every partition is empty")
    nonempty = {label: subsets[label] for label in labels}

    resolved: dict[str, int] = {}
    warnings: list[str] = []
    if spec.stops_at_count:
        resolved, warnings = resolve_k(nonempty, k_policy, global_k=global_k)

    def _job(label: str) -> Clustering:
        job_spec = spec.with_num_clusters(resolved[label]) if spec.stops_at_count else spec
        return cluster_templates(nonempty[label], job_spec)

    results = map_ordered(labels, _job, max_workers=max_workers)
    per_partition = dict(zip(labels, results))
    return PartitionedClustering(
        per_partition=per_partition,
        combined=_combine(per_partition),
        resolved_k=resolved,
        warnings=tuple(warnings),
        skipped=skipped,
    )


def score_partitions(
    result: PartitionedClustering,
    subjects: Mapping[int, int | None],
) -> dict[str, PairwiseScores]:
    """Pairwise precision/recall/F1 of every partition against subject ids."""
    return {
        label: pairwise_prf(clustering, subjects)
        for label, clustering in result.per_partition.items()
    }


def class_count_sweep(
    templates: Sequence[Template],
    class_counts: Sequence[int],
    spec: LinkageSpec,
    *,
    seed: int = 0,
    max_workers: int = 1,
) -> list[ClassCountPoint]:
    """Cluster random subject subsets of growing size and score each.

    For each count c, c subjects are drawn without replacement (stream
    keyed by c) and their templates are clustered into c clusters, so the
    F-measure can be read against the number of classes.
    """
    subjects = sorted({t.subject_id for t in templates if t.subject_id is not None})
    if not subjects:
        raise EmptyInput("class_count_sweep needs templates with known subjects")
    truth = {t.template_id: t.subject_id for t in templates}

    def _job(count: int) -> ClassCountPoint:
        if count < 1 or count > len(subjects):
            raise InvalidInput(f"class count {count} outside 1..{len(subjects)}")
        order = SplitMix64(derive_seed(seed, count)).permutation(len(subjects))
        chosen = {subjects[int(i)] for i in order[:count]}
        subset = [t for t in templates if t.subject_id in chosen]
        clustering = cluster_templates(subset, spec.with_num_clusters(count))
        return ClassCountPoint(
            num_classes=count,
            num_templates=len(subset),
            scores=pairwise_prf(clustering, {t.template_id: truth[t.template_id] for t in subset}),
        )

    return map_ordered(list(class_counts), _job, max_workers=max_workers)
