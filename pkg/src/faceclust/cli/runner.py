# runner.py
# SPDX-License-Identifier: MIT
"""Library-callable orchestration for every faceclust subcommand.

Each ``run_*`` function takes a validated :class:`RunConfig`, writes its
artifacts plus ``manifest.json`` (carrying the config digest) into
``out_dir`` and returns a JSON-serializable summary. The CLI is a thin
argument parser on top of these functions, so library and CLI runs with
the same config produce the same bytes.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np

from ..core.aggregate import (
    AVERAGE_LABEL,
    AggregationMethod,
    ClusterParams,
    aggregate_probes,
    gallery_scorer,
    sweep_k,
)
from ..core.config import RunConfig
from ..core.errors import InvalidConfig, InvalidInput
from ..core.hac import Clustering, Linkage, LinkageSpec, Metric
from ..core.kmeans import ForestParams, KMeansMode, Seeding
from ..core.log import get_logger
from ..core.metrics import (
    IdentReport,
    PairwiseScores,
    average_reports,
    cmc_curve,
    evaluate_identification,
    pairwise_prf,
    score_probes,
)
from ..core.naming import partition_filenames, scheme_label
from ..core.partition import (
    KPolicy,
    PartitionScheme,
    class_count_sweep,
    cluster_partitioned,
    partition_templates,
    restrict_templates,
    score_partitions,
)
from ..core.records import Dataset, SplitEntry, Template, template_attributes
from ..core.svmassoc import AssocModel, AssociationSets, pre_associate, tfa_associate
from ..core.synth import generate, similarity_margin
from ..core.vectors import build_templates
from ..sinks.atomic import write_json
from ..sinks.femb import save_dataset, sidecar_path, write_femb
from ..sinks.tables import (
    write_clustering_csv,
    write_cmc_csv,
    write_ident_csv,
    write_merge_trace_csv,
    write_rows_csv,
    write_splits_csv,
    write_sweep_csv,
)
from ..sources.femb import load_dataset
from ..sources.tables import read_boxes_json, read_clustering_csv, read_sets_json, read_splits_csv

__all__ = [
    "EMBEDDINGS_FILE",
    "METADATA_FILE",
    "SPLITS_FILE",
    "MANIFEST_FILE",
    "DEFAULT_SCHEMES",
    "run_synth",
    "run_cluster",
    "run_eval_cluster",
    "run_aggregate",
    "run_identify",
    "run_sweep_k",
    "run_assoc",
    "run_command",
]

log = get_logger(__name__)

EMBEDDINGS_FILE = "embeddings.femb"
METADATA_FILE = "metadata.csv"
SPLITS_FILE = "splits.csv"
MANIFEST_FILE = "manifest.json"
DEFAULT_SCHEMES = ("base", "gender", "gender,skin_tone")


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------

def _out_dir(cfg: RunConfig) -> Path:
    target = cfg.out_dir or cfg.data_dir
    if not target:
        raise InvalidConfig("--out: an output directory is required")
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _data_dir(cfg: RunConfig) -> Path:
    if not cfg.data_dir:
        raise InvalidConfig("--data: an input directory is required")
    return Path(cfg.data_dir)


def _write_manifest(out: Path, cfg: RunConfig, files: Sequence[Path]) -> Path:
    payload = {
        "command": cfg.command,
        "config": cfg.output_dict(),
        "config_digest": cfg.digest(),
        "files": sorted(p.name for p in files),
        "seed": cfg.seed,
    }
    return write_json(out / MANIFEST_FILE, payload)


def _load(cfg: RunConfig) -> tuple[Dataset, list[SplitEntry]]:
    data = _data_dir(cfg)
    dataset = load_dataset(data / EMBEDDINGS_FILE, data / METADATA_FILE)
    splits_path = data / SPLITS_FILE
    splits = read_splits_csv(splits_path) if splits_path.exists() else []
    return dataset, splits


def _cluster_params(cfg: RunConfig) -> ClusterParams:
    return ClusterParams(
        forest=ForestParams(
            num_trees=cfg.forest.trees,
            max_comparisons=cfg.forest.max_comparisons,
            min_centers=cfg.kmeans.ann_min_centers,
        ),
        max_iters=cfg.kmeans.max_iters,
        tol=cfg.kmeans.tol,
        mode=KMeansMode(cfg.kmeans.mode),
        seeding=Seeding(cfg.kmeans.seeding),
    )


def _linkage_spec(cfg: RunConfig) -> LinkageSpec:
    c = cfg.cluster
    if c.threshold is not None:
        return LinkageSpec(Linkage(c.linkage), Metric(c.metric), threshold=c.threshold)
    # The count is resolved per subset by the k-policy.
    return LinkageSpec(Linkage(c.linkage), Metric(c.metric), num_clusters=1)


def _subject_truth(templates: Sequence[Template]) -> dict[int, int | None]:
    return {t.template_id: t.subject_id for t in templates}


def _scores_dict(scores: PairwiseScores) -> dict[str, float]:
    return {"precision": scores.precision, "recall": scores.recall, "f1": scores.f1}


def _report_dict(report: IdentReport) -> dict[str, Any]:
    return {
        "rank": {str(k): v for k, v in report.rank_k.items()},
        "tpir_at_fpir": {f"{t:g}": v for t, v in report.tpir_at_fpir.items()},
        "mated_probes": report.num_mated,
        "nonmated_probes": report.num_nonmated,
    }


def _galleries(
    splits: Sequence[SplitEntry],
) -> tuple[dict[str, list[int]], list[int], dict[str, dict[int, int | None]]]:
    """Return gallery ids per label, probe ids and per-gallery mates."""
    galleries: dict[str, list[int]] = {}
    probes: list[int] = []
    mated: dict[int, list[int]] = {}
    for entry in splits:
        if entry.role.is_gallery:
            galleries.setdefault(entry.role.value, []).append(entry.template_id)
        else:
            if entry.template_id not in mated:
                probes.append(entry.template_id)
                mated[entry.template_id] = []
            if entry.mated_gallery_template_id is not None:
                mated[entry.template_id].append(entry.mated_gallery_template_id)
    if not galleries:
        raise InvalidInput("split has no gallery templates")
    if not probes:
        raise InvalidInput("split has no probe templates")
    mates: dict[str, dict[int, int | None]] = {}
    for label, ids in galleries.items():
        members = set(ids)
        mates[label] = {
            p: next((m for m in mated[p] if m in members), None) for p in probes
        }
    return {k: sorted(v) for k, v in sorted(galleries.items())}, sorted(probes), mates


def _raw_probes(dataset: Dataset, probe_ids: Sequence[int]) -> list[Template]:
    """Probe templates whose representations are their sample embeddings."""
    groups = dataset.by_template()
    out = []
    for tid in probe_ids:
        samples = sorted(groups.get(tid, []), key=lambda s: s.sample_id)
        if not samples:
            raise InvalidInput(f"probe template {tid} has no samples")
        subjects = {s.subject_id for s in samples}
        out.append(
            Template(
                template_id=tid,
                subject_id=subjects.pop() if len(subjects) == 1 else None,
                representations=tuple(s.embedding for s in samples),
                attributes=template_attributes(samples),
            )
        )
    return out


def _identification_inputs(
    cfg: RunConfig,
) -> tuple[list[Template], dict[str, list[Template]], dict[str, dict[int, int | None]]]:
    dataset, splits = _load(cfg)
    if not splits:
        raise InvalidInput(f"{SPLITS_FILE} is required for identification")
    gallery_ids, probe_ids, mates = _galleries(splits)
    galleries = {
        label: build_templates(dataset, template_ids=ids, renormalize=cfg.cluster.normalize)
        for label, ids in gallery_ids.items()
    }
    return _raw_probes(dataset, probe_ids), galleries, mates


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def run_synth(cfg: RunConfig) -> dict[str, Any]:
    """Generate a synthetic dataset into ``out_dir``."""
    out = _out_dir(cfg)
    # The run seed drives generation; the manifest records it as synth.seed.
    cfg = replace(cfg, synth=replace(cfg.synth, seed=cfg.seed))
    result = generate(cfg.synth)
    emb, meta = save_dataset(result.dataset, out / EMBEDDINGS_FILE, out / METADATA_FILE)
    splits = write_splits_csv(out / SPLITS_FILE, result.splits)
    files = [emb, meta, splits, sidecar_path(emb)]
    _write_manifest(out, cfg, files)
    return {
        "samples": len(result.dataset),
        "templates": len({s.template_id for s in result.dataset.samples}),
        "subjects": cfg.synth.num_subjects,
        "open_set_subjects": len(result.open_set_subjects),
        "multimodal_probes": len(result.multimodal_templates),
        "provenance": result.dataset.provenance,
        "similarity_margin": (
            similarity_margin(result.dataset) if cfg.synth.num_subjects > 1 else None
        ),
    }


def _cluster_subsets(
    cfg: RunConfig,
    templates: Sequence[Template],
    keys: Sequence[str],
):
    spec = _linkage_spec(cfg)
    if keys:
        subsets = partition_templates(templates, PartitionScheme(tuple(keys)))
        policy = KPolicy(cfg.cluster.k_policy)
        if policy is KPolicy.GROUND_TRUTH and cfg.cluster.k is not None and spec.stops_at_count:
            raise InvalidConfig(
                "--k: a global K is only split across partitions with --k-policy proportional"
            )
    else:
        subsets = {"base": tuple(templates)}  # type: ignore[assignment]
        policy = KPolicy.PROPORTIONAL if cfg.cluster.k is not None else KPolicy.GROUND_TRUTH
    return cluster_partitioned(
        subsets, spec, policy, global_k=cfg.cluster.k, max_workers=cfg.threads
    )


def _cluster_templates_for(cfg: RunConfig) -> list[Template]:
    dataset, _ = _load(cfg)
    templates = build_templates(dataset, renormalize=cfg.cluster.normalize)
    if cfg.cluster.restrict:
        templates = restrict_templates(templates, cfg.cluster.restrict)
        log.info("Restricted to %d templates by %s", len(templates), cfg.cluster.restrict)
    if not templates:
        raise InvalidInput("no templates left to cluster")
    return templates


def run_cluster(cfg: RunConfig) -> dict[str, Any]:
    """Cluster media-averaged templates, optionally per attribute partition.

    Partitioned runs also write one ``clustering_<partition>.csv`` per subset.
    """
    out = _out_dir(cfg)
    templates = _cluster_templates_for(cfg)
    result = _cluster_subsets(cfg, templates, cfg.cluster.partition)
    files = [
        write_clustering_csv(out / "clustering.csv", result.combined),
        write_merge_trace_csv(out / "merge_trace.csv", result.combined),
    ]
    if cfg.cluster.partition:
        names = partition_filenames("clustering", result.per_partition)
        for label, clustering in result.per_partition.items():
            files.append(write_clustering_csv(out / names[label], clustering))
    truth = _subject_truth(templates)
    summary: dict[str, Any] = {
        "scheme": scheme_label(cfg.cluster.partition),
        "templates": len(result.combined.labels),
        "num_clusters": result.combined.num_clusters,
        "resolved_k": dict(result.resolved_k),
        "skipped": list(result.skipped),
        "warnings": list(result.warnings),
    }
    if all(truth[t] is not None for t in result.combined.labels):
        per = score_partitions(result, truth)
        summary["partitions"] = {label: _scores_dict(s) for label, s in per.items()}
        summary.update(_scores_dict(pairwise_prf(result.combined, truth)))
        rows = [
            (label, len(result.per_partition[label].labels),
             result.per_partition[label].num_clusters,
             per[label].precision, per[label].recall, per[label].f1)
            for label in sorted(per)
        ]
        files.append(
            write_rows_csv(
                out / "cluster_scores.csv",
                ["partition", "templates", "clusters", "precision", "recall", "f1"],
                rows,
            )
        )
    _write_manifest(out, cfg, files)
    return summary


def _parse_scheme(text: str) -> tuple[str, ...]:
    text = text.strip()
    if text in ("", "base"):
        return ()
    return PartitionScheme.parse(text).keys


def run_eval_cluster(cfg: RunConfig) -> dict[str, Any]:
    """Score a clustering CSV, or compare attribute schemes and class counts."""
    out = _out_dir(cfg)
    templates = _cluster_templates_for(cfg)
    truth = _subject_truth(templates)
    files: list[Path] = []
    summary: dict[str, Any] = {}

    if cfg.clustering_path:
        clustering: Clustering = read_clustering_csv(cfg.clustering_path)
        scores = pairwise_prf(clustering, truth)
        summary.update(_scores_dict(scores))
        summary["num_clusters"] = clustering.num_clusters
        files.append(
            write_rows_csv(
                out / "eval.csv",
                ["items", "clusters", "precision", "recall", "f1"],
                [(len(clustering.labels), clustering.num_clusters,
                  scores.precision, scores.recall, scores.f1)],
            )
        )
    else:
        rows: list[tuple[object, ...]] = []
        schemes: dict[str, Any] = {}
        for text in cfg.schemes or list(DEFAULT_SCHEMES):
            keys = _parse_scheme(text)
            result = _cluster_subsets(cfg, templates, keys)
            per = score_partitions(result, truth)
            mean_f1 = float(np.mean([s.f1 for s in per.values()]))
            label = scheme_label(keys)
            schemes[label] = {
                "mean_f1": mean_f1,
                "partitions": {lb: _scores_dict(s) for lb, s in per.items()},
            }
            for lb in sorted(per):
                s = per[lb]
                c = result.per_partition[lb]
                rows.append((label, lb, len(c.labels), c.num_clusters, s.precision, s.recall, s.f1))
            rows.append((label, "mean", "", "", "", "", mean_f1))
        summary["schemes"] = schemes
        files.append(
            write_rows_csv(
                out / "scheme_scores.csv",
                ["scheme", "partition", "templates", "clusters", "precision", "recall", "f1"],
                rows,
            )
        )

    if cfg.class_counts:
        points = class_count_sweep(
            templates,
            cfg.class_counts,
            _linkage_spec(cfg).with_num_clusters(1),
            seed=cfg.seed,
            max_workers=cfg.threads,
        )
        summary["class_counts"] = {str(p.num_classes): p.scores.f1 for p in points}
        files.append(
            write_rows_csv(
                out / "class_counts.csv",
                ["classes", "templates", "precision", "recall", "f1"],
                [
                    (p.num_classes, p.num_templates, p.scores.precision,
                     p.scores.recall, p.scores.f1)
                    for p in points
                ],
            )
        )
    _write_manifest(out, cfg, files)
    return summary


def run_aggregate(cfg: RunConfig) -> dict[str, Any]:
    """Aggregate every probe template and write its representations."""
    out = _out_dir(cfg)
    dataset, splits = _load(cfg)
    if splits:
        _, probe_ids, _ = _galleries(splits)
    else:
        probe_ids = sorted({s.template_id for s in dataset.samples})
    probes = _raw_probes(dataset, probe_ids)
    aggregated = aggregate_probes(
        probes,
        AggregationMethod(cfg.aggregate.method),
        cfg.aggregate.k,
        _cluster_params(cfg),
        cfg.seed,
        max_workers=cfg.threads,
    )
    index_rows = []
    vectors = []
    for t in aggregated:
        for rep_no, rep in enumerate(t.representations):
            subject = "" if t.subject_id is None else t.subject_id
            index_rows.append((len(vectors), t.template_id, subject, rep_no))
            vectors.append(rep)
    files = [
        write_femb(out / "aggregates.femb", np.stack(vectors)),
        write_rows_csv(
            out / "aggregates.csv",
            ["row", "template_id", "subject_id", "representation"],
            index_rows,
        ),
    ]
    _write_manifest(out, cfg, files)
    counts = [len(t.representations) for t in aggregated]
    return {
        "method": cfg.aggregate.method,
        "k": cfg.aggregate.k,
        "probes": len(aggregated),
        "representations": int(sum(counts)),
        "max_representations": int(max(counts)),
    }


def _evaluate(
    probes: Sequence[Template],
    galleries: Mapping[str, Sequence[Template]],
    mates: Mapping[str, Mapping[int, int | None]],
    fusion: str,
) -> tuple[dict[str, IdentReport], dict[str, list[tuple[int, float]]]]:
    reports: dict[str, IdentReport] = {}
    curves: dict[str, list[tuple[int, float]]] = {}
    for label in sorted(galleries):
        table = score_probes(probes, galleries[label], fusion, mates=mates[label])
        reports[label] = evaluate_identification(table)
        curves[label] = cmc_curve(table)
    if len(reports) > 1:
        reports[AVERAGE_LABEL] = average_reports([reports[lb] for lb in sorted(galleries)])
    return reports, curves


def run_identify(cfg: RunConfig) -> dict[str, Any]:
    """Open-set identification of aggregated probes against each gallery."""
    out = _out_dir(cfg)
    raw, galleries, mates = _identification_inputs(cfg)
    methods = [cfg.aggregate.method]
    if cfg.aggregate.compare_baseline and cfg.aggregate.method != AggregationMethod.MEAN.value:
        methods.insert(0, AggregationMethod.MEAN.value)
    files: list[Path] = []
    summary: dict[str, Any] = {}
    for method in methods:
        probes = aggregate_probes(
            raw,
            AggregationMethod(method),
            cfg.aggregate.k,
            _cluster_params(cfg),
            cfg.seed,
            max_workers=cfg.threads,
        )
        reports, curves = _evaluate(probes, galleries, mates, cfg.aggregate.fusion)
        files.append(write_ident_csv(out / f"ident_{method}.csv", reports))
        files.append(write_cmc_csv(out / f"cmc_{method}.csv", curves))
        summary[method] = {label: _report_dict(r) for label, r in reports.items()}
    _write_manifest(out, cfg, files)
    return summary


def run_sweep_k(cfg: RunConfig) -> dict[str, Any]:
    """Evaluate cluster aggregation for every k in ``k_min..k_max``."""
    out = _out_dir(cfg)
    raw, galleries, mates = _identification_inputs(cfg)
    scorer = gallery_scorer(galleries, cfg.aggregate.fusion, mates=mates)
    rows = sweep_k(
        raw,
        range(cfg.aggregate.k_min, cfg.aggregate.k_max + 1),
        scorer,
        _cluster_params(cfg),
        cfg.seed,
        max_workers=cfg.threads,
    )
    files = [write_sweep_csv(out / "sweep.csv", rows)]
    _write_manifest(out, cfg, files)
    key = AVERAGE_LABEL if AVERAGE_LABEL in rows[0].reports else sorted(rows[0].reports)[0]
    rank1 = [row.reports[key].rank_k[1] for row in rows]
    best = rows[int(np.argmax(rank1))].k
    return {
        "k": [row.k for row in rows],
        "rank1": rank1,
        "best_k": best,
        "reported_on": key,
    }


def run_assoc(cfg: RunConfig) -> dict[str, Any]:
    """Grow a target's positive set with the iterative SVM."""
    out = _out_dir(cfg)
    if not cfg.sets_path:
        raise InvalidConfig("--sets: an association sets JSON is required")
    dataset, _ = _load(cfg)
    features = {s.sample_id: s.embedding for s in dataset.samples}
    sets, candidates = read_sets_json(cfg.sets_path)
    pre: list[int] = []
    if cfg.boxes_path:
        tracks, detections = read_boxes_json(cfg.boxes_path)
        pre = pre_associate(tracks, detections, cfg.assoc.first_k)
        blocked = sets.negatives | sets.background
        added = [i for i in pre if i not in blocked]
        sets = AssociationSets(
            positives=sets.positives | frozenset(added),
            negatives=sets.negatives,
            background=sets.background,
        )
    a = cfg.assoc
    result = tfa_associate(
        sets,
        features,
        candidates,
        rounds=a.rounds,
        cp=a.cp,
        cn=a.cn,
        accept_margin=a.accept_margin,
        model=AssocModel(a.model),
        bias=a.bias,
        tol=a.tol,
        max_iters=a.max_iters,
    )
    payload = {
        "positives": list(result.positives),
        "history": list(result.history),
        "pre_associated": pre,
    }
    files = [write_json(out / "assoc.json", payload)]
    _write_manifest(out, cfg, files)
    return {**payload, "rounds_run": len(result.history) - 1}


_COMMANDS: dict[str, Callable[[RunConfig], dict[str, Any]]] = {
    "synth": run_synth,
    "cluster": run_cluster,
    "eval-cluster": run_eval_cluster,
    "aggregate": run_aggregate,
    "identify": run_identify,
    "sweep-k": run_sweep_k,
    "assoc": run_assoc,
}


def run_command(cfg: RunConfig) -> dict[str, Any]:
    """Validate ``cfg`` and run ``cfg.command``."""
    cfg.validate()
    try:
        fn = _COMMANDS[cfg.command or ""]
    except KeyError:
        raise InvalidConfig(
            f"unknown command {cfg.command!r}; expected one of {sorted(_COMMANDS)}"
        ) from None
    log.info("Running %s with seed %d, config digest %s", cfg.command, cfg.seed, cfg.digest())
    return fn(cfg)
