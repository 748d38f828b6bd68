# __init__.py
# SPDX-License-Identifier: MIT
"""
Top-level package exports for :mod:`faceclust`.

Public surface and stability
----------------------------
The symbols listed in :data:`PRIMARY_API` are the recommended public surface
and are exported via :data:`__all__`. Most callers should:

- Build a :class:`RunConfig` or load one with :func:`load_config_from_path`.
- Run one of the ``run_*`` helpers, or call the core functions directly.
- Read results from the returned summary and the files in ``out_dir``.

Everything else imported here is an expert surface and may change between
releases.

Examples:
    Cluster media-averaged templates of a saved dataset::

        >>> from faceclust import LinkageSpec, Linkage, Metric, load_dataset
        >>> from faceclust import build_templates, cluster_templates
        >>> ds = load_dataset("data/embeddings.femb", "data/metadata.csv")
        >>> spec = LinkageSpec(Linkage.AVERAGE, Metric.COSINE, num_clusters=50)
        >>> clustering = cluster_templates(build_templates(ds), spec)

    Config-driven run::

        >>> from faceclust import load_config_from_path, run_command
        >>> summary = run_command(load_config_from_path("identify.toml"))
"""

from __future__ import annotations

# ---------------------------------------------------------------------------
# Package version
# ---------------------------------------------------------------------------
try:
    from importlib.metadata import version as _pkg_version

    __version__ = _pkg_version("faceclust")
except Exception:  # PackageNotFoundError or runtime env oddities
    __version__ = "0.0.0+unknown"


# ---------------------------------------------------------------------------
# Primary public API (stable; exported via __all__)
# ---------------------------------------------------------------------------
from .cli.runner import (
    run_aggregate,
    run_assoc,
    run_cluster,
    run_command,
    run_eval_cluster,
    run_identify,
    run_sweep_k,
    run_synth,
)
from .core.aggregate import (
    AggregationMethod,
    AggregationSpec,
    ClusterParams,
    aggregate_template,
    cluster_aggregate,
    mean_aggregate,
    sweep_k,
)
from .core.config import RunConfig, SynthConfig, load_config_from_path
from .core.errors import FaceclustError, FormatError, InvalidConfig
from .core.hac import Clustering, Linkage, LinkageSpec, Metric, hac_cluster
from .core.kdforest import KdForest, ann_search, brute_force_nn, build_forest
from .core.kmeans import ForestParams, KMeansMode, KMeansResult, ann_kmeans, kmeanspp_seed
from .core.metrics import (
    Fusion,
    IdentReport,
    PairwiseScores,
    ScoreTable,
    cmc,
    evaluate_identification,
    pairwise_prf,
    score_probes,
    tpir_fpir,
)
from .core.partition import (
    KPolicy,
    PartitionScheme,
    cluster_partitioned,
    cluster_templates,
    partition_templates,
)
from .core.records import (
    AttributeRecord,
    Dataset,
    Gender,
    Modality,
    Role,
    Sample,
    SplitEntry,
    Template,
)
from .core.svmassoc import AssocModel, AssociationSets, Box, iou, tfa_associate, train_svm
from .core.synth import SynthResult, generate
from .core.vectors import build_templates, cosine_similarity, media_average

# ---------------------------------------------------------------------------
# Advanced / expert API (imported for convenience; not exported via __all__)
# ---------------------------------------------------------------------------
from .core.concurrency import Executor, ExecutorConfig, map_ordered
from .core.log import WarningLog, configure_logging, get_logger, temp_level
from .core.rng import SplitMix64, derive_seed
from .sinks import save_dataset, write_femb
from .sources import load_dataset, read_femb

# ---------------------------------------------------------------------------
# Stable export list
# ---------------------------------------------------------------------------
PRIMARY_API = [
    "__version__",
    # runners
    "run_command",
    "run_synth",
    "run_cluster",
    "run_eval_cluster",
    "run_aggregate",
    "run_identify",
    "run_sweep_k",
    "run_assoc",
    # config and errors
    "RunConfig",
    "SynthConfig",
    "load_config_from_path",
    "FaceclustError",
    "FormatError",
    "InvalidConfig",
    # records
    "AttributeRecord",
    "Dataset",
    "Gender",
    "Modality",
    "Role",
    "Sample",
    "SplitEntry",
    "Template",
    "build_templates",
    "media_average",
    "cosine_similarity",
    "load_dataset",
    "save_dataset",
    # clustering
    "Clustering",
    "Linkage",
    "LinkageSpec",
    "Metric",
    "hac_cluster",
    "KPolicy",
    "PartitionScheme",
    "partition_templates",
    "cluster_templates",
    "cluster_partitioned",
    # nearest neighbours and k-means
    "KdForest",
    "build_forest",
    "ann_search",
    "brute_force_nn",
    "ForestParams",
    "KMeansMode",
    "KMeansResult",
    "ann_kmeans",
    "kmeanspp_seed",
    # aggregation
    "AggregationMethod",
    "AggregationSpec",
    "ClusterParams",
    "mean_aggregate",
    "cluster_aggregate",
    "aggregate_template",
    "sweep_k",
    # association
    "AssocModel",
    "AssociationSets",
    "Box",
    "iou",
    "train_svm",
    "tfa_associate",
    # metrics
    "Fusion",
    "IdentReport",
    "PairwiseScores",
    "ScoreTable",
    "pairwise_prf",
    "score_probes",
    "cmc",
    "tpir_fpir",
    "evaluate_identification",
    # synthetic data
    "SynthResult",
    "generate",
]

__all__ = list(PRIMARY_API)
