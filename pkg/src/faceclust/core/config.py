# config.py
# SPDX-License-Identifier: MIT
"""Configuration models and helpers for faceclust runs.

Declarative dataclasses describe clustering, kd-forest, k-means,
aggregation, association and synthetic-data settings. A master
:class:`RunConfig` serializes to and from JSON or TOML and produces the
config digest that accompanies every output file.
"""
from __future__ import annotations

import json
import tomllib
import types
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, TypeVar, Union, get_args, get_origin, get_type_hints

from .errors import InvalidConfig
from .log import DEFAULT_FORMAT, PACKAGE_LOGGER_NAME, configure_logging, resolve_level
from .records import SKIN_TONES, sha256_text

__all__ = [
    "LINKAGES",
    "METRICS",
    "K_POLICIES",
    "KMEANS_MODES",
    "SEEDINGS",
    "AGGREGATION_METHODS",
    "FUSIONS",
    "ClusterConfig",
    "ForestConfig",
    "KMeansConfig",
    "AggregateConfig",
    "AssocConfig",
    "SynthConfig",
    "LoggingConfig",
    "RunConfig",
    "load_config_from_path",
    "to_plain_dict",
]

LINKAGES = ("single", "complete", "average")
METRICS = ("cosine", "euclidean")
K_POLICIES = ("ground_truth", "proportional")
KMEANS_MODES = ("exact", "ann")
SEEDINGS = ("kmeans++", "farthest")
AGGREGATION_METHODS = ("mean", "cluster")
FUSIONS = ("max", "mean")
PARTITION_KEYS = ("gender", "skin_tone")


def _require(cond: bool, flag: str, message: str) -> None:
    if not cond:
        raise InvalidConfig(f"{flag}: {message}")


def _choice(value: str, allowed: tuple[str, ...], flag: str) -> str:
    normalized = (value or "").strip().lower()
    _require(normalized in allowed, flag, f"expected one of {list(allowed)}, got {value!r}")
    return normalized


# ---------------------------------------------------------------------------
# Section configs
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class ClusterConfig:
    """Agglomerative clustering and attribute partitioning.

    Attributes:
        linkage (str): ``single``, ``complete`` or ``average``.
        metric (str): ``cosine`` or ``euclidean``.
        k (int | None): Global cluster count. None resolves K from ground
            truth (number of distinct subjects per subset).
        threshold (float | None): Distance threshold; replaces the cluster
            count stop when set.
        partition (list[str]): Attribute keys to partition by; empty means
            the base (unpartitioned) run.
        restrict (dict[str, str]): Keep only templates whose attribute equals
            the given value, e.g. ``{"gender": "male"}``.
        k_policy (str): ``ground_truth`` or ``proportional``.
        normalize (bool): L2-normalize templates after media averaging.
    """
    linkage: str = "average"
    metric: str = "cosine"
    k: int | None = None
    threshold: float | None = None
    partition: list[str] = field(default_factory=list)
    restrict: dict[str, str] = field(default_factory=dict)
    k_policy: str = "ground_truth"
    normalize: bool = False

    def validate(self) -> None:
        self.linkage = _choice(self.linkage, LINKAGES, "--linkage")
        self.metric = _choice(self.metric, METRICS, "--metric")
        self.k_policy = _choice(self.k_policy, K_POLICIES, "--k-policy")
        if self.k is not None:
            _require(self.k >= 1, "--k", "must be >= 1")
        if self.threshold is not None:
            _require(self.threshold >= 0.0, "--threshold", "must be >= 0")
        _require(
            len(set(self.partition)) == len(self.partition),
            "--partition",
            "keys must be unique",
        )
        for key in self.partition:
            _require(key in PARTITION_KEYS, "--partition", f"unknown attribute {key!r}")
        for key in self.restrict:
            _require(key in PARTITION_KEYS, "--restrict", f"unknown attribute {key!r}")
        if self.k_policy == "proportional" and self.threshold is None:
            _require(self.k is not None, "--k", "proportional k-policy needs a global --k")


@dataclass(slots=True)
class ForestConfig:
    """Randomized kd-forest settings (defaults: 2 trees, 100 comparisons)."""
    trees: int = 2
    max_comparisons: int = 100

    def validate(self) -> None:
        _require(self.trees >= 1, "--trees", "must be >= 1")
        _require(self.max_comparisons >= 1, "--max-comparisons", "must be >= 1")


@dataclass(slots=True)
class KMeansConfig:
    """Lloyd iteration settings.

    Attributes:
        mode (str): ``exact`` (brute-force assignment) or ``ann``.
        max_iters (int): Iteration cap.
        tol (float): Relative objective decrease that counts as converged.
        seeding (str): ``kmeans++`` (D² sampling) or ``farthest``.
        ann_min_centers (int): In ANN mode, a forest over the centers is
            built only when k exceeds this; below it assignment is exact.
    """
    mode: str = "ann"
    max_iters: int = 100
    tol: float = 1e-4
    seeding: str = "kmeans++"
    ann_min_centers: int = 64

    def validate(self) -> None:
        self.mode = _choice(self.mode, KMEANS_MODES, "--kmeans-mode")
        self.seeding = _choice(self.seeding, SEEDINGS, "--seeding")
        _require(self.max_iters >= 1, "--max-iters", "must be >= 1")
        _require(self.tol >= 0.0, "--tol", "must be >= 0")
        _require(self.ann_min_centers >= 0, "ann_min_centers", "must be >= 0")


@dataclass(slots=True)
class AggregateConfig:
    """Template aggregation and probe scoring.

    Attributes:
        method (str): ``mean`` (averaging) or ``cluster`` (k-means centers).
        k (int): Cluster count for ``cluster``.
        k_min (int): First k of a sweep.
        k_max (int): Last k of a sweep (default 20).
        fusion (str): ``max`` or ``mean`` over probe representations.
        compare_baseline (bool): Also evaluate mean aggregation in ``identify``.
    """
    method: str = "cluster"
    k: int = 7
    k_min: int = 1
    k_max: int = 20
    fusion: str = "max"
    compare_baseline: bool = True

    def validate(self) -> None:
        self.method = _choice(self.method, AGGREGATION_METHODS, "--method")
        self.fusion = _choice(self.fusion, FUSIONS, "--fusion")
        _require(self.k >= 1, "--k", "must be >= 1")
        _require(self.k_min >= 1, "--k-min", "must be >= 1")
        _require(self.k_max >= self.k_min, "--k-max", "must be >= --k-min")


@dataclass(slots=True)
class AssocConfig:
    """Target face association (iterative linear SVM).

    Attributes:
        cp (float): Positive-class weight C_p.
        cn (float): Negative-class weight C_n.
        model (int): 1 trains on S_n ∪ S_b; 2 uses S_b only when S_n is empty.
        rounds (int): Maximum association rounds.
        accept_margin (float): Candidates with w·x above this are accepted.
        bias (bool): Append a constant feature to learn an offset.
        first_k (int): Frames used for IOU pre-association.
        tol (float): Gradient-norm stopping tolerance for the solver.
        max_iters (int): Newton iteration cap.
    """
    cp: float = 1.0
    cn: float = 1.0
    model: int = 1
    rounds: int = 5
    accept_margin: float = 0.0
    bias: bool = True
    first_k: int = 10
    tol: float = 1e-6
    max_iters: int = 100

    def validate(self) -> None:
        _require(self.cp > 0.0, "--cp", "must be > 0")
        _require(self.cn > 0.0, "--cn", "must be > 0")
        _require(self.model in (1, 2), "--assoc-model", "must be 1 or 2")
        _require(self.rounds >= 0, "--rounds", "must be >= 0")
        _require(self.first_k >= 1, "--first-k", "must be >= 1")
        _require(self.tol > 0.0, "--svm-tol", "must be > 0")
        _require(self.max_iters >= 1, "--svm-max-iters", "must be >= 1")


@dataclass(slots=True)
class SynthConfig:
    """Synthetic embedding dataset parameters.

    Attributes:
        num_subjects (int): Number of identities.
        templates_per_subject (int): Templates generated per subject.
        media_per_template (int): Media per template.
        frames_per_media (int): Frames per video media (images hold one).
        video_fraction (float): Probability that a media is a video.
        dim (int): Embedding dimension (>= 2).
        within_subject_noise (float): σ; per-coordinate noise is N(0, σ²/d).
        male_probability (float): P(gender = MALE) per subject.
        skin_tone_probabilities (dict[int, float]): Skin-tone bucket weights.
        openset_fraction (float): Share of subjects absent from every gallery.
        num_galleries (int): 1 or 2 galleries with distinct templates.
        multimodal_fraction (float): Share of probe templates that mix a
            second "pose" regime into half of their media.
        pose_weight (float): β, weight of the pose direction in that regime.
        pose_identity_weight (float): α, weight of the prototype in that regime.
        pose_noise_scale (float): Noise multiplier in that regime.
        num_poses (int): Size of the shared pose-direction pool.
        seed (int): 64-bit seed.
    """
    num_subjects: int = 50
    templates_per_subject: int = 3
    media_per_template: int = 2
    frames_per_media: int = 4
    video_fraction: float = 0.5
    dim: int = 32
    within_subject_noise: float = 0.5
    male_probability: float = 0.5
    skin_tone_probabilities: dict[int, float] = field(default_factory=lambda: {1: 0.5, 3: 0.5})
    openset_fraction: float = 0.2
    num_galleries: int = 2
    multimodal_fraction: float = 0.0
    pose_weight: float = 2.0
    pose_identity_weight: float = 0.0
    pose_noise_scale: float = 1.0
    num_poses: int = 2
    seed: int = 0

    def validate(self) -> None:
        for name in ("num_subjects", "templates_per_subject", "media_per_template",
                     "frames_per_media", "num_poses"):
            _require(getattr(self, name) >= 1, f"synth.{name}", "must be >= 1")
        _require(self.within_subject_noise > 0.0, "--noise", "σ must be > 0")
        _require(self.dim >= 2, "--dim", "must be >= 2")
        _require(0.0 <= self.openset_fraction < 1.0, "--openset-fraction", "must be in [0, 1)")
        _require(0.0 <= self.video_fraction <= 1.0, "--video-fraction", "must be in [0, 1]")
        _require(0.0 <= self.male_probability <= 1.0, "synth.male_probability",
                 "must be in [0, 1]")
        _require(0.0 <= self.multimodal_fraction <= 1.0, "--multimodal-fraction",
                 "must be in [0, 1]")
        _require(self.num_galleries in (1, 2), "--galleries", "must be 1 or 2")
        _require(self.templates_per_subject > self.num_galleries, "--templates-per-subject",
                 "must exceed the number of galleries so every subject has a probe")
        _require(self.pose_noise_scale > 0.0, "synth.pose_noise_scale", "must be > 0")
        _require(bool(self.skin_tone_probabilities), "synth.skin_tone_probabilities",
                 "must not be empty")
        for tone, weight in self.skin_tone_probabilities.items():
            _require(int(tone) in SKIN_TONES, "synth.skin_tone_probabilities",
                     f"bucket {tone!r} outside 1..6")
            _require(weight >= 0.0, "synth.skin_tone_probabilities", "weights must be >= 0")
        _require(sum(self.skin_tone_probabilities.values()) > 0.0,
                 "synth.skin_tone_probabilities", "weights must not all be zero")


@dataclass(slots=True)
class LoggingConfig:
    """Controls the package logger."""
    level: int | str = "INFO"
    propagate: bool = True
    fmt: str | None = DEFAULT_FORMAT
    logger_name: str = PACKAGE_LOGGER_NAME

    def validate(self) -> None:
        try:
            resolve_level(self.level)
        except ValueError as exc:
            raise InvalidConfig(f"--log-level: {exc}") from exc

    def apply(self) -> None:
        configure_logging(
            level=self.level,
            propagate=self.propagate,
            fmt=self.fmt,
            logger_name=self.logger_name or PACKAGE_LOGGER_NAME,
        )


# ---------------------------------------------------------------------------
# Master config
# ---------------------------------------------------------------------------

T = TypeVar("T", bound="RunConfig")

# Execution-only knobs that must not influence outputs or the digest.
_EXECUTION_ONLY = frozenset({"threads", "logging"})


@dataclass(slots=True)
class RunConfig:
    """Declarative spec for one faceclust run.

    Holds only serializable knobs; datasets, forests and executors are
    built by the runner.

    Attributes:
        command (str | None): Subcommand that produced the run.
        data_dir (str | None): Directory holding ``embeddings.femb``,
            ``metadata.csv`` and ``splits.csv``.
        out_dir (str | None): Output directory.
        clustering_path (str | None): Clustering CSV for ``eval-cluster``.
        sets_path (str | None): Association sets JSON for ``assoc``.
        boxes_path (str | None): Track/detection boxes JSON for ``assoc``.
        schemes (list[str]): Partition schemes compared by ``eval-cluster``;
            each entry is a comma list, ``""`` meaning base.
        class_counts (list[int]): Class counts for the difficulty sweep.
        seed (int): 64-bit seed for every randomized step.
        threads (int): Worker cap; never changes outputs.
    """
    command: str | None = None
    data_dir: str | None = None
    out_dir: str | None = None
    clustering_path: str | None = None
    sets_path: str | None = None
    boxes_path: str | None = None
    schemes: list[str] = field(default_factory=list)
    class_counts: list[int] = field(default_factory=list)
    seed: int = 0
    threads: int = 1
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)
    aggregate: AggregateConfig = field(default_factory=AggregateConfig)
    assoc: AssocConfig = field(default_factory=AssocConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)

    def validate(self) -> None:
        """Validate every section; raises InvalidConfig naming the flag."""
        _require(self.threads >= 1, "--threads", "must be >= 1")
        _require(0 <= self.seed < 2**64, "--seed", "must be a 64-bit unsigned integer")
        for count in self.class_counts:
            _require(count >= 1, "--class-counts", "counts must be >= 1")
        self.cluster.validate()
        self.forest.validate()
        self.kmeans.validate()
        self.aggregate.validate()
        self.assoc.validate()
        self.synth.validate()
        self.logging.validate()

    # -------------------------
    # Serialization helpers
    # -------------------------
    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-serializable representation of this configuration."""
        return to_plain_dict(self)

    def output_dict(self) -> dict[str, Any]:
        """Return :meth:`to_dict` without execution-only knobs."""
        return {k: v for k, v in self.to_dict().items() if k not in _EXECUTION_ONLY}

    def digest(self) -> str:
        """SHA-256 of the canonical JSON of :meth:`output_dict`."""
        canonical = json.dumps(self.output_dict(), sort_keys=True, separators=(",", ":"))
        return sha256_text(canonical)

    def to_json(self, path: Path | str, *, indent: int = 2) -> str:
        target = Path(path)
        target.write_text(json.dumps(self.to_dict(), indent=indent, sort_keys=True),
                          encoding="utf-8")
        return str(target)

    @classmethod
    def from_dict(cls: type[T], data: Mapping[str, Any]) -> T:
        """Instantiate a RunConfig from a mapping; unknown keys are rejected."""
        _reject_unknown(cls, data, "config")
        return _dataclass_from_dict(cls, data)

    @classmethod
    def from_json(cls: type[T], path: Path | str) -> T:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(payload, Mapping):
            raise InvalidConfig(f"--config: top-level JSON must be an object in {path}")
        return cls.from_dict(payload)

    @classmethod
    def from_toml(cls: type[T], path: Path | str) -> T:
        with open(path, "rb") as fp:
            return cls.from_dict(tomllib.load(fp))


def load_config_from_path(path: str | Path) -> RunConfig:
    """Load a RunConfig from a ``.json`` or ``.toml`` file.

    Raises:
        InvalidConfig: If the file extension is not supported.
    """
    p = Path(path)
    loaders = {".json": RunConfig.from_json, ".toml": RunConfig.from_toml}
    loader = loaders.get(p.suffix.lower())
    if loader is None:
        raise InvalidConfig(
            f"--config: unsupported extension {p.suffix!r}; expected .json or .toml"
        )
    return loader(p)


def to_plain_dict(section: Any) -> dict[str, Any]:
    """Serialize any config section to a JSON-friendly dict (None fields dropped)."""
    out: dict[str, Any] = {}
    for f in fields(section):
        value = _to_plain(getattr(section, f.name))
        if value is not None:
            out[f.name] = value
    return out


def _to_plain(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_to_plain(v) for v in value]
    if isinstance(value, Mapping):
        # Skin-tone weights have int keys; JSON needs strings, order must be stable.
        return {str(k): _to_plain(value[k]) for k in sorted(value, key=str)}
    if is_dataclass(value) and not isinstance(value, type):
        return to_plain_dict(value)
    return None


def _unwrap_optional(typ: Any) -> Any:
    """``X | None`` -> ``X``; anything else unchanged."""
    if get_origin(typ) in (Union, types.UnionType):
        args = [a for a in get_args(typ) if a is not type(None)]
        if len(args) == 1:
            return args[0]
    return typ


def _section_type(typ: Any) -> type | None:
    base = _unwrap_optional(typ)
    return base if isinstance(base, type) and is_dataclass(base) else None


def _reject_unknown(cls: type[Any], data: Mapping[str, Any], context: str) -> None:
    hints = get_type_hints(cls)
    unknown = sorted(k for k in data if k not in hints)
    if unknown:
        raise InvalidConfig(f"{context}: unsupported keys {', '.join(unknown)}")
    for name, value in data.items():
        section = _section_type(hints[name])
        if section is not None and isinstance(value, Mapping):
            _reject_unknown(section, value, f"{context}.{name}")


def _dataclass_from_dict(cls: Any, data: Mapping[str, Any]) -> Any:
    hints = get_type_hints(cls)
    kwargs = {
        f.name: _coerce(hints[f.name], data[f.name]) for f in fields(cls) if f.name in data
    }
    return cls(**kwargs)


def _coerce(expected: Any, value: Any) -> Any:
    """Shape a decoded JSON/TOML value after the annotated field type."""
    if value is None:
        return None
    base = _unwrap_optional(expected)
    section = _section_type(base)
    if section is not None:
        if not isinstance(value, Mapping):
            raise InvalidConfig(f"config: section {section.__name__} must be a table")
        return _dataclass_from_dict(section, value)
    origin = get_origin(base)
    if origin in (list, tuple, Sequence):
        args = get_args(base)
        inner = args[0] if args else Any
        items = [_coerce(inner, v) for v in value]
        return tuple(items) if origin is tuple else items
    if origin is dict:
        key_type, val_type = get_args(base) or (Any, Any)
        return {_coerce(key_type, k): _coerce(val_type, v) for k, v in value.items()}
    if base is bool:
        if not isinstance(value, bool):
            raise InvalidConfig(f"config: expected true/false, got {value!r}")
        return value
    if base in (str, int, float):
        try:
            return base(value)
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(f"config: cannot read {value!r} as {base.__name__}") from exc
    return value
