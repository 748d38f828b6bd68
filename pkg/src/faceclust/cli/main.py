# main.py
# SPDX-License-Identifier: MIT

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from typing import Any

from ..core.config import (
    AGGREGATION_METHODS,
    FUSIONS,
    K_POLICIES,
    KMEANS_MODES,
    LINKAGES,
    METRICS,
    SEEDINGS,
    RunConfig,
    load_config_from_path,
)
from ..core.errors import FaceclustError, InvalidConfig
from ..core.log import get_logger
from .runner import run_command

log = get_logger(__name__)

# argparse dest -> attribute path inside RunConfig. Flags left at None keep
# the value from --config (or the dataclass default).
_OVERRIDES: dict[str, tuple[str, ...]] = {
    "data": ("data_dir",),
    "out": ("out_dir",),
    "clustering": ("clustering_path",),
    "sets": ("sets_path",),
    "boxes": ("boxes_path",),
    "schemes": ("schemes",),
    "class_counts": ("class_counts",),
    "seed": ("seed",),
    "threads": ("threads",),
    # synth
    "subjects": ("synth", "num_subjects"),
    "templates_per_subject": ("synth", "templates_per_subject"),
    "media_per_template": ("synth", "media_per_template"),
    "frames_per_media": ("synth", "frames_per_media"),
    "video_fraction": ("synth", "video_fraction"),
    "dim": ("synth", "dim"),
    "noise": ("synth", "within_subject_noise"),
    "openset_fraction": ("synth", "openset_fraction"),
    "galleries": ("synth", "num_galleries"),
    "multimodal_fraction": ("synth", "multimodal_fraction"),
    "pose_weight": ("synth", "pose_weight"),
    "pose_identity_weight": ("synth", "pose_identity_weight"),
    # clustering
    "linkage": ("cluster", "linkage"),
    "metric": ("cluster", "metric"),
    "cluster_k": ("cluster", "k"),
    "threshold": ("cluster", "threshold"),
    "partition": ("cluster", "partition"),
    "restrict": ("cluster", "restrict"),
    "k_policy": ("cluster", "k_policy"),
    "normalize": ("cluster", "normalize"),
    # aggregation
    "method": ("aggregate", "method"),
    "agg_k": ("aggregate", "k"),
    "k_min": ("aggregate", "k_min"),
    "k_max": ("aggregate", "k_max"),
    "fusion": ("aggregate", "fusion"),
    "compare_baseline": ("aggregate", "compare_baseline"),
    "kmeans_mode": ("kmeans", "mode"),
    "seeding": ("kmeans", "seeding"),
    "max_iters": ("kmeans", "max_iters"),
    "tol": ("kmeans", "tol"),
    "trees": ("forest", "trees"),
    "max_comparisons": ("forest", "max_comparisons"),
    # association
    "cp": ("assoc", "cp"),
    "cn": ("assoc", "cn"),
    "assoc_model": ("assoc", "model"),
    "rounds": ("assoc", "rounds"),
    "accept_margin": ("assoc", "accept_margin"),
    "first_k": ("assoc", "first_k"),
    "bias": ("assoc", "bias"),
}


def _csv_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _key_value(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip() or not value.strip():
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key.strip(), value.strip()


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", help="Logging level (e.g., DEBUG, INFO, WARNING).")
    common.add_argument("--config", help="Base config file (TOML or JSON); flags override it.")
    common.add_argument("--threads", type=int, help="Worker threads; never changes outputs.")
    common.add_argument("--seed", type=int, help="64-bit seed for every randomized step.")
    return common


def _add_io(p: argparse.ArgumentParser, *, data: bool = True) -> None:
    if data:
        p.add_argument("--data", help="Directory with embeddings.femb, metadata.csv, splits.csv.")
    p.add_argument("--out", help="Output directory (defaults to --data).")


def _add_cluster_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--linkage", choices=LINKAGES)
    p.add_argument("--metric", choices=METRICS)
    p.add_argument("--k", dest="cluster_k", type=int, help="Global cluster count K.")
    p.add_argument("--threshold", type=float, help="Stop merging above this distance.")
    p.add_argument("--partition", type=_csv_list, help="Attribute keys, e.g. gender,skin_tone.")
    p.add_argument(
        "--restrict",
        type=_key_value,
        action="append",
        help="Keep templates with KEY=VALUE (repeatable).",
    )
    p.add_argument("--k-policy", choices=K_POLICIES)
    p.add_argument("--normalize", action="store_true", default=None,
                   help="L2-normalize media-averaged templates.")


def _add_kmeans_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kmeans-mode", choices=KMEANS_MODES)
    p.add_argument("--seeding", choices=SEEDINGS)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--trees", type=int, help="kd-forest trees (default 2).")
    p.add_argument("--max-comparisons", type=int,
                   help="Distance evaluations per query (default 100).")


def _add_scoring_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fusion", choices=FUSIONS)
    p.add_argument("--normalize", action="store_true", default=None,
                   help="L2-normalize media-averaged gallery templates.")


def _build_parser() -> argparse.ArgumentParser:
    """Build the faceclust argument parser.

    Global flags (``--log-level``, ``--config``, ``--threads``, ``--seed``)
    are accepted after every subcommand.
    """
    parser = argparse.ArgumentParser(
        prog="faceclust", description="Face template clustering toolkit"
    )
    common = _common_parser()
    subparsers = parser.add_subparsers(dest="command", required=True)

    synth_p = subparsers.add_parser("synth", parents=[common], help="Generate a synthetic dataset.")
    _add_io(synth_p, data=False)
    synth_p.add_argument("--subjects", type=int)
    synth_p.add_argument("--templates-per-subject", type=int)
    synth_p.add_argument("--media-per-template", type=int)
    synth_p.add_argument("--frames-per-media", type=int)
    synth_p.add_argument("--video-fraction", type=float)
    synth_p.add_argument("--dim", type=int)
    synth_p.add_argument("--noise", type=float, help="Within-subject σ.")
    synth_p.add_argument("--openset-fraction", type=float)
    synth_p.add_argument("--galleries", type=int, choices=(1, 2))
    synth_p.add_argument("--multimodal-fraction", type=float)
    synth_p.add_argument("--pose-weight", type=float)
    synth_p.add_argument("--pose-identity-weight", type=float)

    cluster_p = subparsers.add_parser("cluster", parents=[common], help="Cluster templates.")
    _add_io(cluster_p)
    _add_cluster_flags(cluster_p)

    eval_p = subparsers.add_parser(
        "eval-cluster", parents=[common], help="Score clusterings and partition schemes."
    )
    _add_io(eval_p)
    _add_cluster_flags(eval_p)
    eval_p.add_argument("--clustering", help="Clustering CSV (item_id,cluster_id) to score.")
    eval_p.add_argument("--schemes", nargs="+",
                        help='Schemes to compare, e.g. base gender gender,skin_tone.')
    eval_p.add_argument("--class-counts", nargs="+", type=int)

    agg_p = subparsers.add_parser("aggregate", parents=[common], help="Aggregate probe templates.")
    _add_io(agg_p)
    agg_p.add_argument("--method", choices=AGGREGATION_METHODS)
    agg_p.add_argument("--k", dest="agg_k", type=int, help="Cluster count per template.")
    _add_kmeans_flags(agg_p)

    ident_p = subparsers.add_parser("identify", parents=[common], help="Open-set identification.")
    _add_io(ident_p)
    ident_p.add_argument("--method", choices=AGGREGATION_METHODS)
    ident_p.add_argument("--k", dest="agg_k", type=int)
    ident_p.add_argument("--no-baseline", dest="compare_baseline", action="store_const",
                         const=False, default=None, help="Skip the mean-aggregation baseline.")
    _add_kmeans_flags(ident_p)
    _add_scoring_flags(ident_p)

    sweep_p = subparsers.add_parser("sweep-k", parents=[common], help="Sweep the aggregation k.")
    _add_io(sweep_p)
    sweep_p.add_argument("--k-min", type=int)
    sweep_p.add_argument("--k-max", type=int)
    _add_kmeans_flags(sweep_p)
    _add_scoring_flags(sweep_p)

    assoc_p = subparsers.add_parser("assoc", parents=[common], help="Target face association.")
    _add_io(assoc_p)
    assoc_p.add_argument("--sets", help="Association sets JSON.")
    assoc_p.add_argument("--boxes", help="Track/detection boxes JSON for IOU pre-association.")
    assoc_p.add_argument("--first-k", type=int)
    assoc_p.add_argument("--cp", type=float)
    assoc_p.add_argument("--cn", type=float)
    assoc_p.add_argument("--assoc-model", type=int, choices=(1, 2))
    assoc_p.add_argument("--rounds", type=int)
    assoc_p.add_argument("--accept-margin", type=float)
    assoc_p.add_argument("--no-bias", dest="bias", action="store_const", const=False, default=None)

    return parser


def _set_path(cfg: RunConfig, path: tuple[str, ...], value: Any) -> None:
    target: Any = cfg
    for name in path[:-1]:
        target = getattr(target, name)
    setattr(target, path[-1], value)


def build_config(args: argparse.Namespace) -> RunConfig:
    """Resolve defaults < ``--config`` file < explicit flags."""
    if args.config:
        try:
            cfg = load_config_from_path(args.config)
        except FaceclustError:
            raise
        except (OSError, ValueError) as exc:
            raise InvalidConfig(f"--config: {exc}") from exc
    else:
        cfg = RunConfig()
    cfg.command = args.command
    for dest, path in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if dest == "restrict":
            value = dict(value)
        _set_path(cfg, path, value)
    if args.log_level:
        cfg.logging.level = args.log_level
    cfg.validate()
    return cfg


def _dispatch(args: argparse.Namespace) -> int:
    """Run the parsed subcommand and print its JSON summary."""
    cfg = build_config(args)
    cfg.logging.apply()
    log.info("Resolved config: %s", json.dumps(cfg.to_dict(), sort_keys=True))
    summary = run_command(cfg)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point for the faceclust command-line interface.

    Returns:
        int: 0 on success, 2 for usage or configuration errors, 1 for
        data and I/O errors.
    """
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return _dispatch(args)
    except InvalidConfig as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"Error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
