import json
from pathlib import Path

import pytest

from faceclust.cli.main import main
from faceclust.core.config import RunConfig
from faceclust.sources import read_metadata_csv


def _run(capsys, argv: list[str]) -> dict:
    rc = main(argv)
    captured = capsys.readouterr()
    assert rc == 0, captured.err
    return json.loads(captured.out)


def _synth(tmp_path: Path, capsys, *extra: str) -> Path:
    data = tmp_path / "data"
    _run(
        capsys,
        ["synth", "--out", str(data), "--subjects", "12", "--dim", "16", "--seed", "3", *extra],
    )
    return data


def _manifest(out: Path) -> dict:
    return json.loads((out / "manifest.json").read_text(encoding="utf-8"))


def test_synth_writes_dataset_and_manifest(tmp_path: Path, capsys):
    data = tmp_path / "data"
    summary = _run(capsys, ["synth", "--out", str(data), "--subjects", "12", "--dim", "16"])
    assert summary["subjects"] == 12
    assert summary["open_set_subjects"] == 2
    assert summary["similarity_margin"] > 0.1
    for name in ("embeddings.femb", "embeddings.femb.meta.json", "metadata.csv", "splits.csv"):
        assert (data / name).exists()
    manifest = _manifest(data)
    assert manifest["command"] == "synth"
    assert manifest["files"] == sorted(manifest["files"])
    assert "threads" not in manifest["config"]


def test_synth_manifest_records_generation_seed(tmp_path: Path, capsys):
    data = _synth(tmp_path, capsys)
    manifest = _manifest(data)
    assert manifest["seed"] == 3
    assert manifest["config"]["synth"]["seed"] == 3


def test_cluster_then_eval_cluster(tmp_path: Path, capsys):
    data = _synth(tmp_path, capsys)
    out = tmp_path / "cluster"
    summary = _run(capsys, ["cluster", "--data", str(data), "--out", str(out)])
    assert summary["scheme"] == "base"
    assert summary["num_clusters"] == 12
    assert 0.0 <= summary["f1"] <= 1.0
    assert (out / "clustering.csv").exists()
    assert (out / "merge_trace.csv").exists()

    evaluated = _run(
        capsys,
        [
            "eval-cluster",
            "--data", str(data),
            "--out", str(tmp_path / "eval"),
            "--clustering", str(out / "clustering.csv"),
        ],
    )
    assert evaluated["f1"] == pytest.approx(summary["f1"])
    assert evaluated["num_clusters"] == 12


def test_partitioned_cluster_writes_one_file_per_partition(tmp_path: Path, capsys):
    data = _synth(tmp_path, capsys)
    out = tmp_path / "cluster"
    summary = _run(
        capsys, ["cluster", "--data", str(data), "--out", str(out), "--partition", "gender"]
    )
    assert summary["scheme"] == "gender"
    assert set(summary["resolved_k"]) <= {"male", "female"}
    assert len(list(out.glob("clustering_*.csv"))) == len(summary["resolved_k"])
    assert sum(summary["resolved_k"].values()) == summary["num_clusters"]


def test_eval_cluster_compares_schemes_and_class_counts(tmp_path: Path, capsys):
    data = _synth(tmp_path, capsys)
    out = tmp_path / "eval"
    summary = _run(
        capsys,
        ["eval-cluster", "--data", str(data), "--out", str(out), "--class-counts", "2", "4"],
    )
    assert set(summary["schemes"]) == {"base", "gender", "gender,skin_tone"}
    assert set(summary["class_counts"]) == {"2", "4"}
    assert (out / "scheme_scores.csv").exists()
    assert (out / "class_counts.csv").exists()


def test_identify_and_sweep_k(tmp_path: Path, capsys):
    data = _synth(tmp_path, capsys, "--multimodal-fraction", "0.5")
    out = tmp_path / "ident"
    summary = _run(
        capsys,
        [
            "identify", "--data", str(data), "--out", str(out),
            "--method", "cluster", "--k", "2", "--kmeans-mode", "exact",
        ],
    )
    assert set(summary) == {"mean", "cluster"}
    assert set(summary["cluster"]) == {"gallery1", "gallery2", "average"}
    report = summary["cluster"]["gallery1"]
    assert set(report["tpir_at_fpir"]) == {"0.1", "0.01"}
    assert report["rank"]["1"] <= report["rank"]["5"] <= 1.0
    for name in ("ident_mean.csv", "ident_cluster.csv", "cmc_mean.csv", "cmc_cluster.csv"):
        assert (out / name).exists()
    header = (out / "ident_cluster.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header.startswith("gallery,Rank-1,Rank-5")

    sweep = _run(
        capsys,
        ["sweep-k", "--data", str(data), "--out", str(tmp_path / "sweep"), "--k-max", "3"],
    )
    assert sweep["k"] == [1, 2, 3]
    assert sweep["reported_on"] == "average"
    assert sweep["best_k"] in (1, 2, 3)


def test_aggregate_writes_representations(tmp_path: Path, capsys):
    data = _synth(tmp_path, capsys)
    out = tmp_path / "agg"
    summary = _run(
        capsys, ["aggregate", "--data", str(data), "--out", str(out), "--method", "mean"]
    )
    assert summary["representations"] == summary["probes"]
    assert summary["max_representations"] == 1
    assert (out / "aggregates.femb").exists()
    lines = (out / "aggregates.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == summary["representations"] + 1


def test_assoc_with_pre_association(tmp_path: Path, capsys):
    data = _synth(tmp_path, capsys)
    rows = read_metadata_csv(data / "metadata.csv")
    own = [r["sample_id"] for r in rows if r["subject_id"] == 0]
    other = [r["sample_id"] for r in rows if r["subject_id"] == 1]
    sets_path = tmp_path / "sets.json"
    sets_path.write_text(
        json.dumps(
            {
                "positives": [own[0]],
                "negatives": other[:2],
                "candidates": own[2:] + other[2:],
            }
        ),
        encoding="utf-8",
    )
    boxes_path = tmp_path / "boxes.json"
    boxes_path.write_text(
        json.dumps(
            {
                "frames": [
                    {
                        "track": [0, 0, 10, 10],
                        "detections": [{"id": own[1], "box": [0, 0, 10, 10]}],
                    }
                ]
            }
        ),
        encoding="utf-8",
    )
    out = tmp_path / "assoc"
    summary = _run(
        capsys,
        [
            "assoc", "--data", str(data), "--out", str(out),
            "--sets", str(sets_path), "--boxes", str(boxes_path), "--rounds", "3",
        ],
    )
    assert summary["pre_associated"] == [own[1]]
    assert {own[0], own[1]} <= set(summary["positives"])
    assert not set(summary["positives"]) & set(other[:2])
    assert summary["history"][0] == 2
    assert json.loads((out / "assoc.json").read_text(encoding="utf-8"))["positives"] == summary[
        "positives"
    ]


def test_threads_change_neither_outputs_nor_digest(tmp_path: Path, capsys):
    data = _synth(tmp_path, capsys)
    outs = []
    for threads in ("1", "4"):
        out = tmp_path / f"t{threads}"
        _run(
            capsys,
            [
                "cluster", "--data", str(data), "--out", str(out),
                "--partition", "gender,skin_tone", "--threads", threads,
            ],
        )
        outs.append(out)
    assert (outs[0] / "clustering.csv").read_bytes() == (outs[1] / "clustering.csv").read_bytes()
    assert _manifest(outs[0])["config_digest"] == _manifest(outs[1])["config_digest"]


@pytest.mark.parametrize(
    "command",
    [
        ["aggregate", "--method", "cluster", "--k", "3"],
        ["identify", "--method", "cluster", "--k", "3"],
        ["sweep-k", "--k-max", "5"],
    ],
    ids=["aggregate", "identify", "sweep-k"],
)
@pytest.mark.parametrize("mode", ["exact", "ann"])
def test_threads_keep_aggregation_outputs_byte_identical(
    tmp_path: Path, capsys, command: list[str], mode: str
):
    data = _synth(tmp_path, capsys, "--multimodal-fraction", "0.5")
    cfg = RunConfig(seed=9)
    # Zero forces the forest over centers for every k in ANN mode.
    cfg.kmeans.ann_min_centers = 0
    config_path = tmp_path / "run.json"
    cfg.to_json(config_path)

    outs = []
    for threads in ("1", "4"):
        out = tmp_path / f"{command[0]}-{threads}"
        _run(
            capsys,
            [
                *command, "--config", str(config_path), "--data", str(data), "--out", str(out),
                "--kmeans-mode", mode, "--threads", threads,
            ],
        )
        outs.append(out)

    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir())
    assert set(_manifest(outs[0])["files"]) <= set(names)
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name


def test_flags_override_config_file(tmp_path: Path, capsys):
    data = _synth(tmp_path, capsys)
    cfg = RunConfig(seed=5)
    cfg.cluster.linkage = "complete"
    cfg.cluster.metric = "euclidean"
    config_path = tmp_path / "run.json"
    cfg.to_json(config_path)
    out = tmp_path / "cluster"
    _run(
        capsys,
        [
            "cluster", "--config", str(config_path), "--data", str(data),
            "--out", str(out), "--linkage", "single",
        ],
    )
    manifest = _manifest(out)
    assert manifest["seed"] == 5
    assert manifest["config"]["cluster"]["linkage"] == "single"
    assert manifest["config"]["cluster"]["metric"] == "euclidean"


def test_global_k_with_partition_needs_proportional_policy(tmp_path: Path, capsys):
    data = _synth(tmp_path, capsys)
    argv = ["cluster", "--data", str(data), "--partition", "gender", "--k", "5"]
    assert main([*argv, "--out", str(tmp_path / "gt")]) == 2
    assert "--k-policy proportional" in capsys.readouterr().err
    summary = _run(
        capsys, [*argv, "--out", str(tmp_path / "prop"), "--k-policy", "proportional"]
    )
    assert summary["num_clusters"] >= 5


def test_usage_and_config_errors_exit_2(tmp_path: Path, capsys):
    assert main([]) == 2
    assert main(["cluster", "--linkage", "ward"]) == 2
    capsys.readouterr()
    assert main(["synth", "--out", str(tmp_path / "x"), "--noise", "0"]) == 2
    assert "--noise" in capsys.readouterr().err
    assert main(["cluster", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["assoc", "--data", str(tmp_path)]) == 2
    assert main(["cluster", "--restrict", "gender"]) == 2
    assert main(["synth", "--out", str(tmp_path / "y"), "--log-level", "chatty"]) == 2


def test_missing_data_exits_1(tmp_path: Path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["cluster", "--data", str(empty)]) == 1
    assert capsys.readouterr().err.startswith("Error:")
