import json

import numpy as np
import pytest

from faceclust.core.errors import FormatError
from faceclust.core.hac import Clustering, LinkageSpec, hac_cluster
from faceclust.core.records import Dataset, Gender, Role, SplitEntry
from faceclust.sinks import (
    AtomicFile,
    save_dataset,
    write_clustering_csv,
    write_femb,
    write_json,
    write_merge_trace_csv,
    write_rows_csv,
    write_splits_csv,
)
from faceclust.sinks.femb import FEMB_HEADER, FEMB_MAGIC, sidecar_path
from faceclust.sources import (
    load_dataset,
    read_boxes_json,
    read_clustering_csv,
    read_femb,
    read_metadata_csv,
    read_sets_json,
    read_splits_csv,
)


def test_dataset_round_trip_is_bit_identical(tmp_path, tiny_dataset):
    emb, meta = save_dataset(tiny_dataset, tmp_path / "e.femb", tmp_path / "m.csv")
    assert sidecar_path(emb).exists()
    loaded = load_dataset(emb, meta)
    assert loaded.provenance == "test"
    assert loaded.dimension == 2
    assert loaded.matrix().tobytes() == tiny_dataset.matrix().tobytes()
    for a, b in zip(loaded.samples, tiny_dataset.samples):
        assert (a.sample_id, a.subject_id, a.template_id, a.media_id) == (
            b.sample_id,
            b.subject_id,
            b.template_id,
            b.media_id,
        )
        assert a.modality is b.modality
        assert a.attributes == b.attributes


def test_unknown_values_round_trip(tmp_path, sample_factory):
    ds = Dataset(
        samples=(sample_factory(1, [1.0, 2.0], subject_id=None, gender=Gender.UNKNOWN, skin_tone=None),),
        dimension=2,
    )
    emb, meta = save_dataset(ds, tmp_path / "e.femb", tmp_path / "m.csv")
    row = read_metadata_csv(meta)[0]
    assert row["subject_id"] is None
    assert row["attributes"].gender is Gender.UNKNOWN
    assert row["attributes"].skin_tone is None


def test_femb_layout(tmp_path):
    matrix = np.arange(6, dtype=np.float32).reshape(2, 3)
    path = write_femb(tmp_path / "x.femb", matrix)
    data = path.read_bytes()
    assert data[:4] == FEMB_MAGIC
    assert FEMB_HEADER.unpack_from(data, 0)[1:] == (1, 3, 2)
    assert len(data) == FEMB_HEADER.size + 6 * 4
    assert np.array_equal(read_femb(path), matrix)


def _corrupt(tmp_path, data: bytes):
    path = tmp_path / "bad.femb"
    path.write_bytes(data)
    with pytest.raises(FormatError) as info:
        read_femb(path)
    return info.value


def test_femb_format_errors_carry_offsets(tmp_path):
    good = write_femb(tmp_path / "g.femb", np.ones((10, 4), dtype=np.float32)).read_bytes()
    assert _corrupt(tmp_path, good[:10]).offset == 10
    assert _corrupt(tmp_path, b"XXXX" + good[4:]).offset == 0
    assert _corrupt(tmp_path, good[:4] + (2).to_bytes(4, "little") + good[8:]).offset == 4
    nine_rows = good[: FEMB_HEADER.size + 9 * 16]
    err = _corrupt(tmp_path, nine_rows)
    assert err.offset == FEMB_HEADER.size + 9 * 16
    assert "10 rows" in str(err)
    assert _corrupt(tmp_path, good + b"\0").offset == len(good)


def test_metadata_errors_report_lines(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("sample_id,subject_id\n1,2\n", encoding="utf-8")
    with pytest.raises(FormatError) as info:
        read_metadata_csv(path)
    assert info.value.line == 1
    header = "sample_id,subject_id,template_id,media_id,modality,gender,skin_tone\n"
    path.write_text(header + "1,1,1,1,image,male,1\n2,1,x,2,image,male,1\n", encoding="utf-8")
    with pytest.raises(FormatError) as info:
        read_metadata_csv(path)
    assert info.value.line == 3
    path.write_text(header + "1,1,1,1,image,male,9\n", encoding="utf-8")
    with pytest.raises(FormatError) as info:
        read_metadata_csv(path)
    assert info.value.line == 2


def test_row_count_mismatch_is_rejected(tmp_path, tiny_dataset):
    emb, meta = save_dataset(tiny_dataset, tmp_path / "e.femb", tmp_path / "m.csv")
    write_femb(emb, tiny_dataset.matrix()[:4])
    with pytest.raises(FormatError):
        load_dataset(emb, meta)


def test_splits_and_clustering_round_trip(tmp_path):
    splits = [
        SplitEntry(1, Role.GALLERY1),
        SplitEntry(2, Role.GALLERY2),
        SplitEntry(3, Role.PROBE, 1),
        SplitEntry(4, Role.PROBE, None),
    ]
    assert read_splits_csv(write_splits_csv(tmp_path / "s.csv", splits)) == splits

    points = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 5.0]])
    clustering = hac_cluster([7, 3, 9], points, LinkageSpec(num_clusters=2, metric="euclidean"))
    again = read_clustering_csv(write_clustering_csv(tmp_path / "c.csv", clustering))
    assert again.labels == clustering.labels

    trace = write_merge_trace_csv(tmp_path / "t.csv", clustering).read_text(encoding="utf-8")
    assert trace.splitlines()[0] == "step,a,b,distance"
    assert len(trace.splitlines()) == 2


def test_clustering_csv_rejects_duplicates(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("item_id,cluster_id\n1,0\n1,1\n", encoding="utf-8")
    with pytest.raises(FormatError) as info:
        read_clustering_csv(path)
    assert info.value.line == 3
    assert read_clustering_csv(_write(tmp_path, "ok.csv", "item_id,cluster_id\n4,9\n2,9\n")) == (
        Clustering.from_labels({4: 0, 2: 0})
    )


def _write(tmp_path, name: str, text: str):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_sets_and_boxes_json(tmp_path):
    sets_path = _write(
        tmp_path,
        "sets.json",
        json.dumps({"positives": [1], "negatives": [2], "background": [3], "candidates": [4, 5]}),
    )
    sets, candidates = read_sets_json(sets_path)
    assert sets.positives == {1} and sets.negatives == {2} and sets.background == {3}
    assert candidates == [4, 5]
    with pytest.raises(FormatError):
        read_sets_json(_write(tmp_path, "bad.json", json.dumps({"positives": [1], "negatives": [1]})))
    with pytest.raises(FormatError):
        read_sets_json(_write(tmp_path, "worse.json", "{not json"))

    boxes_path = _write(
        tmp_path,
        "boxes.json",
        json.dumps(
            {
                "frames": [
                    {"track": [0, 0, 2, 2], "detections": [{"id": 4, "box": [1, 0, 2, 2]}]},
                    {"track": None, "detections": []},
                ]
            }
        ),
    )
    tracks, detections = read_boxes_json(boxes_path)
    assert tracks[1] is None
    assert detections[0][0][0] == 4
    assert detections[0][0][1].w == 2.0
    with pytest.raises(FormatError):
        read_boxes_json(_write(tmp_path, "nobox.json", json.dumps({"frames": [{"track": [1, 2]}]})))


def test_atomic_file_discards_on_error(tmp_path):
    target = tmp_path / "out.txt"
    with pytest.raises(RuntimeError):
        with AtomicFile(target) as af:
            af.handle.write("partial")
            raise RuntimeError("boom")
    assert not target.exists()
    assert not (tmp_path / "out.txt.tmp").exists()
    write_json(target, {"b": 1, "a": [1, 2]})
    assert json.loads(target.read_text(encoding="utf-8")) == {"a": [1, 2], "b": 1}


def test_rows_csv_formats_floats(tmp_path):
    path = write_rows_csv(tmp_path / "r.csv", ["name", "value"], [["x", 0.1 + 0.2], ["y", 3]])
    assert path.read_text(encoding="utf-8").splitlines() == ["name,value", "x,0.3", "y,3"]
