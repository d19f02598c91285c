"""Serialization tests for the TU text layout and the sequence JSON format."""

import json

import pytest

from gnet.data import DatasetError, Graph, SequenceRecord, SequenceStore
from gnet.formats import (
    load_sequence_dataset,
    load_tu_dataset,
    sequence_store_from_dict,
    sequence_store_to_dict,
    write_sequence_dataset,
    write_tu_dataset,
)


def _write_tu_fixture(root, name="toy"):
    """Two graphs: a 3-node triangle (label 7) and a 2-node pair (label -1).

    Node label values are deliberately sparse {3, 9} to exercise remapping.
    """
    (root / f"{name}_A.txt").write_text(
        "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n4, 5\n5, 4\n"
    )
    (root / f"{name}_graph_indicator.txt").write_text("1\n1\n1\n2\n2\n")
    (root / f"{name}_graph_labels.txt").write_text("7\n-1\n")
    (root / f"{name}_node_labels.txt").write_text("3\n9\n3\n9\n9\n")
    return root


# -- TU loading ----------------------------------------------------------------


def test_tu_loader_remaps_sparse_labels_to_dense_ids(tmp_path):
    ds = load_tu_dataset(_write_tu_fixture(tmp_path), "toy")
    assert len(ds) == 2
    assert ds.num_node_classes == 2
    assert ds.num_graph_classes == 2
    # node values {3, 9} -> ids {0, 1}; graph values {-1, 7} -> ids {0, 1}
    assert ds.node_label_values == (3, 9)
    assert ds.label_names == ("-1", "7")
    assert ds.samples[0].graph.node_classes == (0, 1, 0)
    assert ds.samples[0].recognition_label == 1
    assert ds.samples[1].recognition_label == 0


def test_tu_loader_collapses_directed_pairs_in_first_seen_order(tmp_path):
    ds = load_tu_dataset(_write_tu_fixture(tmp_path), "toy")
    g = ds.samples[0].graph
    assert g.edges == ((0, 1), (1, 2), (0, 2))
    assert ds.samples[1].graph.edges == ((0, 1),)


def test_tu_loader_defaults_name_to_directory(tmp_path):
    root = tmp_path / "MYSET"
    root.mkdir()
    _write_tu_fixture(root, "MYSET")
    ds = load_tu_dataset(root)
    assert ds.name == "MYSET"


def test_tu_loader_sets_prediction_equal_to_recognition(tmp_path):
    ds = load_tu_dataset(_write_tu_fixture(tmp_path), "toy")
    for s in ds.samples:
        assert s.prediction_label == s.recognition_label


def test_tu_missing_file(tmp_path):
    _write_tu_fixture(tmp_path, "toy")
    (tmp_path / "toy_node_labels.txt").unlink()
    with pytest.raises(DatasetError, match="missing TU file"):
        load_tu_dataset(tmp_path, "toy")


def test_tu_bad_integer_reports_line(tmp_path):
    _write_tu_fixture(tmp_path, "toy")
    (tmp_path / "toy_graph_labels.txt").write_text("7\nxyz\n")
    with pytest.raises(DatasetError, match="line 2"):
        load_tu_dataset(tmp_path, "toy")


def test_tu_edge_errors_report_line(tmp_path):
    _write_tu_fixture(tmp_path, "toy")
    (tmp_path / "toy_A.txt").write_text("1, 2\n2, 1\n1, 9\n")
    with pytest.raises(DatasetError, match="line 3.*out of range"):
        load_tu_dataset(tmp_path, "toy")
    (tmp_path / "toy_A.txt").write_text("1, 4\n")
    with pytest.raises(DatasetError, match="different graphs"):
        load_tu_dataset(tmp_path, "toy")
    (tmp_path / "toy_A.txt").write_text("2, 2\n")
    with pytest.raises(DatasetError, match="self-loop"):
        load_tu_dataset(tmp_path, "toy")


def test_tu_node_label_count_mismatch(tmp_path):
    _write_tu_fixture(tmp_path, "toy")
    (tmp_path / "toy_node_labels.txt").write_text("3\n9\n")
    with pytest.raises(DatasetError, match="node labels"):
        load_tu_dataset(tmp_path, "toy")


def test_tu_round_trip_preserves_original_label_values(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    first = load_tu_dataset(_write_tu_fixture(src), "toy")
    write_tu_dataset(first, tmp_path / "out", "toy")
    second = load_tu_dataset(tmp_path / "out", "toy")
    assert second.samples == first.samples
    assert second.label_names == first.label_names
    assert second.node_label_values == first.node_label_values
    assert second.num_node_classes == first.num_node_classes
    assert second.num_graph_classes == first.num_graph_classes


# -- sequence JSON ---------------------------------------------------------------


def _store_doc():
    return {
        "format": "sequence-graphs-v1",
        "name": "demos",
        "action_labels": ["chop", "stir"],
        "num_node_classes": 5,
        "sequences": [
            {
                "id": "d0",
                "action_label": "chop",
                "frames": [
                    {"frame_index": 0, "node_classes": [0, 3], "edges": [[0, 1]]},
                    {
                        "frame_index": 2,
                        "node_classes": [1],
                        "edges": [],
                        "action_label": "stir",
                    },
                ],
            },
            {
                "id": "d1",
                "action_label": "stir",
                "frames": [
                    {"frame_index": 0, "node_classes": [4], "edges": []},
                ],
            },
        ],
    }


def test_sequence_load_resolves_labels_and_frame_overrides():
    store = sequence_store_from_dict(_store_doc())
    assert store.name == "demos"
    assert store.label_names == ("chop", "stir")
    assert store.num_node_classes == 5
    d0 = store.sequences[0]
    assert d0.label == 0
    assert d0.frame_labels == (0, 1)
    assert d0.frames[0].sequence_id == "d0"
    assert d0.frames[1].frame_index == 2
    assert store.sequences[1].label == 1


def test_sequence_alphabet_is_inferred_and_sorted_when_absent():
    doc = _store_doc()
    del doc["action_labels"]
    store = sequence_store_from_dict(doc)
    assert store.label_names == ("chop", "stir")


def test_sequence_node_class_count_inferred_when_absent():
    doc = _store_doc()
    del doc["num_node_classes"]
    assert sequence_store_from_dict(doc).num_node_classes == 5


def test_sequence_declared_class_count_must_cover_data():
    doc = _store_doc()
    doc["num_node_classes"] = 3
    with pytest.raises(DatasetError, match="num_node_classes=3"):
        sequence_store_from_dict(doc)


def test_sequence_rejects_unknown_label_and_wrong_format():
    doc = _store_doc()
    doc["sequences"][0]["action_label"] = "pour"
    with pytest.raises(DatasetError, match="unknown action label 'pour'"):
        sequence_store_from_dict(doc)
    with pytest.raises(DatasetError, match="unsupported format"):
        sequence_store_from_dict({"format": "v2", "sequences": [{}]})


def test_sequence_frame_index_must_strictly_increase():
    doc = _store_doc()
    doc["sequences"][0]["frames"][1]["frame_index"] = 0
    with pytest.raises(DatasetError, match="strictly"):
        sequence_store_from_dict(doc)


def test_sequence_frame_graph_errors_carry_context():
    doc = _store_doc()
    doc["sequences"][0]["frames"][0]["edges"] = [[0, 0]]
    with pytest.raises(DatasetError, match="sequence 'd0', frame 0"):
        sequence_store_from_dict(doc)


def test_sequence_file_round_trip(tmp_path):
    path = tmp_path / "demos.json"
    path.write_text(json.dumps(_store_doc()))
    store = load_sequence_dataset(path)

    out = tmp_path / "copy.json"
    write_sequence_dataset(store, out)
    again = load_sequence_dataset(out)
    assert again == store

    # serialization is deterministic byte for byte
    out2 = tmp_path / "copy2.json"
    write_sequence_dataset(store, out2)
    assert out.read_bytes() == out2.read_bytes()


def test_sequence_round_trip_keeps_frame_overrides_sparse():
    doc = sequence_store_to_dict(sequence_store_from_dict(_store_doc()))
    frames = doc["sequences"][0]["frames"]
    assert "action_label" not in frames[0]
    assert frames[1]["action_label"] == "stir"


def test_sequence_missing_file_and_bad_json(tmp_path):
    with pytest.raises(DatasetError, match="missing"):
        load_sequence_dataset(tmp_path / "none.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(DatasetError, match="invalid JSON"):
        load_sequence_dataset(bad)


def test_sequence_empty_sequences_rejected():
    with pytest.raises(DatasetError, match="non-empty"):
        sequence_store_from_dict({"format": "sequence-graphs-v1", "sequences": []})


def test_sequence_write_creates_parent_dirs(tmp_path):
    store = SequenceStore(
        sequences=(
            SequenceRecord(
                sequence_id="s",
                label=0,
                frames=(Graph(node_classes=(0,), frame_index=0, sequence_id="s"),),
                frame_labels=(0,),
            ),
        ),
        num_node_classes=1,
        label_names=("a",),
        name="n",
    )
    path = tmp_path / "deep" / "nested" / "f.json"
    write_sequence_dataset(store, path)
    assert load_sequence_dataset(path) == store
