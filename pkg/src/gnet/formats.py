"""On-disk dataset formats: the TU benchmark layout and the sequence
graph JSON format.

TU layout (plain text, one directory per dataset, files prefixed by the
dataset name):

* ``<name>_A.txt`` -- one edge per line as ``i, j`` with 1-based global
  node ids; both directions of every undirected edge are listed. The
  loader collapses them into one undirected edge.
* ``<name>_graph_indicator.txt`` -- line k holds the 1-based graph id of
  node k.
* ``<name>_graph_labels.txt`` -- one integer label per graph.
* ``<name>_node_labels.txt`` -- one integer label per node.

Sequence graph format (JSON):

.. code-block:: json

    {
      "format": "sequence-graphs-v1",
      "name": "pouring-demos",
      "action_labels": ["chop", "stir"],
      "num_node_classes": 14,
      "sequences": [
        {
          "id": "demo-000",
          "action_label": "chop",
          "frames": [
            {"frame_index": 0,
             "node_classes": [3, 7, 1],
             "edges": [[0, 1], [1, 2]],
             "action_label": "chop"}
          ]
        }
      ]
    }

``action_labels`` (the declared label alphabet, defining label ids by
position) and ``num_node_classes`` are optional; when absent they are
inferred from the data. A frame-level ``action_label`` overrides the
sequence label for that frame, which lets one recording chain several
actions. ``frame_index`` must strictly increase within a sequence.

Graph and graph-label ids are remapped to contiguous 0-based ids at load
time; the original values are kept on the dataset for readable reports.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from .data import (
    Dataset,
    DatasetError,
    Graph,
    Sample,
    SequenceRecord,
    SequenceStore,
)

SEQUENCE_FORMAT = "sequence-graphs-v1"


def _is_int(text: str) -> bool:
    try:
        int(text)
    except ValueError:
        return False
    return True


def _read_int_lines(path: Path, what: str) -> list[int]:
    values = []
    for ln, raw in enumerate(path.read_text().splitlines(), start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            values.append(int(raw))
        except ValueError:
            raise DatasetError(f"{path}: line {ln}: expected an integer {what}, got {raw!r}")
    return values


def load_tu_dataset(directory, name: str | None = None) -> Dataset:
    """Load a TU-format graph classification dataset from ``directory``."""
    root = Path(directory)
    name = name or root.name
    files = {
        key: root / f"{name}_{key}.txt"
        for key in ("A", "graph_indicator", "graph_labels", "node_labels")
    }
    for path in files.values():
        if not path.is_file():
            raise DatasetError(f"missing TU file: {path}")

    indicator = _read_int_lines(files["graph_indicator"], "graph id")
    raw_graph_labels = _read_int_lines(files["graph_labels"], "graph label")
    raw_node_labels = _read_int_lines(files["node_labels"], "node label")
    if len(raw_node_labels) != len(indicator):
        raise DatasetError(
            f"{files['node_labels']}: {len(raw_node_labels)} node labels but "
            f"{len(indicator)} graph indicator entries"
        )
    num_graphs = len(raw_graph_labels)
    if indicator and not all(1 <= g <= num_graphs for g in indicator):
        raise DatasetError(
            f"{files['graph_indicator']}: graph ids must lie in [1, {num_graphs}]"
        )

    # Global 1-based node id -> (graph index, local id), in file order.
    local_of: list[tuple[int, int]] = []
    sizes = [0] * num_graphs
    for g in indicator:
        local_of.append((g - 1, sizes[g - 1]))
        sizes[g - 1] += 1

    node_classes_per_graph: list[list[int]] = [[] for _ in range(num_graphs)]
    for (g, _), label in zip(local_of, raw_node_labels):
        node_classes_per_graph[g].append(label)

    edges_per_graph: list[list[tuple[int, int]]] = [[] for _ in range(num_graphs)]
    edge_seen: list[set[tuple[int, int]]] = [set() for _ in range(num_graphs)]
    num_nodes = len(indicator)
    for ln, raw in enumerate(files["A"].read_text().splitlines(), start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            a_str, b_str = raw.replace(",", " ").split()
            a, b = int(a_str), int(b_str)
        except ValueError:
            raise DatasetError(f"{files['A']}: line {ln}: expected 'i, j', got {raw!r}")
        if not (1 <= a <= num_nodes and 1 <= b <= num_nodes):
            raise DatasetError(f"{files['A']}: line {ln}: node id out of range: {raw!r}")
        (ga, la), (gb, lb) = local_of[a - 1], local_of[b - 1]
        if ga != gb:
            raise DatasetError(
                f"{files['A']}: line {ln}: edge ({a}, {b}) joins nodes of "
                f"different graphs ({ga + 1} and {gb + 1})"
            )
        if la == lb:
            raise DatasetError(f"{files['A']}: line {ln}: self-loop on node {a}")
        e = (la, lb) if la < lb else (lb, la)
        if e not in edge_seen[ga]:
            edge_seen[ga].add(e)
            edges_per_graph[ga].append(e)

    node_values = sorted(set(raw_node_labels))
    node_id_of = {v: i for i, v in enumerate(node_values)}
    label_values = sorted(set(raw_graph_labels))
    label_id_of = {v: i for i, v in enumerate(label_values)}

    samples = []
    for k in range(num_graphs):
        graph = Graph(
            node_classes=tuple(node_id_of[v] for v in node_classes_per_graph[k]),
            edges=tuple(edges_per_graph[k]),
        )
        label = label_id_of[raw_graph_labels[k]]
        samples.append(
            Sample(graph=graph, recognition_label=label, prediction_label=label, window_ids=(k,))
        )

    return Dataset(
        samples=tuple(samples),
        num_node_classes=max(len(node_values), 1),
        num_graph_classes=len(label_values),
        name=name,
        label_names=tuple(str(v) for v in label_values),
        node_label_values=tuple(node_values),
    )


def write_tu_dataset(dataset: Dataset, directory, name: str | None = None) -> None:
    """Write a dataset back out in the TU layout (both edge directions).

    Original label values are restored where the dataset kept them, so a
    loaded TU dataset round-trips through write and load unchanged.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    name = name or dataset.name

    node_values = dataset.node_label_values
    graph_values = None
    if dataset.label_names and all(_is_int(nm) for nm in dataset.label_names):
        graph_values = tuple(int(nm) for nm in dataset.label_names)

    a_lines: list[str] = []
    indicator_lines: list[str] = []
    node_label_lines: list[str] = []
    graph_label_lines: list[str] = []
    offset = 0
    for k, sample in enumerate(dataset.samples):
        g = sample.graph
        for i, j in g.edges:
            a_lines.append(f"{offset + i + 1}, {offset + j + 1}")
            a_lines.append(f"{offset + j + 1}, {offset + i + 1}")
        indicator_lines.extend(str(k + 1) for _ in range(g.num_nodes))
        node_label_lines.extend(
            str(c if node_values is None else node_values[c]) for c in g.node_classes
        )
        y = sample.recognition_label
        graph_label_lines.append(str(y if graph_values is None else graph_values[y]))
        offset += g.num_nodes

    (root / f"{name}_A.txt").write_text("\n".join(a_lines) + ("\n" if a_lines else ""))
    (root / f"{name}_graph_indicator.txt").write_text("\n".join(indicator_lines) + "\n")
    (root / f"{name}_node_labels.txt").write_text("\n".join(node_label_lines) + "\n")
    (root / f"{name}_graph_labels.txt").write_text("\n".join(graph_label_lines) + "\n")


# -- sequence graph format --------------------------------------------------


def load_sequence_dataset(path) -> SequenceStore:
    """Load a sequence graph JSON file into a SequenceStore."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing sequence dataset file: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise DatasetError(f"{path}: invalid JSON: {err}") from err
    try:
        return sequence_store_from_dict(doc, origin=str(path))
    except DatasetError:
        raise
    except (KeyError, TypeError) as err:
        raise DatasetError(f"{path}: malformed sequence dataset: {err}") from err


def sequence_store_from_dict(doc: dict, origin: str = "<dict>") -> SequenceStore:
    if doc.get("format") != SEQUENCE_FORMAT:
        raise DatasetError(
            f"{origin}: unsupported format {doc.get('format')!r}; expected {SEQUENCE_FORMAT!r}"
        )
    raw_sequences = doc.get("sequences")
    if not isinstance(raw_sequences, list) or not raw_sequences:
        raise DatasetError(f"{origin}: 'sequences' must be a non-empty list")

    declared = doc.get("action_labels")
    if declared is not None:
        label_names = tuple(str(x) for x in declared)
    else:
        names = set()
        for seq in raw_sequences:
            names.add(str(seq["action_label"]))
            for frame in seq.get("frames", []):
                if "action_label" in frame:
                    names.add(str(frame["action_label"]))
        label_names = tuple(sorted(names))
    label_id = {nm: i for i, nm in enumerate(label_names)}

    def resolve_label(name: str, where: str) -> int:
        if name not in label_id:
            known = ", ".join(label_names)
            raise DatasetError(f"{origin}: unknown action label {name!r} in {where}; known labels: {known}")
        return label_id[name]

    sequences = []
    max_class = -1
    for seq in raw_sequences:
        seq_id = str(seq["id"])
        seq_label_name = str(seq["action_label"])
        seq_label = resolve_label(seq_label_name, f"sequence {seq_id!r}")
        frames: list[Graph] = []
        frame_labels: list[int] = []
        prev_index = None
        for frame in seq["frames"]:
            idx = int(frame["frame_index"])
            if prev_index is not None and idx <= prev_index:
                raise DatasetError(
                    f"{origin}: sequence {seq_id!r}: frame_index must strictly "
                    f"increase, got {idx} after {prev_index}"
                )
            prev_index = idx
            classes = tuple(int(c) for c in frame["node_classes"])
            if classes:
                max_class = max(max_class, max(classes))
            try:
                graph = Graph(
                    node_classes=classes,
                    edges=tuple((int(a), int(b)) for a, b in frame["edges"]),
                    frame_index=idx,
                    sequence_id=seq_id,
                )
            except ValueError as err:
                raise DatasetError(
                    f"{origin}: sequence {seq_id!r}, frame {idx}: {err}"
                ) from err
            frames.append(graph)
            if "action_label" in frame:
                frame_labels.append(
                    resolve_label(str(frame["action_label"]), f"sequence {seq_id!r}, frame {idx}")
                )
            else:
                frame_labels.append(seq_label)
        if not frames:
            raise DatasetError(f"{origin}: sequence {seq_id!r} has no frames")
        sequences.append(
            SequenceRecord(
                sequence_id=seq_id,
                label=seq_label,
                frames=tuple(frames),
                frame_labels=tuple(frame_labels),
            )
        )

    declared_classes = doc.get("num_node_classes")
    inferred = max_class + 1
    if declared_classes is not None:
        declared_classes = int(declared_classes)
        if declared_classes < inferred:
            raise DatasetError(
                f"{origin}: num_node_classes={declared_classes} but node class "
                f"{max_class} appears in the data"
            )
        num_node_classes = declared_classes
    else:
        num_node_classes = max(inferred, 1)

    return SequenceStore(
        sequences=tuple(sequences),
        num_node_classes=num_node_classes,
        label_names=label_names,
        name=str(doc.get("name", "")),
    )


def sequence_store_to_dict(store: SequenceStore) -> dict:
    sequences = []
    for seq in store.sequences:
        frames = []
        for graph, label in zip(seq.frames, seq.frame_labels):
            frame: dict = {
                "frame_index": graph.frame_index,
                "node_classes": list(graph.node_classes),
                "edges": [[a, b] for a, b in graph.edges],
            }
            if label != seq.label:
                frame["action_label"] = store.label_names[label]
            frames.append(frame)
        sequences.append(
            {
                "id": seq.sequence_id,
                "action_label": store.label_names[seq.label],
                "frames": frames,
            }
        )
    return {
        "format": SEQUENCE_FORMAT,
        "name": store.name,
        "action_labels": list(store.label_names),
        "num_node_classes": store.num_node_classes,
        "sequences": sequences,
    }


def write_sequence_dataset(store: SequenceStore, path) -> None:
    """Serialize a SequenceStore; same store always yields identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(sequence_store_to_dict(store), indent=2) + "\n")
