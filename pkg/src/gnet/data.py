"""Graph data model: frames, samples, datasets, windowing, and splits.

Graphs are undirected and unweighted; node features are one-hot object
classes. All containers are immutable after construction and safe to
share across concurrent readers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np


class DatasetError(ValueError):
    """A dataset file is missing, malformed, or internally inconsistent."""


class SplitError(ValueError):
    """A requested train/val/test split cannot be formed."""


@dataclass(frozen=True)
class Graph:
    """One scene frame or benchmark instance.

    Edges are stored as unordered pairs normalized to (low, high); input
    order is preserved. Self-loops and duplicate pairs are rejected.
    """

    node_classes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...] = ()
    frame_index: int | None = None
    sequence_id: str | None = None

    def __post_init__(self):
        classes = tuple(int(c) for c in self.node_classes)
        object.__setattr__(self, "node_classes", classes)
        n = len(classes)
        if any(c < 0 for c in classes):
            raise ValueError("node classes must be non-negative")
        normalized = []
        seen = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge ({a}, {b}) references a node outside [0, {n})")
            if a == b:
                raise ValueError(f"edge ({a}, {b}) is a self-loop")
            e = (a, b) if a < b else (b, a)
            if e in seen:
                raise ValueError(f"duplicate undirected edge {e}")
            seen.add(e)
            normalized.append(e)
        object.__setattr__(self, "edges", tuple(normalized))

    @property
    def num_nodes(self) -> int:
        return len(self.node_classes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> tuple[int, ...]:
        deg = [0] * self.num_nodes
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return tuple(deg)


@dataclass(frozen=True)
class Sample:
    """A training unit: (graph, recognition label, prediction label)."""

    graph: Graph
    recognition_label: int
    prediction_label: int
    window_ids: tuple[int, ...] = ()


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    num_node_classes: int
    num_graph_classes: int
    name: str = ""
    label_names: tuple[str, ...] = ()
    node_label_values: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        for k, s in enumerate(self.samples):
            if not 0 <= s.recognition_label < self.num_graph_classes:
                raise ValueError(f"sample {k}: recognition label {s.recognition_label} out of range")
            if not 0 <= s.prediction_label < self.num_graph_classes:
                raise ValueError(f"sample {k}: prediction label {s.prediction_label} out of range")
            top = max(s.graph.node_classes, default=-1)
            if top >= self.num_node_classes:
                raise ValueError(
                    f"sample {k}: node class {top} >= num_node_classes {self.num_node_classes}"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def subset(self, indices: Sequence[int], name: str) -> "Dataset":
        return replace(self, samples=tuple(self.samples[i] for i in indices), name=name)


@dataclass(frozen=True)
class SequenceRecord:
    """An ordered run of frame graphs demonstrating one (or more) actions."""

    sequence_id: str
    label: int
    frames: tuple[Graph, ...]
    frame_labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.frames) != len(self.frame_labels):
            raise ValueError("frames and frame_labels must have equal length")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class SequenceStore:
    """Frame sequences grouped by demonstration, with per-frame labels."""

    sequences: tuple[SequenceRecord, ...]
    num_node_classes: int
    label_names: tuple[str, ...]
    name: str = ""

    def __len__(self) -> int:
        return len(self.sequences)

    def subset(self, indices: Sequence[int], name: str) -> "SequenceStore":
        return replace(self, sequences=tuple(self.sequences[i] for i in indices), name=name)


def merge_graphs(graphs: Sequence[Graph]) -> Graph:
    """Disjoint union: node ids of graph k are offset by the nodes before it.

    No edges are added between the inputs; per-frame structure is kept and
    readout layers aggregate across the merged node set.
    """
    if not graphs:
        raise ValueError("merge_graphs needs at least one graph")
    if len(graphs) == 1:
        return graphs[0]
    classes: list[int] = []
    edges: list[tuple[int, int]] = []
    offset = 0
    for g in graphs:
        classes.extend(g.node_classes)
        edges.extend((a + offset, b + offset) for a, b in g.edges)
        offset += g.num_nodes
    seq_ids = {g.sequence_id for g in graphs}
    return Graph(
        node_classes=tuple(classes),
        edges=tuple(edges),
        frame_index=None,
        sequence_id=seq_ids.pop() if len(seq_ids) == 1 else None,
    )


def one_hot_features(graph: Graph, num_classes: int) -> np.ndarray:
    """N x num_classes one-hot feature matrix from node class ids."""
    feats = np.zeros((graph.num_nodes, num_classes))
    for i, c in enumerate(graph.node_classes):
        if c >= num_classes:
            raise ValueError(f"node {i} has class {c} >= num_classes {num_classes}")
        feats[i, c] = 1.0
    return feats


@dataclass(frozen=True)
class WindowResult:
    samples: tuple[Sample, ...]
    skipped_sequences: int = 0


def build_windows(store: SequenceStore, window: int, horizon: int = 1) -> WindowResult:
    """Slide a merge window over each sequence and label both branches.

    For every start t with t + window <= length, the sample's graph is the
    disjoint union of frames[t : t + window]. The recognition label is the
    label of the last frame in the window; the prediction label is the
    label ``horizon`` windows ahead (frame t + window - 1 + horizon * window,
    clamped to the sequence end). On single-action sequences both equal the
    sequence label. Sequences shorter than the window are skipped and
    counted in the result.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    samples: list[Sample] = []
    skipped = 0
    for seq in store.sequences:
        length = len(seq)
        if length < window:
            skipped += 1
            continue
        for t in range(length - window + 1):
            frames = seq.frames[t : t + window]
            last = t + window - 1
            future = min(last + horizon * window, length - 1)
            samples.append(
                Sample(
                    graph=merge_graphs(frames),
                    recognition_label=seq.frame_labels[last],
                    prediction_label=seq.frame_labels[future],
                    window_ids=tuple(
                        f.frame_index if f.frame_index is not None else t + k
                        for k, f in enumerate(frames)
                    ),
                )
            )
    return WindowResult(samples=tuple(samples), skipped_sequences=skipped)


def windowed_dataset(
    store: SequenceStore, window: int, horizon: int = 1, name: str | None = None
) -> tuple[Dataset, int]:
    """Window a sequence store into a Dataset; returns (dataset, skipped)."""
    result = build_windows(store, window, horizon)
    ds = Dataset(
        samples=result.samples,
        num_node_classes=store.num_node_classes,
        num_graph_classes=len(store.label_names),
        name=name if name is not None else store.name,
        label_names=store.label_names,
    )
    return ds, result.skipped_sequences


# -- splitting -------------------------------------------------------------


def largest_remainder_counts(n: int, ratios: Sequence[float]) -> tuple[int, ...]:
    """Apportion n items to ratio buckets, distributing leftovers by the
    largest fractional remainder (earlier bucket wins ties)."""
    total = float(sum(ratios))
    quotas = [n * r / total for r in ratios]
    counts = [int(q) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    leftover = n - sum(counts)
    order = sorted(range(len(ratios)), key=lambda k: (-remainders[k], k))
    for k in order[:leftover]:
        counts[k] += 1
    return tuple(counts)


def _split_indices(
    labels: Sequence[int], ratios: Sequence[float], seed: int, per_class: bool
) -> tuple[list[int], list[int], list[int]]:
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise SplitError(f"ratios must be three positive numbers, got {ratios!r}")
    rng = np.random.default_rng(seed)
    parts: tuple[list[int], list[int], list[int]] = ([], [], [])
    if per_class:
        by_class: dict[int, list[int]] = {}
        for i, y in enumerate(labels):
            by_class.setdefault(y, []).append(i)
        for y in sorted(by_class):
            members = by_class[y]
            if len(members) < 3:
                raise SplitError(
                    f"class {y} has only {len(members)} members; per-class split needs >= 3"
                )
            order = rng.permutation(len(members))
            counts = largest_remainder_counts(len(members), ratios)
            pos = 0
            for part, count in zip(parts, counts):
                part.extend(members[j] for j in order[pos : pos + count])
                pos += count
    else:
        order = rng.permutation(len(labels))
        counts = largest_remainder_counts(len(labels), ratios)
        pos = 0
        for part, count in zip(parts, counts):
            part.extend(int(j) for j in order[pos : pos + count])
            pos += count
    for part in parts:
        part.sort()
    if any(not part for part in parts):
        sizes = tuple(len(p) for p in parts)
        raise SplitError(f"split produced an empty partition: sizes {sizes}")
    return parts


def split_dataset(
    dataset: Dataset, ratios: Sequence[float], seed: int, per_class: bool = False
) -> tuple[Dataset, Dataset, Dataset]:
    """Deterministic disjoint-and-exhaustive split into train/val/test."""
    labels = [s.recognition_label for s in dataset.samples]
    tr, va, te = _split_indices(labels, ratios, seed, per_class)
    return (
        dataset.subset(tr, f"{dataset.name}/train"),
        dataset.subset(va, f"{dataset.name}/val"),
        dataset.subset(te, f"{dataset.name}/test"),
    )


def split_sequences(
    store: SequenceStore, ratios: Sequence[float], seed: int, per_class: bool = True
) -> tuple[SequenceStore, SequenceStore, SequenceStore]:
    """Split whole demonstrations (never frames of one sequence apart)."""
    labels = [seq.label for seq in store.sequences]
    tr, va, te = _split_indices(labels, ratios, seed, per_class)
    return (
        store.subset(tr, f"{store.name}/train"),
        store.subset(va, f"{store.name}/val"),
        store.subset(te, f"{store.name}/test"),
    )
