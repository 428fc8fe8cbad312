"""Node tables, semi-supervised splits, synthetic block-model data, and
the on-disk container format.

The container is a plain directory (meta.json, features.csv, edges.tsv,
labels.csv, splits.json) chosen to be diffable and hand-editable; the
loader reports the file and line of anything malformed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .graph import Graph, build_graph, edge_pairs
from .rng import stream

__all__ = [
    "Provenance",
    "NodeTable",
    "SplitMasks",
    "SbmConfig",
    "ContainerError",
    "generate_sbm",
    "make_split",
    "mask_for_training",
    "save_container",
    "load_container",
    "container_digest",
]

NO_LABEL = -1


class Provenance(IntEnum):
    """Where a node's label (or absence of one) came from."""

    UNLABELED = 0
    GOLD = 1
    PSEUDO = 2
    HIGH_QUALITY = 3
    GENERATED = 4


@dataclass(frozen=True)
class NodeTable:
    """Feature matrix plus per-node label and label-provenance tags.

    labels uses -1 for "no label".  Tag semantics: unlabeled nodes have
    no label; pseudo / high_quality / generated / gold nodes always do.
    """

    features: np.ndarray
    labels: np.ndarray
    provenance: np.ndarray
    num_classes: int

    def __post_init__(self):
        n = self.features.shape[0]
        if self.labels.shape != (n,) or self.provenance.shape != (n,):
            raise ValueError("labels/provenance must align with features")
        unlabeled = self.provenance == Provenance.UNLABELED
        if np.any(unlabeled != (self.labels == NO_LABEL)):
            raise ValueError("unlabeled tag must coincide exactly with absent label")
        if np.any(self.labels >= self.num_classes) or np.any(self.labels < NO_LABEL):
            raise ValueError("labels must lie in [0, num_classes) or be -1")
        for arr in (self.features, self.labels, self.provenance):
            arr.setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def tagged(self, *tags: Provenance) -> np.ndarray:
        """Indices of nodes whose provenance is any of ``tags``."""
        mask = np.isin(self.provenance, [int(t) for t in tags])
        return np.flatnonzero(mask)

    def labeled_indices(self) -> np.ndarray:
        """Nodes carrying any label (gold, pseudo, high-quality, generated)."""
        return np.flatnonzero(self.labels != NO_LABEL)

    def high_quality_indices(self) -> np.ndarray:
        """Gold nodes plus nodes certified by the consistency ensemble."""
        return self.tagged(Provenance.GOLD, Provenance.HIGH_QUALITY)

    def replace(self, **kwargs) -> "NodeTable":
        return dataclasses.replace(self, **kwargs)


@dataclass(frozen=True)
class SplitMasks:
    """Disjoint train/validation/test index sets over original nodes."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        total = sum(a.size for a in (self.train, self.validation, self.test))
        union = np.union1d(np.union1d(self.train, self.validation), self.test)
        if union.size != total:
            raise ValueError("split masks must be pairwise disjoint")
        if union.size and union[0] < 0:
            raise ValueError("split indices must be non-negative")
        for arr in (self.train, self.validation, self.test):
            arr.setflags(write=False)


@dataclass(frozen=True)
class SbmConfig:
    """Knobs for the planted-community generator.

    Features per node are class-mean + isotropic Gaussian noise; class
    means are random directions scaled to class_mean_separation.
    """

    num_classes: int
    nodes_per_class: int
    p_intra: float
    p_inter: float
    feature_dim: int
    class_mean_separation: float
    feature_noise_sigma: float
    seed: int

    def __post_init__(self):
        if self.num_classes < 1 or self.nodes_per_class < 1:
            raise ValueError("need at least one class and one node per class")
        if not (0.0 <= self.p_inter <= 1.0 and 0.0 <= self.p_intra <= 1.0):
            raise ValueError("edge probabilities must lie in [0, 1]")
        if self.p_intra <= self.p_inter:
            raise ValueError("homophily requires p_intra > p_inter")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be positive")
        if self.feature_noise_sigma < 0 or self.class_mean_separation < 0:
            raise ValueError("sigma and separation must be non-negative")


def generate_sbm(cfg: SbmConfig) -> tuple[Graph, NodeTable, np.ndarray]:
    """Sample a stochastic block model with class-conditional features.

    Returns (graph, table, ground_truth).  The table carries the same
    labels as ground_truth, all tagged gold; callers that want a
    semi-supervised view mask it down (see mask_for_training).  The
    separate ground-truth array exists so evaluation never has to read
    labels the pipeline may later overwrite or hide.
    """
    n = cfg.num_classes * cfg.nodes_per_class
    ground_truth = np.repeat(np.arange(cfg.num_classes, dtype=np.int64), cfg.nodes_per_class)

    edge_rng = stream(cfg.seed, "sbm", "edges")
    same = ground_truth[:, None] == ground_truth[None, :]
    prob = np.where(same, cfg.p_intra, cfg.p_inter)
    draw = edge_rng.random((n, n))
    upper = np.triu(draw < prob, k=1)
    edges = np.argwhere(upper)
    graph = build_graph(n, edges)

    mean_rng = stream(cfg.seed, "sbm", "means")
    directions = mean_rng.standard_normal((cfg.num_classes, cfg.feature_dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = cfg.class_mean_separation * directions

    feat_rng = stream(cfg.seed, "sbm", "features")
    features = means[ground_truth] + cfg.feature_noise_sigma * feat_rng.standard_normal((n, cfg.feature_dim))

    table = NodeTable(
        features=features,
        labels=ground_truth.copy(),
        provenance=np.full(n, Provenance.GOLD, dtype=np.int8),
        num_classes=cfg.num_classes,
    )
    return graph, table, ground_truth


def make_split(table: NodeTable, labels_per_class: int, val_size: int, seed: int) -> SplitMasks:
    """Pick labels_per_class training nodes per class, then carve
    validation and test from the shuffled remainder.

    Deterministic given ``seed``.  Rejects (naming the class) when some
    class cannot supply enough gold-labeled candidates.
    """
    if labels_per_class < 1:
        raise ValueError("labels_per_class must be at least 1")
    if val_size < 0:
        raise ValueError("val_size must be non-negative")
    gold = table.tagged(Provenance.GOLD)
    rng = stream(seed, "split")
    train_parts = []
    for cls in range(table.num_classes):
        candidates = gold[table.labels[gold] == cls]
        if candidates.size < labels_per_class:
            raise ValueError(
                f"class {cls} has only {candidates.size} gold-labeled nodes, "
                f"need {labels_per_class}"
            )
        train_parts.append(rng.choice(candidates, size=labels_per_class, replace=False))
    train = np.sort(np.concatenate(train_parts))
    rest = np.setdiff1d(np.arange(table.num_nodes, dtype=np.int64), train)
    if rest.size < val_size:
        raise ValueError(f"val_size {val_size} exceeds the {rest.size} remaining nodes")
    rest = rng.permutation(rest)
    validation = np.sort(rest[:val_size])
    test = np.sort(rest[val_size:])
    return SplitMasks(train=train, validation=validation, test=test)


def mask_for_training(table: NodeTable, split: SplitMasks) -> NodeTable:
    """Semi-supervised view: labels survive only on the train mask.

    Everything outside train is re-tagged unlabeled; ground truth for
    evaluation is whatever the caller kept aside.
    """
    labels = np.full(table.num_nodes, NO_LABEL, dtype=np.int64)
    labels[split.train] = table.labels[split.train]
    provenance = np.full(table.num_nodes, Provenance.UNLABELED, dtype=np.int8)
    provenance[split.train] = Provenance.GOLD
    if np.any(labels[split.train] == NO_LABEL):
        raise ValueError("train mask contains nodes without labels")
    return table.replace(labels=labels, provenance=provenance)


# ---------------------------------------------------------------------------
# Container format
# ---------------------------------------------------------------------------

class ContainerError(ValueError):
    """Malformed container file; message carries file and location."""


_FILES = ("meta.json", "features.csv", "edges.tsv", "labels.csv", "splits.json")


def _fmt_float(x: float) -> str:
    # repr round-trips float64 exactly and is the canonical decimal form
    return repr(float(x))


def save_container(path, graph: Graph, table: NodeTable, split: SplitMasks) -> None:
    """Write the dataset directory; see module docstring for the layout.

    Provenance tags are not stored: on disk a node either has a label or
    it does not, and loaders tag accordingly.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "num_nodes": table.num_nodes,
        "feature_dim": table.feature_dim,
        "num_classes": table.num_classes,
    }
    (root / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")

    rows = (",".join(_fmt_float(v) for v in row) for row in table.features)
    (root / "features.csv").write_text("\n".join(rows) + ("\n" if table.num_nodes else ""))

    pairs = edge_pairs(graph)
    lines = (f"{u}\t{v}" for u, v in pairs)
    (root / "edges.tsv").write_text("\n".join(lines) + ("\n" if pairs.size else ""))

    label_lines = (
        f"{i},{table.labels[i]}" if table.labels[i] != NO_LABEL else f"{i},"
        for i in range(table.num_nodes)
    )
    (root / "labels.csv").write_text("\n".join(label_lines) + ("\n" if table.num_nodes else ""))

    splits = {
        "train": split.train.tolist(),
        "validation": split.validation.tolist(),
        "test": split.test.tolist(),
    }
    (root / "splits.json").write_text(json.dumps(splits, sort_keys=True, indent=2) + "\n")


def _read_lines(root: Path, name: str) -> list[str]:
    fp = root / name
    if not fp.exists():
        raise ContainerError(f"{fp}: missing file")
    text = fp.read_text()
    return text.splitlines()


def load_container(path) -> tuple[Graph, NodeTable, SplitMasks]:
    """Load a dataset directory written by save_container."""
    root = Path(path)
    try:
        meta = json.loads((root / _FILES[0]).read_text())
    except FileNotFoundError:
        raise ContainerError(f"{root / _FILES[0]}: missing file") from None
    except json.JSONDecodeError as exc:
        raise ContainerError(f"{root / _FILES[0]}: invalid JSON: {exc}") from None
    for key in ("num_nodes", "feature_dim", "num_classes"):
        if key not in meta:
            raise ContainerError(f"{root / _FILES[0]}: field '{key}' missing")
    n, dim = int(meta["num_nodes"]), int(meta["feature_dim"])

    feat_lines = _read_lines(root, "features.csv")
    if len(feat_lines) != n:
        raise ContainerError(f"{root / 'features.csv'}: expected {n} rows, found {len(feat_lines)}")
    features = np.empty((n, dim), dtype=np.float64)
    for i, line in enumerate(feat_lines):
        parts = line.split(",")
        if len(parts) != dim:
            raise ContainerError(f"{root / 'features.csv'}: line {i + 1}: expected {dim} fields")
        try:
            features[i] = [float(p) for p in parts]
        except ValueError:
            raise ContainerError(f"{root / 'features.csv'}: line {i + 1}: bad float") from None

    edges = []
    for i, line in enumerate(_read_lines(root, "edges.tsv")):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ContainerError(f"{root / 'edges.tsv'}: line {i + 1}: expected 'src<TAB>dst'")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ContainerError(f"{root / 'edges.tsv'}: line {i + 1}: bad index") from None
        edges.append((u, v))
    try:
        graph = build_graph(n, edges)
    except ValueError as exc:
        raise ContainerError(f"{root / 'edges.tsv'}: {exc}") from None

    labels = np.full(n, NO_LABEL, dtype=np.int64)
    label_lines = _read_lines(root, "labels.csv")
    if len(label_lines) != n:
        raise ContainerError(f"{root / 'labels.csv'}: expected {n} rows, found {len(label_lines)}")
    for i, line in enumerate(label_lines):
        parts = line.split(",")
        if len(parts) != 2:
            raise ContainerError(f"{root / 'labels.csv'}: line {i + 1}: expected 'node_id,label'")
        try:
            node = int(parts[0])
            lab = int(parts[1]) if parts[1] else NO_LABEL
        except ValueError:
            raise ContainerError(f"{root / 'labels.csv'}: line {i + 1}: bad value") from None
        if node != i:
            raise ContainerError(f"{root / 'labels.csv'}: line {i + 1}: node ids must be 0..n-1 in order")
        labels[i] = lab

    try:
        splits_raw = json.loads((root / "splits.json").read_text())
    except FileNotFoundError:
        raise ContainerError(f"{root / 'splits.json'}: missing file") from None
    except json.JSONDecodeError as exc:
        raise ContainerError(f"{root / 'splits.json'}: invalid JSON: {exc}") from None
    try:
        split = SplitMasks(
            train=np.asarray(splits_raw["train"], dtype=np.int64),
            validation=np.asarray(splits_raw["validation"], dtype=np.int64),
            test=np.asarray(splits_raw["test"], dtype=np.int64),
        )
    except (KeyError, ValueError) as exc:
        raise ContainerError(f"{root / 'splits.json'}: {exc}") from None

    provenance = np.where(labels == NO_LABEL, Provenance.UNLABELED, Provenance.GOLD).astype(np.int8)
    table = NodeTable(
        features=features,
        labels=labels,
        provenance=provenance,
        num_classes=int(meta["num_classes"]),
    )
    return graph, table, split


def container_digest(path) -> str:
    """SHA-256 of the canonical re-serialization of a container.

    The container is loaded and re-saved to a canonical in-memory form,
    so formatting differences that survive a round-trip do not matter.
    """
    graph, table, split = load_container(path)
    h = hashlib.sha256()
    h.update(json.dumps(
        {"num_nodes": table.num_nodes, "feature_dim": table.feature_dim, "num_classes": table.num_classes},
        sort_keys=True,
    ).encode())
    for row in table.features:
        h.update((",".join(_fmt_float(v) for v in row) + "\n").encode())
    for u, v in edge_pairs(graph):
        h.update(f"{u}\t{v}\n".encode())
    h.update(";".join(str(x) for x in table.labels).encode())
    h.update(json.dumps(
        {"train": split.train.tolist(), "validation": split.validation.tolist(), "test": split.test.tolist()},
        sort_keys=True,
    ).encode())
    return h.hexdigest()
