"""Intra-class mixup node synthesis, neighbor wiring, and the ablation
strategies around them.

The full pipeline synthesizes nodes as convex blends of two same-class
labeled nodes (label inherited unchanged) and wires each one to two
high-quality nodes of its class, bridging their neighborhoods.  Every
alternative evaluated in the ablation harness — vanilla inter-class
mixup under three connection rules, constant-feature probes, degraded
wiring rules, and plain pseudo-label training — dispatches through
``apply_strategy``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .data import NO_LABEL, NodeTable, Provenance, SplitMasks
from .graph import Graph, add_edges, expand_nodes
from .rng import stream

__all__ = [
    "STRATEGIES",
    "LambdaLaw",
    "AugmentationConfig",
    "GeneratedBatch",
    "AugmentationResult",
    "mixup_generate",
    "vanilla_mixup_generate",
    "wire_neighbors",
    "apply_strategy",
    "augmented_train_mask",
    "generated_label_audit",
    "wiring_class_audit",
]

logger = logging.getLogger(__name__)

STRATEGIES = (
    "intramix",
    "mixup_no_con",
    "mixup_w_con",
    "mixup_sim_con",
    "direct_con",
    "random_con",
    "without_con",
    "zeros",
    "ones",
    "pl_only",
)


@dataclass(frozen=True)
class LambdaLaw:
    """Distribution of the mixing weight: Beta(alpha, beta) or a constant."""

    kind: str
    alpha: float = 2.0
    beta: float = 2.0
    value: float = 0.5

    def __post_init__(self):
        if self.kind not in ("beta", "fixed"):
            raise ValueError(f"unknown lambda law {self.kind!r}")
        if self.kind == "beta" and (self.alpha <= 0 or self.beta <= 0):
            raise ValueError("beta parameters must be positive")
        if self.kind == "fixed" and not 0.0 <= self.value <= 1.0:
            raise ValueError("fixed lambda must lie in [0, 1]")

    @classmethod
    def from_beta(cls, alpha: float, beta: float) -> "LambdaLaw":
        return cls(kind="beta", alpha=alpha, beta=beta)

    @classmethod
    def from_fixed(cls, value: float) -> "LambdaLaw":
        return cls(kind="fixed", value=value)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "fixed":
            return np.full(size, self.value)
        return rng.beta(self.alpha, self.beta, size=size)


@dataclass(frozen=True)
class AugmentationConfig:
    nodes_per_class: int = 200
    lambda_law: LambdaLaw = LambdaLaw.from_beta(2.0, 2.0)
    strategy: str = "intramix"
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.nodes_per_class < 1:
            raise ValueError("nodes_per_class must be positive")


@dataclass
class GeneratedBatch:
    """Synthesized nodes plus the bookkeeping audits need.

    anchor_pairs is -1 until wiring runs; a -1 after wiring marks a
    missing anchor (class had fewer than two high-quality nodes).
    """

    new_features: np.ndarray
    new_labels: np.ndarray
    parent_pairs: np.ndarray
    lambdas: np.ndarray
    skipped_classes: list[int] = field(default_factory=list)
    anchor_pairs: np.ndarray | None = None
    soft_labels: np.ndarray | None = None  # only inter-class mixup has these

    @property
    def size(self) -> int:
        return self.new_labels.shape[0]


def _distinct_pairs(rng: np.random.Generator, pool: np.ndarray, count: int) -> np.ndarray:
    """count ordered pairs of distinct elements of pool, uniform."""
    first = rng.integers(0, pool.size, size=count)
    offset = rng.integers(1, pool.size, size=count)
    second = (first + offset) % pool.size
    return np.column_stack((pool[first], pool[second]))


def mixup_generate(table: NodeTable, cfg: AugmentationConfig) -> GeneratedBatch:
    """Blend same-class labeled pairs into nodes_per_class new nodes per class.

    Parents are drawn from every labeled node of the class — gold and
    pseudo alike — as two distinct indices per pair; the blend weight is
    drawn per node from cfg.lambda_law.  Classes with fewer than two
    labeled nodes are skipped with a warning; if no class is eligible
    the call is rejected.
    """
    feats, labs, parents, lams = [], [], [], []
    skipped = []
    for cls in range(table.num_classes):
        pool = np.flatnonzero((table.labels == cls) & (table.provenance != Provenance.GENERATED))
        if pool.size < 2:
            skipped.append(cls)
            logger.warning("class %d has %d labeled nodes, skipping generation", cls, pool.size)
            continue
        rng = stream(cfg.seed, "mix", cls)
        pairs = _distinct_pairs(rng, pool, cfg.nodes_per_class)
        lam = cfg.lambda_law.sample(rng, cfg.nodes_per_class)
        x = lam[:, None] * table.features[pairs[:, 0]] + (1 - lam[:, None]) * table.features[pairs[:, 1]]
        feats.append(x)
        labs.append(np.full(cfg.nodes_per_class, cls, dtype=np.int64))
        parents.append(pairs)
        lams.append(lam)
    if not feats:
        raise ValueError("no class has at least two labeled nodes; nothing to generate")
    return GeneratedBatch(
        new_features=np.concatenate(feats),
        new_labels=np.concatenate(labs),
        parent_pairs=np.concatenate(parents),
        lambdas=np.concatenate(lams),
        skipped_classes=skipped,
    )


def vanilla_mixup_generate(table: NodeTable, cfg: AugmentationConfig) -> GeneratedBatch:
    """Inter-class mixup over all labeled nodes, soft labels retained.

    The stored hard label is the argmax of the soft label (ties resolve
    to the lower class); the soft distribution rides along for the loss.
    """
    pool = table.labeled_indices()
    pool = pool[table.provenance[pool] != Provenance.GENERATED]
    if pool.size < 2:
        raise ValueError("need at least two labeled nodes for vanilla mixup")
    total = cfg.nodes_per_class * table.num_classes
    rng = stream(cfg.seed, "mix", "vanilla")
    pairs = _distinct_pairs(rng, pool, total)
    lam = cfg.lambda_law.sample(rng, total)
    x = lam[:, None] * table.features[pairs[:, 0]] + (1 - lam[:, None]) * table.features[pairs[:, 1]]
    soft = np.zeros((total, table.num_classes))
    rows = np.arange(total)
    np.add.at(soft, (rows, table.labels[pairs[:, 0]]), lam)
    np.add.at(soft, (rows, table.labels[pairs[:, 1]]), 1 - lam)
    return GeneratedBatch(
        new_features=x,
        new_labels=np.argmax(soft, axis=1).astype(np.int64),
        parent_pairs=pairs,
        lambdas=lam,
        soft_labels=soft,
    )


def _sample_anchor_pairs(batch: GeneratedBatch, pools: dict[int, np.ndarray], seed: int,
                         key: str) -> np.ndarray:
    """Two distinct anchors per generated node from its class pool.

    One anchor if only one candidate exists, none (reported) if zero.
    """
    anchors = np.full((batch.size, 2), -1, dtype=np.int64)
    for cls in np.unique(batch.new_labels):
        rows = np.flatnonzero(batch.new_labels == cls)
        pool = pools.get(int(cls), np.empty(0, dtype=np.int64))
        if pool.size == 0:
            logger.warning("class %d has no anchor candidates; %d nodes left unwired",
                           cls, rows.size)
            continue
        rng = stream(seed, key, int(cls))
        if pool.size == 1:
            anchors[rows, 0] = pool[0]
        else:
            anchors[rows] = _distinct_pairs(rng, pool, rows.size)
    return anchors


def _edges_from_anchors(batch: GeneratedBatch, base_nodes: int) -> list[tuple[int, int]]:
    edges = []
    for g in range(batch.size):
        new_id = base_nodes + g
        for a in batch.anchor_pairs[g]:
            if a >= 0:
                edges.append((new_id, int(a)))
    return edges


def wire_neighbors(batch: GeneratedBatch, table: NodeTable, graph: Graph,
                   cfg: AugmentationConfig) -> Graph:
    """Connect each generated node to two high-quality nodes of its class.

    Anchors are sampled uniformly (with reuse across generated nodes)
    from the certified high-quality pool, gold included.  The returned
    graph appends the generated nodes after the original indices;
    batch.anchor_pairs is filled in place for auditing.
    """
    hq = table.high_quality_indices()
    pools = {int(c): hq[table.labels[hq] == c] for c in range(table.num_classes)}
    batch.anchor_pairs = _sample_anchor_pairs(batch, pools, cfg.seed, "wire")
    grown = expand_nodes(graph, graph.num_nodes + batch.size)
    return add_edges(grown, _edges_from_anchors(batch, graph.num_nodes))


def _append_nodes(table: NodeTable, batch: GeneratedBatch) -> NodeTable:
    features = np.concatenate((table.features, batch.new_features))
    labels = np.concatenate((table.labels, batch.new_labels))
    provenance = np.concatenate((
        table.provenance,
        np.full(batch.size, Provenance.GENERATED, dtype=np.int8),
    ))
    return table.replace(features=features, labels=labels, provenance=provenance)


@dataclass
class AugmentationResult:
    """Augmented graph/table plus the audit report.

    soft_targets is a full-length (nodes, classes) matrix with NaN rows
    everywhere except generated nodes under the vanilla-mixup
    strategies, whose loss uses the soft distribution.
    """

    graph: Graph
    table: NodeTable
    batch: GeneratedBatch | None
    soft_targets: np.ndarray | None
    report: dict


def _anchor_histogram(batch: GeneratedBatch) -> dict[str, int]:
    if batch.anchor_pairs is None:
        return {}
    used = batch.anchor_pairs[batch.anchor_pairs >= 0]
    values, counts = np.unique(used, return_counts=True)
    return {str(int(v)): int(c) for v, c in zip(values, counts)}


def _batch_report(batch: GeneratedBatch, table: NodeTable, new_edges: int,
                  gen_seconds: float, wire_seconds: float) -> dict:
    per_class = {str(c): int(np.sum(batch.new_labels == c)) for c in range(table.num_classes)}
    anchors = batch.anchor_pairs if batch.anchor_pairs is not None else np.full((batch.size, 2), -1)
    wired = (anchors >= 0).sum(axis=1)
    return {
        "generated_per_class": per_class,
        "skipped_classes": list(batch.skipped_classes),
        "anchor_usage": _anchor_histogram(batch),
        "edge_audit": {
            "new_edges": new_edges,
            "nodes_with_two_anchors": int(np.sum(wired == 2)),
            "nodes_with_one_anchor": int(np.sum(wired == 1)),
            "nodes_unwired": int(np.sum(wired == 0)),
        },
        "timing": {"generation_s": gen_seconds, "wiring_s": wire_seconds},
    }


def apply_strategy(graph: Graph, table: NodeTable, split: SplitMasks, model,
                   cfg: AugmentationConfig) -> AugmentationResult:
    """Dispatch one augmentation strategy over a pseudo-labeled table.

    The table must already carry pseudo labels (and, for anchor-based
    strategies, the high-quality tags).  Validation and test masks refer
    to original nodes only and are never touched here.
    """
    del model  # the trained model already did its work upstream (tags); kept for interface parity
    n = graph.num_nodes
    strategy = cfg.strategy

    if strategy == "pl_only":
        report = {
            "strategy": strategy,
            "generated_per_class": {},
            "skipped_classes": [],
            "anchor_usage": {},
            "edge_audit": {"new_edges": 0},
            "pseudo_labeled": int(table.tagged(Provenance.PSEUDO, Provenance.HIGH_QUALITY).size),
            "timing": {"generation_s": 0.0, "wiring_s": 0.0},
        }
        return AugmentationResult(graph=graph, table=table, batch=None,
                                  soft_targets=None, report=report)

    t0 = time.perf_counter()
    if strategy in ("mixup_no_con", "mixup_w_con", "mixup_sim_con"):
        batch = vanilla_mixup_generate(table, cfg)
    else:
        batch = mixup_generate(table, cfg)
        if strategy == "zeros":
            batch.new_features = np.zeros_like(batch.new_features)
        elif strategy == "ones":
            batch.new_features = np.ones_like(batch.new_features)
    gen_seconds = time.perf_counter() - t0

    t1 = time.perf_counter()
    if strategy in ("intramix", "zeros", "ones"):
        new_graph = wire_neighbors(batch, table, graph, cfg)
    elif strategy in ("mixup_w_con", "direct_con"):
        batch.anchor_pairs = batch.parent_pairs.copy()
        new_graph = add_edges(expand_nodes(graph, n + batch.size),
                              _edges_from_anchors(batch, n))
    elif strategy == "mixup_sim_con":
        batch.anchor_pairs = _top2_cosine_rows(batch.new_features, table.features)
        new_graph = add_edges(expand_nodes(graph, n + batch.size),
                              _edges_from_anchors(batch, n))
    elif strategy == "random_con":
        rng = stream(cfg.seed, "wire", "random")
        batch.anchor_pairs = _distinct_pairs(rng, np.arange(n, dtype=np.int64), batch.size)
        new_graph = add_edges(expand_nodes(graph, n + batch.size),
                              _edges_from_anchors(batch, n))
    elif strategy in ("mixup_no_con", "without_con"):
        batch.anchor_pairs = np.full((batch.size, 2), -1, dtype=np.int64)
        new_graph = expand_nodes(graph, n + batch.size)
    else:
        raise AssertionError(f"unhandled strategy {strategy!r}")
    wire_seconds = time.perf_counter() - t1

    new_table = _append_nodes(table, batch)
    soft_targets = None
    if batch.soft_labels is not None:
        soft_targets = np.full((new_table.num_nodes, table.num_classes), np.nan)
        soft_targets[n:] = batch.soft_labels

    report = _batch_report(batch, table, new_graph.edge_count - graph.edge_count,
                           gen_seconds, wire_seconds)
    report["strategy"] = strategy
    return AugmentationResult(graph=new_graph, table=new_table, batch=batch,
                              soft_targets=soft_targets, report=report)


def _top2_cosine_rows(queries: np.ndarray, corpus: np.ndarray) -> np.ndarray:
    """Indices of the two most cosine-similar corpus rows per query."""
    corpus_norm = np.linalg.norm(corpus, axis=1)
    query_norm = np.linalg.norm(queries, axis=1)
    sim = queries @ corpus.T / np.outer(np.maximum(query_norm, 1e-12),
                                        np.maximum(corpus_norm, 1e-12))
    sim[:, corpus_norm == 0] = -np.inf
    top2 = np.argpartition(-sim, 1, axis=1)[:, :2]
    # argpartition leaves the top-2 unordered; swap so the best comes first
    first_better = sim[np.arange(sim.shape[0]), top2[:, 0]] >= sim[np.arange(sim.shape[0]), top2[:, 1]]
    top2[~first_better] = top2[~first_better][:, ::-1]
    return top2.astype(np.int64)


def augmented_train_mask(table: NodeTable, split: SplitMasks,
                         strategy: str | None = None) -> np.ndarray:
    """Training index set after augmentation.

    Original train indices plus every generated node; under pl_only the
    pseudo-labeled pool (certified or not) joins instead.  Validation
    and test masks are left to the split and never grow.
    """
    parts = [split.train]
    parts.append(table.tagged(Provenance.GENERATED))
    if strategy == "pl_only":
        parts.append(table.tagged(Provenance.PSEUDO, Provenance.HIGH_QUALITY))
    return np.unique(np.concatenate(parts))


def generated_label_audit(batch: GeneratedBatch, ground_truth: np.ndarray) -> dict:
    """Compare generated-label error against the sampled sources' error.

    A source (parent) label is wrong when it differs from the parent's
    ground truth.  A generated label is wrong when it matches the ground
    truth of NEITHER parent — i.e. none of the feature mass blended into
    the node actually belongs to the class the label claims.  Symmetric
    per-parent definitions provably average out to the source error
    under uniform flips; the either-parent reading is the discrete
    counterpart of two noise draws partially cancelling.
    """
    y = batch.new_labels
    gt1 = ground_truth[batch.parent_pairs[:, 0]]
    gt2 = ground_truth[batch.parent_pairs[:, 1]]
    generated_error = float(np.mean((y != gt1) & (y != gt2)))
    source_error = float(np.mean(np.concatenate((y != gt1, y != gt2))))
    return {
        "generated_label_error": generated_error,
        "source_label_error": source_error,
        "generated_nodes": int(batch.size),
    }


def wiring_class_audit(batch: GeneratedBatch, ground_truth: np.ndarray) -> dict:
    """Fraction of new edges whose anchor truly belongs to the generated
    node's class."""
    if batch.anchor_pairs is None:
        raise ValueError("batch has not been wired")
    per_edge = []
    for slot in (0, 1):
        anchors = batch.anchor_pairs[:, slot]
        ok = anchors >= 0
        per_edge.append(ground_truth[anchors[ok]] == batch.new_labels[ok])
    matches = np.concatenate(per_edge)
    return {
        "same_class_fraction": float(np.mean(matches)) if matches.size else float("nan"),
        "edges_audited": int(matches.size),
    }
