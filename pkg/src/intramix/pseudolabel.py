"""Pseudo-labeling and high-quality label certification.

A trained model first stamps every unlabeled node with its argmax
prediction (low-quality labels).  Certification then reruns inference n
times under distinct dropout probabilities — an ensemble of n perturbed
models at the cost of n forward passes, no retraining — and keeps the
nodes whose predictions agree across all trials and with the stored
label.  Gold nodes count as high quality by definition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import NodeTable, Provenance
from .gcn import ModelParams, predict
from .graph import Graph
from .rng import stream

__all__ = [
    "EnsembleConfig",
    "assign_pseudo_labels",
    "select_high_quality",
    "corrupt_pseudo_labels",
]

DEFAULT_DROPOUTS = (0.3, 0.4, 0.5, 0.6, 0.7)


@dataclass(frozen=True)
class EnsembleConfig:
    """Dropout probabilities for the consistency ensemble (n = len)."""

    dropout_probs: tuple[float, ...] = DEFAULT_DROPOUTS
    seed: int = 0

    def __post_init__(self):
        if not 1 <= len(self.dropout_probs) <= 16:
            raise ValueError("ensemble size must be between 1 and 16")
        if len(set(self.dropout_probs)) != len(self.dropout_probs):
            raise ValueError("dropout probabilities must be distinct")
        if any(not 0.0 <= p < 1.0 for p in self.dropout_probs):
            raise ValueError("dropout probabilities must lie in [0, 1)")


def assign_pseudo_labels(model: ModelParams, graph: Graph, table: NodeTable) -> NodeTable:
    """Stamp every unlabeled node with the model's dropout-free argmax.

    Gold tags are untouched; a table without unlabeled nodes is returned
    as is.
    """
    unlabeled = table.tagged(Provenance.UNLABELED)
    if unlabeled.size == 0:
        return table
    pred = predict(model, graph, table, dropout_prob=0.0)
    labels = table.labels.copy()
    labels[unlabeled] = pred[unlabeled]
    provenance = table.provenance.copy()
    provenance[unlabeled] = Provenance.PSEUDO
    return table.replace(labels=labels, provenance=provenance)


def _trial_stream(seed: int, prob: float) -> np.random.Generator:
    # Key the stream by the probability's bit pattern: a trial's draws
    # depend only on (seed, prob), so enlarging the ensemble never
    # perturbs the trials it shares with a smaller one.
    return stream(seed, "ensemble", int(np.float64(prob).view(np.uint64)))


def select_high_quality(model: ModelParams, graph: Graph, table: NodeTable,
                        cfg: EnsembleConfig) -> NodeTable:
    """Re-tag the pseudo-labeled nodes the dropout ensemble certifies.

    One inference pass per configured dropout probability.  A node is
    certified when all n predictions agree with each other and with its
    stored label.  Labels are never changed, only tags; model parameters
    are read-only throughout.
    """
    candidates = table.tagged(Provenance.PSEUDO, Provenance.HIGH_QUALITY)
    if candidates.size == 0:
        return table
    consistent = np.ones(candidates.size, dtype=bool)
    for prob in cfg.dropout_probs:
        rng = _trial_stream(cfg.seed, prob)
        pred = predict(model, graph, table, dropout_prob=prob, rng=rng)
        consistent &= pred[candidates] == table.labels[candidates]
    provenance = table.provenance.copy()
    provenance[candidates] = np.where(consistent, Provenance.HIGH_QUALITY, Provenance.PSEUDO)
    return table.replace(provenance=provenance)


def corrupt_pseudo_labels(table: NodeTable, rate: float, seed: int) -> NodeTable:
    """Flip a fraction of pseudo labels to a uniformly chosen other class.

    Lab utility for noise-robustness studies: simulates a weaker
    pseudo-labeler without retraining anything.  Only nodes tagged
    pseudo are touched.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    pseudo = table.tagged(Provenance.PSEUDO)
    rng = stream(seed, "labelnoise")
    hit = pseudo[rng.random(pseudo.size) < rate]
    labels = table.labels.copy()
    # uniform over the other num_classes - 1 labels
    shift = rng.integers(1, table.num_classes, size=hit.size)
    labels[hit] = (labels[hit] + shift) % table.num_classes
    return table.replace(labels=labels)
