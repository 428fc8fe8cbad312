"""Graph convolutional network with manual backpropagation.

The backbone is a two-layer GCN (the stack depth is a parameter only so
over-smoothing studies can go deeper): each layer aggregates with the
degree-normalized adjacency, applies an affine map, and ReLUs between
layers.  Dropout is inverted (scaled at train time) so a zero dropout
probability and the inference path are literally the same code.
Training is Adam with weight decay and early stopping on validation
accuracy; everything is deterministic given the config seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import NO_LABEL, NodeTable, SplitMasks
from .graph import Graph, NormalizedAdjacency, adjacency_matmul, normalized_adjacency
from .rng import stream

__all__ = [
    "ModelParams",
    "TrainConfig",
    "ForwardTrace",
    "TrainHistory",
    "glorot_init",
    "forward",
    "softmax",
    "loss_and_grad",
    "train",
    "predict",
    "hidden_embeddings",
    "save_params",
    "load_params",
]


@dataclass
class ModelParams:
    """Per-layer weights and biases.

    Two layers in normal use; W1/b1/W2/b2 address the first and last
    layer either way.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def W1(self) -> np.ndarray:
        return self.weights[0]

    @property
    def b1(self) -> np.ndarray:
        return self.biases[0]

    @property
    def W2(self) -> np.ndarray:
        return self.weights[-1]

    @property
    def b2(self) -> np.ndarray:
        return self.biases[-1]

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "ModelParams":
        return ModelParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def check_finite(self) -> None:
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise FloatingPointError(f"non-finite parameter in layer {k + 1}")


@dataclass(frozen=True)
class TrainConfig:
    hidden_dim: int = 64
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    dropout_prob: float = 0.5
    max_epochs: int = 300
    patience: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ValueError("dropout_prob must lie in [0, 1)")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")


@dataclass
class ForwardTrace:
    """Cached intermediates of one forward pass, consumed by backprop."""

    hidden: list[np.ndarray]          # post-ReLU activations per hidden layer
    dropout_masks: list[np.ndarray]   # inverted-dropout scale masks per layer input
    aggregated: list[np.ndarray]      # adj @ (mask * input) per layer
    pre_activation: list[np.ndarray]  # affine outputs per layer
    logits: np.ndarray


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    best_epoch: int = -1
    epochs_run: int = 0


def glorot_init(feature_dim: int, hidden_dim: int, num_classes: int, seed: int,
                num_layers: int = 2) -> ModelParams:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    dims = [feature_dim] + [hidden_dim] * (num_layers - 1) + [num_classes]
    weights, biases = [], []
    for k in range(num_layers):
        rng = stream(seed, "init", k)
        limit = np.sqrt(6.0 / (dims[k] + dims[k + 1]))
        weights.append(rng.uniform(-limit, limit, size=(dims[k], dims[k + 1])))
        biases.append(np.zeros(dims[k + 1]))
    return ModelParams(weights, biases)


def _dropout_mask(shape, prob: float, rng: np.random.Generator | None) -> np.ndarray | None:
    if prob == 0.0:
        return None
    if rng is None:
        raise ValueError("dropout_prob > 0 requires an rng")
    return (rng.random(shape) >= prob) / (1.0 - prob)


def forward(params: ModelParams, norm_adj: NormalizedAdjacency, features: np.ndarray,
            dropout_prob: float = 0.0, rng: np.random.Generator | None = None) -> ForwardTrace:
    """Run the GCN stack and cache everything backprop needs.

    Dropout is applied to each layer's input before aggregation; with
    dropout_prob == 0 the pass is deterministic and rng is unused.

    Raises
    ------
    ValueError
        On dimension disagreement between features and the first layer.
    FloatingPointError
        If any layer output is non-finite; the layer is named.
    """
    if features.shape[0] != norm_adj.num_nodes:
        raise ValueError("feature rows must match the graph's node count")
    if features.shape[1] != params.weights[0].shape[0]:
        raise ValueError(
            f"feature dim {features.shape[1]} does not match layer-1 input "
            f"dim {params.weights[0].shape[0]}"
        )
    hidden, masks, aggregated, pre_acts = [], [], [], []
    h = features
    num_layers = params.num_layers
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        mask = _dropout_mask(h.shape, dropout_prob, rng)
        dropped = h if mask is None else h * mask
        agg = adjacency_matmul(norm_adj, dropped)
        z = agg @ w + b
        if not np.isfinite(z).all():
            raise FloatingPointError(f"non-finite output in layer {k + 1}")
        masks.append(mask)
        aggregated.append(agg)
        pre_acts.append(z)
        if k < num_layers - 1:
            h = np.maximum(z, 0.0)
            hidden.append(h)
    return ForwardTrace(hidden=hidden, dropout_masks=masks, aggregated=aggregated,
                        pre_activation=pre_acts, logits=pre_acts[-1])


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _target_distribution(labels: np.ndarray, num_classes: int,
                         soft_targets: np.ndarray | None) -> np.ndarray:
    """One-hot targets, overridden row-wise where soft targets are given.

    soft_targets rows containing NaN mean "use the hard label".
    """
    n = labels.shape[0]
    dist = np.zeros((n, num_classes))
    labeled = labels != NO_LABEL
    dist[np.flatnonzero(labeled), labels[labeled]] = 1.0
    if soft_targets is not None:
        rows = ~np.isnan(soft_targets).any(axis=1)
        dist[rows] = soft_targets[rows]
    return dist


def loss_and_grad(params: ModelParams, norm_adj: NormalizedAdjacency, trace: ForwardTrace,
                  labels: np.ndarray, mask: np.ndarray,
                  soft_targets: np.ndarray | None = None) -> tuple[float, ModelParams]:
    """Mean cross-entropy over ``mask`` plus gradients for every parameter.

    Backprop routes through the cached trace, reusing its dropout masks,
    so the gradient matches the exact stochastic forward pass.
    """
    if mask.size == 0:
        raise ValueError("loss mask must be nonempty")
    n_mask = mask.size
    targets = _target_distribution(labels, params.weights[-1].shape[1], soft_targets)
    logits = trace.logits[mask]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = float(-(targets[mask] * log_probs).sum() / n_mask)

    d_logits = np.zeros_like(trace.logits)
    d_logits[mask] = (np.exp(log_probs) - targets[mask]) / n_mask

    grad_w, grad_b = [], []
    dz = d_logits
    for k in range(params.num_layers - 1, -1, -1):
        grad_w.append(trace.aggregated[k].T @ dz)
        grad_b.append(dz.sum(axis=0))
        if k > 0:
            dh = adjacency_matmul(norm_adj, dz @ params.weights[k].T)
            if trace.dropout_masks[k] is not None:
                dh = dh * trace.dropout_masks[k]
            dz = dh * (trace.pre_activation[k - 1] > 0)
    return loss, ModelParams(grad_w[::-1], grad_b[::-1])


def _masked_accuracy(pred: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    return float(np.mean(pred[mask] == labels[mask]))


def train(graph: Graph, table: NodeTable, split: SplitMasks, cfg: TrainConfig,
          *, eval_labels: np.ndarray | None = None, train_mask: np.ndarray | None = None,
          soft_targets: np.ndarray | None = None, num_layers: int = 2,
          ) -> tuple[ModelParams, TrainHistory]:
    """Fit the GCN with Adam and validation-accuracy early stopping.

    eval_labels supplies the labels consulted for early stopping on the
    validation mask (model selection only, never a gradient signal);
    when omitted, the table's own labels are used.  train_mask overrides
    the training index set, which is how augmented runs train on
    generated nodes while validation and test stay on original nodes.

    Returns the parameters of the best-validation epoch and the per-epoch
    history, bit-reproducible for a fixed config.
    """
    mask = split.train if train_mask is None else np.asarray(train_mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("training mask is empty")
    if np.any(table.labels[mask] == NO_LABEL) and soft_targets is None:
        raise ValueError("training mask contains unlabeled nodes")
    val_labels = table.labels if eval_labels is None else eval_labels

    norm_adj = normalized_adjacency(graph)
    params = glorot_init(table.feature_dim, cfg.hidden_dim, table.num_classes,
                         cfg.seed, num_layers=num_layers)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m_w = [np.zeros_like(w) for w in params.weights]
    v_w = [np.zeros_like(w) for w in params.weights]
    m_b = [np.zeros_like(b) for b in params.biases]
    v_b = [np.zeros_like(b) for b in params.biases]

    history = TrainHistory()
    best_val = -1.0
    best_params = params.copy()
    since_best = 0

    for epoch in range(cfg.max_epochs):
        rng = stream(cfg.seed, "dropout", epoch)
        trace = forward(params, norm_adj, table.features, cfg.dropout_prob, rng)
        loss, grads = loss_and_grad(params, norm_adj, trace, table.labels, mask, soft_targets)

        t = epoch + 1
        corr1 = 1.0 - beta1 ** t
        corr2 = 1.0 - beta2 ** t
        for k in range(params.num_layers):
            for p, g, m, v in ((params.weights[k], grads.weights[k], m_w[k], v_w[k]),
                               (params.biases[k], grads.biases[k], m_b[k], v_b[k])):
                g = g + cfg.weight_decay * p
                m *= beta1
                m += (1 - beta1) * g
                v *= beta2
                v += (1 - beta2) * g * g
                p -= cfg.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + eps)

        eval_trace = forward(params, norm_adj, table.features, 0.0, None)
        pred = np.argmax(eval_trace.logits, axis=1)
        history.train_loss.append(loss)
        has_hard = not np.any(table.labels[mask] == NO_LABEL)
        history.train_acc.append(
            _masked_accuracy(pred, table.labels, mask) if has_hard else float("nan")
        )
        if split.validation.size:
            val_acc = _masked_accuracy(pred, val_labels, split.validation)
            history.val_acc.append(val_acc)
            if val_acc > best_val:
                best_val = val_acc
                best_params = params.copy()
                history.best_epoch = epoch
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    history.epochs_run = epoch + 1
                    best_params.check_finite()
                    return best_params, history
        else:
            history.val_acc.append(float("nan"))
            best_params = params.copy()
            history.best_epoch = epoch

    history.epochs_run = len(history.train_loss)
    best_params.check_finite()
    return best_params, history


def predict(params: ModelParams, graph: Graph, table: NodeTable,
            dropout_prob: float = 0.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """Per-node argmax class indices; ties resolve to the lowest index.

    Dropout stays ACTIVE when dropout_prob > 0: perturbed inference is
    the whole point of the consistency ensemble, no retraining involved.
    """
    norm_adj = normalized_adjacency(graph)
    trace = forward(params, norm_adj, table.features, dropout_prob, rng)
    return np.argmax(trace.logits, axis=1)


def hidden_embeddings(params: ModelParams, graph: Graph, table: NodeTable) -> np.ndarray:
    """Last hidden-layer activations (pre-classifier), dropout off."""
    norm_adj = normalized_adjacency(graph)
    trace = forward(params, norm_adj, table.features, 0.0, None)
    return trace.hidden[-1]


def save_params(params: ModelParams, path) -> None:
    """Checkpoint as JSON: shape metadata plus row-major decimal weights."""
    payload = {
        "layer_dims": [list(w.shape) for w in params.weights],
        "weights": [w.ravel().tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_params(path) -> ModelParams:
    payload = json.loads(Path(path).read_text())
    weights = [np.asarray(w, dtype=np.float64).reshape(shape)
               for w, shape in zip(payload["weights"], payload["layer_dims"])]
    biases = [np.asarray(b, dtype=np.float64) for b in payload["biases"]]
    return ModelParams(weights, biases)
