"""Built-in node classifier: propagated features + multinomial logistic regression.

A deliberately simple, deterministic stand-in for a trained GNN. It feeds
three consumers: prediction matrices for confidence noise, per-node loss
trajectories for detection, and the supervised corruption detector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DatasetError, NumericError
from .graph import Graph, LabelSet, split_nodes
from .noise import PredictionMatrix
from .corruption import derive_seed

__all__ = [
    "ClassifierConfig",
    "ClassifierParams",
    "LossTrajectory",
    "TrainResult",
    "propagate",
    "loss_and_grad",
    "train",
    "predict_proba",
    "confidence_protocol",
    "supervised_detector",
]


@dataclass(frozen=True)
class ClassifierConfig:
    step_size: float = 0.1
    max_epochs: int = 200
    patience: int = 20
    l2: float = 1e-4
    seed: int = 0
    propagation_depth: int = 2
    init_scale: float = 0.01


@dataclass
class ClassifierParams:
    weights: np.ndarray  # d x C
    bias: np.ndarray     # C


@dataclass
class LossTrajectory:
    """Per-node cross-entropy loss at every epoch (N x E)."""

    losses: np.ndarray
    node_ids: np.ndarray | None = None

    @property
    def num_epochs(self) -> int:
        return self.losses.shape[1]


@dataclass
class TrainResult:
    params: ClassifierParams
    trajectory: LossTrajectory
    val_accuracy: list[float]
    best_epoch: int


def propagate(g: Graph, k: int) -> np.ndarray:
    """Smooth features k times with the symmetric-normalized self-loop adjacency.

    X <- (D~^-1/2 (A + I) D~^-1/2)^k X; k = 0 returns the raw features.
    """
    if k < 0:
        raise NumericError(f"propagation depth must be >= 0, got {k}")
    if g.node_features is None:
        raise DatasetError("propagation requires node features")
    x = g.node_features.astype(np.float64).copy()
    if k == 0:
        return x
    a = g.adjacency() + sp.identity(g.num_nodes, format="csr")
    inv_sqrt = 1.0 / np.sqrt(np.asarray(a.sum(axis=1)).ravel())
    s = sp.diags(inv_sqrt) @ a @ sp.diags(inv_sqrt)
    for _ in range(k):
        x = s @ x
    return x


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def per_node_loss(params: ClassifierParams, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    probs = _softmax(x @ params.weights + params.bias)
    return -np.log(np.maximum(probs[np.arange(len(y)), y], 1e-300))


def loss_and_grad(weights: np.ndarray, bias: np.ndarray, x: np.ndarray,
                  y: np.ndarray, idx: np.ndarray, l2: float):
    """Mean cross-entropy over idx plus (l2/2)||W||^2, with analytic gradients."""
    xt = x[idx]
    yt = y[idx]
    probs = _softmax(xt @ weights + bias)
    ce = -np.log(np.maximum(probs[np.arange(len(yt)), yt], 1e-300)).mean()
    loss = ce + 0.5 * l2 * float((weights ** 2).sum())
    delta = probs.copy()
    delta[np.arange(len(yt)), yt] -= 1.0
    delta /= len(yt)
    grad_w = xt.T @ delta + l2 * weights
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


def train(features: np.ndarray, labels, split, config: ClassifierConfig = ClassifierConfig(),
          num_classes: int | None = None) -> TrainResult:
    """Full-batch gradient descent with validation early stopping.

    Records the pre-update loss of every node at every epoch. Stops
    config.patience epochs past the best validation accuracy and returns
    the parameters snapshotted at that (first-best) epoch.
    """
    y = np.asarray(labels.values if isinstance(labels, LabelSet) else labels, dtype=np.int64)
    x = np.asarray(features, dtype=np.float64)
    train_idx, val_idx, _ = (np.asarray(s, dtype=np.int64) for s in split)
    c = num_classes if num_classes is not None else int(y.max()) + 1
    present = np.unique(y[train_idx])
    if len(present) < c:
        missing = sorted(set(range(c)) - set(present.tolist()))
        raise DatasetError(f"training split has no nodes of class(es) {[m + 1 for m in missing]}")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    w = rng.normal(0.0, config.init_scale, size=(x.shape[1], c))
    b = np.zeros(c)
    losses = []
    val_acc: list[float] = []
    best = (-1.0, -1, None, None)  # (acc, epoch, W, b)
    for epoch in range(config.max_epochs):
        probs = _softmax(x @ w + b)
        node_loss = -np.log(np.maximum(probs[np.arange(len(y)), y], 1e-300))
        if not np.isfinite(node_loss[train_idx]).all():
            raise NumericError(
                f"training diverged at epoch {epoch}; try a smaller step size"
            )
        losses.append(node_loss)
        if len(val_idx):
            acc = float(np.mean(probs[val_idx].argmax(axis=1) == y[val_idx]))
        else:
            acc = float(np.mean(probs[train_idx].argmax(axis=1) == y[train_idx]))
        val_acc.append(acc)
        if acc > best[0]:
            best = (acc, epoch, w.copy(), b.copy())
        elif epoch - best[1] >= config.patience:
            break
        _, gw, gb = loss_and_grad(w, b, x, y, train_idx, config.l2)
        w = w - config.step_size * gw
        b = b - config.step_size * gb
    params = ClassifierParams(weights=best[2], bias=best[3])
    trajectory = LossTrajectory(losses=np.column_stack(losses))
    return TrainResult(params=params, trajectory=trajectory,
                       val_accuracy=val_acc, best_epoch=best[1])


def predict_proba(params: ClassifierParams, features: np.ndarray) -> PredictionMatrix:
    x = np.asarray(features, dtype=np.float64)
    if x.shape[1] != params.weights.shape[0]:
        raise NumericError(
            f"feature dimension {x.shape[1]} does not match weights {params.weights.shape[0]}"
        )
    return PredictionMatrix(_softmax(x @ params.weights + params.bias))


def confidence_protocol(g: Graph, labels, runs: int = 10, folds: int = 5,
                        config: ClassifierConfig = ClassifierConfig()) -> PredictionMatrix:
    """Cross-fitted prediction matrix for confidence noise.

    Per run, nodes are permuted into `folds` folds; with the test fold
    rotating, the next two folds train and the following two validate, so
    every node is predicted exactly once per run. The final matrix is the
    mean over runs, renormalized.
    """
    y = np.asarray(labels.values if isinstance(labels, LabelSet) else labels, dtype=np.int64)
    n = g.num_nodes
    if n < folds:
        raise DatasetError(f"need at least {folds} nodes for {folds}-fold splitting")
    x = propagate(g, config.propagation_depth)
    accum = np.zeros((n, g.num_classes))
    for run in range(runs):
        rng = np.random.Generator(np.random.PCG64(derive_seed(config.seed, run)))
        perm = rng.permutation(n)
        chunks = np.array_split(perm, folds)
        for f in range(folds):
            test_idx = chunks[f]
            train_idx = np.concatenate([chunks[(f + 1) % folds], chunks[(f + 2) % folds]])
            val_idx = np.concatenate([chunks[(f + 3) % folds], chunks[(f + 4) % folds]])
            try:
                result = train(x, y, (train_idx, val_idx, test_idx), config,
                               num_classes=g.num_classes)
            except (DatasetError, NumericError) as e:
                raise type(e)(f"confidence protocol run {run} fold {f}: {e}") from e
            probs = _softmax(x @ result.params.weights + result.params.bias)
            accum[test_idx] += probs[test_idx]
    accum /= runs
    accum /= accum.sum(axis=1, keepdims=True)
    return PredictionMatrix(accum)


def supervised_detector(g: Graph, clean, noisy, config: ClassifierConfig = ClassifierConfig(),
                        ratios=(0.8, 0.1, 0.1)):
    """Binary corrupted-vs-clean classifier trained on an 8:1:1 node split.

    Returns (held-out scores, held-out ROC-AUC, test index array).
    """
    from .detection import roc_auc

    yc = np.asarray(clean.values if isinstance(clean, LabelSet) else clean)
    yn = np.asarray(noisy.values if isinstance(noisy, LabelSet) else noisy)
    if len(yc) != len(yn):
        raise DatasetError("clean and noisy label sets differ in length")
    y_det = (yc != yn).astype(np.int64)
    if y_det.all() or not y_det.any():
        raise DatasetError("detector AUC undefined: no positive (or no negative) class")
    x = propagate(g, config.propagation_depth)
    split = split_nodes(g, ratios, config.seed)
    result = train(x, y_det, split, config, num_classes=2)
    probs = predict_proba(result.params, x).matrix[:, 1]
    test_idx = split[2]
    auc = roc_auc(probs[test_idx], y_det[test_idx].astype(bool))
    return probs[test_idx], auc, test_idx
