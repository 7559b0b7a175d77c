"""Per-node transition probability builders for every noise type.

Every builder returns a row-stochastic N x C matrix wrapped in
TransitionProbabilities; row i gives the distribution the corruption
process samples node i's new label from (after zeroing the true class).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetError, NumericError
from .graph import Graph, LabelSet
from .ppr import PPRConfig, ppr_class_mass

__all__ = [
    "TransitionProbabilities",
    "PredictionMatrix",
    "TransitionMatrix",
    "build_uniform",
    "build_pairwise",
    "build_topology",
    "build_feature",
    "build_confidence",
    "class_transition_matrix",
]

_ROW_TOL = 1e-9


def _check_rows(m: np.ndarray, tol: float = _ROW_TOL):
    if m.min() < 0:
        raise NumericError("transition probabilities must be nonnegative")
    err = np.abs(m.sum(axis=1) - 1.0).max()
    if err > tol:
        raise NumericError(f"rows must sum to 1 (max deviation {err:.3e})")


@dataclass
class TransitionProbabilities:
    matrix: np.ndarray  # N x C
    noise_type: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        _check_rows(self.matrix)

    def corruption_probability(self, labels) -> np.ndarray:
        """Per-node probability of leaving the true class: 1 - T_D[i, y_i]."""
        y = np.asarray(labels.values if isinstance(labels, LabelSet) else labels)
        return 1.0 - self.matrix[np.arange(len(y)), y]


@dataclass
class PredictionMatrix:
    matrix: np.ndarray  # N x C, rows stochastic
    source: str = "builtin-classifier"

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.min() < 0 or self.matrix.max() > 1 + 1e-6:
            raise NumericError("prediction entries must lie in [0, 1]")
        err = np.abs(self.matrix.sum(axis=1) - 1.0).max()
        if err > 1e-6:
            raise NumericError(f"prediction rows must sum to 1 (max deviation {err:.3e})")


@dataclass
class TransitionMatrix:
    """C x C class-level summary; probability rows, undefined rows flagged."""

    matrix: np.ndarray
    counts: np.ndarray | None = None
    undefined_rows: tuple[int, ...] = ()


def _labels_array(labels) -> np.ndarray:
    return np.asarray(labels.values if isinstance(labels, LabelSet) else labels, dtype=np.int64)


def build_uniform(labels, num_classes: int) -> TransitionProbabilities:
    """Every row is the uniform distribution over all C classes."""
    if num_classes < 2:
        raise DatasetError(f"uniform noise needs C >= 2, got {num_classes}")
    n = len(_labels_array(labels))
    m = np.full((n, num_classes), 1.0 / num_classes)
    return TransitionProbabilities(m, "uniform")


def build_pairwise(labels, num_classes: int) -> TransitionProbabilities:
    """Mass 1/2 on the true class and 1/2 on the next class (y mod C) + 1.

    With 1-indexed classes the shift is (y mod C) + 1; internally that is
    (y + 1) mod C.
    """
    if num_classes < 2:
        raise DatasetError(f"pairwise noise needs C >= 2, got {num_classes}")
    y = _labels_array(labels)
    n = len(y)
    m = np.zeros((n, num_classes))
    m[np.arange(n), y] = 0.5
    m[np.arange(n), (y + 1) % num_classes] = 0.5
    return TransitionProbabilities(m, "pairwise")


def build_topology(g: Graph, labels, cfg: PPRConfig = PPRConfig()) -> TransitionProbabilities:
    """T_D = PPR class-mass matrix Q."""
    q = ppr_class_mass(g, labels if isinstance(labels, LabelSet) else LabelSet(labels), cfg)
    return TransitionProbabilities(q, "topology", {"alpha": cfg.alpha, "epsilon": cfg.epsilon})


def build_feature(g: Graph, labels) -> TransitionProbabilities:
    """Cosine similarity of each node to per-class feature centroids.

    Negative cosines clamp to 0 and every similarity gets a 1e-12 floor
    before row normalization, keeping rows valid distributions.
    """
    if g.node_features is None:
        raise DatasetError("feature noise requires node features")
    x = g.node_features
    y = _labels_array(labels)
    c = g.num_classes
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        bad = int(np.flatnonzero(norms == 0)[0])
        raise DatasetError(f"all-zero feature vector at node {bad + 1}")
    centroids = np.zeros((c, x.shape[1]))
    for cls in range(c):
        members = y == cls
        if not members.any():
            raise DatasetError(f"feature noise: class {cls + 1} has no nodes")
        centroids[cls] = x[members].mean(axis=0)
    cnorms = np.linalg.norm(centroids, axis=1)
    if np.any(cnorms == 0):
        bad = int(np.flatnonzero(cnorms == 0)[0])
        raise DatasetError(f"feature noise: class {bad + 1} centroid is all zeros")
    cos = (x / norms[:, None]) @ (centroids / cnorms[:, None]).T
    sim = np.maximum(cos, 0.0) + 1e-12
    m = sim / sim.sum(axis=1, keepdims=True)
    return TransitionProbabilities(m, "feature")


def build_confidence(pred: PredictionMatrix, num_nodes: int | None = None) -> TransitionProbabilities:
    """T_D is the prediction matrix verbatim, renormalized to 1e-9 tolerance."""
    m = pred.matrix
    if num_nodes is not None and m.shape[0] != num_nodes:
        raise DatasetError(f"prediction matrix has {m.shape[0]} rows for {num_nodes} nodes")
    m = m / m.sum(axis=1, keepdims=True)
    return TransitionProbabilities(m, "confidence", {"source": pred.source})


def class_transition_matrix(clean, noisy, num_classes: int) -> TransitionMatrix:
    """Empirical C x C transition matrix from clean to noisy labels.

    Rows for classes with zero clean nodes are flagged undefined and left
    as zeros.
    """
    yc = _labels_array(clean)
    yn = _labels_array(noisy)
    if len(yc) != len(yn):
        raise DatasetError("clean and noisy label sets differ in length")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (yc, yn), 1)
    totals = counts.sum(axis=1)
    probs = np.zeros((num_classes, num_classes))
    undefined = []
    for i in range(num_classes):
        if totals[i] == 0:
            undefined.append(i)
        else:
            probs[i] = counts[i] / totals[i]
    return TransitionMatrix(probs, counts=counts, undefined_rows=tuple(undefined))
