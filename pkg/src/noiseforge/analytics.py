"""Diagnostic statistics: entropies, label-consistency scores, feature
similarity splits, and correlation coefficients."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetError, NumericError
from .graph import Graph, LabelSet
from .noise import PredictionMatrix, TransitionMatrix

__all__ = [
    "EntropyReport",
    "ConsistencyReport",
    "prediction_entropy",
    "offdiag_entropy",
    "consistency_scores",
    "consistency_gap",
    "feature_similarity_split",
    "correlation",
]


@dataclass
class EntropyReport:
    per_unit: np.ndarray  # nats
    aggregate: float
    unit: str
    excluded: tuple[int, ...] = ()


@dataclass
class ConsistencyReport:
    """Per-node consistency scores S_k for each requested hop count k."""

    scores: dict[int, np.ndarray]
    defined: np.ndarray  # False for isolated nodes (no k-hop neighbors)


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def prediction_entropy(pred: PredictionMatrix) -> EntropyReport:
    """Per-node entropy of the predicted class distribution, 0*log0 = 0."""
    per_node = np.array([_entropy(row) for row in pred.matrix])
    return EntropyReport(per_unit=per_node, aggregate=float(per_node.mean()),
                         unit="node-prediction")


def offdiag_entropy(t: TransitionMatrix | np.ndarray) -> EntropyReport:
    """Per-row entropy of the normalized off-diagonal transition mass.

    Rows with no off-diagonal mass are excluded from the (unweighted) mean
    and reported in ``excluded``.
    """
    m = t.matrix if isinstance(t, TransitionMatrix) else np.asarray(t, dtype=np.float64)
    c = m.shape[0]
    if c < 2:
        raise NumericError("off-diagonal entropy needs C >= 2")
    per_row = np.full(c, np.nan)
    excluded = []
    for i in range(c):
        off = np.delete(m[i], i)
        total = off.sum()
        if total <= 0:
            excluded.append(i)
            continue
        per_row[i] = _entropy(off / total)
    if len(excluded) == c:
        raise NumericError("off-diagonal entropy undefined: no corruption mass in any row")
    return EntropyReport(per_unit=per_row, aggregate=float(np.nanmean(per_row)),
                         unit="transition-row", excluded=tuple(excluded))


def _khop_neighbors(g: Graph, v: int, k: int, exactly: bool) -> list[int]:
    """BFS ball of radius k around v (center excluded); ring only if exactly."""
    dist = {v: 0}
    frontier = deque([v])
    out = []
    while frontier:
        u = frontier.popleft()
        if dist[u] == k:
            continue
        for w in g.neighbors(u):
            w = int(w)
            if w not in dist:
                dist[w] = dist[u] + 1
                frontier.append(w)
                if not exactly or dist[w] == k:
                    out.append(w)
    return out


def consistency_scores(g: Graph, labels, ks, exactly_k: bool = False) -> ConsistencyReport:
    """S_k(v): fraction of v's k-hop neighbors sharing v's label.

    Neighborhoods are distance <= k balls by default (``exactly_k`` switches
    to the distance == k ring). Nodes with empty neighborhoods are flagged
    undefined (NaN score).
    """
    y = np.asarray(labels.values if isinstance(labels, LabelSet) else labels)
    scores: dict[int, np.ndarray] = {}
    defined = np.ones(g.num_nodes, dtype=bool)
    for k in ks:
        if k < 1:
            raise NumericError(f"hop count must be >= 1, got {k}")
        s = np.full(g.num_nodes, np.nan)
        for v in range(g.num_nodes):
            nbrs = _khop_neighbors(g, v, k, exactly_k)
            if not nbrs:
                defined[v] = False
                continue
            s[v] = float(np.mean(y[nbrs] == y[v]))
        scores[k] = s
    return ConsistencyReport(scores=scores, defined=defined)


def consistency_gap(report: ConsistencyReport, clean_mask: np.ndarray) -> dict[int, float]:
    """Mean clean score minus mean corrupted score, per k."""
    clean_mask = np.asarray(clean_mask, dtype=bool)
    gaps = {}
    for k, s in report.scores.items():
        ok = ~np.isnan(s)
        clean = s[ok & clean_mask]
        corrupted = s[ok & ~clean_mask]
        if len(clean) == 0 or len(corrupted) == 0:
            raise NumericError(f"consistency gap k={k}: one group is empty")
        gaps[k] = float(clean.mean() - corrupted.mean())
    return gaps


def feature_similarity_split(g: Graph, labels, clean_mask: np.ndarray, bins: int = 20):
    """Own-class centroid similarity (clamped cosine, as in feature noise),
    split into clean and corrupted groups.

    Returns (clean values, corrupted values, summary dict with histograms).
    """
    if g.node_features is None:
        raise DatasetError("feature similarity requires node features")
    y = np.asarray(labels.values if isinstance(labels, LabelSet) else labels)
    clean_mask = np.asarray(clean_mask, dtype=bool)
    x = g.node_features
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        bad = int(np.flatnonzero(norms == 0)[0])
        raise DatasetError(f"all-zero feature vector at node {bad + 1}")
    centroids = np.zeros((g.num_classes, x.shape[1]))
    for cls in range(g.num_classes):
        members = y == cls
        if not members.any():
            raise DatasetError(f"feature similarity: class {cls + 1} has no nodes")
        centroids[cls] = x[members].mean(axis=0)
    cnorms = np.linalg.norm(centroids, axis=1)
    cos = ((x / norms[:, None]) * (centroids[y] / cnorms[y][:, None])).sum(axis=1)
    sim = np.maximum(cos, 0.0) + 1e-12
    clean_vals = sim[clean_mask]
    corrupted_vals = sim[~clean_mask]
    edges = np.linspace(0.0, max(1.0, sim.max()), bins + 1)
    summary = {
        "clean_mean": float(clean_vals.mean()) if len(clean_vals) else None,
        "clean_var": float(clean_vals.var()) if len(clean_vals) else None,
        "corrupted_mean": float(corrupted_vals.mean()) if len(corrupted_vals) else None,
        "corrupted_var": float(corrupted_vals.var()) if len(corrupted_vals) else None,
        "bin_edges": edges,
        "clean_hist": np.histogram(clean_vals, bins=edges)[0],
        "corrupted_hist": np.histogram(corrupted_vals, bins=edges)[0],
    }
    return clean_vals, corrupted_vals, summary


def _rank_midpoints(values: np.ndarray) -> np.ndarray:
    from .detection import _midranks

    return _midranks(np.asarray(values, dtype=np.float64))


def correlation(xs, ys, method: str = "pearson") -> float:
    """Pearson or Spearman (Pearson on midranks) correlation coefficient."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if len(x) != len(y) or len(x) < 3:
        raise NumericError("correlation needs two equal-length samples of size >= 3")
    if method == "spearman":
        x, y = _rank_midpoints(x), _rank_midpoints(y)
    elif method != "pearson":
        raise NumericError(f"unknown correlation method: {method}")
    if x.std() == 0 or y.std() == 0:
        raise NumericError("correlation undefined: zero variance")
    return float(np.corrcoef(x, y)[0, 1])
