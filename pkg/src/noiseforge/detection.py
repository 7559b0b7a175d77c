"""Loss-trajectory noisy-label detection with a 1-D two-component GMM.

Detection follows the small-loss premise: the higher-mean mixture
component is treated as the corrupted population, and a node's score is
its posterior probability of belonging to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, NumericError
from .classifier import LossTrajectory

__all__ = [
    "GMMConfig",
    "GMM1D",
    "DetectionScores",
    "fit_gmm_em",
    "score_corrupted",
    "detect_average",
    "detect_maximum",
    "roc_auc",
]


@dataclass(frozen=True)
class GMMConfig:
    tol: float = 1e-6
    max_iter: int = 100


@dataclass
class GMM1D:
    means: np.ndarray      # 2
    variances: np.ndarray  # 2
    weights: np.ndarray    # 2, sum to 1
    log_likelihood: list[float] = field(default_factory=list)

    @property
    def noisy_component(self) -> int:
        """Index of the higher-mean component."""
        return int(np.argmax(self.means))


@dataclass
class DetectionScores:
    scores: np.ndarray  # per-node probability of being corrupted, in [0, 1]
    protocol: str


def _log_gauss(x: np.ndarray, mean: float, var: float) -> np.ndarray:
    return -0.5 * (math.log(2.0 * math.pi * var) + (x - mean) ** 2 / var)


def fit_gmm_em(values: np.ndarray, config: GMMConfig = GMMConfig()) -> GMM1D:
    """Deterministic EM: means start at the 25th/75th percentiles, weights
    equal, variances pooled; variances floored at 1e-8 * (range^2 + 1e-12).

    Converges when the log-likelihood improves by less than config.tol or
    after config.max_iter iterations; the likelihood sequence is recorded
    and must be nondecreasing.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or len(x) < 4:
        raise NumericError("GMM fit needs a 1-D sample of at least 4 values")
    if not np.isfinite(x).all():
        raise NumericError("GMM fit requires finite values")
    spread = x.max() - x.min()
    if spread == 0.0:
        raise DegenerateInputError("all values identical: mixture fit undefined")
    floor = 1e-8 * (spread ** 2 + 1e-12)
    means = np.percentile(x, [25.0, 75.0]).astype(np.float64)
    variances = np.full(2, max(x.var(), floor))
    weights = np.full(2, 0.5)
    history: list[float] = []
    for _ in range(config.max_iter):
        log_comp = np.stack([
            np.log(weights[k]) + _log_gauss(x, means[k], variances[k]) for k in range(2)
        ])
        mx = log_comp.max(axis=0)
        log_norm = mx + np.log(np.exp(log_comp - mx).sum(axis=0))
        ll = float(log_norm.sum())
        history.append(ll)
        if len(history) > 1 and ll - history[-2] < config.tol:
            break
        resp = np.exp(log_comp - log_norm)  # 2 x M posteriors
        totals = resp.sum(axis=1)
        totals = np.maximum(totals, 1e-300)
        means = (resp @ x) / totals
        variances = np.maximum((resp * (x - means[:, None]) ** 2).sum(axis=1) / totals, floor)
        weights = totals / len(x)
        weights /= weights.sum()
    return GMM1D(means=means, variances=variances, weights=weights, log_likelihood=history)


def score_corrupted(values: np.ndarray, gmm: GMM1D) -> DetectionScores:
    """Posterior probability of the higher-mean ("corrupted") component."""
    x = np.asarray(values, dtype=np.float64)
    log_comp = np.stack([
        np.log(gmm.weights[k]) + _log_gauss(x, gmm.means[k], gmm.variances[k])
        for k in range(2)
    ])
    mx = log_comp.max(axis=0)
    log_norm = mx + np.log(np.exp(log_comp - mx).sum(axis=0))
    posterior = np.exp(log_comp[gmm.noisy_component] - log_norm)
    return DetectionScores(scores=posterior, protocol="average")


def detect_average(traj: LossTrajectory, subset: np.ndarray | None = None,
                   config: GMMConfig = GMMConfig()) -> tuple[DetectionScores, GMM1D]:
    """Score nodes by the GMM posterior of their mean loss over all epochs.

    If subset is given, the mixture is fit on those nodes only but every
    node is scored.
    """
    mean_loss = traj.losses.mean(axis=1)
    fit_values = mean_loss if subset is None else mean_loss[np.asarray(subset)]
    gmm = fit_gmm_em(fit_values, config)
    scores = score_corrupted(mean_loss, gmm)
    return scores, gmm


def detect_maximum(traj: LossTrajectory, truth_mask: np.ndarray,
                   subset: np.ndarray | None = None,
                   config: GMMConfig = GMMConfig()):
    """Oracle protocol: per-epoch GMM fit and AUC against ground truth.

    Returns (best_epoch, best_auc, per-epoch AUC list with None for epochs
    whose fit failed). Requires the truth mask by design; this is an
    evaluation ceiling, not a deployable detector.
    """
    truth_mask = np.asarray(truth_mask, dtype=bool)
    series: list[float | None] = []
    best_epoch, best_auc = -1, -np.inf
    for e in range(traj.num_epochs):
        values = traj.losses[:, e]
        try:
            fit_values = values if subset is None else values[np.asarray(subset)]
            gmm = fit_gmm_em(fit_values, config)
            scores = score_corrupted(values, gmm).scores
            auc = roc_auc(scores, truth_mask)
        except NumericError:
            series.append(None)
            continue
        series.append(auc)
        if auc > best_auc:
            best_epoch, best_auc = e, auc
    if best_epoch < 0:
        raise NumericError("maximum protocol: GMM fit failed at every epoch")
    return best_epoch, best_auc, series


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores: np.ndarray, truth_mask: np.ndarray) -> float:
    """Mann-Whitney rank statistic with midrank tie handling."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth_mask, dtype=bool)
    n_pos = int(truth.sum())
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise NumericError("ROC-AUC undefined: both classes must be present")
    ranks = _midranks(scores)
    u = ranks[truth].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))
