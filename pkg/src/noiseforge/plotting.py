"""Figure rendering for CLI reports.

Every function writes a single figure file (format follows the path
suffix; the CLI uses .svg) next to the delimited outputs it illustrates.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_corruption_frequency(counts: np.ndarray, realizations: int, path):
    """Histogram of per-node corruption counts over R realizations."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(counts, bins=np.arange(realizations + 2) - 0.5, color="#4878d0",
            edgecolor="white")
    ax.set_xlabel(f"corruption count over {realizations} realizations")
    ax.set_ylabel("nodes")
    return _save(fig, path)


def plot_transition_matrix(matrix: np.ndarray, path, class_names=None):
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(matrix, cmap="viridis", vmin=0.0)
    fig.colorbar(im, ax=ax, fraction=0.046)
    ticks = np.arange(matrix.shape[0])
    names = class_names if class_names else [str(i + 1) for i in ticks]
    ax.set_xticks(ticks, names, rotation=45, ha="right", fontsize=7)
    ax.set_yticks(ticks, names, fontsize=7)
    ax.set_xlabel("noisy class")
    ax.set_ylabel("clean class")
    return _save(fig, path)


def plot_auc_series(series, path, best_epoch=None):
    """Per-epoch detection AUC; failed epochs (None) are gaps."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    xs = [i for i, v in enumerate(series) if v is not None]
    ys = [v for v in series if v is not None]
    ax.plot(xs, ys, marker="o", ms=3, color="#4878d0")
    if best_epoch is not None:
        ax.axvline(best_epoch, ls="--", color="#d65f5f", lw=1,
                   label=f"best epoch {best_epoch}")
        ax.legend(fontsize=8)
    ax.set_xlabel("epoch")
    ax.set_ylabel("ROC-AUC")
    return _save(fig, path)


def plot_consistency_gaps(gaps: dict[int, float], path):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ks = sorted(gaps)
    ax.bar([str(k) for k in ks], [gaps[k] for k in ks], color="#4878d0")
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_xlabel("neighborhood hops k")
    ax.set_ylabel("consistency gap (clean - corrupted)")
    return _save(fig, path)


def plot_similarity_histograms(summary: dict, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    edges = summary["bin_edges"]
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = (edges[1] - edges[0]) * 0.45
    ax.bar(centers - width / 2, summary["clean_hist"], width=width,
           label="clean", color="#4878d0")
    ax.bar(centers + width / 2, summary["corrupted_hist"], width=width,
           label="corrupted", color="#d65f5f")
    ax.set_xlabel("own-class feature similarity")
    ax.set_ylabel("nodes")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_entropy_vs_frequency(entropy: np.ndarray, counts: np.ndarray, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.scatter(counts, entropy, s=6, alpha=0.4, color="#4878d0")
    ax.set_xlabel("corruption frequency")
    ax.set_ylabel("prediction entropy (nats)")
    return _save(fig, path)
