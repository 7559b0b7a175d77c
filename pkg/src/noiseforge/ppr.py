"""Personalized PageRank and class-mass aggregation.

The solved system is pi = alpha * e_v + (1 - alpha) * W^T pi with
W = D^-1 A the row-stochastic random-walk matrix. Zero-degree nodes get a
self-loop inside W so the walk never loses mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, NumericError
from .graph import Graph, LabelSet

__all__ = ["PPRConfig", "PPRVector", "ppr_single", "ppr_class_mass", "dense_ppr_oracle"]


@dataclass(frozen=True)
class PPRConfig:
    alpha: float = 0.9          # restart probability
    epsilon: float = 1e-6       # residual tolerance per unit of source mass
    max_push_steps: int = 10_000

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise NumericError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.epsilon <= 0:
            raise NumericError(f"epsilon must be positive, got {self.epsilon}")


@dataclass
class PPRVector:
    source: int
    mass: dict[int, float] = field(default_factory=dict)

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for k, v in self.mass.items():
            out[k] = v
        return out


def _walk_matrix(g: Graph) -> sp.csr_matrix:
    """Row-stochastic D^-1 A with a self-loop patched onto zero-degree nodes."""
    a = g.adjacency().tolil()
    deg = g.degrees()
    for v in np.flatnonzero(deg == 0):
        a[v, v] = 1.0
    a = a.tocsr()
    inv_deg = 1.0 / np.maximum(deg, 1)
    return sp.diags(inv_deg) @ a


def _push_solve(wt: sp.csr_matrix, residual: np.ndarray, alpha: float,
                epsilon: float, max_steps: int) -> np.ndarray:
    """Residual-push iteration, applied as whole-vector sweeps.

    Each sweep settles alpha of the outstanding residual and forwards the
    rest along the walk, so total residual mass decays by (1 - alpha) per
    sweep. On exit every residual entry (and the total residual per unit of
    source mass) is below epsilon.
    """
    estimate = np.zeros_like(residual)
    unit = residual.sum(axis=0)
    for _ in range(max_steps):
        total = residual.sum(axis=0)
        # all-zero columns (unit 0) are trivially settled
        if np.all(total <= epsilon * unit) and residual.max() <= epsilon * np.max(unit):
            return estimate
        estimate += alpha * residual
        residual = (1.0 - alpha) * (wt @ residual)
    raise ConvergenceError(
        f"push solver: residual {residual.sum(axis=0).max():.3e} after {max_steps} sweeps"
    )


def ppr_single(g: Graph, v: int, cfg: PPRConfig = PPRConfig()) -> PPRVector:
    """Approximate PPR vector of source v; residuals below cfg.epsilon."""
    n = g.num_nodes
    if not (0 <= v < n):
        raise NumericError(f"source node {v} out of range")
    wt = _walk_matrix(g).T.tocsr()
    r = np.zeros(n)
    r[v] = 1.0
    pi = _push_solve(wt, r, cfg.alpha, cfg.epsilon, cfg.max_push_steps)
    nz = np.flatnonzero(pi > 0)
    return PPRVector(source=v, mass={int(i): float(pi[i]) for i in nz})


def ppr_class_mass(g: Graph, labels: LabelSet, cfg: PPRConfig = PPRConfig()) -> np.ndarray:
    """N x C matrix Q: row i is the class-aggregated, L1-normalized PPR mass.

    Computed for all sources at once by running the push recurrence on the
    one-hot label matrix, which equals aggregating per-source PPR vectors
    by class.
    """
    y = np.asarray(labels.values if isinstance(labels, LabelSet) else labels)
    n = g.num_nodes
    if len(y) != n:
        raise NumericError("labels length does not match node count")
    c = g.num_classes
    w = _walk_matrix(g)
    onehot = np.zeros((n, c))
    onehot[np.arange(n), y] = 1.0
    try:
        q = _push_solve(w, onehot, cfg.alpha, cfg.epsilon, cfg.max_push_steps)
    except ConvergenceError as e:
        raise ConvergenceError(f"ppr_class_mass: {e}") from e
    q /= q.sum(axis=1, keepdims=True)
    return q


def dense_ppr_oracle(g: Graph, v: int, alpha: float) -> np.ndarray:
    """Exact PPR by dense linear solve; test oracle only, refuses large N."""
    n = g.num_nodes
    if n > 2000:
        raise NumericError(f"dense oracle refused for N={n} > 2000")
    w = _walk_matrix(g).toarray()
    e = np.zeros(n)
    e[v] = 1.0
    return alpha * np.linalg.solve(np.eye(n) - (1.0 - alpha) * w.T, e)
