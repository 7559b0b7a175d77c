"""Label corruption: weighted node selection and per-node label flips.

Randomness discipline: every draw comes from numpy's PCG64 generator
seeded explicitly; realization seeds derive from the master seed with the
splitmix64 finalizer, so runs reproduce bit-for-bit across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .graph import LabelSet
from .noise import TransitionProbabilities

__all__ = [
    "NoiseSpec",
    "CorruptionResult",
    "CorruptionFrequency",
    "derive_seed",
    "weighted_sample_without_replacement",
    "corrupt",
    "corrupt_many",
]

_MASK64 = (1 << 64) - 1


def derive_seed(master: int, index: int) -> int:
    """splitmix64 finalizer over (master, index); 64-bit, stable everywhere."""
    x = (master + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class NoiseSpec:
    noise_type: str
    rate: float
    seed: int = 0
    realizations: int = 10

    def __post_init__(self):
        if not (0.0 <= self.rate <= 1.0):
            raise NumericError(f"noise rate must be in [0, 1], got {self.rate}")
        if self.realizations < 1:
            raise NumericError("realization count must be >= 1")


@dataclass
class CorruptionResult:
    noisy: LabelSet
    mask: np.ndarray  # True where the label was flipped
    achieved_rate: float
    seed: int
    warnings: list[str] = field(default_factory=list)


@dataclass
class CorruptionFrequency:
    counts: np.ndarray  # per-node corruption count over realizations
    realizations: int


def weighted_sample_without_replacement(weights: np.ndarray, k: int,
                                        rng: np.random.Generator) -> np.ndarray:
    """k distinct indices via exponential keys (Efraimidis-Spirakis).

    Each positive-weight index gets the key Exp(1)/w; the k smallest keys
    win, giving inclusion probabilities monotone in weight and a draw that
    does not depend on input order.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.min() < 0:
        raise NumericError("sampling weights must be nonnegative")
    positive = np.flatnonzero(weights > 0)
    if k > len(positive):
        raise NumericError(f"cannot draw {k} from {len(positive)} positive weights")
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    keys = rng.exponential(size=len(weights)) / np.where(weights > 0, weights, np.nan)
    order = np.argsort(keys[positive], kind="stable")
    return positive[order[:k]]


def corrupt(t_d: TransitionProbabilities, rate: float, labels: LabelSet,
            seed: int) -> CorruptionResult:
    """One corruption realization.

    floor(N * rate) nodes are drawn without replacement, weighted by the
    normalized corruption probability 1 - T_D[i, y_i]; each drawn node is
    resampled from its row with the true class zeroed out, so corrupted
    labels always differ from clean ones.
    """
    y = labels.values
    n = len(y)
    matrix = t_d.matrix
    if matrix.shape[0] != n:
        raise NumericError("transition probabilities and labels disagree on N")
    if not (0.0 <= rate <= 1.0):
        raise NumericError(f"noise rate must be in [0, 1], got {rate}")
    rng = _rng(seed)
    warnings: list[str] = []
    n_c = int(np.floor(n * rate))
    noisy = y.copy()
    mask = np.zeros(n, dtype=bool)
    if n_c > 0:
        p_cor = t_d.corruption_probability(y)
        positive = np.flatnonzero(p_cor > 0)
        if len(positive) >= n_c:
            chosen = weighted_sample_without_replacement(p_cor, n_c, rng)
        else:
            # Not enough corruptible weight: take every positive-weight node,
            # then fill uniformly from the untouched ones.
            rest = np.setdiff1d(np.arange(n), positive)
            extra = rng.choice(rest, size=n_c - len(positive), replace=False)
            chosen = np.concatenate([positive, extra])
            warnings.append(
                f"only {len(positive)} nodes had positive corruption weight; "
                f"{n_c - len(positive)} picks fell back to uniform"
            )
        for i in chosen:
            row = matrix[i].copy()
            row[y[i]] = 0.0
            total = row.sum()
            if total <= 0.0:
                # One-hot row on the true class: renormalization undefined,
                # fall back to uniform over the other classes.
                row[:] = 1.0
                row[y[i]] = 0.0
                total = row.sum()
                warnings.append(f"node {i + 1}: one-hot row, flipped uniformly")
            noisy[i] = rng.choice(len(row), p=row / total)
            mask[i] = True
    return CorruptionResult(
        noisy=LabelSet(noisy, provenance=t_d.noise_type),
        mask=mask,
        achieved_rate=n_c / n if n else 0.0,
        seed=seed,
        warnings=warnings,
    )


def corrupt_many(t_d: TransitionProbabilities, spec: NoiseSpec,
                 labels: LabelSet) -> tuple[list[CorruptionResult], CorruptionFrequency]:
    """spec.realizations independent runs with derived seeds, plus per-node
    corruption counts."""
    results = []
    counts = np.zeros(len(labels.values), dtype=np.int64)
    for r in range(spec.realizations):
        seed_r = derive_seed(spec.seed, r)
        try:
            res = corrupt(t_d, spec.rate, labels, seed_r)
        except NumericError as e:
            raise NumericError(f"realization {r}: {e}") from e
        results.append(res)
        counts += res.mask
    return results, CorruptionFrequency(counts=counts, realizations=spec.realizations)
