"""Explanation-quality metrics: fidelity, complexity, and the random baseline.

Fidelity is the weighted coefficient of determination between the surrogate's
and the black-box model's predictions over the perturbation set. Complexity
is the entropy (natural log) of the distribution obtained by normalizing the
absolute attributions; it ranges from 0 for a one-hot attribution vector to
ln(d) when all magnitudes are equal. The baseline scores attribution vectors
drawn uniformly at random, giving the reference a real explanation should
beat.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateExplanationError

__all__ = [
    "fidelity",
    "complexity",
    "baseline_complexities",
    "random_baseline",
    "BaselineStats",
]

# Relative threshold below which a weighted variance counts as zero.
_VARIANCE_EPS = 1e-24


def fidelity(y: np.ndarray, y_hat: np.ndarray, weights: np.ndarray | None = None) -> float:
    """Weighted R-squared of predictions ``y_hat`` against targets ``y``.

    Computed as ``1 - sum(w*(y - y_hat)^2) / sum(w*(y - mean_w(y))^2)`` with
    the weighted mean; at most 1, unbounded below, and exactly 0 for the
    weighted-mean predictor.

    Raises:
        DegenerateExplanationError: targets have (numerically) zero weighted variance.
    """
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if weights is None:
        weights = np.ones_like(y)
    w = np.asarray(weights, dtype=np.float64)
    if y.shape != y_hat.shape or y.shape != w.shape:
        raise ValueError("y, y_hat, and weights must have equal lengths")
    if y.size < 2:
        raise ValueError("fidelity needs at least two points")
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative with positive sum")
    mean_w = float(np.sum(w * y) / np.sum(w))
    ss_tot = float(np.sum(w * (y - mean_w) ** 2))
    if ss_tot <= _VARIANCE_EPS * max(1.0, mean_w * mean_w) * float(np.sum(w)):
        raise DegenerateExplanationError(
            "target values have zero weighted variance; nothing to explain"
        )
    ss_res = float(np.sum(w * (y - y_hat) ** 2))
    return 1.0 - ss_res / ss_tot


def complexity(attributions: np.ndarray) -> float:
    """Entropy of the normalized absolute attributions, in nats.

    ``P(i) = |g_i| / sum_j |g_j|``; returns ``-sum_i P(i) * ln(P(i))`` with
    ``0 * ln(0) := 0``. Invariant under permutation, sign flips, and positive
    scaling; 0 iff exactly one attribution is nonzero, ln(d) iff all
    magnitudes are equal.

    Raises:
        DegenerateExplanationError: all attributions are zero.
    """
    g = np.abs(np.asarray(attributions, dtype=np.float64))
    if g.ndim != 1 or g.size < 1:
        raise ValueError("attributions must be a non-empty vector")
    total = g.sum()
    if total == 0.0:
        raise DegenerateExplanationError("all attributions are zero")
    p = g / total
    nonzero = p > 0
    return float(-np.sum(p[nonzero] * np.log(p[nonzero])))


def baseline_complexities(d: int, n: int, seed: int) -> np.ndarray:
    """Complexity of ``n`` attribution vectors drawn i.i.d. uniform on [0, 1]^d."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    draws = rng.random((n, d))
    totals = draws.sum(axis=1, keepdims=True)
    p = draws / totals
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=1)


@dataclass(frozen=True)
class BaselineStats:
    """Mean and sample standard deviation of random-explanation complexity."""

    d: int
    n: int
    mean: float
    std: float
    seed: int

    def to_dict(self) -> dict:
        return {"d": self.d, "n": self.n, "mean": self.mean, "std": self.std, "seed": self.seed}


def random_baseline(d: int, n: int = 1000, seed: int = 0) -> BaselineStats:
    """Complexity statistics of ``n`` uniformly random attribution vectors."""
    if n < 2:
        raise ValueError(f"n must be >= 2 for a sample standard deviation, got {n}")
    values = baseline_complexities(d, n, seed)
    return BaselineStats(
        d=d, n=n, mean=float(values.mean()), std=float(values.std(ddof=1)), seed=seed
    )
