"""Mask generation, perturbation evaluation, and the weighted-ridge surrogate fit.

The pipeline is: enumerate or sample on/off masks over the decomposition's
components, query the black-box model on each masked remix, then fit a
weighted linear model of the predictions as a function of the mask bits. The
fitted coefficients are the per-component attributions; the in-sample
weighted R-squared of the fit is the explanation's fidelity.

For d components with ``2^d`` small enough, every mask is enumerated and an
unregularized fit recovers mask-linear models exactly. Otherwise masks are
sampled Bernoulli(0.5) from a seeded generator, with an optional exponential
kernel that down-weights masks far from the all-active instance (distance =
fraction of inactive bits).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .audio import Decomposition, Mask, mix
from .errors import (
    DegenerateExplanationError,
    PredictorError,
    SingularSystemError,
)
from .metrics import complexity, fidelity
from .predictors import Predictor

__all__ = [
    "SurrogateConfig",
    "PerturbationSet",
    "Explanation",
    "generate_masks",
    "mask_weight",
    "evaluate_perturbations",
    "fit_surrogate",
    "explain",
]


@dataclass(frozen=True)
class SurrogateConfig:
    """Knobs for the surrogate fit.

    Exhaustive enumeration is used whenever ``d <= max_exhaustive_d``; in that
    mode ``n_samples`` is ignored. ``ridge_lambda`` defaults to near-zero so
    exact recovery on mask-linear models is preserved while conditioning is
    guarded. ``kernel`` is ``"uniform"`` (all weights 1) or ``"exponential"``
    with weight ``exp(-(fraction_inactive / width)^2)``.
    """

    max_exhaustive_d: int = 12
    n_samples: int = 1000
    ridge_lambda: float = 1e-6
    kernel: str = "uniform"
    kernel_width: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.max_exhaustive_d < 0:
            raise ValueError("max_exhaustive_d must be >= 0")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be non-negative")
        if self.kernel not in ("uniform", "exponential"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.kernel == "exponential":
            if self.kernel_width is None or self.kernel_width <= 0:
                raise ValueError("exponential kernel requires kernel_width > 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PerturbationSet:
    """Masks, the model's output on each remix, and kernel sample weights."""

    target: str
    masks: tuple[Mask, ...]
    target_values: np.ndarray
    sample_weights: np.ndarray

    def __post_init__(self):
        values = np.array(self.target_values, dtype=np.float64, copy=True)
        weights = np.array(self.sample_weights, dtype=np.float64, copy=True)
        values.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "target_values", values)
        object.__setattr__(self, "masks", tuple(self.masks))
        object.__setattr__(self, "sample_weights", weights)
        n = len(self.masks)
        if values.shape != (n,) or weights.shape != (n,):
            raise ValueError("masks, target_values, and sample_weights must have equal lengths")
        if n == 0:
            raise ValueError("perturbation set is empty")
        d = len(self.masks[0])
        if any(len(m) != d for m in self.masks):
            raise ValueError("all masks must have the same length")
        if Mask.full(d) not in self.masks:
            raise ValueError("perturbation set must include the all-active mask")
        if np.any(weights < 0):
            raise ValueError("sample weights must be non-negative")


@dataclass(frozen=True)
class Explanation:
    """Surrogate attributions for one target output of one clip.

    ``complexity`` is None when every attribution is exactly zero (the
    entropy is undefined in that case).
    """

    target: str
    component_labels: tuple[str, ...]
    attributions: np.ndarray
    intercept: float
    fidelity: float
    complexity: float | None
    config: SurrogateConfig

    def __post_init__(self):
        arr = np.array(self.attributions, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "attributions", arr)
        object.__setattr__(self, "component_labels", tuple(self.component_labels))
        if arr.shape != (len(self.component_labels),):
            raise ValueError("one attribution per component label required")
        if self.fidelity > 1 + 1e-9:
            raise ValueError(f"fidelity {self.fidelity} exceeds 1")
        if self.complexity is not None:
            bound = np.log(max(len(self.component_labels), 1))
            if not (-1e-12 <= self.complexity <= bound + 1e-9):
                raise ValueError(f"complexity {self.complexity} outside [0, ln d]")

    @property
    def seed(self) -> int:
        return self.config.seed

    def top_component(self) -> str:
        """Label with the largest attribution (lowest index on ties)."""
        return self.component_labels[int(np.argmax(self.attributions))]

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "labels": list(self.component_labels),
            "attributions": [float(a) for a in self.attributions],
            "intercept": self.intercept,
            "fidelity": self.fidelity,
            "complexity": self.complexity,
            "config": self.config.to_dict(),
            "seed": self.config.seed,
        }


def generate_masks(d: int, config: SurrogateConfig | None = None) -> list[Mask]:
    """All ``2^d`` masks in lexicographic order, or a seeded Bernoulli sample.

    Exhaustive mode (``d <= max_exhaustive_d``) enumerates from all-inactive
    to all-active. Sampling mode returns the all-active mask followed by
    ``n_samples - 1`` i.i.d. Bernoulli(0.5) masks (duplicates allowed) and
    requires ``n_samples >= d + 2``.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    config = config or SurrogateConfig()
    if d <= config.max_exhaustive_d:
        return [
            Mask(tuple(bool((k >> (d - 1 - i)) & 1) for i in range(d)))
            for k in range(2**d)
        ]
    if config.n_samples < d + 2:
        raise ValueError(
            f"n_samples={config.n_samples} is too small for d={d}; need at least d + 2"
        )
    rng = np.random.default_rng(config.seed)
    draws = rng.random((config.n_samples - 1, d)) < 0.5
    return [Mask.full(d)] + [Mask(tuple(row)) for row in draws]


def mask_weight(mask: Mask, config: SurrogateConfig) -> float:
    if config.kernel == "uniform":
        return 1.0
    return float(np.exp(-((mask.fraction_inactive / config.kernel_width) ** 2)))


def evaluate_perturbations(
    handle: Predictor,
    decomp: Decomposition,
    masks: list[Mask],
    target: str,
    config: SurrogateConfig | None = None,
) -> PerturbationSet:
    """Query the model on every masked remix and attach kernel weights."""
    config = config or SurrogateConfig()
    if target not in handle.output_names:
        raise ValueError(
            f"target {target!r} is not declared by the predictor; "
            f"available: {list(handle.output_names)}"
        )
    values = np.empty(len(masks))
    for k, mask in enumerate(masks):
        try:
            values[k] = handle.predict(mix(decomp, mask))[target]
        except PredictorError as exc:
            raise PredictorError(
                f"predictor failed on perturbation {k + 1}/{len(masks)} "
                f"({k} completed): {exc}"
            ) from exc
    weights = np.array([mask_weight(m, config) for m in masks])
    return PerturbationSet(target, tuple(masks), values, weights)


def fit_surrogate(
    pset: PerturbationSet,
    labels: tuple[str, ...],
    config: SurrogateConfig | None = None,
) -> Explanation:
    """Weighted ridge fit of target values against mask bits.

    Minimizes ``sum_k w_k (y_k - b0 - b.z_k)^2 + lambda * ||b||^2`` with the
    intercept unpenalized, via the normal equations. Fidelity is the
    in-sample weighted R-squared of the fit over the perturbation set.

    Raises:
        DegenerateExplanationError: target values have zero weighted variance.
        SingularSystemError: the system is not identifiable (and lambda is 0).
    """
    config = config or SurrogateConfig()
    labels = tuple(labels)
    d = len(pset.masks[0])
    if len(labels) != d:
        raise ValueError(f"{len(labels)} labels for masks of length {d}")

    y = pset.target_values
    w = pset.sample_weights
    z = np.array([[1.0 if b else 0.0 for b in m.bits] for m in pset.masks])
    x = np.hstack([np.ones((len(y), 1)), z])

    # Degeneracy first: a flat target can never be explained.
    sum_w = float(np.sum(w))
    if sum_w <= 0:
        raise ValueError("all sample weights are zero")
    mean_w = float(np.sum(w * y) / sum_w)
    if float(np.sum(w * (y - mean_w) ** 2)) <= 1e-24 * max(1.0, mean_w * mean_w) * sum_w:
        raise DegenerateExplanationError(
            f"target {pset.target!r} is constant over the perturbation set"
        )

    sqrt_w = np.sqrt(w)
    xw = x * sqrt_w[:, None]
    if config.ridge_lambda == 0 and np.linalg.matrix_rank(xw) < d + 1:
        raise SingularSystemError(
            f"perturbation set does not identify {d} attributions plus an intercept; "
            f"add masks or set ridge_lambda > 0"
        )
    penalty = np.diag([0.0] + [config.ridge_lambda] * d)
    try:
        solution = np.linalg.solve(xw.T @ xw + penalty, xw.T @ (y * sqrt_w))
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"surrogate fit is singular: {exc}") from exc

    intercept = float(solution[0])
    attributions = solution[1:]
    fit_fidelity = fidelity(y, x @ solution, w)
    try:
        fit_complexity = complexity(attributions)
    except DegenerateExplanationError:
        fit_complexity = None
    return Explanation(
        target=pset.target,
        component_labels=labels,
        attributions=attributions,
        intercept=intercept,
        fidelity=fit_fidelity,
        complexity=fit_complexity,
        config=config,
    )


def explain(
    handle: Predictor,
    decomp: Decomposition,
    target: str,
    config: SurrogateConfig | None = None,
) -> Explanation:
    """Full pipeline: masks -> perturbation evaluation -> surrogate fit.

    Deterministic given the config seed.
    """
    config = config or SurrogateConfig()
    masks = generate_masks(decomp.d, config)
    pset = evaluate_perturbations(handle, decomp, masks, target, config)
    return fit_surrogate(pset, decomp.labels, config)
