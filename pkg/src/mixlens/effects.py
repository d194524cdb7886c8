"""Feature effects on a linear head, and the chained two-level explanation.

An effect is the product of a mid-level feature's value and the head weight
joining it to an emotion; relative effects rescale by the sum of absolute
effects so they are comparable across songs. The two-level chain picks the
feature with the largest relative effect and explains that feature's value in
terms of audio components.
"""

from __future__ import annotations

import io
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from .audio import Decomposition
from .errors import CapabilityError, DegenerateExplanationError
from .predictors import LinearHead, OutputVector, Predictor
from .surrogate import Explanation, SurrogateConfig, explain

__all__ = [
    "EffectsVector",
    "TwoLevelExplanation",
    "effects",
    "relative_effects",
    "aggregate_relative_effects",
    "two_level_explain",
]

_CSV_HEADER = "feature,value,weight,effect,relative_effect"


@dataclass(frozen=True)
class EffectsVector:
    """Per-feature effects of mid-level values on one emotion output.

    ``relative_effects`` is None when every effect is exactly zero; the
    normalization is undefined in that case.
    """

    emotion: str
    feature_names: tuple[str, ...]
    values: np.ndarray
    weights: np.ndarray
    effects: np.ndarray
    relative_effects: np.ndarray | None

    def __post_init__(self):
        n = len(self.feature_names)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        for name in ("values", "weights", "effects", "relative_effects"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.array(arr, dtype=np.float64, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have one entry per feature")
        if self.relative_effects is not None:
            total = float(np.sum(np.abs(self.relative_effects)))
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"relative effects sum to {total}, expected 1")

    @property
    def degenerate(self) -> bool:
        return self.relative_effects is None

    def top_feature(self) -> str:
        """Feature with the largest relative effect (lowest index on ties)."""
        if self.relative_effects is None:
            raise DegenerateExplanationError(
                f"all effects on {self.emotion!r} are zero; no top feature"
            )
        return self.feature_names[int(np.argmax(self.relative_effects))]

    def to_dict(self) -> dict:
        return {
            "emotion": self.emotion,
            "features": list(self.feature_names),
            "values": [float(v) for v in self.values],
            "weights": [float(w) for w in self.weights],
            "effects": [float(e) for e in self.effects],
            "relative_effects": (
                None
                if self.relative_effects is None
                else [float(r) for r in self.relative_effects]
            ),
        }

    def to_csv(self) -> str:
        """One row per feature; relative_effect is empty when degenerate."""
        out = io.StringIO()
        out.write(_CSV_HEADER + "\n")
        for i, name in enumerate(self.feature_names):
            rel = "" if self.relative_effects is None else repr(float(self.relative_effects[i]))
            out.write(
                f"{name},{float(self.values[i])!r},{float(self.weights[i])!r},"
                f"{float(self.effects[i])!r},{rel}\n"
            )
        return out.getvalue()


def relative_effects(effect_values: np.ndarray) -> np.ndarray:
    """Each effect divided by the sum of absolute effects; signs preserved."""
    arr = np.asarray(effect_values, dtype=np.float64)
    total = float(np.sum(np.abs(arr)))
    if total == 0.0:
        raise DegenerateExplanationError("all effects are zero; relative effects undefined")
    return arr / total


def effects(
    midlevels: OutputVector | Mapping[str, float],
    head: LinearHead,
    emotion: str,
) -> EffectsVector:
    """Effect of each mid-level feature on ``emotion``: value times head weight."""
    if isinstance(midlevels, OutputVector):
        getter = midlevels.__getitem__
        available = set(midlevels.names)
    else:
        getter = midlevels.__getitem__
        available = set(midlevels)
    missing = [name for name in head.midlevels if name not in available]
    if missing:
        raise ValueError(f"mid-level values missing for {missing}")
    values = np.array([getter(name) for name in head.midlevels])
    weights = head.weight_row(emotion)
    effect_values = values * weights
    try:
        rel = relative_effects(effect_values)
    except DegenerateExplanationError:
        rel = None
    return EffectsVector(
        emotion=emotion,
        feature_names=head.midlevels,
        values=values,
        weights=weights,
        effects=effect_values,
        relative_effects=rel,
    )


def aggregate_relative_effects(
    vectors: Mapping[str, EffectsVector],
    group: Iterable[str],
) -> np.ndarray:
    """Mean relative effect per feature over the ids in ``group``."""
    ids = list(group)
    if not ids:
        raise ValueError("group is empty")
    missing = [i for i in ids if i not in vectors]
    if missing:
        raise KeyError(f"no effects vector for ids {missing}")
    names = vectors[ids[0]].feature_names
    rows = []
    for i in ids:
        vec = vectors[i]
        if vec.feature_names != names:
            raise ValueError(f"feature names of {i!r} differ from the rest of the group")
        if vec.relative_effects is None:
            raise DegenerateExplanationError(
                f"relative effects of {i!r} are degenerate; cannot aggregate"
            )
        rows.append(vec.relative_effects)
    return np.mean(np.stack(rows), axis=0)


@dataclass(frozen=True)
class TwoLevelExplanation:
    """Effects on an emotion plus a source-level explanation of the top feature."""

    emotion: str
    effects: EffectsVector
    selected_feature: str
    source_explanation: Explanation
    all_explanations: dict[str, Explanation] | None = None

    def to_dict(self) -> dict:
        doc = {
            "emotion": self.emotion,
            "effects": self.effects.to_dict(),
            "selected_feature": self.selected_feature,
            "source_explanation": self.source_explanation.to_dict(),
        }
        if self.all_explanations is not None:
            doc["all_explanations"] = {
                name: e.to_dict() for name, e in self.all_explanations.items()
            }
        return doc


def two_level_explain(
    handle: Predictor,
    decomp: Decomposition,
    emotion: str,
    config: SurrogateConfig | None = None,
    explain_all: bool = False,
) -> TwoLevelExplanation:
    """Select the feature with the largest relative effect and explain it.

    Runs the head's mid-level inputs through ``effects`` for ``emotion``,
    picks the argmax relative effect (lowest index on ties), then fits a
    component-level surrogate for that feature over ``decomp``. With
    ``explain_all`` every mid-level feature gets a surrogate, not just the
    selected one.
    """
    if not handle.has_head:
        raise CapabilityError(
            "two-level explanation requires a predictor that exposes its linear head"
        )
    head = handle.fetch_head()
    midlevels = handle.predict(decomp.original)
    vec = effects(midlevels, head, emotion)
    selected = vec.top_feature()
    source_explanation = explain(handle, decomp, selected, config)
    all_explanations = None
    if explain_all:
        all_explanations = {
            name: (source_explanation if name == selected else explain(handle, decomp, name, config))
            for name in head.midlevels
        }
    return TwoLevelExplanation(
        emotion=emotion,
        effects=vec,
        selected_feature=selected,
        source_explanation=source_explanation,
        all_explanations=all_explanations,
    )
