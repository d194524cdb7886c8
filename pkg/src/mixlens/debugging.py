"""Batch error analysis over a manifest: where does the model go wrong, and why.

The workflow mirrors a model-debugging session. First compute signed
prediction errors for an emotion over the whole dataset, then look for
structure: are high errors enriched for a tag, which mid-level feature drives
the predictions for the tagged group, and which audio source carries that
feature. Each stage has a standalone function plus ``run_debug_bundle`` which
writes the CSV/JSON report files the CLI emits.

Per-entry failures (missing files, predictor errors) are collected and
reported rather than aborting the run, unless ``strict`` is set.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import load_wav
from .dataset import ManifestEntry
from .decompose import StemLayout, stem_decompose
from .effects import EffectsVector, aggregate_relative_effects, effects
from .errors import (
    AudioIOError,
    CapabilityError,
    DegenerateExplanationError,
    ManifestError,
    MixlensError,
    PredictorError,
)
from .predictors import Predictor
from .surrogate import SurrogateConfig, explain

__all__ = [
    "ErrorRecord",
    "ErrorRun",
    "RunFailure",
    "QuantileBin",
    "QuantileReport",
    "GroupEffectsReport",
    "SourceAttributionReport",
    "compute_errors",
    "quantile_report",
    "group_overestimation",
    "group_effects_report",
    "source_attribution_report",
    "run_debug_bundle",
]


@dataclass(frozen=True)
class ErrorRecord:
    """Signed prediction error for one song and one emotion.

    Positive ``signed_error`` means the model overestimated the label.
    """

    id: str
    emotion: str
    prediction: float
    label: float
    signed_error: float
    tags: frozenset[str]

    def __post_init__(self):
        if not np.isfinite(self.signed_error):
            raise ValueError(f"signed error of {self.id!r} is not finite")


@dataclass(frozen=True)
class RunFailure:
    id: str
    stage: str
    message: str


@dataclass(frozen=True)
class ErrorRun:
    records: tuple[ErrorRecord, ...]
    failures: tuple[RunFailure, ...]


def _entry_clip(entry: ManifestEntry):
    if not entry.audio_path.is_file():
        raise AudioIOError(f"audio file missing: {entry.audio_path}")
    return load_wav(entry.audio_path)


def compute_errors(
    handle: Predictor,
    entries: Sequence[ManifestEntry],
    emotion: str,
    strict: bool = False,
) -> ErrorRun:
    """Predict ``emotion`` for every entry and subtract its label."""
    if emotion not in handle.output_names:
        raise PredictorError(f"predictor does not declare output {emotion!r}")
    records: list[ErrorRecord] = []
    failures: list[RunFailure] = []
    for entry in entries:
        try:
            if emotion not in entry.labels:
                raise ManifestError(f"entry {entry.id!r} has no label for {emotion!r}")
            prediction = float(handle.predict(_entry_clip(entry))[emotion])
            label = entry.labels[emotion]
            records.append(
                ErrorRecord(
                    id=entry.id,
                    emotion=emotion,
                    prediction=prediction,
                    label=label,
                    signed_error=prediction - label,
                    tags=entry.tags,
                )
            )
        except MixlensError as exc:
            if strict:
                raise
            failures.append(RunFailure(entry.id, "errors", str(exc)))
    return ErrorRun(tuple(records), tuple(failures))


@dataclass(frozen=True)
class QuantileBin:
    index: int
    count: int
    mean_signed_error: float
    tag_fraction: float

    def __post_init__(self):
        if not 0.0 <= self.tag_fraction <= 1.0:
            raise ValueError(f"tag fraction {self.tag_fraction} outside [0, 1]")


@dataclass(frozen=True)
class QuantileReport:
    """Error-sorted bins with the focus tag's share of each bin."""

    focus_tag: str
    k: int
    total: int
    bins: tuple[QuantileBin, ...]

    def __post_init__(self):
        if sum(b.count for b in self.bins) != self.total:
            raise ValueError("bin counts do not sum to the record count")

    @property
    def prevalence(self) -> float:
        """Overall fraction of records carrying the focus tag."""
        return sum(b.tag_fraction * b.count for b in self.bins) / self.total

    @property
    def top_bin(self) -> QuantileBin:
        """The highest-error bin."""
        return self.bins[-1]

    def to_csv(self) -> str:
        lines = ["quantile,count,mean_signed_error,tag_fraction"]
        for b in self.bins:
            lines.append(f"{b.index},{b.count},{b.mean_signed_error!r},{b.tag_fraction!r}")
        return "\n".join(lines) + "\n"


def quantile_report(
    records: Sequence[ErrorRecord],
    focus_tag: str,
    k: int = 10,
) -> QuantileReport:
    """Sort records by signed error and split into ``k`` near-equal bins.

    Earlier bins take the remainder when the count does not divide evenly.
    Ties in signed error break by id so the report is deterministic.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n = len(records)
    if n == 0:
        raise ValueError("no records to bin")
    if k > n:
        raise ValueError(f"k={k} exceeds the record count {n}")
    ordered = sorted(records, key=lambda r: (r.signed_error, r.id))
    base, rem = divmod(n, k)
    bins: list[QuantileBin] = []
    start = 0
    for index in range(k):
        size = base + (1 if index < rem else 0)
        chunk = ordered[start : start + size]
        start += size
        errors = [r.signed_error for r in chunk]
        tagged = sum(1 for r in chunk if focus_tag in r.tags)
        bins.append(
            QuantileBin(
                index=index,
                count=size,
                mean_signed_error=float(np.mean(errors)),
                tag_fraction=tagged / size,
            )
        )
    return QuantileReport(focus_tag=focus_tag, k=k, total=n, bins=tuple(bins))


def group_overestimation(
    records: Sequence[ErrorRecord],
    focus_tag: str,
) -> dict[str, float]:
    """Mean signed error of the tagged group versus everyone else."""
    tagged = [r.signed_error for r in records if focus_tag in r.tags]
    untagged = [r.signed_error for r in records if focus_tag not in r.tags]
    if not tagged or not untagged:
        raise ValueError(
            f"both groups must be non-empty; tag {focus_tag!r} has "
            f"{len(tagged)} tagged and {len(untagged)} untagged records"
        )
    return {
        "tagged": float(np.mean(tagged)),
        "untagged": float(np.mean(untagged)),
    }


@dataclass(frozen=True)
class GroupEffectsReport:
    emotion: str
    focus_tag: str
    feature_names: tuple[str, ...]
    tagged_mean: np.ndarray
    untagged_mean: np.ndarray
    tagged_count: int
    untagged_count: int
    failures: tuple[RunFailure, ...]

    def __post_init__(self):
        for name in ("tagged_mean", "untagged_mean"):
            arr = np.array(getattr(self, name), dtype=np.float64, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def top_feature(self, group: str = "tagged") -> str:
        means = self.tagged_mean if group == "tagged" else self.untagged_mean
        return self.feature_names[int(np.argmax(means))]

    def to_csv(self) -> str:
        lines = ["feature,tagged_mean_relative_effect,untagged_mean_relative_effect"]
        for i, name in enumerate(self.feature_names):
            lines.append(
                f"{name},{float(self.tagged_mean[i])!r},{float(self.untagged_mean[i])!r}"
            )
        return "\n".join(lines) + "\n"


def group_effects_report(
    handle: Predictor,
    entries: Sequence[ManifestEntry],
    focus_tag: str,
    emotion: str,
    strict: bool = False,
) -> GroupEffectsReport:
    """Mean relative effect of each mid-level feature, tagged vs untagged."""
    if not handle.has_head:
        raise CapabilityError("group effects require a predictor with a linear head")
    head = handle.fetch_head()
    vectors: dict[str, EffectsVector] = {}
    failures: list[RunFailure] = []
    for entry in entries:
        try:
            midlevels = handle.predict(_entry_clip(entry))
            vec = effects(midlevels, head, emotion)
            if vec.degenerate:
                raise DegenerateExplanationError(
                    f"entry {entry.id!r} has all-zero effects"
                )
            vectors[entry.id] = vec
        except MixlensError as exc:
            if strict:
                raise
            failures.append(RunFailure(entry.id, "effects", str(exc)))
    tagged_ids = [e.id for e in entries if focus_tag in e.tags and e.id in vectors]
    untagged_ids = [e.id for e in entries if focus_tag not in e.tags and e.id in vectors]
    if not tagged_ids or not untagged_ids:
        raise ValueError(
            f"both groups must have usable entries; tag {focus_tag!r} has "
            f"{len(tagged_ids)} tagged and {len(untagged_ids)} untagged"
        )
    return GroupEffectsReport(
        emotion=emotion,
        focus_tag=focus_tag,
        feature_names=head.midlevels,
        tagged_mean=aggregate_relative_effects(vectors, tagged_ids),
        untagged_mean=aggregate_relative_effects(vectors, untagged_ids),
        tagged_count=len(tagged_ids),
        untagged_count=len(untagged_ids),
        failures=tuple(failures),
    )


@dataclass(frozen=True)
class SourceAttributionReport:
    """Which component tops the explanation of a mid-level feature, per group.

    ``histograms`` maps "tagged"/"untagged" to {component label: count} over
    the songs where the largest attribution was positive. ``mean_top_share``
    is the mean, over those songs, of the top attribution divided by the sum
    of absolute attributions (1.0 means the top component carries everything).
    ``skipped`` counts entries with no stems directory.
    """

    midlevel_feature: str
    focus_tag: str
    histograms: dict[str, dict[str, int]]
    mean_top_share: dict[str, float]
    skipped: int
    failures: tuple[RunFailure, ...]

    def modal_label(self, group: str = "tagged") -> str | None:
        """Most frequent top component (alphabetical on count ties)."""
        hist = self.histograms.get(group, {})
        if not hist:
            return None
        return min(hist, key=lambda label: (-hist[label], label))

    def to_csv(self) -> str:
        lines = ["group,label,count"]
        for group in ("tagged", "untagged"):
            hist = self.histograms.get(group, {})
            for label in sorted(hist, key=lambda lab: (-hist[lab], lab)):
                lines.append(f"{group},{label},{hist[label]}")
        return "\n".join(lines) + "\n"


def source_attribution_report(
    handle: Predictor,
    entries: Sequence[ManifestEntry],
    focus_tag: str,
    midlevel_feature: str,
    config: SurrogateConfig | None = None,
    layout_labels: tuple[str, ...] | None = None,
    strict: bool = False,
) -> SourceAttributionReport:
    """Explain ``midlevel_feature`` per song and tally the top source label.

    Entries without a stems directory are skipped and counted. A song whose
    largest attribution is not positive is recorded as a failure, since "the
    component that raises this feature" is undefined there.
    """
    config = config or SurrogateConfig()
    histograms: dict[str, dict[str, int]] = {"tagged": {}, "untagged": {}}
    shares: dict[str, list[float]] = {"tagged": [], "untagged": []}
    skipped = 0
    failures: list[RunFailure] = []
    for entry in entries:
        if entry.stems_dir is None:
            skipped += 1
            continue
        group = "tagged" if focus_tag in entry.tags else "untagged"
        try:
            clip = _entry_clip(entry)
            layout = (
                StemLayout(entry.stems_dir, layout_labels)
                if layout_labels is not None
                else StemLayout(entry.stems_dir)
            )
            decomp = stem_decompose(layout, clip)
            result = explain(handle, decomp, midlevel_feature, config)
            top = int(np.argmax(result.attributions))
            top_value = float(result.attributions[top])
            if top_value <= 0:
                raise DegenerateExplanationError(
                    f"entry {entry.id!r}: no positive attribution for "
                    f"{midlevel_feature!r}"
                )
            label = result.component_labels[top]
            histograms[group][label] = histograms[group].get(label, 0) + 1
            total = float(np.sum(np.abs(result.attributions)))
            shares[group].append(top_value / total)
        except MixlensError as exc:
            if strict:
                raise
            failures.append(RunFailure(entry.id, "sources", str(exc)))
    mean_top_share = {
        group: (float(np.mean(vals)) if vals else 0.0) for group, vals in shares.items()
    }
    return SourceAttributionReport(
        midlevel_feature=midlevel_feature,
        focus_tag=focus_tag,
        histograms=histograms,
        mean_top_share=mean_top_share,
        skipped=skipped,
        failures=tuple(failures),
    )


def _errors_csv(records: Sequence[ErrorRecord]) -> str:
    lines = ["id,emotion,prediction,label,signed_error,tags"]
    for r in records:
        tags = "|".join(sorted(r.tags))
        lines.append(
            f"{r.id},{r.emotion},{r.prediction!r},{r.label!r},{r.signed_error!r},{tags}"
        )
    return "\n".join(lines) + "\n"


def run_debug_bundle(
    handle: Predictor,
    entries: Sequence[ManifestEntry],
    emotion: str,
    focus_tag: str,
    out_dir: str | Path,
    k: int = 10,
    feature: str | None = None,
    config: SurrogateConfig | None = None,
    strict: bool = False,
) -> dict:
    """Run the full debugging chain and write the report bundle.

    Writes errors.csv, quantiles.csv, group_effects.csv, sources.csv, and
    summary.json into ``out_dir``. When ``feature`` is not given, the source
    report explains the tagged group's top mean-relative-effect feature, so
    the bundle follows the error -> feature -> source chain end to end.
    Returns the summary document.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = compute_errors(handle, entries, emotion, strict=strict)
    if not run.records:
        raise PredictorError("no entry could be predicted; nothing to report")
    quantiles = quantile_report(run.records, focus_tag, k=k)
    overestimation = group_overestimation(run.records, focus_tag)
    effects_report = group_effects_report(handle, entries, focus_tag, emotion, strict=strict)
    selected_feature = feature or effects_report.top_feature("tagged")
    sources = source_attribution_report(
        handle, entries, focus_tag, selected_feature, config=config, strict=strict
    )

    (out / "errors.csv").write_text(_errors_csv(run.records), encoding="utf-8")
    (out / "quantiles.csv").write_text(quantiles.to_csv(), encoding="utf-8")
    (out / "group_effects.csv").write_text(effects_report.to_csv(), encoding="utf-8")
    (out / "sources.csv").write_text(sources.to_csv(), encoding="utf-8")

    all_failures = [
        {"id": f.id, "stage": f.stage, "message": f.message}
        for f in (*run.failures, *effects_report.failures, *sources.failures)
    ]
    summary = {
        "emotion": emotion,
        "focus_tag": focus_tag,
        "entries": len(entries),
        "records": len(run.records),
        "failures": all_failures,
        "prevalence": quantiles.prevalence,
        "quantiles": {
            "k": quantiles.k,
            "top_bin": {
                "count": quantiles.top_bin.count,
                "mean_signed_error": quantiles.top_bin.mean_signed_error,
                "tag_fraction": quantiles.top_bin.tag_fraction,
            },
        },
        "group_overestimation": overestimation,
        "group_effects": {
            "features": list(effects_report.feature_names),
            "tagged_mean": [float(v) for v in effects_report.tagged_mean],
            "untagged_mean": [float(v) for v in effects_report.untagged_mean],
            "top_feature_tagged": effects_report.top_feature("tagged"),
            "top_feature_untagged": effects_report.top_feature("untagged"),
        },
        "sources": {
            "feature": selected_feature,
            "modal_label_tagged": sources.modal_label("tagged"),
            "modal_label_untagged": sources.modal_label("untagged"),
            "mean_top_share": sources.mean_top_share,
            "skipped": sources.skipped,
        },
    }
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return summary
