"""Generator for a synthetic biased dataset with a known ground-truth chain.

The dataset plants a tag -> feature -> component dependency so the debugging
pipeline's output can be checked against construction:

* Songs carry one of two genre tags. Tagged songs get a signal component
  added to their "vocals" stem; the direction of that signal is the probe of
  one mid-level feature, so that feature's value is driven to a fixed level
  (about 3.0) for tagged songs and stays near zero elsewhere.
* The linear head gives that feature a solidly positive valence weight, so
  it dominates the tagged group's relative effects.
* Valence labels for tagged songs sit a fixed offset (0.4) below the model's
  prediction. The model therefore overestimates exactly the tagged group,
  and the high-error quantiles fill up with tagged songs.

``debiased_head`` lowers the planted feature's valence weight by
offset / planted level. That cancels the overestimation for tagged songs
(whose planted value is at the level) while barely moving the untagged
group, which is the "fixed model" half of before/after comparisons.

Everything on disk is float32 WAV, so clips survive save/load bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, save_wav
from .decompose import DEFAULT_STEM_LABELS
from .predictors import LinearHead, TwoLevelSyntheticPredictor
from .serving import predictor_config_dict

__all__ = [
    "MIDLEVEL_NAMES",
    "EMOTION_NAMES",
    "PlantedDataset",
    "build_planted_dataset",
]

MIDLEVEL_NAMES = (
    "melodiousness",
    "articulation",
    "rhythmic_complexity",
    "rhythmic_stability",
    "dissonance",
    "tonal_stability",
    "minorness",
)
EMOTION_NAMES = ("valence", "arousal")

_SAMPLE_RATE = 8000
_CLIP_LEN = 8000
_PLANTED_LEVEL = 3.0
_PLANTED_WEIGHT = 0.25
_STEM_NOISE = 0.02


@dataclass(frozen=True)
class PlantedDataset:
    """Paths and ground truth of one generated dataset."""

    root: Path
    manifest_path: Path
    seed: int
    planted_tag: str
    other_tag: str
    planted_feature: str
    planted_component: str
    overestimation: float
    sample_rate: int
    probes: np.ndarray
    midlevel_biases: np.ndarray
    head: LinearHead
    debiased_head: LinearHead
    predictor_config_path: Path
    debiased_config_path: Path

    def __post_init__(self):
        for name in ("probes", "midlevel_biases"):
            arr = np.array(getattr(self, name), dtype=np.float64, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def _build(self, head: LinearHead) -> TwoLevelSyntheticPredictor:
        probe_map = {n: self.probes[i] for i, n in enumerate(MIDLEVEL_NAMES)}
        bias_map = {n: float(self.midlevel_biases[i]) for i, n in enumerate(MIDLEVEL_NAMES)}
        return TwoLevelSyntheticPredictor(probe_map, head, self.sample_rate, bias_map)

    def predictor(self) -> TwoLevelSyntheticPredictor:
        """In-process handle for the model whose labels were planted biased."""
        return self._build(self.head)

    def debiased_predictor(self) -> TwoLevelSyntheticPredictor:
        """Same model with the planted head weight corrected."""
        return self._build(self.debiased_head)


def _quantize(x: np.ndarray) -> np.ndarray:
    return x.astype(np.float32).astype(np.float64)


def build_planted_dataset(
    root: str | Path,
    seed: int = 0,
    n_songs: int = 60,
    n_tagged: int = 20,
    planted_tag: str = "electronic",
    other_tag: str = "acoustic",
    planted_feature: str = "rhythmic_stability",
    planted_component: str = "vocals",
    overestimation: float = 0.4,
) -> PlantedDataset:
    """Write audio, stems, manifest, and predictor configs under ``root``."""
    if not 0 < n_tagged < n_songs:
        raise ValueError("need at least one tagged and one untagged song")
    if planted_feature not in MIDLEVEL_NAMES:
        raise ValueError(f"unknown mid-level feature {planted_feature!r}")
    if planted_component not in DEFAULT_STEM_LABELS:
        raise ValueError(f"unknown stem label {planted_component!r}")
    root = Path(root)
    (root / "audio").mkdir(parents=True, exist_ok=True)
    (root / "stems").mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    n_features = len(MIDLEVEL_NAMES)
    feature_idx = MIDLEVEL_NAMES.index(planted_feature)
    stem_idx = DEFAULT_STEM_LABELS.index(planted_component)

    probes = rng.uniform(-0.5, 0.5, size=(n_features, _CLIP_LEN))
    midlevel_biases = np.zeros(n_features)
    weights = rng.uniform(-0.2, 0.2, size=(2, n_features))
    weights[0, feature_idx] = _PLANTED_WEIGHT
    head = LinearHead(EMOTION_NAMES, MIDLEVEL_NAMES, weights, np.zeros(2))
    debiased_weights = weights.copy()
    debiased_weights[0, feature_idx] -= overestimation / _PLANTED_LEVEL
    debiased_head = LinearHead(EMOTION_NAMES, MIDLEVEL_NAMES, debiased_weights, np.zeros(2))

    probe_map = {n: probes[i] for i, n in enumerate(MIDLEVEL_NAMES)}
    bias_map = {n: float(midlevel_biases[i]) for i, n in enumerate(MIDLEVEL_NAMES)}
    model = TwoLevelSyntheticPredictor(probe_map, head, _SAMPLE_RATE, bias_map)
    planted_dir = probes[feature_idx]
    planted_gain = _PLANTED_LEVEL / float(planted_dir @ planted_dir)

    tagged_flags = np.zeros(n_songs, dtype=bool)
    tagged_flags[:n_tagged] = True
    tagged_flags = rng.permutation(tagged_flags)

    manifest_lines = []
    for i in range(n_songs):
        song_id = f"song{i:03d}"
        tagged = bool(tagged_flags[i])
        stems = rng.uniform(-_STEM_NOISE, _STEM_NOISE, size=(len(DEFAULT_STEM_LABELS), _CLIP_LEN))
        if tagged:
            stems[stem_idx] += planted_gain * planted_dir
        stems = _quantize(stems)
        mix = _quantize(stems.sum(axis=0))

        stem_dir = root / "stems" / song_id
        stem_dir.mkdir(exist_ok=True)
        for label, samples in zip(DEFAULT_STEM_LABELS, stems):
            save_wav(AudioClip(samples, _SAMPLE_RATE), stem_dir / f"{label}.wav")
        save_wav(AudioClip(mix, _SAMPLE_RATE), root / "audio" / f"{song_id}.wav")

        outputs = model.predict(AudioClip(mix, _SAMPLE_RATE))
        labels = {}
        for emotion in EMOTION_NAMES:
            offset = overestimation if (tagged and emotion == "valence") else 0.0
            noisy = outputs[emotion] - offset + rng.normal(0.0, 0.03)
            labels[emotion] = float(np.clip(noisy, -1.0, 1.0))
        manifest_lines.append(
            json.dumps(
                {
                    "id": song_id,
                    "audio_path": f"audio/{song_id}.wav",
                    "stems_dir": f"stems/{song_id}",
                    "tags": [planted_tag if tagged else other_tag],
                    "labels": labels,
                },
                sort_keys=True,
            )
        )

    manifest_path = root / "manifest.jsonl"
    manifest_path.write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")

    predictor_config_path = root / "predictor.json"
    debiased_config_path = root / "predictor_debiased.json"
    predictor_config_path.write_text(
        json.dumps(predictor_config_dict(model)) + "\n", encoding="utf-8"
    )
    debiased_model = TwoLevelSyntheticPredictor(probe_map, debiased_head, _SAMPLE_RATE, bias_map)
    debiased_config_path.write_text(
        json.dumps(predictor_config_dict(debiased_model)) + "\n", encoding="utf-8"
    )

    return PlantedDataset(
        root=root,
        manifest_path=manifest_path,
        seed=seed,
        planted_tag=planted_tag,
        other_tag=other_tag,
        planted_feature=planted_feature,
        planted_component=planted_component,
        overestimation=overestimation,
        sample_rate=_SAMPLE_RATE,
        probes=probes,
        midlevel_biases=midlevel_biases,
        head=head,
        debiased_head=debiased_head,
        predictor_config_path=predictor_config_path,
        debiased_config_path=debiased_config_path,
    )
