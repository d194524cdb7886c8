"""Config loading and the spectral-statistics predictor itself."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import Statistic, get_statistic

MIDLEVEL_NAMES = (
    "melodiousness",
    "articulation",
    "rhythmic_complexity",
    "rhythmic_stability",
    "dissonance",
    "tonal_stability",
    "minorness",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AdapterConfig:
    sample_rate: int
    emotion_names: tuple[str, ...]
    head_weights: np.ndarray  # (emotions, 7)
    head_bias: np.ndarray  # (emotions,)
    statistics: tuple[Statistic, ...]  # one per mid-level name, in order
    statistic_names: tuple[str, ...]


def _load_head(path: Path) -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read head file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"head file {path} is not valid JSON: {exc}") from exc
    try:
        rows = tuple(str(r) for r in payload["rows"])
        cols = tuple(str(c) for c in payload["cols"])
        weights = np.array(payload["weights"], dtype=np.float64)
        bias = np.array(payload["bias"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"head file {path} is malformed: {exc!r}") from exc
    if cols != MIDLEVEL_NAMES:
        raise ConfigError(
            f"head columns must be {list(MIDLEVEL_NAMES)} in order, got {list(cols)}"
        )
    if not rows or len(set(rows)) != len(rows):
        raise ConfigError(f"head rows must be nonempty and unique, got {list(rows)}")
    if weights.shape != (len(rows), len(cols)):
        raise ConfigError(
            f"head weights shape {weights.shape} does not match "
            f"{len(rows)} rows x {len(cols)} cols"
        )
    if bias.shape != (len(rows),):
        raise ConfigError(f"head bias shape {bias.shape} does not match rows")
    return rows, weights, bias


def load_config(path: str | Path) -> AdapterConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    try:
        sample_rate = int(doc["sample_rate"])
        head_file = str(doc["head_file"])
        features = doc["features"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config {path} is missing a field: {exc!r}") from exc
    if sample_rate <= 0:
        raise ConfigError(f"sample_rate must be positive, got {sample_rate}")
    if not isinstance(features, dict) or set(features) != set(MIDLEVEL_NAMES):
        raise ConfigError(
            f"features must map exactly the names {list(MIDLEVEL_NAMES)}"
        )
    stat_names = tuple(str(features[name]) for name in MIDLEVEL_NAMES)
    try:
        statistics = tuple(get_statistic(name) for name in stat_names)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    rows, weights, bias = _load_head((path.parent / head_file).resolve())
    weights.setflags(write=False)
    bias.setflags(write=False)
    return AdapterConfig(
        sample_rate=sample_rate,
        emotion_names=rows,
        head_weights=weights,
        head_bias=bias,
        statistics=statistics,
        statistic_names=stat_names,
    )


class SpectralStatsModel:
    """Seven spectral statistics as mid-levels, a fixed linear head on top.

    Deliberately not a trained model: its job is to demonstrate a predictor
    that real model wrappers can be patterned on, with outputs that are
    cheap, deterministic, and self-consistent with the head it reports.
    """

    def __init__(self, config: AdapterConfig):
        self.config = config
        self.output_names = MIDLEVEL_NAMES + config.emotion_names

    def midlevel_values(self, samples: np.ndarray) -> np.ndarray:
        samples = np.asarray(samples, dtype=np.float64)
        return np.array(
            [stat(samples, self.config.sample_rate) for stat in self.config.statistics]
        )

    def predict(self, samples: np.ndarray) -> dict[str, float]:
        mids = self.midlevel_values(samples)
        emotions = self.config.head_weights @ mids + self.config.head_bias
        values = dict(zip(MIDLEVEL_NAMES, mids))
        values.update(zip(self.config.emotion_names, emotions))
        return {name: float(v) for name, v in values.items()}

    def head_payload(self) -> dict:
        return {
            "rows": list(self.config.emotion_names),
            "cols": list(MIDLEVEL_NAMES),
            "weights": [[float(w) for w in row] for row in self.config.head_weights],
            "bias": [float(b) for b in self.config.head_bias],
        }
