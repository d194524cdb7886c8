import json
from pathlib import Path

import numpy as np
import pytest
from scipy.io import wavfile

from mixlens_adapter import MIDLEVEL_NAMES

EXAMPLE_CONFIG = Path(__file__).resolve().parents[1] / "example_config" / "adapter.json"

HEAD = {
    "rows": ["valence", "arousal"],
    "cols": list(MIDLEVEL_NAMES),
    "weights": [
        [0.3, -0.1, -0.05, 0.2, -0.25, 0.15, -0.2],
        [-0.05, 0.35, 0.25, -0.1, 0.1, -0.05, 0.3],
    ],
    "bias": [0.05, -0.02],
}

FEATURES = {
    "melodiousness": "spectral_centroid",
    "articulation": "zero_crossing_rate",
    "rhythmic_complexity": "spectral_flatness",
    "rhythmic_stability": "low_band_ratio",
    "dissonance": "spectral_bandwidth",
    "tonal_stability": "spectral_rolloff",
    "minorness": "rms",
}


def write_config(directory, sample_rate=8000, head=None, features=None):
    head_path = directory / "head.json"
    head_path.write_text(json.dumps(head or HEAD))
    config_path = directory / "adapter.json"
    config_path.write_text(
        json.dumps(
            {
                "sample_rate": sample_rate,
                "head_file": "head.json",
                "features": features or FEATURES,
            }
        )
    )
    return config_path


@pytest.fixture
def config_path(tmp_path):
    return write_config(tmp_path)


def quantized(samples):
    """Round to float32 grid so a WAV round trip reproduces the values exactly."""
    return np.asarray(samples, dtype=np.float32).astype(np.float64)


def write_wav(samples, path, rate=8000):
    wavfile.write(path, rate, np.asarray(samples, dtype=np.float32))
