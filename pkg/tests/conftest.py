import json
import sys
from pathlib import Path

import numpy as np
import pytest

from mixlens import (
    AudioClip,
    Decomposition,
    LinearHead,
    TwoLevelSyntheticPredictor,
    build_planted_dataset,
    make_synthetic_linear,
)

DATA_DIR = Path(__file__).parent / "data"

# Recipe shared with tests/data/gen_linear_oracle.py; the draw order
# (components, then probe) must stay in sync with that script.
LINEAR_SEED = 42
LINEAR_D = 5
LINEAR_LENGTH = 4096
LINEAR_RATE = 8000
LINEAR_BIAS = 0.25


def build_linear_fixture():
    rng = np.random.default_rng(LINEAR_SEED)
    parts = rng.uniform(-0.1, 0.1, size=(LINEAR_D, LINEAR_LENGTH))
    probe = rng.uniform(-0.5, 0.5, size=LINEAR_LENGTH)
    components = tuple(
        (f"c{i}", AudioClip(parts[i], LINEAR_RATE)) for i in range(LINEAR_D)
    )
    original = AudioClip(parts.sum(axis=0), LINEAR_RATE)
    decomp = Decomposition(components, original)
    handle = make_synthetic_linear({"out": probe}, LINEAR_BIAS, LINEAR_RATE)
    return decomp, handle


@pytest.fixture
def linear_fixture():
    return build_linear_fixture()


@pytest.fixture(scope="session")
def linear_oracle():
    with open(DATA_DIR / "linear_attr_oracle.json", encoding="utf-8") as fh:
        return json.load(fh)


def random_clip(rng, length=2048, rate=8000, amplitude=0.5, quantize=False):
    samples = rng.uniform(-amplitude, amplitude, size=length)
    if quantize:
        samples = samples.astype(np.float32).astype(np.float64)
    return AudioClip(samples, rate)


def small_two_level(seed=0, sample_rate=8000, length=1024):
    """Compact two-level predictor for protocol and effects tests."""
    rng = np.random.default_rng(seed)
    names = ("alpha", "beta", "gamma")
    probes = {n: rng.uniform(-0.5, 0.5, size=length) for n in names}
    head = LinearHead(
        ("valence", "arousal"),
        names,
        rng.uniform(-0.5, 0.5, size=(2, 3)),
        rng.uniform(-0.1, 0.1, size=2),
    )
    return TwoLevelSyntheticPredictor(probes, head, sample_rate)


@pytest.fixture(scope="session")
def planted_ds(tmp_path_factory):
    root = tmp_path_factory.mktemp("planted")
    return build_planted_dataset(root, seed=0)


def serving_command(config_path) -> str:
    return f"{sys.executable} -m mixlens.serving {config_path}"
