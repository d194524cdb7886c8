"""Named spectral statistics, one per mid-level output.

Every statistic maps (samples, sample_rate) to a float and is exactly 0.0
on silence, so a silent clip's emotion predictions reduce to the head
biases. All are pure float64 computations with no randomness, which keeps
repeated predictions on the same samples bit-identical.
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

Statistic = Callable[[np.ndarray, int], float]

_REGISTRY: dict[str, Statistic] = {}


def statistic(name: str):
    def register(fn: Statistic) -> Statistic:
        _REGISTRY[name] = fn
        return fn

    return register


def statistic_names() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def get_statistic(name: str) -> Statistic:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown statistic {name!r}; available: {', '.join(statistic_names())}"
        ) from None


def _magnitudes(samples: np.ndarray) -> np.ndarray:
    return np.abs(np.fft.rfft(samples))


@statistic("rms")
def rms(samples: np.ndarray, sample_rate: int) -> float:
    return float(np.sqrt(np.mean(samples**2)))


@statistic("zero_crossing_rate")
def zero_crossing_rate(samples: np.ndarray, sample_rate: int) -> float:
    if samples.size < 2:
        return 0.0
    signs = np.sign(samples)
    return float(np.mean(signs[1:] * signs[:-1] < 0))


@statistic("spectral_centroid")
def spectral_centroid(samples: np.ndarray, sample_rate: int) -> float:
    """Magnitude-weighted mean bin position, scaled to [0, 1]."""
    mag = _magnitudes(samples)
    total = mag.sum()
    if total == 0.0 or mag.size < 2:
        return 0.0
    positions = np.arange(mag.size) / (mag.size - 1)
    return float(np.sum(positions * mag) / total)


@statistic("spectral_bandwidth")
def spectral_bandwidth(samples: np.ndarray, sample_rate: int) -> float:
    """Magnitude-weighted spread around the centroid, scaled to [0, 1]."""
    mag = _magnitudes(samples)
    total = mag.sum()
    if total == 0.0 or mag.size < 2:
        return 0.0
    positions = np.arange(mag.size) / (mag.size - 1)
    centroid = np.sum(positions * mag) / total
    return float(np.sqrt(np.sum((positions - centroid) ** 2 * mag) / total))


@statistic("spectral_rolloff")
def spectral_rolloff(samples: np.ndarray, sample_rate: int) -> float:
    """First bin position holding 85% of the spectral power, scaled to [0, 1]."""
    power = _magnitudes(samples) ** 2
    total = power.sum()
    if total == 0.0 or power.size < 2:
        return 0.0
    cutoff = int(np.searchsorted(np.cumsum(power), 0.85 * total))
    return float(cutoff / (power.size - 1))


@statistic("spectral_flatness")
def spectral_flatness(samples: np.ndarray, sample_rate: int) -> float:
    """Geometric over arithmetic mean of power: near 1 for noise, near 0 for tones."""
    power = _magnitudes(samples) ** 2
    if power.sum() == 0.0:
        return 0.0
    floor = np.finfo(np.float64).tiny
    geometric = np.exp(np.mean(np.log(power + floor)))
    return float(geometric / np.mean(power))


@statistic("low_band_ratio")
def low_band_ratio(samples: np.ndarray, sample_rate: int) -> float:
    """Fraction of spectral power in the lowest quarter of the bins."""
    power = _magnitudes(samples) ** 2
    total = power.sum()
    if total == 0.0:
        return 0.0
    return float(power[: max(1, power.size // 4)].sum() / total)
