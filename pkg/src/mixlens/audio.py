"""Waveform container, WAV file I/O, and mask-driven remixing.

Everything downstream works on mono float clips. Stereo files are downmixed
on load by per-sample channel mean; integer PCM is scaled into [-1, 1] by
dividing by 32768 (exact at full negative scale). There is no resampling
anywhere in the toolkit: sample-rate mismatches are hard errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import AudioIOError, DecompositionError

__all__ = [
    "AudioClip",
    "Decomposition",
    "Mask",
    "load_wav",
    "save_wav",
    "mix",
    "validate_decomposition",
]


def _as_locked_f64(samples) -> np.ndarray:
    arr = np.array(samples, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform with its sample rate.

    Samples are dimensionless amplitudes, nominally in [-1, 1], stored as
    float64 and frozen after construction so clips can be shared freely.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        object.__setattr__(self, "samples", _as_locked_f64(self.samples))
        if self.samples.ndim != 1:
            raise ValueError("AudioClip samples must be one-dimensional")
        if not isinstance(self.sample_rate, (int, np.integer)) or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise ValueError("AudioClip samples must be finite (no NaN/Inf)")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class Mask:
    """On/off pattern over the components of a decomposition."""

    bits: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(bool(b) for b in self.bits))

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def fraction_inactive(self) -> float:
        if not self.bits:
            return 0.0
        return sum(1 for b in self.bits if not b) / len(self.bits)

    @classmethod
    def full(cls, d: int) -> "Mask":
        return cls((True,) * d)

    @classmethod
    def empty(cls, d: int) -> "Mask":
        return cls((False,) * d)


@dataclass(frozen=True)
class Decomposition:
    """Ordered labeled components whose sum reconstructs the original clip.

    The components are the interpretable feature space: masks toggle them and
    remixes of the active ones are what gets sent to the model. Construction
    checks structure (one shared length and rate, unique non-empty labels);
    the reconstruction residual is measured by :func:`validate_decomposition`.
    """

    components: tuple[tuple[str, AudioClip], ...]
    original: AudioClip

    def __post_init__(self):
        object.__setattr__(self, "components", tuple((str(l), c) for l, c in self.components))
        if not self.components:
            raise DecompositionError("a decomposition needs at least one component")
        labels = [label for label, _ in self.components]
        if any(not label for label in labels):
            raise DecompositionError("component labels must be non-empty")
        if len(set(labels)) != len(labels):
            raise DecompositionError(f"component labels must be unique, got {labels}")
        n = len(self.original)
        rate = self.original.sample_rate
        for label, clip in self.components:
            if len(clip) != n:
                raise DecompositionError(
                    f"component {label!r} has {len(clip)} samples, original has {n}"
                )
            if clip.sample_rate != rate:
                raise DecompositionError(
                    f"component {label!r} is at {clip.sample_rate} Hz, original at {rate} Hz"
                )

    @property
    def d(self) -> int:
        return len(self.components)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.components)


def load_wav(path: str | Path) -> AudioClip:
    """Load a RIFF/WAVE file as a mono clip.

    Accepts 16-bit integer PCM (format code 1) and 32-bit IEEE float
    (format code 3), one or two channels. Integer samples are scaled by
    1/32768; stereo is downmixed by per-sample channel mean.

    Raises:
        AudioIOError: unreadable file, unsupported encoding, or zero-length audio.
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise AudioIOError(f"no such file: {path}") from None
    except Exception as exc:
        raise AudioIOError(f"cannot read WAV file {path}: {exc}") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise AudioIOError(
            f"{path}: unsupported encoding {data.dtype}; expected 16-bit PCM or 32-bit float"
        )

    if samples.ndim == 2:
        if samples.shape[1] not in (1, 2):
            raise AudioIOError(f"{path}: {samples.shape[1]} channels; expected 1 or 2")
        samples = samples.mean(axis=1)
    if samples.size == 0:
        raise AudioIOError(f"{path}: zero-length audio")
    return AudioClip(samples, int(rate))


def save_wav(clip: AudioClip, path: str | Path) -> None:
    """Write a clip as a mono 32-bit IEEE float little-endian WAV file.

    Raises:
        AudioIOError: empty clip or unwritable path.
    """
    if len(clip) == 0:
        raise AudioIOError("refusing to write a zero-length clip")
    try:
        wavfile.write(str(path), clip.sample_rate, clip.samples.astype(np.float32))
    except OSError as exc:
        raise AudioIOError(f"cannot write WAV file {path}: {exc}") from exc


def _component_sum(clips: list[np.ndarray], n: int) -> np.ndarray:
    if not clips:
        return np.zeros(n)
    return np.sum(np.stack(clips), axis=0)


def mix(decomp: Decomposition, mask: Mask) -> AudioClip:
    """Remix the components whose mask bit is set; inactive ones are silence."""
    if len(mask) != decomp.d:
        raise DecompositionError(
            f"mask has {len(mask)} bits, decomposition has {decomp.d} components"
        )
    active = [clip.samples for (_, clip), bit in zip(decomp.components, mask.bits) if bit]
    return AudioClip(
        _component_sum(active, len(decomp.original)), decomp.original.sample_rate
    )


def validate_decomposition(decomp: Decomposition) -> float:
    """Return the reconstruction residual: max over samples of |sum(components) - original|."""
    total = _component_sum([clip.samples for _, clip in decomp.components], len(decomp.original))
    if total.size == 0:
        return 0.0
    return float(np.max(np.abs(total - decomp.original.samples)))
