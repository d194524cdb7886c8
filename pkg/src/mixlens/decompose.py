"""Decomposition strategies: instrument stems on disk, frequency bands, time segments.

The band splitter is the self-contained fallback for clips that have no
pre-separated stems: it partitions STFT bins into contiguous groups and
resynthesizes each group, so the components sum back to the input to float
precision regardless of content. Stems, by contrast, come from external
separators and are allowed to be inexact; an excessive residual is reported
as a warning, not an error.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import check_COLA, get_window

from .audio import AudioClip, Decomposition, load_wav, validate_decomposition
from .errors import DecompositionError, StemResidualWarning

__all__ = [
    "DEFAULT_STEM_LABELS",
    "StemLayout",
    "BandSplitConfig",
    "stem_decompose",
    "band_decompose",
    "time_decompose",
]

DEFAULT_STEM_LABELS = ("vocals", "drums", "bass", "piano", "other")


@dataclass(frozen=True)
class StemLayout:
    """Directory of per-instrument stem files, one ``<label>.wav`` per label."""

    directory: Path
    expected_labels: tuple[str, ...] = DEFAULT_STEM_LABELS

    def __post_init__(self):
        object.__setattr__(self, "directory", Path(self.directory))
        object.__setattr__(self, "expected_labels", tuple(self.expected_labels))
        labels = self.expected_labels
        if not labels:
            raise DecompositionError("expected_labels must not be empty")
        if len(set(labels)) != len(labels):
            raise DecompositionError(f"stem labels must be unique, got {list(labels)}")

    def stem_path(self, label: str) -> Path:
        return self.directory / f"{label}.wav"


@dataclass(frozen=True)
class BandSplitConfig:
    """STFT parameters for the frequency-band decomposer.

    The window must satisfy constant-overlap-add at the given hop and the hop
    must divide the window size; both are checked. ``window`` is either a
    window name understood by :func:`scipy.signal.get_window` or an explicit
    array of ``window_size`` coefficients.
    """

    n_bands: int
    window_size: int = 2048
    hop: int = 512
    window: str | np.ndarray = "hann"

    def __post_init__(self):
        if self.n_bands < 1:
            raise DecompositionError(f"n_bands must be >= 1, got {self.n_bands}")
        if self.window_size < 2:
            raise DecompositionError(f"window_size must be >= 2, got {self.window_size}")
        if self.hop < 1 or self.window_size % self.hop != 0:
            raise DecompositionError(
                f"hop must be a positive divisor of window_size, got hop={self.hop} "
                f"window_size={self.window_size}"
            )
        if self.n_bands > self.window_size // 2 + 1:
            raise DecompositionError(
                f"n_bands={self.n_bands} exceeds the {self.window_size // 2 + 1} "
                f"available frequency bins"
            )

    def window_array(self) -> np.ndarray:
        if isinstance(self.window, str):
            win = get_window(self.window, self.window_size, fftbins=True)
        else:
            win = np.asarray(self.window, dtype=np.float64)
            if win.shape != (self.window_size,):
                raise DecompositionError(
                    f"window array has shape {win.shape}, expected ({self.window_size},)"
                )
        if not check_COLA(win, self.window_size, self.window_size - self.hop):
            raise DecompositionError(
                f"window does not satisfy constant-overlap-add at hop {self.hop}"
            )
        return win


def stem_decompose(
    layout: StemLayout, original: AudioClip, warn_threshold: float = 0.05
) -> Decomposition:
    """Assemble a decomposition from stem files in ``layout.expected_labels`` order.

    Every stem must exist and match the original's length and sample rate.
    Separator outputs rarely sum back exactly; a reconstruction residual above
    ``warn_threshold`` (max abs) raises :class:`StemResidualWarning` but the
    decomposition is still returned.
    """
    components = []
    for label in layout.expected_labels:
        path = layout.stem_path(label)
        if not path.exists():
            raise DecompositionError(f"missing stem {label!r}: expected file {path}")
        clip = load_wav(path)
        if clip.sample_rate != original.sample_rate:
            raise DecompositionError(
                f"stem {label!r} is at {clip.sample_rate} Hz, original at "
                f"{original.sample_rate} Hz"
            )
        if len(clip) != len(original):
            raise DecompositionError(
                f"stem {label!r} has {len(clip)} samples, original has {len(original)}"
            )
        components.append((label, clip))
    decomp = Decomposition(tuple(components), original)
    residual = validate_decomposition(decomp)
    if residual > warn_threshold:
        warnings.warn(
            f"stems reconstruct the mix only within {residual:.4g} max abs "
            f"(threshold {warn_threshold:g})",
            StemResidualWarning,
            stacklevel=2,
        )
    return decomp


def band_bin_edges(config: BandSplitConfig) -> list[tuple[int, int]]:
    """Contiguous, near-equal [lo, hi) bin ranges partitioning the rfft bins.

    Earlier bands take the remainder bins, mirroring the time-segment split rule.
    """
    n_bins = config.window_size // 2 + 1
    base, rem = divmod(n_bins, config.n_bands)
    edges = []
    lo = 0
    for b in range(config.n_bands):
        hi = lo + base + (1 if b < rem else 0)
        edges.append((lo, hi))
        lo = hi
    return edges


def band_decompose(clip: AudioClip, config: BandSplitConfig) -> Decomposition:
    """Split a clip into frequency-band components that sum back to it.

    Analysis: windowed STFT frames at the configured hop over a zero-padded
    copy of the signal. Each band zeroes the bins outside its range and
    resynthesizes by inverse FFT and overlap-add; dividing by the accumulated
    window sum undoes the analysis window. Because the bands partition the
    spectrum bin-for-bin, their sum reconstructs the input exactly up to FFT
    round-off (well under 1e-5 max abs).
    """
    n = config.window_size
    hop = config.hop
    if len(clip) < n:
        raise DecompositionError(
            f"clip of {len(clip)} samples is shorter than the {n}-sample window"
        )
    win = config.window_array()

    x = clip.samples
    pad = n
    padded = np.concatenate([np.zeros(pad), x, np.zeros(pad)])
    n_frames = int(np.ceil((padded.size - n) / hop)) + 1
    total = (n_frames - 1) * hop + n
    padded = np.concatenate([padded, np.zeros(total - padded.size)])

    frames = np.lib.stride_tricks.sliding_window_view(padded, n)[::hop]
    spectra = np.fft.rfft(frames * win, axis=1)

    starts = np.arange(n_frames) * hop
    window_sum = np.zeros(total)
    for s in starts:
        window_sum[s : s + n] += win
    region = slice(pad, pad + len(clip))
    norm = window_sum[region]

    components = []
    for b, (lo, hi) in enumerate(band_bin_edges(config)):
        banded = np.zeros_like(spectra)
        banded[:, lo:hi] = spectra[:, lo:hi]
        frames_b = np.fft.irfft(banded, n=n, axis=1)
        buffer = np.zeros(total)
        for k, s in enumerate(starts):
            buffer[s : s + n] += frames_b[k]
        components.append((f"band_{b}", AudioClip(buffer[region] / norm, clip.sample_rate)))
    return Decomposition(tuple(components), clip)


def time_decompose(clip: AudioClip, n_segments: int) -> Decomposition:
    """Split a clip into contiguous near-equal time segments (zeroed elsewhere).

    Earlier segments take the remainder samples, so a 10-sample clip split in
    three gives lengths 4, 3, 3. Components sum back to the clip exactly.
    """
    if n_segments < 1:
        raise DecompositionError(f"n_segments must be >= 1, got {n_segments}")
    if n_segments > len(clip):
        raise DecompositionError(
            f"cannot split {len(clip)} samples into {n_segments} segments"
        )
    base, rem = divmod(len(clip), n_segments)
    components = []
    lo = 0
    for i in range(n_segments):
        hi = lo + base + (1 if i < rem else 0)
        masked = np.zeros(len(clip))
        masked[lo:hi] = clip.samples[lo:hi]
        components.append((f"segment_{i}", AudioClip(masked, clip.sample_rate)))
        lo = hi
    return Decomposition(tuple(components), clip)
