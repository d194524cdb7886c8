"""Uniform access to black-box models.

Two kinds of predictor stand behind one interface: in-process synthetic
models whose attributions are known in closed form (the test oracles), and
external processes speaking a newline-delimited JSON protocol over
stdin/stdout. Conforming predictors must be deterministic: repeated calls on
one clip agree exactly, which the surrogate fitting relies on.

Wire protocol (one JSON object per line):

    -> {"op": "handshake"}
    <- {"midlevel_names": [...], "emotion_names": [...], "has_head": bool,
        "concurrent_safe": bool, "sample_rate": int}
    -> {"op": "predict", "wav_path": "<absolute path>"}
    <- {"outputs": {"<name>": float, ...}}
    -> {"op": "head"}
    <- {"rows": [...emotion names], "cols": [...mid-level names],
        "weights": [[...]], "bias": [...]}
    -> {"op": "shutdown"}            (process exits 0, no response)

Errors travel as ``{"error": "<message>"}``. Audio crosses the process
boundary as a temp WAV path so predictors can use their own decoders.
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
import tempfile
import threading
import time
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from queue import Empty, Queue
from typing import Mapping, Sequence

import numpy as np

from .audio import AudioClip, save_wav
from .errors import CapabilityError, PredictorError, ProtocolError

__all__ = [
    "OutputVector",
    "LinearHead",
    "Predictor",
    "SyntheticLinearPredictor",
    "TwoLevelSyntheticPredictor",
    "ExternalPredictor",
    "make_synthetic_linear",
    "make_synthetic_two_level",
    "connect_external",
    "verify_head_consistency",
]

HEAD_CONSISTENCY_TOL = 1e-5


@dataclass(frozen=True)
class OutputVector:
    """Ordered map from output name to a finite real value."""

    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        arr = np.array(self.values, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"output names must be unique: {list(self.names)}")
        if arr.shape != (len(self.names),):
            raise ValueError("one value per output name required")
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("output values must be finite")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float]) -> "OutputVector":
        return cls(tuple(mapping.keys()), np.array(list(mapping.values()), dtype=np.float64))

    def __getitem__(self, name: str) -> float:
        try:
            return float(self.values[self.names.index(name)])
        except ValueError:
            raise KeyError(name) from None

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def subset(self, names: Sequence[str]) -> "OutputVector":
        return OutputVector(tuple(names), np.array([self[n] for n in names]))


@dataclass(frozen=True)
class LinearHead:
    """Weight matrix and bias mapping mid-level outputs to emotion outputs."""

    emotions: tuple[str, ...]
    midlevels: tuple[str, ...]
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "emotions", tuple(str(n) for n in self.emotions))
        object.__setattr__(self, "midlevels", tuple(str(n) for n in self.midlevels))
        w = np.array(self.weights, dtype=np.float64, copy=True)
        b = np.array(self.bias, dtype=np.float64, copy=True)
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        if w.shape != (len(self.emotions), len(self.midlevels)):
            raise ValueError(
                f"weights shape {w.shape} does not match "
                f"{len(self.emotions)} emotions x {len(self.midlevels)} mid-levels"
            )
        if b.shape != (len(self.emotions),):
            raise ValueError(f"bias shape {b.shape} does not match emotion count")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("head weights and bias must be finite")

    def weight_row(self, emotion: str) -> np.ndarray:
        if emotion not in self.emotions:
            raise KeyError(f"unknown emotion {emotion!r}; head rows are {list(self.emotions)}")
        return self.weights[self.emotions.index(emotion)]

    def bias_of(self, emotion: str) -> float:
        return float(self.bias[self.emotions.index(emotion)])

    def apply(self, midlevels: OutputVector) -> OutputVector:
        """Emotion outputs implied by a mid-level output vector."""
        m = np.array([midlevels[name] for name in self.midlevels])
        return OutputVector(self.emotions, self.weights @ m + self.bias)

    def to_protocol_dict(self) -> dict:
        return {
            "rows": list(self.emotions),
            "cols": list(self.midlevels),
            "weights": [[float(v) for v in row] for row in self.weights],
            "bias": [float(v) for v in self.bias],
        }

    @classmethod
    def from_protocol_dict(cls, payload: Mapping) -> "LinearHead":
        try:
            return cls(
                emotions=tuple(payload["rows"]),
                midlevels=tuple(payload["cols"]),
                weights=np.array(payload["weights"], dtype=np.float64),
                bias=np.array(payload["bias"], dtype=np.float64),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed head payload: {exc}") from exc


class Predictor(ABC):
    """A handle on a black-box model mapping clips to named real outputs."""

    midlevel_names: tuple[str, ...]
    emotion_names: tuple[str, ...]
    has_head: bool
    concurrent_safe: bool
    sample_rate: int

    @property
    def output_names(self) -> tuple[str, ...]:
        return self.midlevel_names + self.emotion_names

    @abstractmethod
    def predict(self, clip: AudioClip) -> OutputVector:
        """One value per declared output; deterministic for a fixed clip."""

    def fetch_head(self) -> LinearHead:
        raise CapabilityError("this predictor does not expose a linear head")

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def _check_rate(self, clip: AudioClip) -> None:
        if clip.sample_rate != self.sample_rate:
            raise PredictorError(
                f"clip at {clip.sample_rate} Hz, predictor expects {self.sample_rate} Hz "
                f"(no resampling is performed)"
            )


def _fit_to_length(samples: np.ndarray, n: int) -> np.ndarray:
    """Zero-pad or truncate to the probe length."""
    if samples.size >= n:
        return samples[:n]
    return np.concatenate([samples, np.zeros(n - samples.size)])


class SyntheticLinearPredictor(Predictor):
    """Outputs are fixed linear functionals of the waveform: <a_j, x> + b_j.

    Because each output is linear in the samples, the prediction on any remix
    is exactly the sum of per-component inner products of the active
    components, making ground-truth attributions available in closed form.
    """

    def __init__(
        self,
        probes: Mapping[str, np.ndarray],
        biases: Mapping[str, float],
        sample_rate: int,
    ):
        names = tuple(probes.keys())
        if not names:
            raise ValueError("at least one probe vector is required")
        vectors = [np.asarray(probes[n], dtype=np.float64) for n in names]
        lengths = {v.size for v in vectors}
        if len(lengths) != 1 or 0 in lengths:
            raise ValueError("probe vectors must share one non-zero length")
        self._probes = np.stack(vectors)
        self._biases = np.array([float(biases[n]) for n in names])
        self.midlevel_names = names
        self.emotion_names = ()
        self.has_head = False
        self.concurrent_safe = True
        self.sample_rate = int(sample_rate)

    @property
    def probe_length(self) -> int:
        return self._probes.shape[1]

    @property
    def probe_map(self) -> dict[str, np.ndarray]:
        return {n: self._probes[i].copy() for i, n in enumerate(self.midlevel_names)}

    @property
    def bias_map(self) -> dict[str, float]:
        return {n: float(self._biases[i]) for i, n in enumerate(self.midlevel_names)}

    def predict(self, clip: AudioClip) -> OutputVector:
        self._check_rate(clip)
        x = _fit_to_length(clip.samples, self.probe_length)
        return OutputVector(self.midlevel_names, self._probes @ x + self._biases)


class TwoLevelSyntheticPredictor(Predictor):
    """Linear mid-level functionals chained through a linear head to emotions."""

    def __init__(
        self,
        midlevel_probes: Mapping[str, np.ndarray],
        head: LinearHead,
        sample_rate: int,
        midlevel_biases: Mapping[str, float] | None = None,
    ):
        names = tuple(midlevel_probes.keys())
        if head.midlevels != names:
            raise ValueError(
                f"head columns {list(head.midlevels)} do not match "
                f"mid-level names {list(names)}"
            )
        biases = {n: 0.0 for n in names}
        if midlevel_biases:
            biases.update({n: float(v) for n, v in midlevel_biases.items()})
        self._inner = SyntheticLinearPredictor(midlevel_probes, biases, sample_rate)
        self._head = head
        self.midlevel_names = names
        self.emotion_names = head.emotions
        self.has_head = True
        self.concurrent_safe = True
        self.sample_rate = int(sample_rate)

    @property
    def probe_length(self) -> int:
        return self._inner.probe_length

    @property
    def probe_map(self) -> dict[str, np.ndarray]:
        return self._inner.probe_map

    @property
    def bias_map(self) -> dict[str, float]:
        return self._inner.bias_map

    def predict(self, clip: AudioClip) -> OutputVector:
        mids = self._inner.predict(clip)
        emotions = self._head.apply(mids)
        return OutputVector(
            self.midlevel_names + self.emotion_names,
            np.concatenate([mids.values, emotions.values]),
        )

    def fetch_head(self) -> LinearHead:
        return self._head


def make_synthetic_linear(
    probes: Mapping[str, np.ndarray],
    biases: Mapping[str, float] | float = 0.0,
    sample_rate: int = 22050,
) -> SyntheticLinearPredictor:
    """In-process predictor with one probe vector per output name.

    Clips shorter than the probe are zero-padded, longer clips truncated.
    A scalar ``biases`` applies to every output.
    """
    if not isinstance(biases, Mapping):
        biases = {name: float(biases) for name in probes}
    return SyntheticLinearPredictor(probes, biases, sample_rate)


def make_synthetic_two_level(
    midlevel_probes: Mapping[str, np.ndarray],
    head: LinearHead,
    sample_rate: int = 22050,
    midlevel_biases: Mapping[str, float] | None = None,
) -> TwoLevelSyntheticPredictor:
    """In-process predictor exposing mid-level and emotion outputs plus the head."""
    predictor = TwoLevelSyntheticPredictor(midlevel_probes, head, sample_rate, midlevel_biases)
    verify_head_consistency(predictor)
    return predictor


def probe_clip(sample_rate: int, length: int = 4096, seed: int = 0) -> AudioClip:
    """Deterministic noise clip used for handshake consistency checks.

    Samples are quantized to float32 so the clip survives a WAV round trip
    bit-for-bit.
    """
    rng = np.random.default_rng(seed)
    samples = rng.uniform(-0.5, 0.5, size=length).astype(np.float32).astype(np.float64)
    return AudioClip(samples, sample_rate)


def verify_head_consistency(
    predictor: Predictor, tolerance: float = HEAD_CONSISTENCY_TOL
) -> float:
    """Check that emotions equal head(mid-levels) on a probe clip.

    Returns the max abs deviation; raises ProtocolError above ``tolerance``.
    """
    if not predictor.has_head:
        raise CapabilityError("predictor declares no head to verify")
    head = predictor.fetch_head()
    if head.midlevels != predictor.midlevel_names:
        raise ProtocolError(
            f"head columns {list(head.midlevels)} do not match declared "
            f"mid-level names {list(predictor.midlevel_names)}"
        )
    if head.emotions != predictor.emotion_names:
        raise ProtocolError(
            f"head rows {list(head.emotions)} do not match declared "
            f"emotion names {list(predictor.emotion_names)}"
        )
    outputs = predictor.predict(probe_clip(predictor.sample_rate))
    implied = head.apply(outputs.subset(predictor.midlevel_names))
    reported = np.array([outputs[name] for name in predictor.emotion_names])
    deviation = float(np.max(np.abs(implied.values - reported))) if len(reported) else 0.0
    if deviation > tolerance:
        raise ProtocolError(
            f"emotion outputs deviate from head(mid-levels) by {deviation:.3g} "
            f"(tolerance {tolerance:g})"
        )
    return deviation


class ExternalPredictor(Predictor):
    """Client for a child process speaking the JSON wire protocol.

    The handle is a serial channel: one outstanding request at a time unless
    the predictor declared ``concurrent_safe`` at handshake. Responses are
    read by a background thread so timeouts surface instead of hanging.
    """

    def __init__(
        self,
        command: str,
        args: Sequence[str] = (),
        working_dir: str | Path | None = None,
        handshake_timeout: float = 30.0,
        predict_timeout: float = 120.0,
    ):
        self._predict_timeout = predict_timeout
        self._lock = threading.Lock()
        self._closed = False
        argv = [command, *[str(a) for a in args]]
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                cwd=str(working_dir) if working_dir is not None else None,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise PredictorError(f"cannot spawn predictor {argv!r}: {exc}") from exc
        self._responses: Queue = Queue()
        self._stderr_tail: deque[str] = deque(maxlen=50)
        self._stdout_closed = threading.Event()
        threading.Thread(target=self._read_stdout, daemon=True).start()
        threading.Thread(target=self._read_stderr, daemon=True).start()
        self._tmpdir = tempfile.TemporaryDirectory(prefix="mixlens-predictor-")
        self._wav_counter = 0
        try:
            self._handshake(handshake_timeout)
            if self.has_head:
                verify_head_consistency(self)
        except Exception:
            self.close()
            raise

    # -- transport ---------------------------------------------------------

    def _read_stdout(self):
        try:
            for line in self._proc.stdout:
                line = line.strip()
                if line:
                    self._responses.put(line)
        finally:
            self._stdout_closed.set()

    def _read_stderr(self):
        for line in self._proc.stderr:
            line = line.rstrip()
            if line:
                self._stderr_tail.append(line)

    def _stderr_summary(self) -> str:
        return " | ".join(self._stderr_tail) or "<no stderr>"

    def _request(self, message: dict, timeout: float) -> dict:
        if self._closed:
            raise PredictorError("predictor handle is closed")
        if self._proc.poll() is not None:
            raise PredictorError(
                f"predictor exited with code {self._proc.returncode}; "
                f"stderr: {self._stderr_summary()}"
            )
        try:
            self._proc.stdin.write(json.dumps(message) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise PredictorError(
                f"predictor pipe broken; stderr: {self._stderr_summary()}"
            ) from exc
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise PredictorError(
                    f"timed out after {timeout:g}s waiting for {message.get('op')!r} response"
                )
            try:
                line = self._responses.get(timeout=min(remaining, 0.2))
                break
            except Empty:
                if self._stdout_closed.is_set() and self._responses.empty():
                    raise PredictorError(
                        f"predictor closed its output during {message.get('op')!r}; "
                        f"stderr: {self._stderr_summary()}"
                    ) from None
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"predictor sent invalid JSON: {line!r}") from exc
        if not isinstance(response, dict):
            raise ProtocolError(f"predictor response is not an object: {response!r}")
        if "error" in response:
            raise PredictorError(f"predictor error: {response['error']}")
        return response

    # -- protocol ----------------------------------------------------------

    def _handshake(self, timeout: float):
        reply = self._request({"op": "handshake"}, timeout)
        try:
            midlevels = tuple(str(n) for n in reply["midlevel_names"])
            emotions = tuple(str(n) for n in reply["emotion_names"])
            has_head = bool(reply["has_head"])
            concurrent_safe = bool(reply["concurrent_safe"])
            sample_rate = int(reply["sample_rate"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed handshake: {exc!r} in {reply!r}") from exc
        names = midlevels + emotions
        if not names:
            raise ProtocolError("handshake declares no outputs")
        if len(set(names)) != len(names):
            raise ProtocolError(f"handshake declares duplicate output names: {list(names)}")
        if sample_rate <= 0:
            raise ProtocolError(f"handshake declares invalid sample_rate {sample_rate}")
        self.midlevel_names = midlevels
        self.emotion_names = emotions
        self.has_head = has_head
        self.concurrent_safe = concurrent_safe
        self.sample_rate = sample_rate

    def predict(self, clip: AudioClip) -> OutputVector:
        if self._closed:
            raise PredictorError("predictor handle is closed")
        self._check_rate(clip)
        with self._lock:
            self._wav_counter += 1
            wav_path = Path(self._tmpdir.name) / f"clip_{self._wav_counter}.wav"
            save_wav(clip, wav_path)
            try:
                reply = self._request(
                    {"op": "predict", "wav_path": str(wav_path)}, self._predict_timeout
                )
            finally:
                try:
                    os.unlink(wav_path)
                except OSError:
                    pass
        outputs = reply.get("outputs")
        if not isinstance(outputs, dict):
            raise ProtocolError(f"predict response lacks an outputs object: {reply!r}")
        declared = set(self.output_names)
        got = set(outputs)
        if got != declared:
            raise ProtocolError(
                f"predict response names {sorted(got)} do not match declared "
                f"{sorted(declared)}"
            )
        values = []
        for name in self.output_names:
            v = outputs[name]
            if not isinstance(v, (int, float)) or not np.isfinite(v):
                raise PredictorError(f"non-finite value for output {name!r}: {v!r}")
            values.append(float(v))
        return OutputVector(self.output_names, np.array(values))

    def fetch_head(self) -> LinearHead:
        if not self.has_head:
            raise CapabilityError("predictor did not declare a linear head at handshake")
        with self._lock:
            reply = self._request({"op": "head"}, self._predict_timeout)
        head = LinearHead.from_protocol_dict(reply)
        if head.midlevels != self.midlevel_names or head.emotions != self.emotion_names:
            raise ProtocolError(
                "head names do not match the handshake declaration: "
                f"rows {list(head.emotions)} cols {list(head.midlevels)}"
            )
        return head

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        if self._proc.poll() is None:
            try:
                self._proc.stdin.write(json.dumps({"op": "shutdown"}) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError):
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.terminate()
                try:
                    self._proc.wait(timeout=2)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
        self._tmpdir.cleanup()


def connect_external(
    command: str,
    args: Sequence[str] = (),
    working_dir: str | Path | None = None,
    handshake_timeout: float = 30.0,
    predict_timeout: float = 120.0,
) -> ExternalPredictor:
    """Spawn an external predictor process and perform the handshake.

    ``command`` may be a bare executable (with ``args``) or a full shell-style
    command line, which is split with :func:`shlex.split` when ``args`` is
    empty. For predictors declaring a head, the handshake includes a
    consistency check of emotions against head(mid-levels) on a probe clip.
    """
    if not args:
        parts = shlex.split(command)
        if not parts:
            raise PredictorError("empty predictor command")
        command, args = parts[0], parts[1:]
    return ExternalPredictor(
        command,
        args,
        working_dir=working_dir,
        handshake_timeout=handshake_timeout,
        predict_timeout=predict_timeout,
    )
