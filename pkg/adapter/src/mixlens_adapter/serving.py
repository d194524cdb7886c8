"""The request loop: line-delimited JSON in, line-delimited JSON out.

Requests are handled one at a time on the calling thread, which is why the
handshake declares concurrent_safe false. A malformed or failing request
produces an {"error": ...} reply and the loop continues; only "shutdown"
or EOF ends it.
"""

from __future__ import annotations

import json
from typing import TextIO

import numpy as np
from scipy.io import wavfile

from .model import SpectralStatsModel


def read_wav(path: str, expected_rate: int) -> np.ndarray:
    rate, data = wavfile.read(path)
    if rate != expected_rate:
        raise ValueError(f"expected {expected_rate} Hz audio, got {rate} Hz")
    if data.dtype == np.float32:
        samples = data.astype(np.float64)
    elif data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    else:
        raise ValueError(f"unsupported WAV sample format {data.dtype}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return samples


def _reply(out: TextIO, payload: dict) -> None:
    out.write(json.dumps(payload) + "\n")
    out.flush()


def serve(model: SpectralStatsModel, lines_in: TextIO, out: TextIO) -> int:
    for line in lines_in:
        line = line.strip()
        if not line:
            continue
        try:
            message = json.loads(line)
        except json.JSONDecodeError:
            _reply(out, {"error": f"malformed request: {line[:200]}"})
            continue
        op = message.get("op") if isinstance(message, dict) else None
        if op == "shutdown":
            return 0
        try:
            if op == "handshake":
                _reply(
                    out,
                    {
                        "midlevel_names": list(model.output_names[:7]),
                        "emotion_names": list(model.config.emotion_names),
                        "has_head": True,
                        "concurrent_safe": False,
                        "sample_rate": model.config.sample_rate,
                    },
                )
            elif op == "predict":
                samples = read_wav(message["wav_path"], model.config.sample_rate)
                _reply(out, {"outputs": model.predict(samples)})
            elif op == "head":
                _reply(out, model.head_payload())
            else:
                _reply(out, {"error": f"unknown op {op!r}"})
        except Exception as exc:
            _reply(out, {"error": str(exc)})
    return 0
