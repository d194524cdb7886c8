"""Serve an in-process predictor over the stdio wire protocol.

Run as ``python -m mixlens.serving CONFIG.json`` to expose a synthetic
predictor as a child process, e.g. for conformance testing or CLI demos.
Config schema::

    {"kind": "linear", "sample_rate": 8000,
     "probes": {"<name>": [floats...]}, "biases": {"<name>": float}}

    {"kind": "two_level", "sample_rate": 8000,
     "midlevel_probes": {...}, "midlevel_biases": {...},
     "head": {"rows": [...], "cols": [...], "weights": [[...]], "bias": [...]}}

The ``head`` block uses the same schema as the protocol's head response.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import TextIO

import numpy as np

from .audio import load_wav
from .predictors import (
    LinearHead,
    Predictor,
    SyntheticLinearPredictor,
    TwoLevelSyntheticPredictor,
    make_synthetic_linear,
    make_synthetic_two_level,
)

__all__ = ["serve", "build_predictor_from_config", "predictor_config_dict", "main"]


def build_predictor_from_config(config: dict) -> Predictor:
    kind = config.get("kind")
    sample_rate = int(config["sample_rate"])
    if kind == "linear":
        probes = {n: np.array(v, dtype=np.float64) for n, v in config["probes"].items()}
        biases = {n: float(v) for n, v in config.get("biases", {}).items()}
        for name in probes:
            biases.setdefault(name, 0.0)
        return make_synthetic_linear(probes, biases, sample_rate)
    if kind == "two_level":
        probes = {
            n: np.array(v, dtype=np.float64) for n, v in config["midlevel_probes"].items()
        }
        head = LinearHead.from_protocol_dict(config["head"])
        biases = {n: float(v) for n, v in config.get("midlevel_biases", {}).items()}
        return make_synthetic_two_level(probes, head, sample_rate, biases)
    raise ValueError(f"unknown predictor kind {kind!r}")


def predictor_config_dict(predictor: Predictor) -> dict:
    """Inverse of ``build_predictor_from_config`` for the synthetic predictors."""
    if isinstance(predictor, TwoLevelSyntheticPredictor):
        return {
            "kind": "two_level",
            "sample_rate": predictor.sample_rate,
            "midlevel_probes": {
                n: [float(v) for v in p] for n, p in predictor.probe_map.items()
            },
            "midlevel_biases": predictor.bias_map,
            "head": predictor.fetch_head().to_protocol_dict(),
        }
    if isinstance(predictor, SyntheticLinearPredictor):
        return {
            "kind": "linear",
            "sample_rate": predictor.sample_rate,
            "probes": {n: [float(v) for v in p] for n, p in predictor.probe_map.items()},
            "biases": predictor.bias_map,
        }
    raise ValueError(f"cannot serialize a {type(predictor).__name__} to a config")


def _reply(out: TextIO, payload: dict) -> None:
    out.write(json.dumps(payload) + "\n")
    out.flush()


def serve(predictor: Predictor, lines_in: TextIO, out: TextIO) -> int:
    """Answer handshake/predict/head/shutdown requests until EOF or shutdown."""
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
                        "midlevel_names": list(predictor.midlevel_names),
                        "emotion_names": list(predictor.emotion_names),
                        "has_head": predictor.has_head,
                        "concurrent_safe": predictor.concurrent_safe,
                        "sample_rate": predictor.sample_rate,
                    },
                )
            elif op == "predict":
                clip = load_wav(message["wav_path"])
                outputs = predictor.predict(clip)
                _reply(out, {"outputs": outputs.as_dict()})
            elif op == "head":
                _reply(out, predictor.fetch_head().to_protocol_dict())
            else:
                _reply(out, {"error": f"unknown op {op!r}"})
        except Exception as exc:
            _reply(out, {"error": str(exc)})
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m mixlens.serving",
        description="Serve a synthetic predictor over stdin/stdout.",
    )
    parser.add_argument("config", help="JSON file describing the predictor")
    ns = parser.parse_args(argv)
    with open(ns.config, encoding="utf-8") as fh:
        config = json.load(fh)
    predictor = build_predictor_from_config(config)
    return serve(predictor, sys.stdin, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
