"""Dataset manifests for batch debugging runs.

A manifest is a JSON-lines file, one song per line:

    {"id": "song1", "audio_path": "audio/song1.wav",
     "stems_dir": "stems/song1", "tags": ["hiphop"],
     "labels": {"valence": -0.2, "arousal": 0.4}}

``stems_dir`` may be null or absent. Relative paths are resolved against the
manifest's own directory, so a manifest travels with its audio tree. Labels
are expected in [-1, 1]; values outside only warn, since the range is a
dataset convention rather than a hard requirement.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .errors import LabelRangeWarning, ManifestError

__all__ = ["ManifestEntry", "load_manifest"]


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    audio_path: Path
    stems_dir: Path | None
    tags: frozenset[str]
    labels: dict[str, float] = field(compare=False)

    def has_tag(self, tag: str) -> bool:
        return tag in self.tags


def _parse_entry(obj: dict, base: Path, line_no: int) -> ManifestEntry:
    def fail(msg: str) -> ManifestError:
        return ManifestError(f"line {line_no}: {msg}")

    if not isinstance(obj, dict):
        raise fail("expected a JSON object")
    for key in ("id", "audio_path", "tags", "labels"):
        if key not in obj:
            raise fail(f"missing field {key!r}")
    entry_id = obj["id"]
    if not isinstance(entry_id, str) or not entry_id:
        raise fail("id must be a non-empty string")
    if not isinstance(obj["audio_path"], str):
        raise fail("audio_path must be a string")
    audio_path = base / obj["audio_path"]
    stems_raw = obj.get("stems_dir")
    if stems_raw is not None and not isinstance(stems_raw, str):
        raise fail("stems_dir must be a string or null")
    stems_dir = base / stems_raw if stems_raw is not None else None
    tags_raw = obj["tags"]
    if not isinstance(tags_raw, list) or not all(isinstance(t, str) for t in tags_raw):
        raise fail("tags must be a list of strings")
    labels_raw = obj["labels"]
    if not isinstance(labels_raw, dict) or not labels_raw:
        raise fail("labels must be a non-empty object")
    labels: dict[str, float] = {}
    for name, value in labels_raw.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise fail(f"label {name!r} must be a number")
        value = float(value)
        if not math.isfinite(value):
            raise fail(f"label {name!r} is not finite")
        if not -1.0 <= value <= 1.0:
            warnings.warn(
                f"line {line_no}: label {name!r} of {entry_id!r} is {value}, "
                f"outside [-1, 1]",
                LabelRangeWarning,
                stacklevel=3,
            )
        labels[name] = value
    return ManifestEntry(
        id=entry_id,
        audio_path=audio_path,
        stems_dir=stems_dir,
        tags=frozenset(tags_raw),
        labels=labels,
    )


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    """Parse and validate a JSON-lines manifest, preserving file order."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            entry = _parse_entry(obj, base, line_no)
            if entry.id in seen:
                raise ManifestError(f"line {line_no}: duplicate id {entry.id!r}")
            seen.add(entry.id)
            entries.append(entry)
    if not entries:
        raise ManifestError(f"manifest is empty: {path}")
    return entries
