"""Stable file formats: detection JSON-lines, canonical JSON, atomic writes.

Detection streams are line-oriented so arbitrarily many records pass
through without whole-file buffering; one record per line:
``{image_id, cx, cy, x_min, y_min, x_max, y_max, label, confidence}``.
All JSON emitted by the toolkit is canonical (sorted keys, fixed
separators) so identical runs produce byte-identical artifacts.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Iterable

from .core import DetectionRecord, Label
from .errors import SchemaError

__all__ = [
    "dump_json",
    "atomic_write_text",
    "write_detections_jsonl",
    "read_detections_jsonl",
]


def dump_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":")) + "\n"


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write-to-temp then rename, so artifacts are never half-written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def detection_to_record(det: DetectionRecord) -> dict:
    x0, y0, x1, y1 = det.box
    return {
        "image_id": det.image_id,
        "cx": det.center[0],
        "cy": det.center[1],
        "x_min": x0,
        "y_min": y0,
        "x_max": x1,
        "y_max": y1,
        "label": det.label.value,
        "confidence": det.confidence,
    }


def write_detections_jsonl(dets: Iterable[DetectionRecord], path: str | Path) -> None:
    lines = [dump_json(detection_to_record(d)).rstrip("\n") for d in dets]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def record_to_detection(rec: dict, where: str = "detections") -> DetectionRecord:
    try:
        return DetectionRecord(
            image_id=int(rec["image_id"]),
            center=(float(rec["cx"]), float(rec["cy"])),
            box=(
                float(rec["x_min"]),
                float(rec["y_min"]),
                float(rec["x_max"]),
                float(rec["y_max"]),
            ),
            label=Label(rec["label"]),
            confidence=float(rec["confidence"]),
        )
    except (KeyError, ValueError) as e:
        raise SchemaError(f"{where}: bad detection record {rec!r}: {e}") from None


def read_detections_jsonl(path: str | Path) -> list[DetectionRecord]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(f"{path}:{lineno}: not valid JSON ({e})") from None
            out.append(record_to_detection(rec, where=f"{path}:{lineno}"))
    return out
