"""Framed-stdio worker for foreign-language callers.

Hot-path operations (augment, sample_patch, optimize_threshold) are exposed
over a persistent subprocess so a non-Python training loop pays process
startup once, not per call.  Pixel buffers cross the boundary as raw bytes,
never re-encoded.

Frame layout (both directions):

    u32 LE header length | header JSON | u32 LE payload length | payload

Request headers carry ``op`` plus op-specific fields; responses carry
``ok`` and either results or ``{"error": <exception name>, "message": ...}``.
Ops: "ping", "augment", "sample_patch", "optimize_threshold", "shutdown".
Annotations and detections use the same field names as the manifest and
detection JSONL schemas.

A client may pass a writable directory as ``scratch`` in its ping; large
response payloads are then written there as files (one kernel read for the
caller instead of a dozen pipe chunks) and announced via ``payload_file`` /
``payload_file_len`` in the header, with an empty inline payload.  The
caller deletes each file after reading it.
"""

from __future__ import annotations

import io
import json
import struct
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .augment import PolicyConfig, augment
from .core import Annotation, Label, Rgb8Image
from .errors import ShapeError, ToolkitError
from .evaluation import MatchConfig, optimize_threshold
from .io_formats import record_to_detection
from .rng import RandomStream
from .sampler import PatchSpec, load_manifest, sample_patch

__all__ = ["serve", "main"]


def _read_exact(stream, n: int) -> bytearray:
    buf = bytearray(n)
    view = memoryview(buf)
    got = 0
    while got < n:
        if hasattr(stream, "readinto"):
            read = stream.readinto(view[got:])
            if not read:
                raise EOFError("peer closed the stream mid-frame")
            got += read
        else:
            chunk = stream.read(n - got)
            if not chunk:
                raise EOFError("peer closed the stream mid-frame")
            view[got : got + len(chunk)] = chunk
            got += len(chunk)
    return buf


def _read_frame(stream) -> tuple[dict, bytes] | None:
    head_len_bytes = stream.read(4)
    if not head_len_bytes:
        return None  # clean EOF between frames
    if len(head_len_bytes) < 4:
        head_len_bytes += _read_exact(stream, 4 - len(head_len_bytes))
    (head_len,) = struct.unpack("<I", head_len_bytes)
    header = json.loads(_read_exact(stream, head_len))
    (payload_len,) = struct.unpack("<I", _read_exact(stream, 4))
    payload = _read_exact(stream, payload_len) if payload_len else b""
    return header, payload


def _write_frame(stream, header: dict, payload=b"") -> None:
    head = json.dumps(header, separators=(",", ":")).encode()
    if isinstance(payload, np.ndarray):
        payload = memoryview(payload).cast("B")  # no tobytes copy
    stream.write(struct.pack("<I", len(head)))
    stream.write(head)
    stream.write(struct.pack("<I", len(payload)))
    if len(payload):
        stream.write(payload)
    stream.flush()


def _annotation_from_record(rec: dict) -> Annotation:
    x0, y0, x1, y1 = (float(v) for v in rec["bbox"])
    center = rec.get("center")
    cx, cy = (float(center[0]), float(center[1])) if center else ((x0 + x1) / 2, (y0 + y1) / 2)
    return Annotation(int(rec["id"]), int(rec.get("image_id", 0)), (cx, cy), (x0, y0, x1, y1), Label(rec["category"]))


def _annotation_to_record(ann: Annotation) -> dict:
    return {
        "id": ann.id,
        "image_id": ann.image_id,
        "bbox": list(ann.box),
        "center": list(ann.center),
        "category": ann.label.value,
    }


def _op_augment(header: dict, payload: bytes) -> tuple[dict, bytes]:
    width = int(header["width"])
    height = int(header["height"])
    if len(payload) != width * height * 3:
        raise ShapeError(
            f"buffer is {len(payload)} bytes, expected {width}x{height}x3 = {width * height * 3}"
        )
    image = Rgb8Image(np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3))
    boxes = [_annotation_from_record(r) for r in header.get("boxes", [])]
    policy = PolicyConfig.from_dict(header.get("policy", {}))
    rng = RandomStream(int(header["seed"]))
    start = time.perf_counter_ns()
    out, out_boxes, log = augment(image, boxes, policy, rng)
    compute_ns = time.perf_counter_ns() - start
    reply = {
        "ok": True,
        "width": out.width,
        "height": out.height,
        "boxes": [_annotation_to_record(b) for b in out_boxes],
        "log": log.to_dict(),
        "compute_ns": compute_ns,
    }
    return reply, out.array


def _op_sample_patch(header: dict, payload: bytes) -> tuple[dict, bytes]:
    manifest = load_manifest(header["manifest"])
    spec_rec = header.get("spec", {})
    spec = PatchSpec(
        size=int(spec_rec.get("size", 448)),
        require_full_annotation=bool(spec_rec.get("require_full_annotation", True)),
        stratify_classes=bool(spec_rec.get("stratify_classes", False)),
    )
    split = set(int(v) for v in header["split"])
    rng = RandomStream(int(header["seed"]))
    patch, anns, prov = sample_patch(manifest, spec, split, rng)
    reply = {
        "ok": True,
        "width": patch.width,
        "height": patch.height,
        "annotations": [_annotation_to_record(a) for a in anns],
        "provenance": {
            "image_id": prov.image_id,
            "annotation_id": prov.annotation_id,
            "origin": list(prov.origin),
            "skipped_images": prov.skipped_images,
        },
    }
    return reply, patch.array


def _op_optimize_threshold(header: dict, payload: bytes) -> tuple[dict, bytes]:
    dets = [record_to_detection(r, where="serve.optimize_threshold") for r in header["detections"]]
    gts = [_annotation_from_record(r) for r in header["ground_truth"]]
    config = MatchConfig(radius=float(header.get("radius", 30.0)))
    report = optimize_threshold(dets, gts, config)
    return {"ok": True, "report": report.to_dict()}, b""


_OPS = {
    "augment": _op_augment,
    "sample_patch": _op_sample_patch,
    "optimize_threshold": _op_optimize_threshold,
}


def _grow_pipes(*streams) -> None:
    """Best-effort: enlarge the stdio pipes so a full image buffer crosses
    in one kernel round trip (Linux F_SETPIPE_SZ)."""
    try:
        import fcntl

        setpipe_sz = getattr(fcntl, "F_SETPIPE_SZ", 1031)
        for stream in streams:
            try:
                fcntl.fcntl(stream.fileno(), setpipe_sz, 1 << 20)
            except (OSError, ValueError, io.UnsupportedOperation):
                pass
    except ImportError:
        pass


_PAYLOAD_FILE_MIN = 1 << 16


def _payload_nbytes(payload) -> int:
    return payload.nbytes if isinstance(payload, np.ndarray) else len(payload)


def serve(stdin=None, stdout=None) -> int:
    """Serve requests until shutdown or EOF; returns an exit code."""
    if stdin is None and stdout is None:
        _grow_pipes(sys.stdin.buffer, sys.stdout.buffer)
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    scratch: Path | None = None
    payload_counter = 0
    while True:
        frame = _read_frame(stdin)
        if frame is None:
            return 0
        header, payload = frame
        op = header.get("op")
        if op == "shutdown":
            _write_frame(stdout, {"ok": True})
            return 0
        if op == "ping":
            requested = header.get("scratch")
            if requested:
                candidate = Path(requested)
                scratch = candidate if candidate.is_dir() else None
            _write_frame(
                stdout,
                {"ok": True, "version": __version__, "scratch": str(scratch) if scratch else None},
            )
            continue
        handler = _OPS.get(op)
        if handler is None:
            _write_frame(stdout, {"ok": False, "error": "UnknownOp", "message": f"unknown op {op!r}"})
            continue
        try:
            reply, out_payload = handler(header, payload)
        except (ToolkitError, KeyError, ValueError) as e:
            _write_frame(
                stdout,
                {"ok": False, "error": type(e).__name__, "message": str(e)},
            )
            continue
        nbytes = _payload_nbytes(out_payload)
        if scratch is not None and nbytes > _PAYLOAD_FILE_MIN:
            payload_counter += 1
            name = f"payload-{payload_counter}.bin"
            data = memoryview(out_payload).cast("B") if isinstance(out_payload, np.ndarray) else out_payload
            with open(scratch / name, "wb") as fh:
                fh.write(data)
            reply = {**reply, "payload_file": name, "payload_file_len": nbytes}
            out_payload = b""
        _write_frame(stdout, reply, out_payload)


def main() -> int:
    return serve()


if __name__ == "__main__":
    sys.exit(main())
