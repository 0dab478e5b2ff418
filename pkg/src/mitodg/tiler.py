"""Overlapping-tile inference orchestration.

Large rasters are cut into overlapping fixed-size tiles, each tile goes to a
detector callable (tile image -> detections in tile coordinates), results
are translated back into the slide frame, and duplicates seen by adjacent
tiles are merged by greedy same-class center suppression.  The merge is a
deterministic reduction over a totally ordered list, so worker count and
tile order never change the output.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Protocol

import numpy as np

from . import _kernels
from .core import Annotation, DetectionRecord, Label, Rgb8Image, crop
from .errors import DetectorFailureError, ImageSmallerThanTileError
from .rng import RandomStream

__all__ = [
    "TilingConfig",
    "Detector",
    "plan_tiles",
    "run_tiled",
    "dedup_by_center",
    "make_ground_truth_detector",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TilingConfig:
    tile: int = 448
    overlap: int = 64

    def __post_init__(self):
        if not 0 <= self.overlap < self.tile:
            raise ValueError(f"need 0 <= overlap < tile, got {self.overlap} / {self.tile}")


class Detector(Protocol):
    """Stateless per-tile detector: pure in the tile content."""

    def __call__(self, tile: Rgb8Image) -> list[DetectionRecord]: ...


def _axis_origins(dim: int, tile: int, stride: int) -> list[int]:
    origins = list(range(0, max(dim - tile, 0) + 1, stride))
    last = dim - tile
    if origins[-1] != last:
        origins.append(last)
    return origins


def plan_tiles(image_size: tuple[int, int], config: TilingConfig) -> list[tuple[int, int]]:
    """Tile origins covering every pixel; final origin per axis clamped to
    dim - tile.  Raises when the image is smaller than one tile."""
    w, h = image_size
    if w < config.tile or h < config.tile:
        raise ImageSmallerThanTileError(f"image {w}x{h} smaller than tile {config.tile}")
    stride = config.tile - config.overlap
    xs = _axis_origins(w, config.tile, stride)
    ys = _axis_origins(h, config.tile, stride)
    return [(x, y) for y in ys for x in xs]


def _sort_key(d: DetectionRecord):
    return (-d.confidence, d.center[1], d.center[0], d.label.value, d.box)


def dedup_by_center(records: list[DetectionRecord], radius: float) -> list[DetectionRecord]:
    """Greedy same-class suppression: walk records by confidence (ties by
    (y, x)); drop any whose center lies within ``radius`` of a kept record
    of the same class."""
    if not records:
        return []
    ordered = sorted(records, key=_sort_key)
    cx = np.array([d.center[0] for d in ordered], dtype=np.float64)
    cy = np.array([d.center[1] for d in ordered], dtype=np.float64)
    label_codes = {label: i for i, label in enumerate(Label)}
    labels = np.array([label_codes[d.label] for d in ordered], dtype=np.int64)
    keep = _kernels.suppress_by_center(cx, cy, labels, float(radius))
    return [d for d, k in zip(ordered, keep) if k]


def _reflect_pad(image: Rgb8Image, tile: int) -> Rgb8Image:
    pad_x = max(0, tile - image.width)
    pad_y = max(0, tile - image.height)
    padded = np.pad(image.array, ((0, pad_y), (0, pad_x), (0, 0)), mode="reflect")
    return Rgb8Image(padded)


def run_tiled(
    image: Rgb8Image,
    detector: Callable[[Rgb8Image], list[DetectionRecord]],
    config: TilingConfig,
    dedup_radius: float = 30.0,
    workers: int = 1,
) -> list[DetectionRecord]:
    """Detect over all tiles and merge into slide-frame records.

    Images smaller than the tile are reflect-padded for detection and any
    detection centered in the padding is discarded.  Output is sorted by
    confidence descending, ties by (y, x); no same-class pair within
    dedup_radius survives.
    """
    orig_w, orig_h = image.width, image.height
    if orig_w < config.tile or orig_h < config.tile:
        log.info("reflect-padding %dx%d image to tile size %d", orig_w, orig_h, config.tile)
        image = _reflect_pad(image, config.tile)
    origins = plan_tiles((image.width, image.height), config)

    def detect_at(origin: tuple[int, int]) -> list[DetectionRecord]:
        tile_img = crop(image, origin, (config.tile, config.tile))
        try:
            found = detector(tile_img)
        except Exception as e:
            raise DetectorFailureError(origin, e) from e
        ox, oy = origin
        out = []
        for d in found:
            cx, cy = d.center
            x0, y0, x1, y1 = d.box
            out.append(
                replace(d, center=(cx + ox, cy + oy), box=(x0 + ox, y0 + oy, x1 + ox, y1 + oy))
            )
        return out

    if workers <= 1:
        per_tile = [detect_at(o) for o in origins]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_tile = list(pool.map(detect_at, origins))

    merged = [d for tile in per_tile for d in tile]
    merged = [d for d in merged if 0 <= d.center[0] <= orig_w and 0 <= d.center[1] <= orig_h]
    return dedup_by_center(merged, dedup_radius)


def make_ground_truth_detector(
    annotations: list[Annotation],
    image: Rgb8Image,
    config: TilingConfig,
    image_id: int | None = None,
    rng: RandomStream | None = None,
    dropout: float = 0.0,
    false_positive_rate: float = 0.0,
    center_jitter: float = 0.0,
):
    """Mock detector over known ground truth, for end-to-end runs.

    Recovers the tile origin from the tile's pixel content (so it remains a
    pure function of the tile) and echoes the annotations falling inside.
    With ``rng`` and nonzero knobs it degrades the echo: each annotation is
    dropped with probability ``dropout`` (decided once, not per tile), its
    center jittered by N(0, center_jitter) and its confidence ~ U(0.5, 1);
    false positives are sprinkled at ``false_positive_rate`` per annotation.
    The exact echo reports confidence 1.0.
    """
    if image.width < config.tile or image.height < config.tile:
        image = _reflect_pad(image, config.tile)
    origins = plan_tiles((image.width, image.height), config)
    tile_of_content: dict[bytes, tuple[int, int]] = {}
    for origin in origins:
        tile_img = crop(image, origin, (config.tile, config.tile))
        tile_of_content.setdefault(tile_img.array.tobytes(), origin)

    anns = sorted(annotations, key=lambda a: a.id)
    if image_id is None:
        image_id = anns[0].image_id if anns else 0
    exact = rng is None or (dropout == 0.0 and false_positive_rate == 0.0 and center_jitter == 0.0)
    records: list[DetectionRecord] = []
    if exact:
        for ann in anns:
            records.append(
                DetectionRecord(image_id, ann.center, ann.box, ann.label, 1.0)
            )
    else:
        for k, ann in enumerate(anns):
            ann_rng = rng.derive(k)
            if ann_rng.uniform() < dropout:
                continue
            dx = ann_rng.normal(center_jitter) if center_jitter > 0 else 0.0
            dy = ann_rng.normal(center_jitter) if center_jitter > 0 else 0.0
            x0, y0, x1, y1 = ann.box
            conf = ann_rng.uniform(0.5, 1.0)
            records.append(
                DetectionRecord(
                    image_id,
                    (ann.center[0] + dx, ann.center[1] + dy),
                    (x0 + dx, y0 + dy, x1 + dx, y1 + dy),
                    ann.label,
                    conf,
                )
            )
        n_fp = int(round(false_positive_rate * len(anns)))
        fp_rng = rng.derive(1 << 32)
        for _ in range(n_fp):
            cx = fp_rng.uniform(25.0, image.width - 25.0)
            cy = fp_rng.uniform(25.0, image.height - 25.0)
            records.append(
                DetectionRecord(
                    image_id,
                    (cx, cy),
                    (cx - 25.0, cy - 25.0, cx + 25.0, cy + 25.0),
                    Label.MITOTIC_FIGURE,
                    fp_rng.uniform(0.1, 0.9),
                )
            )

    def detect(tile: Rgb8Image) -> list[DetectionRecord]:
        origin = tile_of_content.get(tile.array.tobytes())
        if origin is None:
            return []
        ox, oy = origin
        out = []
        for d in records:
            cx, cy = d.center
            if ox <= cx < ox + config.tile and oy <= cy < oy + config.tile:
                x0, y0, x1, y1 = d.box
                out.append(
                    replace(d, center=(cx - ox, cy - oy), box=(x0 - ox, y0 - oy, x1 - ox, y1 - oy))
                )
        return out

    return detect
