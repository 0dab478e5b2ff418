"""Shared domain types: image buffers, annotations, detections.

Images are strictly 8-bit RGB, held row-major as an (h, w, 3) uint8 numpy
array.  Richer inputs are converted on ingestion (alpha dropped, 16-bit
right-shifted by 8); see :mod:`mitodg.raster`.  All types here are immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import OutOfBoundsError

__all__ = ["Label", "Rgb8Image", "Annotation", "DetectionRecord", "crop"]


class Label(str, Enum):
    MITOTIC_FIGURE = "mitotic_figure"
    IMPOSTER = "imposter"


class Rgb8Image:
    """Owned 8-bit 3-channel raster.

    Wraps a C-contiguous (height, width, 3) uint8 array.  The wrapper never
    mutates the array; treat instances as immutable.
    """

    __slots__ = ("array",)

    def __init__(self, array: np.ndarray):
        arr = np.ascontiguousarray(array)
        if arr.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {arr.dtype}")
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        self.array = arr

    @property
    def width(self) -> int:
        return self.array.shape[1]

    @property
    def height(self) -> int:
        return self.array.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        """(width, height)"""
        return self.width, self.height

    def copy(self) -> "Rgb8Image":
        return Rgb8Image(self.array.copy())

    def __eq__(self, other) -> bool:
        return isinstance(other, Rgb8Image) and np.array_equal(self.array, other.array)

    def __repr__(self) -> str:
        return f"Rgb8Image({self.width}x{self.height})"


@dataclass(frozen=True)
class Annotation:
    """Labeled point-plus-box on a slide."""

    id: int
    image_id: int
    center: tuple[float, float]            # (x, y) in slide frame
    box: tuple[float, float, float, float]  # (x_min, y_min, x_max, y_max)
    label: Label

    def __post_init__(self):
        x0, y0, x1, y1 = self.box
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"annotation {self.id}: box not well-ordered: {self.box}")
        cx, cy = self.center
        if not (x0 <= cx <= x1 and y0 <= cy <= y1):
            raise ValueError(f"annotation {self.id}: center {self.center} outside box {self.box}")

    @property
    def area(self) -> float:
        x0, y0, x1, y1 = self.box
        return (x1 - x0) * (y1 - y0)


@dataclass(frozen=True)
class DetectionRecord:
    """One predicted object in slide coordinates."""

    image_id: int
    center: tuple[float, float]
    box: tuple[float, float, float, float]
    label: Label
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        x0, y0, x1, y1 = self.box
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"detection box not well-ordered: {self.box}")


def crop(image: Rgb8Image, origin: tuple[int, int], size: tuple[int, int]) -> Rgb8Image:
    """Copy the window at ``origin`` with ``size`` = (w, h) out of ``image``.

    Output pixel (i, j) equals input pixel (origin_x + i, origin_y + j).
    """
    x, y = origin
    w, h = size
    if w < 1 or h < 1:
        raise OutOfBoundsError(f"crop size must be positive, got {size}")
    if x < 0 or y < 0 or x + w > image.width or y + h > image.height:
        raise OutOfBoundsError(
            f"crop {origin}+{size} exceeds image {image.width}x{image.height}"
        )
    return Rgb8Image(image.array[y : y + h, x : x + w].copy())


def shift_annotation(ann: Annotation, dx: float, dy: float) -> Annotation:
    """Translate an annotation into a new frame (e.g. slide -> patch)."""
    x0, y0, x1, y1 = ann.box
    cx, cy = ann.center
    return replace(
        ann,
        center=(cx + dx, cy + dy),
        box=(x0 + dx, y0 + dy, x1 + dx, y1 + dy),
    )
