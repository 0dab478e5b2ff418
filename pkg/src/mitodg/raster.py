"""Raster file I/O (PNG / JPEG / strip TIFF) with ingestion conversion.

Anything Pillow can open is accepted; on load the pixels are normalized to
8-bit RGB: alpha is dropped, 16-bit samples are right-shifted by 8, grayscale
is replicated across channels.  Pyramidal whole-slide formats are out of
scope.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .core import Rgb8Image

__all__ = ["load_image", "save_image"]


def _to_rgb8(arr: np.ndarray) -> np.ndarray:
    if arr.dtype == np.uint16:
        arr = (arr >> 8).astype(np.uint8)
    elif arr.dtype == np.int32:  # Pillow mode "I"
        arr = np.clip(arr >> 8, 0, 255).astype(np.uint8)
    elif arr.dtype != np.uint8:
        raise ValueError(f"unsupported sample dtype {arr.dtype}")
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    elif arr.shape[2] == 4:
        arr = arr[:, :, :3]
    return arr


def load_image(path: str | Path) -> Rgb8Image:
    with Image.open(path) as im:
        if im.mode in ("P", "CMYK", "YCbCr", "LAB", "HSV"):
            im = im.convert("RGB")
        arr = np.asarray(im)
    return Rgb8Image(np.ascontiguousarray(_to_rgb8(arr)))


def save_image(image: Rgb8Image, path: str | Path, **save_kwargs) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image.array, mode="RGB").save(path, **save_kwargs)
