"""Preview grid: one row per transform kind, one column per strength."""

from __future__ import annotations

import numpy as np

from ..core import Rgb8Image
from ..errors import EmptyInputError
from ..rng import RandomStream
from .transforms import TransformKind, apply_transform

__all__ = ["render_preview_grid"]

_BORDER = 2
_BORDER_VALUE = 255


def render_preview_grid(
    image: Rgb8Image,
    kinds: list[TransformKind],
    strengths: list[float],
    rng: RandomStream,
) -> Rgb8Image:
    """Raster of len(kinds) x len(strengths) transformed cells.

    Cell (r, c) applies kinds[r] at strengths[c] with the child stream
    derived at key r * len(strengths) + c; cells are separated by a 2-px
    border, so the grid is (cols*(w+2)+2) x (rows*(h+2)+2) pixels.
    """
    if len(kinds) == 0 or len(strengths) == 0:
        raise EmptyInputError("preview grid needs at least one kind and one strength")
    w, h = image.width, image.height
    rows, cols = len(kinds), len(strengths)
    grid = np.full(
        (rows * (h + _BORDER) + _BORDER, cols * (w + _BORDER) + _BORDER, 3),
        _BORDER_VALUE,
        dtype=np.uint8,
    )
    for r, kind in enumerate(kinds):
        for c, strength in enumerate(strengths):
            cell = apply_transform(kind, strength, image, rng.derive(r * cols + c))
            y0 = _BORDER + r * (h + _BORDER)
            x0 = _BORDER + c * (w + _BORDER)
            grid[y0 : y0 + h, x0 : x0 + w] = cell.array
    return Rgb8Image(grid)
