from .policy import AugmentationLog, PolicyConfig, augment
from .preview import render_preview_grid
from .stain import (
    StainBasis,
    fancy_pca,
    he_stain_augment,
    od_to_rgb,
    rgb_to_od,
    ruifrok_johnston_basis,
)
from .transforms import ALL_KINDS, TransformKind, apply_transform

__all__ = [
    "ALL_KINDS",
    "AugmentationLog",
    "PolicyConfig",
    "StainBasis",
    "TransformKind",
    "apply_transform",
    "augment",
    "fancy_pca",
    "he_stain_augment",
    "od_to_rgb",
    "render_preview_grid",
    "rgb_to_od",
    "ruifrok_johnston_basis",
]
