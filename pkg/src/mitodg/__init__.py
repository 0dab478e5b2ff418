"""mitodg: deterministic data toolkit for scanner-robust mitosis detection.

Subsystems: seeded single-draw augmentation over a 19-transform pool
(including H&E stain-space math), annotation-centered patch sampling with
per-scanner folds, differential-evolution anchor-scale search, overlapping-
tile inference orchestration, and center-distance F1 evaluation with
confidence-threshold optimization.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .anchors import AnchorConfig, DeParams, anchor_fitness, generate_anchors, optimize_scales
from .augment import (
    ALL_KINDS,
    AugmentationLog,
    PolicyConfig,
    TransformKind,
    apply_transform,
    augment,
    render_preview_grid,
)
from .core import Annotation, DetectionRecord, Label, Rgb8Image, crop
from .evaluation import EvalReport, MatchConfig, match_detections, optimize_threshold
from .rng import RandomStream, derive_stream
from .sampler import DatasetManifest, FoldSplit, PatchSpec, load_manifest, make_folds, sample_patch
from .tiler import TilingConfig, plan_tiles, run_tiled

__all__ = [
    "ALL_KINDS",
    "AnchorConfig",
    "Annotation",
    "AugmentationLog",
    "DatasetManifest",
    "DeParams",
    "DetectionRecord",
    "EvalReport",
    "FoldSplit",
    "KERNEL_BACKEND",
    "Label",
    "MatchConfig",
    "PatchSpec",
    "PolicyConfig",
    "RandomStream",
    "Rgb8Image",
    "TilingConfig",
    "TransformKind",
    "anchor_fitness",
    "apply_transform",
    "augment",
    "crop",
    "derive_stream",
    "generate_anchors",
    "load_manifest",
    "make_folds",
    "match_detections",
    "optimize_scales",
    "optimize_threshold",
    "plan_tiles",
    "render_preview_grid",
    "run_tiled",
    "sample_patch",
]
