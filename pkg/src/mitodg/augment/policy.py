"""Single-draw random augmentation policy.

Per sample the pipeline is fixed: optional horizontal flip, optional
vertical flip, a uniform random permutation of the RGB channels, then
exactly one transform drawn uniformly from the pool at a strength drawn
from U(0, max_strength).  Every random choice lands in the returned
:class:`AugmentationLog`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..core import Annotation, Rgb8Image
from ..errors import EmptyPoolError, OutOfBoundsError, PolicyParseError
from ..rng import RandomStream
from .transforms import ALL_KINDS, TransformKind, apply_transform

__all__ = ["PolicyConfig", "AugmentationLog", "augment"]

_PERMS3 = tuple(itertools.permutations((0, 1, 2)))


@dataclass(frozen=True)
class PolicyConfig:
    pool: tuple[TransformKind, ...] = ALL_KINDS
    max_strength: float = 1.0
    flip_h_prob: float = 0.5
    flip_v_prob: float = 0.5
    channel_permute: bool = True

    def __post_init__(self):
        if len(self.pool) == 0:
            raise EmptyPoolError("policy pool must name at least one transform")
        if not 0.0 < self.max_strength <= 1.0:
            raise ValueError(f"max_strength {self.max_strength} outside (0, 1]")
        for name, p in (("flip_h_prob", self.flip_h_prob), ("flip_v_prob", self.flip_v_prob)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} {p} outside [0, 1]")
        object.__setattr__(self, "pool", tuple(TransformKind(k) for k in self.pool))

    def to_dict(self) -> dict:
        return {
            "pool": [k.value for k in self.pool],
            "max_strength": self.max_strength,
            "flip_h_prob": self.flip_h_prob,
            "flip_v_prob": self.flip_v_prob,
            "channel_permute": self.channel_permute,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyConfig":
        data = dict(data)
        if "pool" in data:
            pool = []
            for name in data["pool"]:
                try:
                    pool.append(TransformKind(name))
                except ValueError:
                    raise PolicyParseError(f"unknown transform {name!r}") from None
            data["pool"] = tuple(pool)
        try:
            return cls(**data)
        except TypeError as e:
            raise PolicyParseError(str(e)) from None


@dataclass
class AugmentationLog:
    """Provenance of every random choice made for one sample."""

    flipped_h: bool
    flipped_v: bool
    channel_perm: tuple[int, int, int]
    chosen: TransformKind
    strength: float
    inner_draws: list[tuple[str, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "flipped_h": self.flipped_h,
            "flipped_v": self.flipped_v,
            "channel_perm": list(self.channel_perm),
            "chosen": self.chosen.value,
            "strength": self.strength,
            "inner_draws": [[name, value] for name, value in self.inner_draws],
        }


def _flip_box_h(ann: Annotation, width: int) -> Annotation:
    x0, y0, x1, y1 = ann.box
    cx, cy = ann.center
    return Annotation(ann.id, ann.image_id, (width - cx, cy), (width - x1, y0, width - x0, y1), ann.label)


def _flip_box_v(ann: Annotation, height: int) -> Annotation:
    x0, y0, x1, y1 = ann.box
    cx, cy = ann.center
    return Annotation(ann.id, ann.image_id, (cx, height - cy), (x0, height - y1, x1, height - y0), ann.label)


def augment(
    image: Rgb8Image,
    boxes: list[Annotation],
    policy: PolicyConfig,
    rng: RandomStream,
) -> tuple[Rgb8Image, list[Annotation], AugmentationLog]:
    """Run the full per-sample pipeline; see module docstring for the order.

    Boxes are reflected by flips and untouched by photometric kinds and by
    Cutout.  Deterministic in (image, boxes, policy, stream identity).
    """
    if len(policy.pool) == 0:
        raise EmptyPoolError("policy pool is empty")
    w, h = image.width, image.height
    for ann in boxes:
        x0, y0, x1, y1 = ann.box
        if x0 < 0 or y0 < 0 or x1 > w or y1 > h:
            raise OutOfBoundsError(f"annotation {ann.id} box {ann.box} outside {w}x{h} image")

    arr = image.array
    out_boxes = list(boxes)

    flipped_h = rng.uniform() < policy.flip_h_prob
    flipped_v = rng.uniform() < policy.flip_v_prob
    if flipped_h:
        arr = arr[:, ::-1]
        out_boxes = [_flip_box_h(b, w) for b in out_boxes]
    if flipped_v:
        arr = arr[::-1]
        out_boxes = [_flip_box_v(b, h) for b in out_boxes]

    if policy.channel_permute:
        perm = _PERMS3[rng.randint(6)]
        arr = arr[:, :, perm]
    else:
        perm = (0, 1, 2)

    chosen = policy.pool[rng.randint(len(policy.pool))]
    strength = rng.uniform(0.0, policy.max_strength)

    inner: list[tuple[str, float]] = []
    out = apply_transform(chosen, strength, Rgb8Image(np.ascontiguousarray(arr)), rng, draw_log=inner)
    log = AugmentationLog(
        flipped_h=bool(flipped_h),
        flipped_v=bool(flipped_v),
        channel_perm=tuple(perm),
        chosen=chosen,
        strength=float(strength),
        inner_draws=inner,
    )
    return out, out_boxes, log
