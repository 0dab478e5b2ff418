"""Training-data preparation: scanner-aware folds and annotation-centered
patch sampling.

The dataset manifest is a JSON file with top-level ``images`` (id,
file_name, width, height, scanner) and ``annotations`` (id, image_id,
bbox [x_min, y_min, x_max, y_max], category in {"mitotic_figure",
"imposter"}).  Folds rotate per scanner so every image appears in exactly
one test split across the five folds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .core import Annotation, Label, Rgb8Image, crop, shift_annotation
from .errors import (
    EmptySplitError,
    SchemaError,
    TooFewImagesError,
    UnsatisfiableCropError,
)
from .raster import load_image
from .rng import RandomStream

__all__ = [
    "ImageEntry",
    "DatasetManifest",
    "FoldSplit",
    "PatchSpec",
    "load_manifest",
    "make_folds",
    "sample_patch",
]


@dataclass(frozen=True)
class ImageEntry:
    id: int
    file_name: str
    width: int
    height: int
    scanner: str


@dataclass(frozen=True)
class DatasetManifest:
    images: tuple[ImageEntry, ...]
    annotations: tuple[Annotation, ...]
    root: Path = Path(".")

    def __post_init__(self):
        ids = [im.id for im in self.images]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise SchemaError(f"duplicate image ids: {dupes}")
        known = set(ids)
        for ann in self.annotations:
            if ann.image_id not in known:
                raise SchemaError(f"annotation {ann.id} references unknown image_id {ann.image_id}")

    def image_by_id(self, image_id: int) -> ImageEntry:
        for im in self.images:
            if im.id == image_id:
                return im
        raise KeyError(image_id)

    def annotations_of(self, image_id: int) -> list[Annotation]:
        return [a for a in self.annotations if a.image_id == image_id]

    def scanners(self) -> list[str]:
        return sorted({im.scanner for im in self.images})

    def image_path(self, image_id: int) -> Path:
        return self.root / self.image_by_id(image_id).file_name


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise SchemaError(f"{where}: missing field {key!r}")
    return record[key]


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: top level must be an object")
    images = []
    for rec in _require(raw, "images", str(path)):
        where = f"images[{rec.get('id', '?')}]"
        images.append(
            ImageEntry(
                id=int(_require(rec, "id", where)),
                file_name=str(_require(rec, "file_name", where)),
                width=int(_require(rec, "width", where)),
                height=int(_require(rec, "height", where)),
                scanner=str(_require(rec, "scanner", where)),
            )
        )
    annotations = []
    for rec in raw.get("annotations", []):
        where = f"annotations[{rec.get('id', '?')}]"
        bbox = _require(rec, "bbox", where)
        if not (isinstance(bbox, (list, tuple)) and len(bbox) == 4):
            raise SchemaError(f"{where}: bbox must be [x_min, y_min, x_max, y_max]")
        category = _require(rec, "category", where)
        try:
            label = Label(category)
        except ValueError:
            raise SchemaError(f"{where}: unknown category {category!r}") from None
        x0, y0, x1, y1 = (float(v) for v in bbox)
        try:
            annotations.append(
                Annotation(
                    id=int(_require(rec, "id", where)),
                    image_id=int(_require(rec, "image_id", where)),
                    center=((x0 + x1) / 2.0, (y0 + y1) / 2.0),
                    box=(x0, y0, x1, y1),
                    label=label,
                )
            )
        except ValueError as e:
            raise SchemaError(f"{where}: {e}") from None
    return DatasetManifest(tuple(images), tuple(annotations), root=path.parent)


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train: frozenset[int]
    val: frozenset[int]
    test: frozenset[int]

    def to_dict(self) -> dict:
        return {
            "fold_index": self.fold_index,
            "train": sorted(self.train),
            "val": sorted(self.val),
            "test": sorted(self.test),
        }


def make_folds(manifest: DatasetManifest, rng: RandomStream, n_folds: int = 5) -> list[FoldSplit]:
    """Rotating per-scanner folds: shuffle each scanner's images into
    n_folds groups; fold k tests group k, validates group k+1, trains the
    rest.  Deterministic in the stream identity.
    """
    by_scanner: dict[str, list[int]] = {}
    for im in manifest.images:
        by_scanner.setdefault(im.scanner, []).append(im.id)
    groups: dict[str, list[list[int]]] = {}
    for idx, scanner in enumerate(sorted(by_scanner)):
        ids = sorted(by_scanner[scanner])
        if len(ids) < n_folds:
            raise TooFewImagesError(
                f"scanner {scanner!r} has {len(ids)} images, needs >= {n_folds}"
            )
        shuffled = rng.derive(idx).shuffle(ids)
        size, extra = divmod(len(shuffled), n_folds)
        parts, start = [], 0
        for g in range(n_folds):
            stop = start + size + (1 if g < extra else 0)
            parts.append(shuffled[start:stop])
            start = stop
        groups[scanner] = parts

    folds = []
    for k in range(n_folds):
        train: set[int] = set()
        val: set[int] = set()
        test: set[int] = set()
        for parts in groups.values():
            test.update(parts[k])
            val.update(parts[(k + 1) % n_folds])
            for g in range(n_folds):
                if g != k and g != (k + 1) % n_folds:
                    train.update(parts[g])
        folds.append(FoldSplit(k, frozenset(train), frozenset(val), frozenset(test)))
    return folds


@dataclass(frozen=True)
class PatchSpec:
    size: int = 448
    require_full_annotation: bool = True
    stratify_classes: bool = False  # 50/50 class draw instead of uniform over annotations

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"patch size must be >= 1, got {self.size}")


@dataclass
class PatchProvenance:
    image_id: int
    annotation_id: int
    origin: tuple[int, int]
    skipped_images: list[int] = field(default_factory=list)


def _feasible_range(lo_req: float, hi_req: float, size: int, dim: int) -> tuple[int, int]:
    """Integer origins o with o <= lo_req, o + size >= hi_req, 0 <= o <= dim - size."""
    lo = max(0, math.ceil(hi_req) - size)
    hi = min(int(math.floor(lo_req)), dim - size)
    return lo, hi


def sample_patch(
    manifest: DatasetManifest,
    spec: PatchSpec,
    split: set[int],
    rng: RandomStream,
    image_loader=None,
) -> tuple[Rgb8Image, list[Annotation], PatchProvenance]:
    """Draw one training patch.

    An image is drawn uniformly from the split (annotation-free images are
    skipped by redrawing and recorded), one annotation uniformly from the
    image (or 50/50 per class when spec.stratify_classes), and the crop
    origin uniformly over positions keeping that annotation fully inside.
    Neighbor annotations are clipped; any clipped below 25% of its original
    area is dropped.
    """
    if not split:
        raise EmptySplitError("cannot sample from an empty split")
    loader = image_loader or (lambda image_id: load_image(manifest.image_path(image_id)))
    ids = sorted(split)
    skipped: list[int] = []
    image_id = None
    for _ in range(10 * len(ids) + 10):
        candidate = ids[rng.randint(len(ids))]
        if manifest.annotations_of(candidate):
            image_id = candidate
            break
        skipped.append(candidate)
    if image_id is None:
        raise EmptySplitError("no image in the split carries annotations")

    entry = manifest.image_by_id(image_id)
    anns = manifest.annotations_of(image_id)
    if spec.stratify_classes:
        label = (Label.MITOTIC_FIGURE, Label.IMPOSTER)[rng.randint(2)]
        pool = [a for a in anns if a.label == label] or anns
    else:
        pool = anns
    target = pool[rng.randint(len(pool))]

    x0, y0, x1, y1 = target.box
    if spec.require_full_annotation:
        if x1 - x0 > spec.size or y1 - y0 > spec.size:
            raise UnsatisfiableCropError(
                f"annotation {target.id} box {target.box} larger than patch {spec.size}"
            )
        ox_lo, ox_hi = _feasible_range(x0, x1, spec.size, entry.width)
        oy_lo, oy_hi = _feasible_range(y0, y1, spec.size, entry.height)
    else:
        cx, cy = target.center
        ox_lo, ox_hi = _feasible_range(cx, cx, spec.size, entry.width)
        oy_lo, oy_hi = _feasible_range(cy, cy, spec.size, entry.height)
    if ox_hi < ox_lo or oy_hi < oy_lo:
        raise UnsatisfiableCropError(
            f"no feasible origin for annotation {target.id} in image {image_id}"
        )
    ox = ox_lo + rng.randint(ox_hi - ox_lo + 1)
    oy = oy_lo + rng.randint(oy_hi - oy_lo + 1)

    image = loader(image_id)
    if (image.width, image.height) != (entry.width, entry.height):
        raise SchemaError(
            f"image {image_id}: file is {image.width}x{image.height}, "
            f"manifest says {entry.width}x{entry.height}"
        )
    patch = crop(image, (ox, oy), (spec.size, spec.size))

    kept: list[Annotation] = []
    for ann in anns:
        ax0, ay0, ax1, ay1 = ann.box
        cx0, cy0 = max(ax0, ox), max(ay0, oy)
        cx1, cy1 = min(ax1, ox + spec.size), min(ay1, oy + spec.size)
        if cx1 <= cx0 or cy1 <= cy0:
            continue
        clipped_area = (cx1 - cx0) * (cy1 - cy0)
        if ann.id != target.id and clipped_area < 0.25 * ann.area:
            continue
        clipped = Annotation(
            ann.id,
            ann.image_id,
            (min(max(ann.center[0], cx0), cx1), min(max(ann.center[1], cy0), cy1)),
            (cx0, cy0, cx1, cy1),
            ann.label,
        )
        kept.append(shift_annotation(clipped, -ox, -oy))

    return patch, kept, PatchProvenance(image_id, target.id, (ox, oy), skipped)
