from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from mitodg import Annotation, Label, Rgb8Image
from mitodg.raster import save_image


@pytest.fixture
def rand_image():
    """Factory: deterministic random RGB image of a given size."""

    def make(width: int = 64, height: int = 64, seed: int = 0) -> Rgb8Image:
        g = np.random.default_rng(seed)
        return Rgb8Image(g.integers(0, 256, (height, width, 3), dtype=np.uint8))

    return make


def tissue_like_image(width: int, height: int, seed: int = 0) -> Rgb8Image:
    """Pinkish H&E-looking raster with dark nuclei blobs."""
    g = np.random.default_rng(seed)
    arr = np.empty((height, width, 3), dtype=np.uint8)
    base = g.normal((220, 180, 205), 12, (height, width, 3))
    yy, xx = np.mgrid[0:height, 0:width]
    for _ in range(max(4, width * height // 8000)):
        cx, cy, r = g.uniform(0, width), g.uniform(0, height), g.uniform(4, 12)
        mask = (xx - cx) ** 2 + (yy - cy) ** 2 < r**2
        base[mask] = g.normal((90, 60, 130), 10, (int(mask.sum()), 3))
    np.clip(base, 0, 255, out=base)
    arr[:] = base.astype(np.uint8)
    return Rgb8Image(arr)


def build_manifest_dir(
    root: Path,
    n_scanners: int = 2,
    images_per_scanner: int = 5,
    image_size: int = 512,
    anns_per_image: int = 3,
    seed: int = 0,
) -> Path:
    """Write a small synthetic dataset (PNGs + manifest.json); returns the
    manifest path."""
    g = np.random.default_rng(seed)
    images, annotations = [], []
    ann_id = 1
    image_id = 1
    for s in range(n_scanners):
        scanner = f"scanner_{chr(ord('A') + s)}"
        for _ in range(images_per_scanner):
            name = f"img_{image_id:03d}.png"
            save_image(tissue_like_image(image_size, image_size, seed=image_id), root / name)
            images.append(
                {
                    "id": image_id,
                    "file_name": name,
                    "width": image_size,
                    "height": image_size,
                    "scanner": scanner,
                }
            )
            for _ in range(anns_per_image):
                half = int(g.integers(18, 26))
                cx = int(g.integers(half, image_size - half))
                cy = int(g.integers(half, image_size - half))
                category = "mitotic_figure" if g.random() < 0.7 else "imposter"
                annotations.append(
                    {
                        "id": ann_id,
                        "image_id": image_id,
                        "bbox": [cx - half, cy - half, cx + half, cy + half],
                        "category": category,
                    }
                )
                ann_id += 1
            image_id += 1
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps({"images": images, "annotations": annotations}))
    return manifest_path


def make_annotation(
    ann_id: int = 1,
    image_id: int = 1,
    box: tuple = (10.0, 20.0, 60.0, 70.0),
    label: Label = Label.MITOTIC_FIGURE,
) -> Annotation:
    x0, y0, x1, y1 = box
    return Annotation(ann_id, image_id, ((x0 + x1) / 2, (y0 + y1) / 2), box, label)
