"""Benchmark the numba kernels against the pure-numpy fallback.

Runs every hot kernel on representative inputs with both backends and
prints per-call timings plus the speedup.  Results are bit-identical by
construction; this only measures time.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mitodg._kernels import numpy_impl

try:
    from mitodg._kernels import numba_impl
except ImportError:
    numba_impl = None

from mitodg.augment.transforms import _clahe_luts, _gaussian_taps


def timeit(fn, args, repeats):
    fn(*args)  # warmup (and JIT compile)
    start = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - start) / repeats


def build_cases():
    g = np.random.default_rng(0)
    channel = g.integers(0, 256, (448, 448), dtype=np.uint8)
    luts, tile_h, tile_w = _clahe_luts(channel, 3.0)
    img = g.integers(0, 256, (448, 448, 3), dtype=np.uint8)
    taps = _gaussian_taps(2.0)

    n_gt = 500
    cx = g.uniform(100, 4000, n_gt)
    cy = g.uniform(100, 4000, n_gt)
    w = g.uniform(20, 100, n_gt)
    boxes = np.stack([cx - w / 2, cy - w / 2, cx + w / 2, cy + w / 2], axis=1)
    strides = np.array([8.0, 16.0, 32.0, 64.0, 128.0])
    bases = np.array([32.0, 64.0, 128.0, 256.0, 512.0])
    ratios = np.array([1.0])
    scales = np.array([0.781, 1.435, 1.578])
    scale_sets = np.sort(g.uniform(0.4, 3.0, (2000, 3)), axis=1)

    n_det = 3000
    dx = g.uniform(0, 5000, n_det)
    dy = g.uniform(0, 5000, n_det)
    labels = g.integers(0, 2, n_det).astype(np.int64)

    return [
        ("clahe_interpolate 448x448", "clahe_interpolate", (channel, luts, tile_h, tile_w)),
        ("separable_blur 448x448x3 sigma=2", "separable_blur_u8", (img, taps)),
        ("mean_max_iou 500 boxes", "mean_max_iou", (boxes, strides, bases, ratios, scales)),
        (
            "mean_max_iou_batch 2000x500",
            "mean_max_iou_batch",
            (boxes, strides, bases, ratios, scale_sets),
        ),
        ("suppress_by_center 3000 dets", "suppress_by_center", (dx, dy, labels, 30.0)),
    ]


def main() -> None:
    parser = argparse.ArgumentParser(description="Compare numba and numpy kernel backends")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"{'kernel':40s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for label, name, case_args in build_cases():
        t_np = timeit(getattr(numpy_impl, name), case_args, args.repeats)
        if numba_impl is None:
            print(f"{label:40s} {t_np * 1e3:9.2f} ms {'n/a':>12s} {'n/a':>9s}")
            continue
        t_nb = timeit(getattr(numba_impl, name), case_args, args.repeats)
        out_np = getattr(numpy_impl, name)(*case_args)
        out_nb = getattr(numba_impl, name)(*case_args)
        assert np.array_equal(np.asarray(out_np), np.asarray(out_nb)), f"{name}: backends disagree"
        print(f"{label:40s} {t_np * 1e3:9.2f} ms {t_nb * 1e3:9.2f} ms {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
