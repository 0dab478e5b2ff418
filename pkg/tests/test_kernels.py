"""Bit-parity between the numba and numpy kernel backends, plus kernel
correctness against brute-force oracles."""

import numpy as np
import pytest

from mitodg._kernels import numpy_impl

try:
    from mitodg._kernels import numba_impl
except ImportError:  # pragma: no cover
    numba_impl = None

needs_numba = pytest.mark.skipif(numba_impl is None, reason="numba unavailable")


def _rand_luts(g, n_ty, n_tx):
    return g.integers(0, 256, (n_ty, n_tx, 256), dtype=np.uint8)


@needs_numba
@pytest.mark.parametrize("shape", [(64, 64), (50, 37), (8, 8), (3, 200)])
def test_clahe_interpolate_parity(shape):
    g = np.random.default_rng(1)
    channel = g.integers(0, 256, shape, dtype=np.uint8)
    tile_h = max(1, -(-shape[0] // 8))
    tile_w = max(1, -(-shape[1] // 8))
    n_ty = -(-shape[0] // tile_h)
    n_tx = -(-shape[1] // tile_w)
    luts = _rand_luts(g, n_ty, n_tx)
    a = numba_impl.clahe_interpolate(channel, luts, tile_h, tile_w)
    b = numpy_impl.clahe_interpolate(channel, luts, tile_h, tile_w)
    assert np.array_equal(a, b)


@needs_numba
@pytest.mark.parametrize("sigma", [0.3, 1.0, 2.0])
def test_blur_parity(sigma):
    from mitodg.augment.transforms import _gaussian_taps

    g = np.random.default_rng(2)
    img = g.integers(0, 256, (41, 53, 3), dtype=np.uint8)
    taps = _gaussian_taps(sigma)
    assert np.array_equal(
        numba_impl.separable_blur_u8(img, taps), numpy_impl.separable_blur_u8(img, taps)
    )


def test_blur_against_dense_oracle():
    # replicate-padded separable blur equals scipy's dense correlation
    from scipy import ndimage

    from mitodg import _kernels
    from mitodg.augment.transforms import _gaussian_taps

    g = np.random.default_rng(3)
    img = g.integers(0, 256, (32, 32, 3), dtype=np.uint8)
    taps = _gaussian_taps(1.4)
    out = _kernels.separable_blur_u8(img, taps)
    expect = np.empty_like(img, dtype=np.float64)
    for c in range(3):
        expect[..., c] = ndimage.correlate(
            img[..., c].astype(np.float64), np.outer(taps, taps), mode="nearest"
        )
    expect = np.floor(np.clip(expect, 0, 255) + 0.5)
    assert np.abs(out.astype(np.float64) - expect).max() <= 1.0


@needs_numba
def test_mean_max_iou_parity():
    g = np.random.default_rng(4)
    for _ in range(20):
        n = int(g.integers(1, 40))
        cx = g.uniform(0, 2000, n)
        cy = g.uniform(0, 2000, n)
        w = g.uniform(10, 120, n)
        h = g.uniform(10, 120, n)
        boxes = np.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], axis=1)
        strides = np.array([8.0, 16.0, 32.0, 64.0, 128.0])
        bases = np.array([32.0, 64.0, 128.0, 256.0, 512.0])
        ratios = np.array([1.0])
        scales = np.sort(g.uniform(0.4, 3.0, 3))
        a = numba_impl.mean_max_iou(boxes, strides, bases, ratios, scales)
        b = numpy_impl.mean_max_iou(boxes, strides, bases, ratios, scales)
        assert a == b
        batch = np.sort(g.uniform(0.4, 3.0, (7, 3)), axis=1)
        av = numba_impl.mean_max_iou_batch(boxes, strides, bases, ratios, batch)
        bv = numpy_impl.mean_max_iou_batch(boxes, strides, bases, ratios, batch)
        assert np.array_equal(av, bv)


@needs_numba
def test_suppress_parity():
    g = np.random.default_rng(5)
    for _ in range(20):
        n = int(g.integers(0, 120))
        cx = g.uniform(0, 500, n)
        cy = g.uniform(0, 500, n)
        labels = g.integers(0, 2, n).astype(np.int64)
        a = numba_impl.suppress_by_center(cx, cy, labels, 30.0)
        b = numpy_impl.suppress_by_center(cx, cy, labels, 30.0)
        assert np.array_equal(a, b)


def test_suppress_semantics():
    from mitodg import _kernels

    cx = np.array([0.0, 10.0, 100.0, 0.0])
    cy = np.array([0.0, 0.0, 0.0, 5.0])
    labels = np.array([0, 0, 0, 1], dtype=np.int64)
    keep = _kernels.suppress_by_center(cx, cy, labels, 30.0)
    # second point within 30 of the first (same class) goes; the far point
    # and the other-class point stay
    assert keep.tolist() == [True, False, True, True]
