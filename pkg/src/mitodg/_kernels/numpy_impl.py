"""Numpy backend: vectorized restatement of the numba kernels.

Every expression keeps the operand order of the numba loops so results are
bit-identical (sums that the numba path accumulates sequentially are taken
via cumsum, which is also sequential).
"""

from __future__ import annotations

import numpy as np


def clahe_interpolate(channel, luts, tile_h, tile_w):
    h, w = channel.shape
    n_ty, n_tx = luts.shape[0], luts.shape[1]

    def axis_weights(n_pix, tile, n_tiles):
        g = (np.arange(n_pix, dtype=np.float64) + 0.5) / tile - 0.5
        lo = g <= 0.0
        hi = g >= n_tiles - 1
        f = np.floor(g)
        w_in = g - f
        wgt = np.where(lo | hi, 0.0, w_in)
        a0 = np.clip(f, 0, n_tiles - 1).astype(np.int64)
        a0[hi] = n_tiles - 1
        a1 = np.clip(a0 + 1, 0, n_tiles - 1)
        return a0, a1, wgt

    i0, i1, wy = axis_weights(h, tile_h, n_ty)
    j0, j1, wx = axis_weights(w, tile_w, n_tx)
    wy = wy[:, None]
    wx = wx[None, :]
    v = channel
    l00 = luts[i0[:, None], j0[None, :], v]
    l01 = luts[i0[:, None], j1[None, :], v]
    l10 = luts[i1[:, None], j0[None, :], v]
    l11 = luts[i1[:, None], j1[None, :], v]
    acc = (
        l00 * ((1.0 - wy) * (1.0 - wx))
        + l01 * ((1.0 - wy) * wx)
        + l10 * (wy * (1.0 - wx))
        + l11 * (wy * wx)
    )
    return np.floor(acc + 0.5).astype(np.uint8)


def separable_blur_u8(img, taps):
    h, w, _ = img.shape
    r = (taps.shape[0] - 1) // 2
    padded = np.pad(img, ((r, r), (0, 0), (0, 0)), mode="edge")
    tmp = np.zeros((h, w, 3), dtype=np.float64)
    for k in range(taps.shape[0]):
        tmp += taps[k] * padded[k : k + h]
    padded = np.pad(tmp, ((0, 0), (r, r), (0, 0)), mode="edge")
    acc = np.zeros((h, w, 3), dtype=np.float64)
    for k in range(taps.shape[0]):
        acc += taps[k] * padded[:, k : k + w]
    acc = np.clip(acc, 0.0, 255.0)
    return np.floor(acc + 0.5).astype(np.uint8)


def _iou_best_per_gt(gt_boxes, strides, base_sizes, ratios, scale_sets):
    """Best achievable IoU per (batch row, gt box): (B, n) float64.

    Broadcast layout: (B, n, L, T, S, 2, 2) collapsed progressively.
    """
    x0, y0, x1, y1 = (gt_boxes[:, i] for i in range(4))
    gw = (x1 - x0)[None, :, None, None, None, None, None]
    gh = (y1 - y0)[None, :, None, None, None, None, None]
    cx = ((x0 + x1) * 0.5)[None, :, None, None, None, None, None]
    cy = ((y0 + y1) * 0.5)[None, :, None, None, None, None, None]

    st = strides[None, None, :, None, None, None, None]
    rt = np.sqrt(ratios)[None, None, None, :, None, None, None]
    sc = scale_sets[:, None, None, None, :, None, None]
    base = base_sizes[None, None, :, None, None, None, None]
    aw = (base * sc) * rt
    ah = (base * sc) / rt

    di = np.arange(2, dtype=np.float64)[None, None, None, None, None, :, None]
    dj = np.arange(2, dtype=np.float64)[None, None, None, None, None, None, :]
    ix0 = np.floor(cx / st - 0.5)
    iy0 = np.floor(cy / st - 0.5)
    acx = (ix0 + di + 0.5) * st
    acy = (iy0 + dj + 0.5) * st

    ow = np.minimum(acx + aw * 0.5, cx + gw * 0.5) - np.maximum(acx - aw * 0.5, cx - gw * 0.5)
    oh = np.minimum(acy + ah * 0.5, cy + gh * 0.5) - np.maximum(acy - ah * 0.5, cy - gh * 0.5)
    inter = np.maximum(ow, 0.0) * np.maximum(oh, 0.0)
    denom = aw * ah + gw * gh - inter
    iou = np.where(inter > 0.0, inter / denom, 0.0)
    return iou.max(axis=(2, 3, 4, 5, 6))


def mean_max_iou(gt_boxes, strides, base_sizes, ratios, scales):
    best = _iou_best_per_gt(gt_boxes, strides, base_sizes, ratios, scales[None, :])[0]
    # cumsum is a sequential accumulation: same order as the numba loop
    return float(np.cumsum(best)[-1]) / gt_boxes.shape[0]


def mean_max_iou_batch(gt_boxes, strides, base_sizes, ratios, scale_sets):
    n = gt_boxes.shape[0]
    out = np.empty(scale_sets.shape[0], dtype=np.float64)
    # chunk the batch to bound the broadcast buffer around a few MB
    chunk = max(1, int(2_000_000 // max(1, n * strides.shape[0] * scale_sets.shape[1] * 4)))
    for lo in range(0, scale_sets.shape[0], chunk):
        hi = min(lo + chunk, scale_sets.shape[0])
        best = _iou_best_per_gt(gt_boxes, strides, base_sizes, ratios, scale_sets[lo:hi])
        out[lo:hi] = np.cumsum(best, axis=1)[:, -1] / n
    return out


def suppress_by_center(cx, cy, labels, radius):
    n = cx.shape[0]
    keep = np.ones(n, dtype=np.bool_)
    r2 = radius * radius
    kept_idx: list[int] = []
    for i in range(n):
        if kept_idx:
            k = np.asarray(kept_idx)
            dx = cx[i] - cx[k]
            dy = cy[i] - cy[k]
            close = (dx * dx + dy * dy <= r2) & (labels[k] == labels[i])
            if bool(close.any()):
                keep[i] = False
                continue
        kept_idx.append(i)
    return keep
