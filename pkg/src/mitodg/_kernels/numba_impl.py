"""Numba backend: explicit loops under ``@njit``.

fastmath stays OFF everywhere; results must be bit-identical to the numpy
backend, which restates the same arithmetic in the same order.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def clahe_interpolate(channel, luts, tile_h, tile_w):
    """Bilinear blend of per-tile LUTs.

    channel: (h, w) uint8; luts: (n_ty, n_tx, 256) uint8 tile lookup tables
    computed from clipped histograms.  Tile centers sit at the centers of a
    uniform tile_h x tile_w grid.
    """
    h, w = channel.shape
    n_ty, n_tx = luts.shape[0], luts.shape[1]
    out = np.empty((h, w), dtype=np.uint8)
    for y in range(h):
        gy = (y + 0.5) / tile_h - 0.5
        if gy <= 0.0:
            i0, i1, wy = 0, 0, 0.0
        elif gy >= n_ty - 1:
            i0, i1, wy = n_ty - 1, n_ty - 1, 0.0
        else:
            i0 = int(np.floor(gy))
            i1 = i0 + 1
            wy = gy - i0
        for x in range(w):
            gx = (x + 0.5) / tile_w - 0.5
            if gx <= 0.0:
                j0, j1, wx = 0, 0, 0.0
            elif gx >= n_tx - 1:
                j0, j1, wx = n_tx - 1, n_tx - 1, 0.0
            else:
                j0 = int(np.floor(gx))
                j1 = j0 + 1
                wx = gx - j0
            v = channel[y, x]
            acc = (
                luts[i0, j0, v] * ((1.0 - wy) * (1.0 - wx))
                + luts[i0, j1, v] * ((1.0 - wy) * wx)
                + luts[i1, j0, v] * (wy * (1.0 - wx))
                + luts[i1, j1, v] * (wy * wx)
            )
            out[y, x] = np.uint8(np.floor(acc + 0.5))
    return out


@njit(cache=True)
def separable_blur_u8(img, taps):
    """Separable convolution with replicate edges, round-half-up to uint8.

    img: (h, w, 3) uint8; taps: (2r+1,) float64 normalized kernel.
    """
    h, w, _ = img.shape
    r = (taps.shape[0] - 1) // 2
    tmp = np.empty((h, w, 3), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            for c in range(3):
                acc = 0.0
                for k in range(-r, r + 1):
                    yy = y + k
                    if yy < 0:
                        yy = 0
                    elif yy >= h:
                        yy = h - 1
                    acc += taps[k + r] * img[yy, x, c]
                tmp[y, x, c] = acc
    out = np.empty((h, w, 3), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            for c in range(3):
                acc = 0.0
                for k in range(-r, r + 1):
                    xx = x + k
                    if xx < 0:
                        xx = 0
                    elif xx >= w:
                        xx = w - 1
                    acc += taps[k + r] * tmp[y, xx, c]
                if acc < 0.0:
                    acc = 0.0
                elif acc > 255.0:
                    acc = 255.0
                out[y, x, c] = np.uint8(np.floor(acc + 0.5))
    return out


@njit(cache=True, inline="always")
def _best_iou_at_level(cx, cy, gw, gh, stride, aw, ah):
    """Max IoU between the GT box and the nearest anchors of size (aw, ah)
    placed on the (i+0.5)*stride center grid; checks the 4 bracketing cells."""
    best = 0.0
    fx = cx / stride - 0.5
    fy = cy / stride - 0.5
    ix0 = np.floor(fx)
    iy0 = np.floor(fy)
    for di in range(2):
        acx = (ix0 + di + 0.5) * stride
        ow = min(acx + aw * 0.5, cx + gw * 0.5) - max(acx - aw * 0.5, cx - gw * 0.5)
        if ow <= 0.0:
            continue
        for dj in range(2):
            acy = (iy0 + dj + 0.5) * stride
            oh = min(acy + ah * 0.5, cy + gh * 0.5) - max(acy - ah * 0.5, cy - gh * 0.5)
            if oh <= 0.0:
                continue
            inter = ow * oh
            iou = inter / (aw * ah + gw * gh - inter)
            if iou > best:
                best = iou
    return best


@njit(cache=True)
def mean_max_iou(gt_boxes, strides, base_sizes, ratios, scales):
    """Mean over GT boxes of the max IoU achievable on the anchor grid.

    gt_boxes: (n, 4) float64 [x0, y0, x1, y1]; pyramid levels given by
    parallel strides/base_sizes arrays.  Equivalent to enumerating a grid
    large enough to cover every box (nearest-cell argument; the 4 bracketing
    centers dominate all others for axis-aligned IoU).
    """
    n = gt_boxes.shape[0]
    total = 0.0
    for g in range(n):
        x0, y0, x1, y1 = gt_boxes[g, 0], gt_boxes[g, 1], gt_boxes[g, 2], gt_boxes[g, 3]
        gw = x1 - x0
        gh = y1 - y0
        cx = (x0 + x1) * 0.5
        cy = (y0 + y1) * 0.5
        best = 0.0
        for l in range(strides.shape[0]):
            for t in range(ratios.shape[0]):
                rt = np.sqrt(ratios[t])
                for s in range(scales.shape[0]):
                    aw = base_sizes[l] * scales[s] * rt
                    ah = base_sizes[l] * scales[s] / rt
                    iou = _best_iou_at_level(cx, cy, gw, gh, strides[l], aw, ah)
                    if iou > best:
                        best = iou
        total += best
    return total / n


@njit(cache=True)
def mean_max_iou_batch(gt_boxes, strides, base_sizes, ratios, scale_sets):
    """mean_max_iou for every row of scale_sets: (B, S) -> (B,)."""
    b = scale_sets.shape[0]
    out = np.empty(b, dtype=np.float64)
    for i in range(b):
        out[i] = mean_max_iou(gt_boxes, strides, base_sizes, ratios, scale_sets[i])
    return out


@njit(cache=True)
def suppress_by_center(cx, cy, labels, radius):
    """Greedy same-class suppression over detections already in priority order.

    Returns a keep mask: entry i survives unless a kept earlier entry with
    the same label code lies within ``radius`` (inclusive) of its center.
    """
    n = cx.shape[0]
    keep = np.ones(n, dtype=np.bool_)
    r2 = radius * radius
    for i in range(n):
        for j in range(i):
            if keep[j] and labels[j] == labels[i]:
                dx = cx[i] - cx[j]
                dy = cy[i] - cy[j]
                if dx * dx + dy * dy <= r2:
                    keep[i] = False
                    break
    return keep
