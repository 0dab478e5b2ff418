"""The 19-transform pool and its strength semantics.

Every transform maps a scalar strength in [0, 1] to its native parameter(s)
(maps listed per function); strength 0 short-circuits to a byte-identical
copy for every kind.  Photometric kinds never change geometry, so annotation
boxes pass through untouched; Cutout also keeps all annotations.

All randomness comes from the caller's stream.  Scalar draws are taken
directly off the stream in the documented order; full-array draws (noise
fields, per-pixel shuffles) likewise, so a scalar re-implementation reading
the same stream reproduces the output exactly.
"""

from __future__ import annotations

import io
import itertools
import math
from enum import Enum

import numpy as np
from PIL import Image

from .. import _kernels
from ..core import Rgb8Image
from ..rng import RandomStream
from .stain import fancy_pca, he_stain_augment, ruifrok_johnston_basis

__all__ = ["TransformKind", "apply_transform", "ALL_KINDS"]


class TransformKind(str, Enum):
    """Stable identifiers for the augmentation pool (19 kinds)."""

    COLOR_JITTER = "ColorJitter"
    HE_STAIN = "HeStain"
    FANCY_PCA = "FancyPca"
    HUE = "Hue"
    SATURATION = "Saturation"
    EQUALIZE = "Equalize"
    RANDOM_CONTRAST = "RandomContrast"
    AUTO_CONTRAST = "AutoContrast"
    CLAHE = "Clahe"
    SOLARIZE = "Solarize"
    SOLARIZE_ADD = "SolarizeAdd"
    SHARPNESS = "Sharpness"
    GAUSSIAN_BLUR = "GaussianBlur"
    POSTERIZE = "Posterize"
    CUTOUT = "Cutout"
    ISO_NOISE = "IsoNoise"
    JPEG_ARTIFACTS = "JpegArtifacts"
    PIXELWISE_CHANNEL_SHUFFLE = "PixelwiseChannelShuffle"
    GAUSSIAN_NOISE = "GaussianNoise"


ALL_KINDS: tuple[TransformKind, ...] = tuple(TransformKind)

_LUMA = np.array([0.299, 0.587, 0.114])  # Rec. 601
_PERMS3 = tuple(itertools.permutations((0, 1, 2)))


def _round_u8(x: np.ndarray) -> np.ndarray:
    """Round half up and clamp to bytes (shared convention everywhere)."""
    return np.floor(np.clip(x, 0.0, 255.0) + 0.5).astype(np.uint8)


def _rgb_to_hsv(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """float64 HSV with h, s, v all in [0, 1]."""
    f = arr.astype(np.float64) / 255.0
    r, g, b = f[..., 0], f[..., 1], f[..., 2]
    maxc = np.max(f, axis=-1)
    minc = np.min(f, axis=-1)
    v = maxc
    span = maxc - minc
    s = np.where(maxc > 0.0, span / np.where(maxc > 0.0, maxc, 1.0), 0.0)
    safe = np.where(span > 0.0, span, 1.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(r == maxc, bc - gc, np.where(g == maxc, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(span > 0.0, (h / 6.0) % 1.0, 0.0)
    return h, s, v


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(np.int64) % 6
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1) * 255.0


def _blend(orig: np.ndarray, transformed: np.ndarray, weight: float) -> np.ndarray:
    out = orig.astype(np.float64) + (transformed.astype(np.float64) - orig.astype(np.float64)) * weight
    return _round_u8(out)


def _gray(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float64) @ _LUMA


# -- pool transforms ---------------------------------------------------------


def _color_jitter(arr, strength, rng, log):
    """Brightness, contrast, saturation factors each ~ U(1-0.6s, 1+0.6s),
    applied in that order."""
    span = 0.6 * strength
    fb = rng.uniform(1.0 - span, 1.0 + span)
    fc = rng.uniform(1.0 - span, 1.0 + span)
    fs = rng.uniform(1.0 - span, 1.0 + span)
    log += [("brightness", fb), ("contrast", fc), ("saturation", fs)]
    f = arr.astype(np.float64) * fb
    mean_luma = _gray(arr).mean() * fb
    f = mean_luma + (f - mean_luma) * fc
    gray = f @ _LUMA
    f = gray[..., None] + (f - gray[..., None]) * fs
    return _round_u8(f)


def _he_stain(arr, strength, rng, log):
    """sigma_alpha = sigma_beta = 0.1 * s against the reference H&E basis."""
    sigma = 0.1 * strength
    out = he_stain_augment(Rgb8Image(arr), sigma, sigma, ruifrok_johnston_basis(), rng, draw_log=log)
    return out.array


def _fancy_pca(arr, strength, rng, log):
    """PCA shift with sigma = 0.3 * s."""
    return fancy_pca(Rgb8Image(arr), 0.3 * strength, rng, draw_log=log).array


def _hue(arr, strength, rng, log):
    """Hue rotation by 36 degrees * s with random sign."""
    sign = 1.0 if rng.randint(2) == 0 else -1.0
    shift_deg = sign * 36.0 * strength
    log.append(("hue_shift_deg", shift_deg))
    h, s, v = _rgb_to_hsv(arr)
    h = (h + shift_deg / 360.0) % 1.0
    return _round_u8(_hsv_to_rgb(h, s, v))


def _saturation(arr, strength, rng, log):
    """Per-pixel gray blend with factor ~ U(1-s, 1+s)."""
    f = rng.uniform(1.0 - strength, 1.0 + strength)
    log.append(("saturation", f))
    gray = _gray(arr)
    out = gray[..., None] + (arr.astype(np.float64) - gray[..., None]) * f
    return _round_u8(out)


def _equalize_channel(ch: np.ndarray) -> np.ndarray:
    hist = np.bincount(ch.ravel(), minlength=256)
    cdf = np.cumsum(hist)
    nz = np.nonzero(hist)[0]
    cdf_min = cdf[nz[0]]
    total = cdf[-1]
    if total == cdf_min:  # zero-range histogram: identity
        return ch
    lut = ((cdf - cdf_min) * 255 + (total - cdf_min) // 2) // (total - cdf_min)
    return lut.astype(np.uint8)[ch]


def _equalize(arr, strength, rng, log):
    """Full per-channel histogram equalization, blended in by s."""
    eq = np.stack([_equalize_channel(arr[..., c]) for c in range(3)], axis=-1)
    return _blend(arr, eq, strength)


def _random_contrast(arr, strength, rng, log):
    """Factor ~ U(1-0.6s, 1+0.6s) around the per-channel mean."""
    span = 0.6 * strength
    f = rng.uniform(1.0 - span, 1.0 + span)
    log.append(("contrast", f))
    mean = arr.reshape(-1, 3).mean(axis=0)
    out = mean + (arr.astype(np.float64) - mean) * f
    return _round_u8(out)


def _autocontrast_channel(ch: np.ndarray) -> np.ndarray:
    lo, hi = int(ch.min()), int(ch.max())
    if hi <= lo:
        return ch
    lut = np.floor((np.arange(256, dtype=np.float64) - lo) * 255.0 / (hi - lo) + 0.5)
    return np.clip(lut, 0, 255).astype(np.uint8)[ch]


def _auto_contrast(arr, strength, rng, log):
    """Per-channel min/max stretch, blended in by s."""
    ac = np.stack([_autocontrast_channel(arr[..., c]) for c in range(3)], axis=-1)
    return _blend(arr, ac, strength)


_CLAHE_GRID = 8


def _clahe_luts(ch: np.ndarray, clip_limit: float) -> tuple[np.ndarray, int, int]:
    """Per-tile clipped-histogram LUTs on an 8x8 tile grid.

    Integer arithmetic throughout: clipped excess is redistributed evenly
    (remainder to the lowest bins) and the LUT rounds cdf*255/area half up.
    """
    h, w = ch.shape
    tile_h = max(1, -(-h // _CLAHE_GRID))
    tile_w = max(1, -(-w // _CLAHE_GRID))
    n_ty = -(-h // tile_h)
    n_tx = -(-w // tile_w)
    luts = np.empty((n_ty, n_tx, 256), dtype=np.uint8)
    for i in range(n_ty):
        for j in range(n_tx):
            tile = ch[i * tile_h : min(h, (i + 1) * tile_h), j * tile_w : min(w, (j + 1) * tile_w)]
            area = tile.size
            hist = np.bincount(tile.ravel(), minlength=256).astype(np.int64)
            clip = max(1, int(clip_limit * area / 256.0))
            excess = int(np.maximum(hist - clip, 0).sum())
            hist = np.minimum(hist, clip)
            hist += excess // 256
            hist[: excess % 256] += 1
            cdf = np.cumsum(hist)
            luts[i, j] = ((cdf * 255 + area // 2) // area).astype(np.uint8)
    return luts, tile_h, tile_w


def _clahe(arr, strength, rng, log):
    """Contrast-limited adaptive equalization, clip limit 1 + 3s, 8x8 tiles."""
    clip_limit = 1.0 + 3.0 * strength
    out = np.empty_like(arr)
    for c in range(3):
        luts, tile_h, tile_w = _clahe_luts(arr[..., c], clip_limit)
        out[..., c] = _kernels.clahe_interpolate(arr[..., c], luts, tile_h, tile_w)
    return out


def _solarize(arr, strength, rng, log):
    """Invert values at or above threshold 256 * (1 - s)."""
    threshold = 256.0 * (1.0 - strength)
    return np.where(arr >= threshold, 255 - arr, arr)


def _solarize_add(arr, strength, rng, log):
    """Add round(110 * s) to values below 128, then clamp."""
    add = math.floor(110.0 * strength + 0.5)
    out = arr.astype(np.int64)
    out = np.where(out < 128, out + add, out)
    return np.clip(out, 0, 255).astype(np.uint8)


_SMOOTH_KERNEL = np.array([[1.0, 1.0, 1.0], [1.0, 5.0, 1.0], [1.0, 1.0, 1.0]]) / 13.0


def _sharpness(arr, strength, rng, log):
    """Blend away from a 3x3 smoothed copy with factor 1 + 2s."""
    factor = 1.0 + 2.0 * strength
    padded = np.pad(arr.astype(np.float64), ((1, 1), (1, 1), (0, 0)), mode="edge")
    smooth = np.zeros(arr.shape, dtype=np.float64)
    for dy in range(3):
        for dx in range(3):
            smooth += _SMOOTH_KERNEL[dy, dx] * padded[dy : dy + arr.shape[0], dx : dx + arr.shape[1]]
    out = smooth + (arr.astype(np.float64) - smooth) * factor
    return _round_u8(out)


def _gaussian_taps(sigma: float) -> np.ndarray:
    radius = max(1, math.ceil(3.0 * sigma))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-(k * k) / (2.0 * sigma * sigma))
    return taps / taps.sum()


def _gaussian_blur(arr, strength, rng, log):
    """Separable Gaussian with sigma = 2s, kernel radius ceil(3 sigma)."""
    sigma = 2.0 * strength
    log.append(("blur_sigma", sigma))
    return _kernels.separable_blur_u8(arr, _gaussian_taps(sigma))


def _posterize(arr, strength, rng, log):
    """Keep 8 - round(6s) high bits per channel."""
    bits = 8 - math.floor(6.0 * strength + 0.5)
    mask = np.uint8(0xFF << (8 - bits) & 0xFF)
    return arr & mask


def _cutout(arr, strength, rng, log):
    """Gray-fill a square of side round(0.4 * s * min(w, h)) at a uniform
    random position fully inside the image."""
    h, w = arr.shape[:2]
    side = math.floor(0.4 * strength * min(w, h) + 0.5)
    if side < 1:
        return arr.copy()
    x0 = rng.randint(w - side + 1)
    y0 = rng.randint(h - side + 1)
    log += [("cutout_side", side), ("cutout_x", x0), ("cutout_y", y0)]
    out = arr.copy()
    out[y0 : y0 + side, x0 : x0 + side] = 128
    return out


def _iso_noise(arr, strength, rng, log):
    """Sensor-style noise: signal-dependent (shot) noise on the HSV value
    channel with intensity 0.5s, plus Gaussian hue jitter sigma = 0.04s.

    Draw order: the value-noise field, then the hue-noise field.
    """
    intensity = 0.5 * strength
    hue_sigma = 0.04 * strength
    log += [("iso_intensity", intensity), ("iso_hue_sigma", hue_sigma)]
    h, s, v = _rgb_to_hsv(arr)
    g_v = rng.normal(size=arr.shape[:2])
    g_h = rng.normal(size=arr.shape[:2])
    v = np.clip(v + g_v * (intensity * np.sqrt(v)), 0.0, 1.0)
    h = (h + g_h * hue_sigma) % 1.0
    return _round_u8(_hsv_to_rgb(h, s, v))


def _jpeg_artifacts(arr, strength, rng, log):
    """Round trip through a baseline JPEG codec at quality 100 - round(70s)."""
    quality = int(100 - math.floor(70.0 * strength + 0.5))
    log.append(("jpeg_quality", quality))
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="JPEG", quality=quality, subsampling=2)
    buf.seek(0)
    with Image.open(buf) as im:
        out = np.asarray(im.convert("RGB"))
    return np.ascontiguousarray(out)


def _pixelwise_channel_shuffle(arr, strength, rng, log):
    """Independently permute each pixel's channels with probability s.

    Draw order: the selection field, then the permutation-index field
    (floor(u * 6) over the six permutations of (0, 1, 2)).
    """
    h, w = arr.shape[:2]
    u_sel = rng.uniform(size=(h, w))
    u_perm = rng.uniform(size=(h, w))
    perm_idx = np.minimum((u_perm * 6.0).astype(np.int64), 5)
    perms = np.array(_PERMS3, dtype=np.int64)[perm_idx]  # (h, w, 3)
    shuffled = np.take_along_axis(arr, perms, axis=2)
    return np.where((u_sel < strength)[..., None], shuffled, arr)


def _gaussian_noise(arr, strength, rng, log):
    """Additive white noise, sigma = 40s on the byte scale, per channel."""
    sigma = 40.0 * strength
    log.append(("noise_sigma", sigma))
    n = rng.normal(size=arr.shape)
    return _round_u8(arr.astype(np.float64) + sigma * n)


_TRANSFORMS = {
    TransformKind.COLOR_JITTER: _color_jitter,
    TransformKind.HE_STAIN: _he_stain,
    TransformKind.FANCY_PCA: _fancy_pca,
    TransformKind.HUE: _hue,
    TransformKind.SATURATION: _saturation,
    TransformKind.EQUALIZE: _equalize,
    TransformKind.RANDOM_CONTRAST: _random_contrast,
    TransformKind.AUTO_CONTRAST: _auto_contrast,
    TransformKind.CLAHE: _clahe,
    TransformKind.SOLARIZE: _solarize,
    TransformKind.SOLARIZE_ADD: _solarize_add,
    TransformKind.SHARPNESS: _sharpness,
    TransformKind.GAUSSIAN_BLUR: _gaussian_blur,
    TransformKind.POSTERIZE: _posterize,
    TransformKind.CUTOUT: _cutout,
    TransformKind.ISO_NOISE: _iso_noise,
    TransformKind.JPEG_ARTIFACTS: _jpeg_artifacts,
    TransformKind.PIXELWISE_CHANNEL_SHUFFLE: _pixelwise_channel_shuffle,
    TransformKind.GAUSSIAN_NOISE: _gaussian_noise,
}


def apply_transform(
    kind: TransformKind,
    strength: float,
    image: Rgb8Image,
    rng: RandomStream,
    draw_log: list | None = None,
) -> Rgb8Image:
    """Apply one pool transform at the given strength.

    Strength 0 returns a byte-identical copy for every kind.
    """
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"strength {strength} outside [0, 1]")
    if strength == 0.0:
        return image.copy()
    log = [] if draw_log is None else draw_log
    out = _TRANSFORMS[TransformKind(kind)](image.array, float(strength), rng, log)
    return Rgb8Image(np.ascontiguousarray(out))
