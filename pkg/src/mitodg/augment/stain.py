"""H&E stain-space math: optical density transform, deconvolution basis,
stain-channel perturbation, and PCA color shifting.

Stains combine linearly in optical density (OD) space, so a pixel's OD
vector factors through a 3x3 basis whose rows are the unit OD directions of
hematoxylin, eosin and a residual.  Perturbing the per-stain concentrations
and projecting back yields realistic scanner/stain variation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import Rgb8Image
from ..errors import SingularBasisError
from ..rng import RandomStream

__all__ = [
    "rgb_to_od",
    "od_to_rgb",
    "StainBasis",
    "ruifrok_johnston_basis",
    "he_stain_augment",
    "fancy_pca",
]

_DET_EPS = 1e-6


def rgb_to_od(rgb) -> np.ndarray:
    """Byte values -> optical density: od = -log10((v + 1) / 256).

    The +1 offset keeps od finite at v=0; od spans [0, log10(256)].
    """
    v = np.asarray(rgb, dtype=np.float64)
    return -np.log10((v + 1.0) / 256.0)


def od_to_rgb(od) -> np.ndarray:
    """Inverse of :func:`rgb_to_od`, rounded and clamped to bytes."""
    v = 256.0 * np.power(10.0, -np.asarray(od, dtype=np.float64)) - 1.0
    return np.floor(np.clip(v, 0.0, 255.0) + 0.5).astype(np.uint8)


def _unit_rows(m: np.ndarray) -> np.ndarray:
    return m / np.linalg.norm(m, axis=1, keepdims=True)


@dataclass(frozen=True)
class StainBasis:
    """3x3 matrix of unit OD vectors, rows = (hematoxylin, eosin, residual)."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"stain basis must be 3x3, got {m.shape}")
        norms = np.linalg.norm(m, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise ValueError(f"stain basis rows must be unit vectors, norms={norms}")
        if abs(np.linalg.det(m)) <= _DET_EPS:
            raise SingularBasisError(f"stain basis is singular, |det|={abs(np.linalg.det(m)):.2e}")
        object.__setattr__(self, "matrix", m)

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)


def ruifrok_johnston_basis() -> StainBasis:
    """Standard H&E deconvolution reference basis.

    Hematoxylin and eosin OD directions with the residual completed as their
    normalized cross product.
    """
    h = np.array([0.650, 0.704, 0.286])
    e = np.array([0.072, 0.990, 0.105])
    r = np.cross(h, e)
    return StainBasis(_unit_rows(np.stack([h, e, r])))


def he_stain_augment(
    image: Rgb8Image,
    sigma_alpha: float,
    sigma_beta: float,
    basis: StainBasis,
    rng: RandomStream,
    draw_log: list | None = None,
) -> Rgb8Image:
    """Scale-and-shift each stain concentration channel.

    Per image, per stain channel i: S'_i = alpha_i * S_i + beta_i with
    alpha_i ~ U(1-sigma_alpha, 1+sigma_alpha) and
    beta_i ~ U(-sigma_beta, sigma_beta).  Draw order: the three alphas
    (H, E, residual), then the three betas.
    """
    if abs(np.linalg.det(basis.matrix)) <= _DET_EPS:
        raise SingularBasisError("stain basis is singular")
    alphas = np.array([rng.uniform(1.0 - sigma_alpha, 1.0 + sigma_alpha) for _ in range(3)])
    betas = np.array([rng.uniform(-sigma_beta, sigma_beta) for _ in range(3)])
    if draw_log is not None:
        for name, a in zip(("alpha_h", "alpha_e", "alpha_r"), alphas):
            draw_log.append((name, float(a)))
        for name, b in zip(("beta_h", "beta_e", "beta_r"), betas):
            draw_log.append((name, float(b)))

    od = rgb_to_od(image.array)
    conc = od @ basis.inverse
    conc = conc * alphas + betas
    od_out = conc @ basis.matrix
    return Rgb8Image(od_to_rgb(od_out))


def fancy_pca(
    image: Rgb8Image,
    sigma: float,
    rng: RandomStream,
    draw_log: list | None = None,
) -> Rgb8Image:
    """Shift all pixels along the principal components of their RGB cloud.

    Eigendecomposes the 3x3 covariance of [0,1]-scaled pixel values and adds
    sum_k a_k * lambda_k * e_k with a_k ~ N(0, sigma), one triple per image
    (eigenpairs in ascending-eigenvalue order as returned by ``eigh``).
    Rank-deficient covariance is harmless: zero eigenvalues contribute
    nothing.
    """
    a = np.array([rng.normal(sigma) for _ in range(3)])
    if draw_log is not None:
        for k, val in enumerate(a):
            draw_log.append((f"pca_a{k}", float(val)))

    flat = image.array.reshape(-1, 3).astype(np.float64) / 255.0
    cov = np.cov(flat.T) if flat.shape[0] > 1 else np.zeros((3, 3))
    eigvals, eigvecs = np.linalg.eigh(cov)
    delta = (eigvecs * (a * eigvals)).sum(axis=1)
    shifted = (flat + delta) * 255.0
    out = np.floor(np.clip(shifted, 0.0, 255.0) + 0.5).astype(np.uint8)
    return Rgb8Image(out.reshape(image.array.shape))
