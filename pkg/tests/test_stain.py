import numpy as np
import pytest

from mitodg import RandomStream, Rgb8Image
from mitodg.augment.stain import (
    StainBasis,
    fancy_pca,
    he_stain_augment,
    od_to_rgb,
    rgb_to_od,
    ruifrok_johnston_basis,
)
from mitodg.errors import SingularBasisError


def test_od_white_is_zero():
    assert np.allclose(rgb_to_od((255, 255, 255)), 0.0)


def test_od_black_value():
    # -log10(1/256) = log10(256)
    expected = np.log10(256.0)
    assert np.allclose(rgb_to_od((0, 0, 0)), expected)
    assert abs(expected - 2.40824) < 1e-4


def test_od_roundtrip_exhaustive():
    values = np.arange(256, dtype=np.uint8)
    assert np.array_equal(od_to_rgb(rgb_to_od(values)), values)


def test_basis_rows_unit_and_invertible():
    basis = ruifrok_johnston_basis()
    assert np.allclose(np.linalg.norm(basis.matrix, axis=1), 1.0, atol=1e-6)
    assert abs(np.linalg.det(basis.matrix)) > 1e-6
    assert np.allclose(basis.matrix @ basis.inverse, np.eye(3), atol=1e-10)


def test_singular_basis_rejected():
    m = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(SingularBasisError):
        StainBasis(m)


def test_zero_sigma_roundtrip_within_2(rand_image):
    basis = ruifrok_johnston_basis()
    for seed in range(5):
        img = rand_image(32, 32, seed=seed)
        out = he_stain_augment(img, 0.0, 0.0, basis, RandomStream(seed))
        diff = np.abs(out.array.astype(int) - img.array.astype(int))
        assert diff.max() <= 2


def test_white_pixel_fixed_point():
    img = Rgb8Image(np.full((4, 4, 3), 255, dtype=np.uint8))
    out = he_stain_augment(img, 0.3, 0.0, ruifrok_johnston_basis(), RandomStream(0))
    assert np.array_equal(out.array, img.array)


def test_single_pixel_matches_matrix_oracle():
    # independent 3x3 linear-algebra recomputation of one mid-gray pixel
    basis = ruifrok_johnston_basis()
    img = Rgb8Image(np.full((1, 1, 3), 128, dtype=np.uint8))

    class Forced(RandomStream):
        def __init__(self, values):
            super().__init__(0)
            self.values = list(values)

        def uniform(self, low=0.0, high=1.0, size=None):
            return self.values.pop(0)

    alphas = (1.1, 1.0, 1.0)
    out = he_stain_augment(img, 0.5, 0.0, basis, Forced([*alphas, 0.0, 0.0, 0.0]))

    od = -np.log10((np.array([128.0, 128.0, 128.0]) + 1) / 256.0)
    conc = od @ np.linalg.inv(basis.matrix)
    conc *= np.array(alphas)
    od_back = conc @ basis.matrix
    expected = np.round(256.0 * 10.0 ** (-od_back) - 1.0)
    assert np.abs(out.array[0, 0].astype(float) - expected).max() <= 1


def test_draws_are_logged():
    log = []
    he_stain_augment(
        Rgb8Image(np.full((2, 2, 3), 100, np.uint8)),
        0.1,
        0.1,
        ruifrok_johnston_basis(),
        RandomStream(1),
        draw_log=log,
    )
    assert [name for name, _ in log] == ["alpha_h", "alpha_e", "alpha_r", "beta_h", "beta_e", "beta_r"]


# -- fancy PCA ---------------------------------------------------------------


def test_fancy_pca_constant_image_identity():
    img = Rgb8Image(np.full((8, 8, 3), 77, dtype=np.uint8))
    out = fancy_pca(img, 0.5, RandomStream(0))
    assert np.array_equal(out.array, img.array)


def test_fancy_pca_zero_sigma_identity(rand_image):
    img = rand_image(16, 16, seed=3)
    out = fancy_pca(img, 0.0, RandomStream(0))
    assert np.array_equal(out.array, img.array)


def test_fancy_pca_two_color_analytic_oracle():
    # half (100,0,0), half (200,0,0): variance only along R; with n = 8
    # pixels all deviating by +-50/255 the sample eigenvalue is
    # n/(n-1) * (50/255)^2, and forcing every a_k = 1 shifts R by
    # round(255 * lambda) = 11
    arr = np.zeros((2, 4, 3), dtype=np.uint8)
    arr[0, :, 0] = 100
    arr[1, :, 0] = 200

    class Forced(RandomStream):
        def normal(self, sigma=1.0, size=None):
            return 1.0

    out = fancy_pca(Rgb8Image(arr), 0.3, Forced(0))
    lam = (8.0 / 7.0) * (50.0 / 255.0) ** 2
    shift = out.array[:, :, 0].astype(int) - arr[:, :, 0].astype(int)
    assert np.all(shift == shift[0, 0])  # uniform shift along R
    assert abs(abs(shift[0, 0]) - round(255 * lam)) <= 1
    assert np.array_equal(out.array[:, :, 1:], arr[:, :, 1:])  # G, B untouched
