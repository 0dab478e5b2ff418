import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mitodg import Annotation, Label, Rgb8Image, crop
from mitodg.errors import OutOfBoundsError


def test_identity_crop(rand_image):
    img = rand_image(37, 23)
    out = crop(img, (0, 0), (img.width, img.height))
    assert out == img


def test_crop_indexing():
    # 2x2 gray image [[1,2],[3,4]]; crop of column 1 is [[2],[4]]
    arr = np.array([[[1] * 3, [2] * 3], [[3] * 3, [4] * 3]], dtype=np.uint8)
    out = crop(Rgb8Image(arr), (1, 0), (1, 2))
    assert out.array[:, :, 0].tolist() == [[2], [4]]


def test_crop_out_of_bounds(rand_image):
    img = rand_image(448, 448)
    with pytest.raises(OutOfBoundsError):
        crop(img, (400, 400), (100, 100))


@given(
    ax=st.integers(0, 20),
    ay=st.integers(0, 20),
    bx=st.integers(0, 10),
    by=st.integers(0, 10),
    w=st.integers(1, 10),
    h=st.integers(1, 10),
)
@settings(max_examples=60, deadline=None)
def test_crop_composition(ax, ay, bx, by, w, h):
    g = np.random.default_rng(0)
    img = Rgb8Image(g.integers(0, 256, (64, 64, 3), dtype=np.uint8))
    s1 = (bx + w + 10, by + h + 10)
    inner_twice = crop(crop(img, (ax, ay), s1), (bx, by), (w, h))
    inner_once = crop(img, (ax + bx, ay + by), (w, h))
    assert inner_twice == inner_once


def test_image_validation():
    with pytest.raises(ValueError):
        Rgb8Image(np.zeros((4, 4, 3), dtype=np.float32))
    with pytest.raises(ValueError):
        Rgb8Image(np.zeros((4, 4, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        Rgb8Image(np.zeros((0, 4, 3), dtype=np.uint8))


def test_annotation_validation():
    with pytest.raises(ValueError):
        Annotation(1, 1, (5.0, 5.0), (10.0, 0.0, 0.0, 10.0), Label.MITOTIC_FIGURE)
    with pytest.raises(ValueError):
        Annotation(1, 1, (50.0, 5.0), (0.0, 0.0, 10.0, 10.0), Label.MITOTIC_FIGURE)
    ann = Annotation(1, 1, (5.0, 5.0), (0.0, 0.0, 10.0, 10.0), Label.IMPOSTER)
    assert ann.area == 100.0


def test_detection_confidence_range():
    from mitodg import DetectionRecord

    with pytest.raises(ValueError):
        DetectionRecord(1, (5.0, 5.0), (0.0, 0.0, 10.0, 10.0), Label.MITOTIC_FIGURE, 1.5)
