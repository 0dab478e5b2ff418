import numpy as np
import pytest

from conftest import make_annotation
from mitodg import (
    ALL_KINDS,
    PolicyConfig,
    RandomStream,
    Rgb8Image,
    TransformKind,
    augment,
)
from mitodg.errors import EmptyPoolError, OutOfBoundsError, PolicyParseError


class ForcingStream(RandomStream):
    """Test double: scripted scalar draws, then falls back to the real stream."""

    def __init__(self, uniforms=(), randints=(), seed=0):
        super().__init__(seed)
        self._uniforms = list(uniforms)
        self._randints = list(randints)

    def uniform(self, low=0.0, high=1.0, size=None):
        if size is None and self._uniforms:
            return self._uniforms.pop(0)
        return super().uniform(low, high, size)

    def randint(self, n):
        if self._randints:
            return self._randints.pop(0) % n
        return super().randint(n)


def test_forced_identity_run(rand_image):
    # single-kind pool, no flips, identity permutation, strength forced to 0
    img = rand_image(32, 32, seed=1)
    rng = ForcingStream(uniforms=[0.9, 0.9, 0.0], randints=[0, 0])
    policy = PolicyConfig(pool=(TransformKind.SOLARIZE,))
    out, boxes, log = augment(img, [], policy, rng)
    assert np.array_equal(out.array, img.array)
    assert log.chosen == TransformKind.SOLARIZE
    assert not log.flipped_h and not log.flipped_v
    assert log.channel_perm == (0, 1, 2)
    assert log.strength == 0.0


def test_exactly_one_chosen_kind(rand_image):
    img = rand_image(24, 24, seed=2)
    for seed in range(50):
        _, _, log = augment(img, [], PolicyConfig(), RandomStream(seed))
        assert log.chosen in ALL_KINDS
        assert isinstance(log.chosen, TransformKind)


def test_horizontal_flip_box_reflection(rand_image):
    img = rand_image(448, 448, seed=3)
    ann = make_annotation(box=(10.0, 20.0, 60.0, 70.0))
    rng = ForcingStream(uniforms=[0.0, 0.9, 0.0], randints=[0, 0])  # flip H only
    out, boxes, log = augment(img, [ann], PolicyConfig(pool=(TransformKind.SOLARIZE,)), rng)
    assert log.flipped_h and not log.flipped_v
    assert boxes[0].box == (388.0, 20.0, 438.0, 70.0)
    assert boxes[0].center == (448.0 - 35.0, 45.0)
    assert np.array_equal(out.array, img.array[:, ::-1])


def test_flip_involution(rand_image):
    img = rand_image(64, 48, seed=4)
    ann = make_annotation(box=(5.0, 8.0, 20.0, 30.0))
    policy = PolicyConfig(pool=(TransformKind.SOLARIZE,), channel_permute=False)
    # flip both axes twice: back to the original image and box
    rng1 = ForcingStream(uniforms=[0.0, 0.0, 0.0], randints=[0])
    out1, boxes1, _ = augment(img, [ann], policy, rng1)
    rng2 = ForcingStream(uniforms=[0.0, 0.0, 0.0], randints=[0])
    out2, boxes2, _ = augment(out1, boxes1, policy, rng2)
    assert np.array_equal(out2.array, img.array)
    assert boxes2[0].box == ann.box
    assert boxes2[0].center == ann.center


def test_photometric_kinds_keep_boxes(rand_image):
    img = rand_image(64, 64, seed=5)
    ann = make_annotation(box=(10.0, 10.0, 30.0, 30.0))
    for kind in (TransformKind.CLAHE, TransformKind.GAUSSIAN_NOISE, TransformKind.CUTOUT):
        rng = ForcingStream(uniforms=[0.9, 0.9], randints=[0, 0])
        _, boxes, log = augment(img, [ann], PolicyConfig(pool=(kind,)), rng)
        assert log.chosen == kind
        assert boxes[0] == ann  # photometric and cutout kinds never move boxes


def test_channel_permutation_applied(rand_image):
    img = rand_image(16, 16, seed=6)
    rng = ForcingStream(uniforms=[0.9, 0.9, 0.0], randints=[1, 0])  # perm index 1
    out, _, log = augment(img, [], PolicyConfig(pool=(TransformKind.SOLARIZE,)), rng)
    assert log.channel_perm == (0, 2, 1)
    assert np.array_equal(out.array, img.array[:, :, (0, 2, 1)])


def test_determinism_full_pipeline(rand_image):
    img = rand_image(40, 40, seed=7)
    ann = make_annotation(box=(4.0, 4.0, 20.0, 20.0))
    a = augment(img, [ann], PolicyConfig(), RandomStream(123).derive(5))
    b = augment(img, [ann], PolicyConfig(), RandomStream(123).derive(5))
    assert np.array_equal(a[0].array, b[0].array)
    assert a[1] == b[1]
    assert a[2].to_dict() == b[2].to_dict()


def test_kind_uniformity_small():
    img = Rgb8Image(np.full((8, 8, 3), 120, dtype=np.uint8))
    pool = PolicyConfig()
    counts = {k: 0 for k in ALL_KINDS}
    n = 1900
    root = RandomStream(31337)
    for i in range(n):
        _, _, log = augment(img, [], pool, root.derive(i))
        counts[log.chosen] += 1
    expected = n / 19
    bound = 6 * (n * (1 / 19) * (18 / 19)) ** 0.5
    for kind, c in counts.items():
        assert abs(c - expected) <= bound, (kind, c)


def test_empty_pool_raises():
    with pytest.raises(EmptyPoolError):
        PolicyConfig(pool=())


def test_box_outside_image_rejected(rand_image):
    img = rand_image(32, 32, seed=8)
    ann = make_annotation(box=(10.0, 10.0, 40.0, 20.0))
    with pytest.raises(OutOfBoundsError):
        augment(img, [ann], PolicyConfig(), RandomStream(0))


def test_policy_config_roundtrip():
    policy = PolicyConfig(
        pool=(TransformKind.HUE, TransformKind.CLAHE),
        max_strength=0.8,
        flip_h_prob=0.3,
        flip_v_prob=0.0,
        channel_permute=False,
    )
    assert PolicyConfig.from_dict(policy.to_dict()) == policy


def test_policy_unknown_kind_rejected():
    with pytest.raises(PolicyParseError):
        PolicyConfig.from_dict({"pool": ["NotATransform"]})


def test_log_serializes():
    img = Rgb8Image(np.full((8, 8, 3), 10, dtype=np.uint8))
    _, _, log = augment(img, [], PolicyConfig(), RandomStream(11))
    d = log.to_dict()
    assert set(d) == {"flipped_h", "flipped_v", "channel_perm", "chosen", "strength", "inner_draws"}
    assert d["chosen"] in {k.value for k in ALL_KINDS}
