"""Tile planning, partition-of-unity blending, and round-trip stitching."""

import math

import numpy as np
import pytest

from glassforge.errors import ValidationError
from glassforge.imagecore import LinearImage, srgb_decode, srgb_encode, SrgbImage
from glassforge.tiler import (
    DEFAULT_MIN_OVERLAP,
    DEFAULT_TILE_SIZE,
    TilePlan,
    plan_tiles,
    split,
    stitch,
    tile_weights,
)


def _axis_oracle(length: int, tile: int, min_overlap: int):
    """Tile-count rule restated independently: fewest evenly spaced tiles
    whose pairwise overlap still reaches min_overlap."""
    if length <= tile:
        return 1
    return math.ceil((length - tile) / (tile - min_overlap)) + 1


def test_default_constants():
    assert DEFAULT_TILE_SIZE == 608
    assert DEFAULT_MIN_OVERLAP == 96


def test_plan_small_image_upsamples_both_axes():
    plan = plan_tiles(300, 200)
    assert plan.working_size == (608, 608)
    assert plan.x_origins == (0,) and plan.y_origins == (0,)
    assert plan.tile_count == 1


def test_plan_mixed_axes():
    plan = plan_tiles(1500, 400)
    assert plan.working_size == (1500, 608)
    assert plan.y_origins == (0,)
    assert len(plan.x_origins) == _axis_oracle(1500, 608, 96)
    assert plan.x_origins[0] == 0
    assert plan.x_origins[-1] == 1500 - 608


def test_plan_overlap_invariant():
    for length in (609, 700, 1120, 1216, 2400, 4096, 10000):
        plan = plan_tiles(length, length)
        xs = plan.x_origins
        assert xs[0] == 0 and xs[-1] == length - 608
        for a, b in zip(xs, xs[1:]):
            assert a + 608 - b >= 96          # adjacent tiles keep the overlap
            assert b > a
        assert len(xs) == _axis_oracle(length, 608, 96)


def test_plan_validation():
    with pytest.raises(ValidationError):
        plan_tiles(0, 100)
    with pytest.raises(ValidationError):
        plan_tiles(100, 100, tile_size=64, min_overlap=64)
    with pytest.raises(ValidationError):
        plan_tiles(100, 100, tile_size=64, min_overlap=0)


def test_partition_of_unity():
    for (w, h) in ((1216, 900), (700, 700), (2000, 650)):
        plan = plan_tiles(w, h)
        ww, wh = plan.working_size
        total = np.zeros((wh, ww))
        for weight, (x, y) in zip(tile_weights(plan), plan.origins()):
            assert np.all(weight >= 0.0)
            total[y:y + 608, x:x + 608] += weight
        assert np.allclose(total, 1.0, atol=1e-6)


def test_split_produces_expected_tiles():
    rng = np.random.default_rng(0)
    img = LinearImage(rng.random((180, 250, 3)).astype(np.float32))
    plan = plan_tiles(250, 180, tile_size=128, min_overlap=32)
    tiles = split(img, plan)
    assert len(tiles) == plan.tile_count
    for t in tiles:
        assert t.data.shape == (128, 128, 3)
    # tiles are literal crops of the working image
    assert plan.working_size == (250, 180)
    x0, y0 = plan.origins()[0]
    assert np.array_equal(tiles[0].data, img.data[y0:y0 + 128, x0:x0 + 128])


def test_split_rejects_wrong_size():
    img = LinearImage(np.zeros((10, 10, 3), dtype=np.float32))
    plan = plan_tiles(20, 20, tile_size=16, min_overlap=4)
    with pytest.raises(ValidationError):
        split(img, plan)


def test_stitch_rejects_wrong_count_and_size():
    plan = plan_tiles(40, 40, tile_size=32, min_overlap=8)
    tile = LinearImage(np.zeros((32, 32, 3), dtype=np.float32))
    with pytest.raises(ValidationError):
        stitch([tile], plan)
    bad = LinearImage(np.zeros((16, 16, 3), dtype=np.float32))
    with pytest.raises(ValidationError):
        stitch([bad] * plan.tile_count, plan)


def test_roundtrip_identity_without_resampling():
    rng = np.random.default_rng(4)
    img = LinearImage(rng.random((96, 130, 3)).astype(np.float32))
    plan = plan_tiles(130, 96, tile_size=64, min_overlap=16)
    out = stitch(split(img, plan), plan)
    assert np.allclose(out.data, img.data, atol=1e-6)


def test_roundtrip_within_one_8bit_level_over_random_sizes():
    """stitch(split(img)) stays within 1/255 of the original, including the
    upsample path for sides shorter than the tile."""
    rng = np.random.default_rng(11)
    sizes = [(int(rng.integers(80, 900)), int(rng.integers(80, 900)))
             for _ in range(18)] + [(100, 700), (640, 90)]
    for (w, h) in sizes:
        # smooth content: the documented contract is 8-bit-faithful round
        # tripping of natural images, not adversarial white noise
        yy, xx = np.mgrid[0:h, 0:w]
        base = (0.5 + 0.3 * np.sin(xx / 23.0) * np.cos(yy / 31.0)
                + 0.15 * np.sin((xx + 2 * yy) / 57.0))
        img = LinearImage(np.repeat(base[:, :, None], 3, axis=2).astype(np.float32))
        plan = plan_tiles(w, h, tile_size=256, min_overlap=48)
        out = stitch(split(img, plan), plan)
        assert out.data.shape == img.data.shape
        err = np.abs(out.data - img.data).max()
        assert err <= 1.0 / 255.0, f"size {w}x{h}: max err {err:.5f}"


def test_roundtrip_preserves_8bit_codes_exactly_when_not_resampled():
    rng = np.random.default_rng(3)
    codes = rng.integers(0, 256, (300, 420, 3), dtype=np.uint8)
    img = srgb_decode(SrgbImage(codes))
    plan = plan_tiles(420, 300, tile_size=256, min_overlap=48)
    out = srgb_encode(stitch(split(img, plan), plan))
    assert np.array_equal(out.data, codes)


def test_plan_json_roundtrip():
    plan = plan_tiles(1300, 750)
    again = TilePlan.from_json(plan.to_json())
    assert again == plan
    assert again.origins() == plan.origins()
