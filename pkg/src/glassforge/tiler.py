"""Overlapping-tile planner, splitter, and linear-blend stitcher.

Axes shorter than the tile size are Lanczos-upsampled to the tile size
before tiling; stitching blends overlap bands with linear ramps normalized
to a per-pixel partition of unity and resamples back to the source size.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .imagecore import LinearImage, resample_lanczos

__all__ = ["TilePlan", "plan_tiles", "split", "stitch", "tile_weights"]

DEFAULT_TILE_SIZE = 608
DEFAULT_MIN_OVERLAP = 96


@dataclass(frozen=True)
class TilePlan:
    tile_size: int
    source_size: tuple[int, int]     # (width, height)
    working_size: tuple[int, int]
    x_origins: tuple[int, ...]
    y_origins: tuple[int, ...]

    @property
    def tile_count(self) -> int:
        return len(self.x_origins) * len(self.y_origins)

    def origins(self):
        """All tile origins in row-major order, as (x, y) pairs."""
        return [(x, y) for y in self.y_origins for x in self.x_origins]

    def to_json(self) -> str:
        return json.dumps({
            "tile_size": self.tile_size,
            "source_size": list(self.source_size),
            "working_size": list(self.working_size),
            "x_origins": list(self.x_origins),
            "y_origins": list(self.y_origins),
        })

    @classmethod
    def from_json(cls, text: str) -> "TilePlan":
        d = json.loads(text)
        return cls(tile_size=d["tile_size"],
                   source_size=tuple(d["source_size"]),
                   working_size=tuple(d["working_size"]),
                   x_origins=tuple(d["x_origins"]),
                   y_origins=tuple(d["y_origins"]))


def _plan_axis(length: int, tile: int, min_overlap: int) -> tuple[tuple[int, ...], int]:
    if length <= tile:
        return (0,), tile          # shorter-side upsample rule
    n = math.ceil((length - tile) / (tile - min_overlap)) + 1
    span = length - tile
    origins = tuple(int(round(i * span / (n - 1))) for i in range(n))
    return origins, length


def plan_tiles(width: int, height: int, tile_size: int = DEFAULT_TILE_SIZE,
               min_overlap: int = DEFAULT_MIN_OVERLAP) -> TilePlan:
    """Plan overlapping square tiles covering the (possibly upsampled) image."""
    if width < 1 or height < 1:
        raise ValidationError("image dimensions must be >= 1")
    if not 0 < min_overlap < tile_size:
        raise ValidationError("min_overlap must be in (0, tile_size)")
    xo, ww = _plan_axis(width, tile_size, min_overlap)
    yo, wh = _plan_axis(height, tile_size, min_overlap)
    return TilePlan(tile_size=tile_size, source_size=(width, height),
                    working_size=(ww, wh), x_origins=xo, y_origins=yo)


def _axis_weights(origins: tuple[int, ...], tile: int) -> np.ndarray:
    """Per-tile 1-D weight profiles of length tile, with linear overlap ramps."""
    n = len(origins)
    w = np.ones((n, tile))
    for i, o in enumerate(origins):
        if i > 0:
            band = origins[i - 1] + tile - o
            if band > 0:
                j = np.arange(min(band, tile))
                w[i, :len(j)] *= (j + 0.5) / band
        if i < n - 1:
            band = o + tile - origins[i + 1]
            if band > 0:
                j = np.arange(min(band, tile))
                w[i, tile - len(j):] *= 1.0 - (j + 0.5) / band
    return w


def tile_weights(plan: TilePlan) -> list[np.ndarray]:
    """Per-tile 2-D blend weights (normalized to a partition of unity)."""
    wx = _axis_weights(plan.x_origins, plan.tile_size)
    wy = _axis_weights(plan.y_origins, plan.tile_size)
    ww, wh = plan.working_size
    total = np.zeros((wh, ww))
    tiles = []
    for yi, y in enumerate(plan.y_origins):
        for xi, x in enumerate(plan.x_origins):
            w2 = wy[yi][:, None] * wx[xi][None, :]
            tiles.append(w2)
            total[y:y + plan.tile_size, x:x + plan.tile_size] += w2
    out = []
    idx = 0
    for y in plan.y_origins:
        for x in plan.x_origins:
            out.append(tiles[idx] / total[y:y + plan.tile_size, x:x + plan.tile_size])
            idx += 1
    return out


def split(img: LinearImage, plan: TilePlan) -> list[LinearImage]:
    """Extract the planned tiles (after resampling to the working size if needed)."""
    if (img.width, img.height) != plan.source_size:
        raise ValidationError(
            f"image {img.width}x{img.height} does not match plan source "
            f"{plan.source_size[0]}x{plan.source_size[1]}")
    work = img
    if plan.working_size != plan.source_size:
        work = resample_lanczos(img, plan.working_size[0], plan.working_size[1])
    ts = plan.tile_size
    return [LinearImage(work.data[y:y + ts, x:x + ts].copy())
            for (x, y) in plan.origins()]


def stitch(tiles: list[LinearImage], plan: TilePlan) -> LinearImage:
    """Blend tiles back into one image at the plan's source size."""
    if len(tiles) != plan.tile_count:
        raise ValidationError(f"expected {plan.tile_count} tiles, got {len(tiles)}")
    ts = plan.tile_size
    for t in tiles:
        if (t.width, t.height) != (ts, ts):
            raise ValidationError(f"tile size {t.width}x{t.height} != {ts}x{ts}")
    ww, wh = plan.working_size
    canvas = np.zeros((wh, ww, 3))
    for tile, w2, (x, y) in zip(tiles, tile_weights(plan), plan.origins()):
        canvas[y:y + ts, x:x + ts] += tile.data.astype(np.float64) * w2[..., None]
    out = LinearImage(canvas.astype(np.float32))
    if plan.working_size != plan.source_size:
        out = resample_lanczos(out, plan.source_size[0], plan.source_size[1])
    return out
