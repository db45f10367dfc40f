"""Shared fixtures: tiny synthetic image assets written to temp directories."""

from __future__ import annotations

import numpy as np
import pytest
from PIL import Image


def write_png(path, rgb: np.ndarray) -> str:
    """Write an (h, w, 3) uint8 array as a PNG and return the path."""
    Image.fromarray(rgb.astype(np.uint8), mode="RGB").save(str(path))
    return str(path)


def write_hdr_flat(path, rgbe: np.ndarray) -> str:
    """Write an (h, w, 4) uint8 RGBE array as a flat (non-RLE) Radiance file."""
    h, w, _ = rgbe.shape
    header = f"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y {h} +X {w}\n"
    with open(str(path), "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(rgbe.astype(np.uint8).tobytes())
    return str(path)


def write_hdr_rle(path, rgbe: np.ndarray) -> str:
    """Write an RGBE array using adaptive RLE scanlines (run + literal mix)."""
    h, w, _ = rgbe.shape
    if not 8 <= w <= 32767:
        raise ValueError("adaptive RLE needs width in [8, 32767]")
    out = bytearray(f"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y {h} +X {w}\n".encode())
    for row in rgbe.astype(np.uint8):
        out += bytes([2, 2, w >> 8, w & 0xFF])
        for c in range(4):
            comp = row[:, c]
            i = 0
            while i < w:
                run = 1
                while i + run < w and run < 127 and comp[i + run] == comp[i]:
                    run += 1
                if run >= 4:
                    out += bytes([128 + run, comp[i]])
                    i += run
                else:
                    lit = i
                    while (lit < w and lit - i < 128
                           and not (lit + 3 < w
                                    and comp[lit] == comp[lit + 1]
                                    == comp[lit + 2] == comp[lit + 3])):
                        lit += 1
                    if lit == i:
                        lit = i + 1
                    out += bytes([lit - i]) + comp[i:lit].tobytes()
                    i = lit
    with open(str(path), "wb") as fh:
        fh.write(bytes(out))
    return str(path)


@pytest.fixture(scope="session")
def asset_dirs(tmp_path_factory):
    """A small (hdr_dir, srgb_dir) pool of deterministic synthetic assets."""
    root = tmp_path_factory.mktemp("assets")
    srgb_dir = root / "srgb"
    hdr_dir = root / "hdr"
    srgb_dir.mkdir()
    hdr_dir.mkdir()
    rng = np.random.default_rng(42)
    for i in range(3):
        rgb = rng.integers(0, 256, size=(48, 64, 3), dtype=np.uint8)
        write_png(srgb_dir / f"tex_{i}.png", rgb)
    for i in range(2):
        mant = rng.integers(32, 200, size=(16, 32, 3), dtype=np.uint8)
        rgbe = np.concatenate(
            [mant, np.full((16, 32, 1), 128, dtype=np.uint8)], axis=2)
        write_hdr_flat(hdr_dir / f"env_{i}.hdr", rgbe)
    return str(hdr_dir), str(srgb_dir)
