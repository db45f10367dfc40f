"""Image buffers, sRGB transforms, Lanczos resampling, and environment maps.

Linear images hold row-major RGB float32 radiance; 8-bit images hold
sRGB-encoded bytes.  All operations are pure and safe for shared reads.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageFormatError, ValidationError

__all__ = [
    "LinearImage",
    "SrgbImage",
    "EnvMap",
    "srgb_decode",
    "srgb_encode",
    "resample_lanczos",
    "envmap_sample",
    "load_image",
    "save_png",
]


@dataclass(frozen=True)
class LinearImage:
    """RGB radiance buffer, shape (height, width, 3), float32, unbounded above.

    Values are normally >= 0; small negative excursions produced by windowed
    filters are tolerated here and clamped on 8-bit conversion.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValidationError(f"LinearImage expects (h, w, 3), got {arr.shape}")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class SrgbImage:
    """sRGB-encoded 8-bit RGB buffer, shape (height, width, 3), uint8."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
            raise ValidationError(
                f"SrgbImage expects uint8 (h, w, 3), got {arr.dtype} {arr.shape}"
            )
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class EnvMap:
    """Equirectangular radiance panorama with a global exposure multiplier."""

    image: LinearImage
    exposure: float = 1.0

    def __post_init__(self):
        if not (self.exposure > 0):
            raise ValidationError("EnvMap exposure must be > 0")


# ---------------------------------------------------------------------------
# sRGB transfer functions
# ---------------------------------------------------------------------------

def _eotf(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _oetf(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1.0 / 2.4) - 0.055)


_DECODE_LUT = _eotf(np.arange(256) / 255.0).astype(np.float32)


def srgb_decode(img: SrgbImage) -> LinearImage:
    """Apply the sRGB EOTF, mapping 8-bit codes to linear radiance in [0, 1]."""
    return LinearImage(_DECODE_LUT[img.data])


def srgb_encode(img: LinearImage) -> SrgbImage:
    """Clamp to [0, 1], apply the sRGB OETF, and round half-away-from-zero.

    Raises on non-finite input, identifying the first offending pixel.
    """
    data = img.data
    finite = np.isfinite(data)
    if not finite.all():
        y, x, c = np.argwhere(~finite)[0]
        raise ValidationError(f"non-finite value at pixel (x={x}, y={y}, channel={c})")
    encoded = _oetf(np.clip(data.astype(np.float64), 0.0, 1.0))
    # values are >= 0 here, so floor(x + 0.5) == round half away from zero
    return SrgbImage(np.floor(encoded * 255.0 + 0.5).astype(np.uint8))


# ---------------------------------------------------------------------------
# Lanczos resampling
# ---------------------------------------------------------------------------

_LANCZOS_A = 3


def _lanczos_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Dense (n_out, n_in) row-normalized Lanczos-3 resampling matrix.

    The kernel is stretched by the scale factor when downsampling; taps
    falling outside the source are accumulated onto the edge samples
    (clamp-to-edge).
    """
    scale = n_in / n_out
    stretch = max(scale, 1.0)
    support = _LANCZOS_A * stretch
    centers = (np.arange(n_out) + 0.5) * scale - 0.5
    left = np.floor(centers - support).astype(np.int64) + 1
    n_taps = int(math.ceil(2 * support)) + 1
    taps = left[:, None] + np.arange(n_taps)[None, :]
    x = (taps - centers[:, None]) / stretch
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.sinc(x) * np.sinc(x / _LANCZOS_A)
    w[np.abs(x) >= _LANCZOS_A] = 0.0
    w /= w.sum(axis=1, keepdims=True)
    mat = np.zeros((n_out, n_in))
    rows = np.broadcast_to(np.arange(n_out)[:, None], taps.shape)
    np.add.at(mat, (rows.ravel(), np.clip(taps, 0, n_in - 1).ravel()), w.ravel())
    return mat


def resample_lanczos(img: LinearImage, new_width: int, new_height: int) -> LinearImage:
    """Separable Lanczos-3 resampling with clamp-to-edge boundary handling."""
    if new_width < 1 or new_height < 1:
        raise ValidationError("target dimensions must be >= 1")
    data = img.data.astype(np.float64)
    if new_height != img.height:
        data = np.tensordot(_lanczos_matrix(img.height, new_height), data, axes=(1, 0))
    if new_width != img.width:
        mat = _lanczos_matrix(img.width, new_width)
        data = np.tensordot(mat, data, axes=(1, 1)).transpose(1, 0, 2)
    return LinearImage(data.astype(np.float32))


# ---------------------------------------------------------------------------
# Environment-map sampling
# ---------------------------------------------------------------------------

def bilinear_lookup(data: np.ndarray, x: np.ndarray, y: np.ndarray,
                    wrap_x: bool = False) -> np.ndarray:
    """Bilinear fetch at continuous pixel coords; clamps (or wraps x) at edges."""
    h, w = data.shape[:2]
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    if wrap_x:
        xa, xb = x0 % w, (x0 + 1) % w
    else:
        xa, xb = np.clip(x0, 0, w - 1), np.clip(x0 + 1, 0, w - 1)
    ya, yb = np.clip(y0, 0, h - 1), np.clip(y0 + 1, 0, h - 1)
    top = data[ya, xa] * (1 - fx) + data[ya, xb] * fx
    bot = data[yb, xa] * (1 - fx) + data[yb, xb] * fx
    return top * (1 - fy) + bot * fy


def envmap_sample(env: EnvMap, direction: np.ndarray) -> np.ndarray:
    """Sample the panorama along unit direction(s), scaled by exposure.

    Convention: u = (atan2(d_x, -d_z) + pi) / (2 pi), v = acos(d_y) / pi.
    Horizontal lookups wrap; vertical lookups clamp at the poles.
    """
    d = np.asarray(direction, dtype=np.float64)
    single = d.ndim == 1
    d = np.atleast_2d(d)
    norms = np.linalg.norm(d, axis=-1)
    if not np.allclose(norms, 1.0, atol=1e-6):
        raise ValidationError("envmap_sample requires unit directions")
    u = (np.arctan2(d[..., 0], -d[..., 2]) + np.pi) / (2 * np.pi)
    v = np.arccos(np.clip(d[..., 1], -1.0, 1.0)) / np.pi
    img = env.image
    out = bilinear_lookup(img.data, u * img.width - 0.5, v * img.height - 0.5,
                          wrap_x=True) * env.exposure
    return out[0] if single else out


# ---------------------------------------------------------------------------
# File I/O: PNG / JPEG (via sRGB decode) and Radiance HDR (RGBE)
# ---------------------------------------------------------------------------

def rgbe_to_linear(rgbe: np.ndarray) -> np.ndarray:
    """Decode RGBE texels: value = mantissa / 256 * 2^(exponent - 128)."""
    rgbe = np.asarray(rgbe, dtype=np.uint8)
    mant = rgbe[..., :3].astype(np.float32)
    exp = rgbe[..., 3].astype(np.int32)
    scale = np.where(exp == 0, 0.0, np.ldexp(1.0, exp - 136)).astype(np.float32)
    return mant * scale[..., None]


def _read_hdr(path: str) -> LinearImage:
    with open(path, "rb") as fh:
        raw = fh.read()
    # header: lines up to a blank line, then the resolution line
    pos = 0

    def next_line():
        nonlocal pos
        end = raw.find(b"\n", pos)
        if end < 0:
            raise ImageFormatError(f"{path}: truncated HDR header")
        line, pos = raw[pos:end], end + 1
        return line

    magic = next_line()
    if not magic.startswith(b"#?"):
        raise ImageFormatError(f"{path}: missing Radiance HDR signature")
    while True:
        line = next_line()
        if line == b"":
            break
        if line.startswith(b"FORMAT=") and line != b"FORMAT=32-bit_rle_rgbe":
            raise ImageFormatError(f"{path}: unsupported HDR format {line!r}")
    res = next_line().split()
    if len(res) != 4 or res[0] != b"-Y" or res[2] != b"+X":
        raise ImageFormatError(f"{path}: unsupported HDR orientation {res!r}")
    height, width = int(res[1]), int(res[3])

    buf = np.frombuffer(raw, dtype=np.uint8, offset=pos)
    rgbe = np.empty((height, width, 4), dtype=np.uint8)
    i = 0
    for row in range(height):
        if (i + 4 <= buf.size and 8 <= width < 32768 and buf[i] == 2
                and buf[i + 1] == 2 and (int(buf[i + 2]) << 8 | int(buf[i + 3])) == width):
            i += 4  # adaptive RLE scanline, per-component runs
            for c in range(4):
                x = 0
                while x < width:
                    count = int(buf[i])
                    if count > 128:
                        count -= 128
                        rgbe[row, x:x + count, c] = buf[i + 1]
                        i += 2
                    else:
                        rgbe[row, x:x + count, c] = buf[i + 1:i + 1 + count]
                        i += 1 + count
                    x += count
        else:
            if buf[i] == 1 and buf[i + 1] == 1 and buf[i + 2] == 1:
                raise ImageFormatError(f"{path}: old-style RLE HDR not supported")
            need = width * 4
            rgbe[row] = buf[i:i + need].reshape(width, 4)
            i += need
    return LinearImage(rgbe_to_linear(rgbe))


def load_image(path: str) -> LinearImage:
    """Load PNG/JPEG (sRGB-decoded) or Radiance HDR (linear) as radiance."""
    if not os.path.exists(path):
        raise ImageFormatError(f"{path}: file does not exist")
    if path.lower().endswith((".hdr", ".pic")):
        return _read_hdr(path)
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: unrecognized image format") from exc
    return srgb_decode(SrgbImage(arr))


def save_png(img: SrgbImage, path: str) -> None:
    """Write an 8-bit RGB PNG."""
    Image.fromarray(img.data, mode="RGB").save(path, format="PNG")
