"""Bit-stable 8-bit image quality metrics: PSNR, SSIM, MS-SSIM, composite loss.

All metrics take 8-bit sRGB images (the on-disk representation), compute in
float64, and are symmetric in their two arguments.  SSIM offers two window
presets: a 7x7 uniform window and an 11x11 Gaussian (sigma 1.5); both use
the weighted-sum (biased) local moment estimators of the standard
formulation, averaged over fully interior windows and then over channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .imagecore import SrgbImage

__all__ = [
    "SsimSettings",
    "LossWeights",
    "psnr",
    "ssim",
    "ms_ssim",
    "composite_loss",
    "PSNR_CAP_DB",
    "MS_SSIM_WEIGHTS",
]

PSNR_CAP_DB = 100.0
# exponent weights for the five scales; renormalized so they sum to 1 exactly
MS_SSIM_WEIGHTS = np.array([0.0448, 0.2856, 0.3001, 0.2363, 0.1333])
MS_SSIM_WEIGHTS = MS_SSIM_WEIGHTS / MS_SSIM_WEIGHTS.sum()
MS_SSIM_MIN_SIDE = 11 * 2 ** 4


@dataclass(frozen=True)
class SsimSettings:
    window: str = "uniform7"        # "uniform7" | "gaussian11"
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0

    def __post_init__(self):
        if self.window not in ("uniform7", "gaussian11"):
            raise ValidationError(f"unknown SSIM window preset {self.window!r}")

    @property
    def window_size(self) -> int:
        return 7 if self.window == "uniform7" else 11

    def kernel(self) -> np.ndarray:
        if self.window == "uniform7":
            return np.full(7, 1.0 / 7.0)
        x = np.arange(-5, 6, dtype=np.float64)
        k = np.exp(-(x * x) / (2 * 1.5 ** 2))
        return k / k.sum()


@dataclass(frozen=True)
class LossWeights:
    lambda_psnr: float = 0.1
    lambda_ssim: float = 20.0

    def __post_init__(self):
        if self.lambda_psnr < 0 or self.lambda_ssim < 0:
            raise ValidationError("loss weights must be >= 0")


def _as_u8(img) -> np.ndarray:
    if isinstance(img, SrgbImage):
        return img.data
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        raise ValidationError("metrics expect 8-bit images")
    return arr


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB over all channels; capped at 100 dB."""
    a, b = _as_u8(a), _as_u8(b)
    _check_pair(a, b)
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(255.0 ** 2 / mse))


def _local_stats(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = ndimage.correlate1d(x, kernel, axis=0, mode="constant")
    return ndimage.correlate1d(out, kernel, axis=1, mode="constant")


def _ssim_channel(x: np.ndarray, y: np.ndarray, settings: SsimSettings) -> float:
    kernel = settings.kernel()
    r = settings.window_size // 2
    valid = (slice(r, x.shape[0] - r), slice(r, x.shape[1] - r))
    mu_x = _local_stats(x, kernel)[valid]
    mu_y = _local_stats(y, kernel)[valid]
    sxx = _local_stats(x * x, kernel)[valid] - mu_x * mu_x
    syy = _local_stats(y * y, kernel)[valid] - mu_y * mu_y
    sxy = _local_stats(x * y, kernel)[valid] - mu_x * mu_y
    c1 = (settings.k1 * settings.dynamic_range) ** 2
    c2 = (settings.k2 * settings.dynamic_range) ** 2
    s = ((2 * mu_x * mu_y + c1) * (2 * sxy + c2)
         / ((mu_x ** 2 + mu_y ** 2 + c1) * (sxx + syy + c2)))
    return float(s.mean())


def ssim(a, b, settings: SsimSettings = SsimSettings()) -> float:
    """Mean structural similarity over interior windows, averaged over channels."""
    a, b = _as_u8(a), _as_u8(b)
    _check_pair(a, b)
    if min(a.shape[0], a.shape[1]) < settings.window_size:
        raise ValidationError(
            f"image smaller than the {settings.window_size}x{settings.window_size} window")
    x = a.astype(np.float64)
    y = b.astype(np.float64)
    return float(np.mean([_ssim_channel(x[..., c], y[..., c], settings)
                          for c in range(a.shape[2])]))


def _cs_and_l(x: np.ndarray, y: np.ndarray, settings: SsimSettings):
    kernel = settings.kernel()
    r = settings.window_size // 2
    valid = (slice(r, x.shape[0] - r), slice(r, x.shape[1] - r))
    mu_x = _local_stats(x, kernel)[valid]
    mu_y = _local_stats(y, kernel)[valid]
    sxx = _local_stats(x * x, kernel)[valid] - mu_x * mu_x
    syy = _local_stats(y * y, kernel)[valid] - mu_y * mu_y
    sxy = _local_stats(x * y, kernel)[valid] - mu_x * mu_y
    c1 = (settings.k1 * settings.dynamic_range) ** 2
    c2 = (settings.k2 * settings.dynamic_range) ** 2
    cs = float(((2 * sxy + c2) / (sxx + syy + c2)).mean())
    lum = float(((2 * mu_x * mu_y + c1) / (mu_x ** 2 + mu_y ** 2 + c1)).mean())
    return cs, lum


def _downsample2(x: np.ndarray) -> np.ndarray:
    h, w = (x.shape[0] // 2) * 2, (x.shape[1] // 2) * 2
    x = x[:h, :w]
    return (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2]) / 4.0


def ms_ssim(a, b) -> float:
    """Multi-scale SSIM: contrast-structure at 5 dyadic scales, luminance at the last.

    Uses the 11x11 Gaussian window and 2x2 average-pooling between scales;
    exponent weights are the canonical five, renormalized to sum to 1.
    """
    a, b = _as_u8(a), _as_u8(b)
    _check_pair(a, b)
    if min(a.shape[0], a.shape[1]) < MS_SSIM_MIN_SIDE:
        raise ValidationError(
            f"ms_ssim needs min dimension >= {MS_SSIM_MIN_SIDE} "
            f"(got {a.shape[1]}x{a.shape[0]})")
    settings = SsimSettings(window="gaussian11")
    scores = []
    for c in range(a.shape[2]):
        x = a[..., c].astype(np.float64)
        y = b[..., c].astype(np.float64)
        score = 1.0
        for scale in range(5):
            cs, lum = _cs_and_l(x, y, settings)
            score *= max(cs, 0.0) ** MS_SSIM_WEIGHTS[scale]
            if scale == 4:
                score *= max(lum, 0.0) ** MS_SSIM_WEIGHTS[scale]
            else:
                x, y = _downsample2(x), _downsample2(y)
        scores.append(score)
    return float(np.mean(scores))


def composite_loss(pred, gt, weights: LossWeights = LossWeights(),
                   ssim_settings: SsimSettings = SsimSettings()) -> float:
    """Evaluative scalar: lambda_psnr * (-PSNR) + lambda_ssim * (1 - SSIM)."""
    return (weights.lambda_psnr * (-psnr(pred, gt))
            + weights.lambda_ssim * (1.0 - ssim(pred, gt, ssim_settings)))
