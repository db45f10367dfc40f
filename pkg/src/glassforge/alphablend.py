"""Screen-space alpha-blending baseline: B = a*T + b*R - a*b*T*R.

The reflection layer is optionally Gaussian-blurred before blending to mimic
scattering.  Inputs are expected in [0, 1]; the blend is closed over that
range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .imagecore import LinearImage

__all__ = ["BlendParams", "alpha_blend", "gaussian_blur"]


@dataclass(frozen=True)
class BlendParams:
    alpha: float
    beta: float
    blur_sigma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0 or not 0.0 <= self.beta <= 1.0:
            raise ValidationError("alpha and beta must be in [0, 1]")
        if self.blur_sigma < 0.0:
            raise ValidationError("blur_sigma must be >= 0")


def gaussian_blur(img: LinearImage, sigma: float) -> LinearImage:
    """Separable Gaussian blur, radius ceil(3 sigma), clamp-to-edge; 0 = identity."""
    if sigma < 0:
        raise ValidationError("sigma must be >= 0")
    if sigma == 0:
        return LinearImage(img.data.copy())
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2 * sigma * sigma))
    kernel /= kernel.sum()
    data = img.data.astype(np.float64)
    data = ndimage.correlate1d(data, kernel, axis=0, mode="nearest")
    data = ndimage.correlate1d(data, kernel, axis=1, mode="nearest")
    return LinearImage(data.astype(np.float32))


def alpha_blend(transmission: LinearImage, reflection: LinearImage,
                params: BlendParams) -> LinearImage:
    """Blend the two layers after blurring the reflection layer."""
    if (transmission.width, transmission.height) != (reflection.width, reflection.height):
        raise ValidationError(
            f"dimension mismatch: {transmission.width}x{transmission.height} vs "
            f"{reflection.width}x{reflection.height}")
    t = transmission.data.astype(np.float64)
    r = gaussian_blur(reflection, params.blur_sigma).data.astype(np.float64)
    b = params.alpha * t + params.beta * r - params.alpha * params.beta * t * r
    return LinearImage(b.astype(np.float32))
