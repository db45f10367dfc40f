"""Closed-form glass optics.

Unpolarized Fresnel reflectance for an air/dielectric interface, Snell
refraction, Beer-Lambert tint derived from a base color, the slab
ghost-bounce series, and GGX microfacet sampling.  Everything here is pure
and vectorizes over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "GlassMaterial",
    "GhostTerm",
    "fresnel_unpolarized",
    "refract_cos",
    "absorption_factor",
    "ghost_series",
    "ghost_weights",
    "ghost_series_totals",
    "ggx_sample",
    "ABSORPTION_REFERENCE_DEPTH",
]

# Depth (meters) after which clear glass shows exactly its base-color tint.
ABSORPTION_REFERENCE_DEPTH = 0.005


@dataclass(frozen=True)
class GlassMaterial:
    """Principled-BSDF-style optical parameters for a glass slab."""

    ior: float
    roughness: float = 0.0
    thickness: float = 0.0
    base_color: tuple[float, float, float] = (1.0, 1.0, 1.0)
    metallic: float = 0.0

    def __post_init__(self):
        if self.ior < 1.0:
            raise ValidationError("ior must be >= 1")
        if not 0.0 <= self.roughness <= 1.0:
            raise ValidationError("roughness must be in [0, 1]")
        if self.thickness < 0.0:
            raise ValidationError("thickness must be >= 0")
        bc = tuple(float(c) for c in self.base_color)
        if len(bc) != 3 or any(not 0.0 < c <= 1.0 for c in bc):
            raise ValidationError("base_color channels must be in (0, 1]")
        if not 0.0 <= self.metallic <= 1.0:
            raise ValidationError("metallic must be in [0, 1]")
        object.__setattr__(self, "base_color", bc)


@dataclass(frozen=True)
class GhostTerm:
    """One bounce order of the slab series: RGB throughput and lateral offset."""

    weight: np.ndarray        # (3,) per-channel throughput in [0, 1]
    lateral_offset: float     # meters, in-plane on the front surface
    order: int


def refract_cos(cos_theta_i, n):
    """Cosine of the refracted angle for light entering from air (Snell)."""
    ci = np.asarray(cos_theta_i, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    return np.sqrt(np.maximum(1.0 - (1.0 - ci * ci) / (n * n), 0.0))


def fresnel_unpolarized(cos_theta_i, n):
    """Unpolarized Fresnel reflectance (s/p average) at an air/dielectric boundary."""
    ci = np.asarray(cos_theta_i, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    ct = refract_cos(ci, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        rs = ((ci - n * ct) / (ci + n * ct)) ** 2
        rp = ((ct - n * ci) / (ct + n * ci)) ** 2
        r = 0.5 * (rs + rp)
    # guard the 0/0 at exactly grazing incidence: no interface -> 0, else -> 1
    return np.where(np.isfinite(r), r, np.where(n == 1.0, 0.0, 1.0))


def absorption_factor(material: GlassMaterial, path_length) -> np.ndarray:
    """Beer-Lambert RGB factor for a path of given length through the slab.

    The absorption coefficient is calibrated so a traversal of
    ABSORPTION_REFERENCE_DEPTH attenuates by exactly base_color.
    """
    path = np.asarray(path_length, dtype=np.float64)
    if np.any(path < 0):
        raise ValidationError("path_length must be >= 0")
    bc = np.asarray(material.base_color, dtype=np.float64)
    sigma = -np.log(bc) / ABSORPTION_REFERENCE_DEPTH
    return np.exp(-sigma * path[..., None])


def ghost_weights(cos_theta_i, material: GlassMaterial, max_order: int):
    """Vectorized slab series: per-order reflected/transmitted RGB throughputs.

    Returns (reflected, transmitted, offsets) with shapes
    (..., max_order + 1, 3), (..., max_order + 1, 3) and (..., max_order + 1).
    Reflected order 0 is the front-surface bounce (metallic boosts it, tinted
    by base color); order k reflects k times off the back surface.  Internal
    orders cross the metallic-modulated front interface and are scaled by
    (1 - metallic) per crossing; each internal leg is tinted by the
    Beer-Lambert factor for thickness / cos(theta_t).
    """
    if max_order < 0:
        raise ValidationError("max_order must be >= 0")
    ci = np.asarray(cos_theta_i, dtype=np.float64)
    r = fresnel_unpolarized(ci, material.ior)
    ct = refract_cos(ci, material.ior)
    m = material.metallic
    bc = np.asarray(material.base_color, dtype=np.float64)

    with np.errstate(divide="ignore", invalid="ignore"):
        tan_t = np.where(ct > 0, np.sqrt(np.maximum(1 - ct * ct, 0.0)) / ct, 0.0)
        leg = np.where(ct > 0, material.thickness / np.maximum(ct, 1e-12), 0.0)
    a = absorption_factor(material, leg)  # (..., 3) per internal leg

    k = np.arange(max_order + 1)
    shape = ci.shape + (max_order + 1, 3)
    reflected = np.zeros(shape)
    transmitted = np.zeros(shape)
    r_ = r[..., None, None]
    a_ = a[..., None, :]
    k_ = k[:, None]
    # order 0: dielectric reflectance plus the metallic fraction tinted by base color
    reflected[..., 0, :] = r[..., None] + m * (1 - r)[..., None] * bc
    if max_order >= 1:
        kk = k[1:][:, None]
        reflected[..., 1:, :] = ((1 - m) ** 2 * (1 - r_) ** 2
                                 * r_ ** (2 * kk - 1) * a_ ** (2 * kk))
    transmitted[...] = (1 - m) * (1 - r_) ** 2 * r_ ** (2 * k_) * a_ ** (2 * k_ + 1)
    offsets = 2.0 * k * material.thickness * tan_t[..., None]
    return reflected, transmitted, offsets


def ghost_series(cos_theta_i: float, material: GlassMaterial,
                 max_order: int) -> tuple[list[GhostTerm], list[GhostTerm]]:
    """Slab bounce series for a single incidence angle, as GhostTerm lists."""
    refl, trans, offs = ghost_weights(np.float64(cos_theta_i), material, max_order)
    reflected = [GhostTerm(refl[k], float(offs[k]), k) for k in range(max_order + 1)]
    transmitted = [GhostTerm(trans[k], float(offs[k]), k) for k in range(max_order + 1)]
    return reflected, transmitted


def ghost_series_totals(cos_theta_i, n):
    """Closed-form infinite-order totals for a lossless dielectric slab.

    Returns (reflected_total, transmitted_total) = (2r/(1+r), (1-r)/(1+r)),
    which sum to 1 for every incidence angle and index.
    """
    r = fresnel_unpolarized(cos_theta_i, n)
    return 2 * r / (1 + r), (1 - r) / (1 + r)


def ggx_sample(roughness, u1, u2) -> np.ndarray:
    """Sample a GGX microfacet normal in the local frame (z = macro normal).

    alpha = roughness^2; theta_m = atan(alpha * sqrt(u1 / (1 - u1))),
    phi_m = 2 pi u2.
    """
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    alpha = float(roughness) ** 2
    tan_t = alpha * np.sqrt(u1 / np.maximum(1.0 - u1, 1e-300))
    cos_t = 1.0 / np.sqrt(1.0 + tan_t * tan_t)
    sin_t = tan_t * cos_t
    phi = 2.0 * np.pi * u2
    return np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t], axis=-1)
