"""Pixel-aligned (blended, transmission, reflection) triple renderer.

Transmission is deterministic (no stochastic lobes exist on that path); the
reflection component is Monte Carlo averaged over GGX microfacet samples.
Per-sample randomness comes from a counter-based hash of
(seed, pixel_index, sample_index), so results are bit-identical regardless
of chunking or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, ValidationError
from .imagecore import LinearImage, bilinear_lookup
from .optics import GlassMaterial, absorption_factor, fresnel_unpolarized, refract_cos
from .rng import counter_uniform
from .scene import Scene, camera_ray_grid, plane_radiance

__all__ = [
    "RenderSettings",
    "RenderTriple",
    "render_triple",
    "validate_alignment",
    "transmitted_shift_px",
]


@dataclass(frozen=True)
class RenderSettings:
    spp: int = 16
    max_order: int = 3
    seed: int = 0
    refraction_mode: str = "aligned"   # "aligned" | "exact"
    miss_threshold: float = 0.05

    def __post_init__(self):
        if self.spp < 1:
            raise ValidationError("spp must be >= 1")
        if self.max_order < 0:
            raise ValidationError("max_order must be >= 0")
        if self.refraction_mode not in ("aligned", "exact"):
            raise ValidationError(f"unknown refraction mode {self.refraction_mode!r}")


@dataclass(frozen=True)
class RenderTriple:
    blended: LinearImage       # B
    transmission: LinearImage  # T, ground truth (invisible glass, no tint)
    reflection: LinearImage    # R
    miss_fraction: float
    max_shift_px: float


def transmitted_shift_px(theta_i: float, thickness: float, ior: float,
                         focal_px: float, background_distance: float) -> float:
    """Analytic exact-mode refraction shift, in pixels at the background plane.

    Lateral slab displacement s = d sin(theta_i - theta_t) / cos(theta_t),
    projected through a pinhole of the given focal length.
    """
    cos_t = float(refract_cos(math.cos(theta_i), ior))
    theta_t = math.acos(min(cos_t, 1.0))
    s = thickness * math.sin(theta_i - theta_t) / cos_t
    return focal_px * s / background_distance


def validate_alignment(scene: Scene, material: GlassMaterial) -> float:
    """Worst-case exact-mode transmitted shift over the image corners, in pixels."""
    cam = scene.camera
    n = np.asarray(scene.glass_normal)
    from .scene import _corner_dirs  # corner rays share the pinhole model

    dirs = _corner_dirs(cam)
    cos_i = np.clip(-(dirs @ n), 0.0, 1.0)
    bg_dist = float(np.linalg.norm(
        np.asarray(scene.background.center) - np.asarray(cam.position)))
    shifts = [
        abs(transmitted_shift_px(math.acos(min(float(ci), 1.0)), material.thickness,
                                 material.ior, cam.focal_px, bg_dist))
        for ci in cos_i
    ]
    return max(shifts)


def _envmap_lookup(env, d: np.ndarray) -> np.ndarray:
    """envmap_sample without the unit-direction check (directions are unit here)."""
    u = (np.arctan2(d[:, 0], -d[:, 2]) + np.pi) / (2 * np.pi)
    v = np.arccos(np.clip(d[:, 1], -1.0, 1.0)) / np.pi
    img = env.image
    return bilinear_lookup(img.data, u * img.width - 0.5, v * img.height - 0.5,
                           wrap_x=True) * env.exposure


def _orthonormal_frame(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.array([0.0, 1.0, 0.0]) if abs(n[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
    t1 = np.cross(a, n)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(n, t1)


def _strata(spp: int) -> int:
    root = int(round(math.sqrt(spp)))
    return root if root * root == spp else 0


def render_triple(scene: Scene, material: GlassMaterial,
                  settings: RenderSettings) -> RenderTriple:
    """Render the pixel-aligned triple (B, T, R) for one scene and material."""
    cam = scene.camera
    h, w = cam.height, cam.width
    npix = h * w
    origin = np.asarray(cam.position)
    dirs = camera_ray_grid(cam)                       # (npix, 3)
    origins = np.broadcast_to(origin, dirs.shape)
    n = np.asarray(scene.glass_normal)

    denom = dirs @ n                                   # < 0 for rays toward glass
    if np.any(denom >= 0):
        raise CoverageError("some camera rays never reach the glass plane")
    t_glass = ((np.asarray(scene.glass_center) - origin) @ n) / denom
    hit = origin + dirs * t_glass[:, None]

    cos_i = np.clip(-denom, 0.0, 1.0)
    cos_t = refract_cos(cos_i, material.ior)
    sin_t = np.sqrt(np.maximum(1.0 - cos_t * cos_t, 0.0))
    tan_t = np.where(cos_t > 0, sin_t / np.maximum(cos_t, 1e-12), 0.0)

    # in-plane propagation direction on the glass (zero at normal incidence)
    tangent = dirs + cos_i[:, None] * n
    t_norm = np.linalg.norm(tangent, axis=1, keepdims=True)
    tangent = np.where(t_norm > 1e-12, tangent / np.maximum(t_norm, 1e-12), 0.0)

    misses = 0
    lookups = 0

    # ---- ground truth T: invisible glass, straight rays, deterministic 1 spp
    t_vals, t_miss = plane_radiance(origins, dirs, scene.background)
    misses += int(t_miss.sum())
    lookups += npix

    # ---- deterministic transmitted component of B
    K = settings.max_order
    leg = np.where(cos_t > 0, material.thickness / np.maximum(cos_t, 1e-12), 0.0)
    a = absorption_factor(material, leg)               # (npix, 3)
    r_macro = fresnel_unpolarized(cos_i, material.ior)
    one_m = 1.0 - material.metallic

    base_shift = np.zeros(npix)
    if settings.refraction_mode == "exact":
        theta_i = np.arccos(np.clip(cos_i, 0.0, 1.0))
        theta_t = np.arccos(np.clip(cos_t, 0.0, 1.0))
        base_shift = material.thickness * np.sin(theta_i - theta_t) / np.maximum(cos_t, 1e-12)

    trans = np.zeros((npix, 3), dtype=np.float32)
    a_pow = a.copy()                                   # a^(2k+1), starts at a^1
    r_pow = np.ones(npix)                              # r^(2k)
    for k in range(K + 1):
        wk = (one_m * (1.0 - r_macro) ** 2 * r_pow)[:, None] * a_pow
        if wk.max() < 1e-12:
            break
        shift = base_shift + 2.0 * k * material.thickness * tan_t
        if k == 0 and settings.refraction_mode == "aligned":
            vals, miss = t_vals, t_miss                # identical ray: bit-aligned with T
        else:
            o_k = hit + shift[:, None] * tangent
            vals, miss = plane_radiance(o_k, dirs, scene.background)
            misses += int(miss.sum())
            lookups += npix
        trans += (wk * vals).astype(np.float32)
        r_pow *= r_macro * r_macro
        a_pow *= a * a

    # ---- stochastic reflected component
    t1, t2 = _orthonormal_frame(n)
    alpha = material.roughness ** 2
    spp = 1 if material.roughness == 0.0 else settings.spp
    root = _strata(spp)
    bc = np.asarray(material.base_color)
    pix_idx = np.arange(npix, dtype=np.uint64)
    a2 = a * a
    neutral_tint = material.thickness == 0.0 or all(c == 1.0 for c in material.base_color)

    refl_sum = np.zeros((npix, 3), dtype=np.float64)
    for s in range(spp):
        base = pix_idx * np.uint64(2 * settings.spp) + np.uint64(2 * s)
        r1 = counter_uniform(settings.seed, base)
        r2 = counter_uniform(settings.seed, base + np.uint64(1))
        if root:
            r1 = (s // root + r1) / root
            r2 = (s % root + r2) / root
        if alpha == 0.0:
            m = np.broadcast_to(n, dirs.shape)
        else:
            tan_m = alpha * np.sqrt(r1 / np.maximum(1.0 - r1, 1e-300))
            cos_m = 1.0 / np.sqrt(1.0 + tan_m * tan_m)
            sin_m = tan_m * cos_m
            phi = 2.0 * np.pi * r2
            m = (sin_m * np.cos(phi))[:, None] * t1 \
                + (sin_m * np.sin(phi))[:, None] * t2 + cos_m[:, None] * n
        dm = np.einsum("ij,ij->i", dirs, m)
        cos_f = np.clip(-dm, 0.0, 1.0)
        refl_dir = dirs - 2.0 * dm[:, None] * m
        r = fresnel_unpolarized(cos_f, material.ior)

        w0 = r[:, None] + material.metallic * (1.0 - r)[:, None] * bc
        if scene.reflection_mode == "envmap":
            gain = one_m ** 2 * (1.0 - r) ** 2
            rp = r.copy()                              # r^(2k-1) for k >= 1
            if neutral_tint:
                internal = np.zeros(npix)
                for k in range(1, K + 1):
                    internal += gain * rp
                    rp *= r * r
                w_total = w0 + internal[:, None]
            else:
                w_total = w0.copy()
                ap = a2.copy()
                for k in range(1, K + 1):
                    w_total += (gain * rp)[:, None] * ap
                    rp *= r * r
                    ap = ap * a2
            refl_sum += w_total * _envmap_lookup(scene.reflection_env, refl_dir)
        else:
            if w0.max() >= 1e-12:
                vals, miss = plane_radiance(hit, refl_dir, scene.reflection_plane)
                misses += int(miss.sum())
                lookups += npix
                refl_sum += w0 * vals
            rp = r.copy()
            ap = a2.copy()
            for k in range(1, K + 1):
                wk = (one_m ** 2 * (1.0 - r) ** 2 * rp)[:, None] * ap
                if wk.max() < 1e-12:
                    break
                o_k = hit + (2.0 * k * material.thickness * tan_t)[:, None] * tangent
                vals, miss = plane_radiance(o_k, refl_dir, scene.reflection_plane)
                misses += int(miss.sum())
                lookups += npix
                refl_sum += wk * vals
                rp *= r * r
                ap *= a2

    refl = (refl_sum / spp).astype(np.float32)
    blended = trans + refl

    miss_fraction = misses / lookups if lookups else 0.0
    if miss_fraction > settings.miss_threshold:
        raise CoverageError(
            f"{miss_fraction:.1%} of ray lookups missed their source plane "
            f"(threshold {settings.miss_threshold:.1%}); widen the plane margins "
            "or reduce the glass tilt")

    return RenderTriple(
        blended=LinearImage(blended.reshape(h, w, 3)),
        transmission=LinearImage(t_vals.reshape(h, w, 3)),
        reflection=LinearImage(refl.reshape(h, w, 3)),
        miss_fraction=miss_fraction,
        max_shift_px=validate_alignment(scene, material),
    )
