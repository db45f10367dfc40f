"""Scene template: pinhole camera, glass slab pose, and textured planes.

The solver sizes the background plane to the camera frustum footprint and,
in planar-reflection mode, sizes the reflection-source plane to the frustum
mirrored about the glass, each with a safety margin.  Solved scenes are
immutable and shared read-only by render workers.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CoverageError, ValidationError
from .imagecore import EnvMap, LinearImage, bilinear_lookup

__all__ = [
    "Camera",
    "PlaneTarget",
    "SceneConfig",
    "Scene",
    "solve_geometry",
    "camera_ray",
    "camera_ray_grid",
    "intersect_plane",
    "intersect_plane_batch",
    "COVERAGE_MARGIN",
]

COVERAGE_MARGIN = 1.05


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValidationError("zero-length vector")
    return v / n


@dataclass(frozen=True)
class Camera:
    """Pinhole camera; fov_x is the full horizontal field of view in degrees."""

    width: int
    height: int
    fov_x: float
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    forward: tuple[float, float, float] = (0.0, 0.0, -1.0)
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError("image dimensions must be >= 1")
        if not 10.0 < self.fov_x < 120.0:
            raise ValidationError("fov_x must be in (10, 120) degrees")
        f = _unit(self.forward)
        u = _unit(self.up)
        if abs(float(f @ u)) > 1e-9:
            raise ValidationError("forward and up must be orthogonal")
        object.__setattr__(self, "forward", tuple(f))
        object.__setattr__(self, "up", tuple(u))

    @property
    def right(self) -> np.ndarray:
        return np.cross(self.forward, self.up)

    @property
    def tan_half_fov(self) -> float:
        return math.tan(math.radians(self.fov_x) / 2)

    @property
    def focal_px(self) -> float:
        return (self.width / 2) / self.tan_half_fov


@dataclass(frozen=True)
class PlaneTarget:
    """Finite textured plane with an explicit in-plane (u, v) basis."""

    center: tuple[float, float, float]
    normal: tuple[float, float, float]
    half_extent_u: float
    half_extent_v: float
    texture: LinearImage
    u_axis: tuple[float, float, float] = field(default=None)  # type: ignore[assignment]
    v_axis: tuple[float, float, float] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        n = _unit(self.normal)
        if self.half_extent_u <= 0 or self.half_extent_v <= 0:
            raise ValidationError("plane extents must be > 0")
        if self.u_axis is None:
            up_hint = np.array([0.0, 1.0, 0.0])
            if abs(float(n @ up_hint)) > 0.99:
                up_hint = np.array([0.0, 0.0, 1.0])
            u_axis = _unit(np.cross(up_hint, n))
            v_axis = np.cross(n, u_axis)
            object.__setattr__(self, "u_axis", tuple(u_axis))
            object.__setattr__(self, "v_axis", tuple(v_axis))
        object.__setattr__(self, "normal", tuple(n))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))


@dataclass(frozen=True)
class SceneConfig:
    """Inputs to the geometry solver; images are already-loaded radiance."""

    width: int
    height: int
    fov_x: float
    glass_distance_m: float
    glass_tilt_deg: float
    background_distance_m: float
    background: LinearImage
    reflection_mode: str                      # "envmap" | "plane"
    reflection_image: LinearImage
    reflection_distance_m: float = 1.0
    reflection_exposure: float = 1.0

    def digest(self) -> str:
        blob = json.dumps(
            {
                "width": self.width, "height": self.height, "fov_x": self.fov_x,
                "glass_distance_m": self.glass_distance_m,
                "glass_tilt_deg": self.glass_tilt_deg,
                "background_distance_m": self.background_distance_m,
                "reflection_mode": self.reflection_mode,
                "reflection_distance_m": self.reflection_distance_m,
                "reflection_exposure": self.reflection_exposure,
            },
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Scene:
    """Solved geometry, immutable; all vectors in world space."""

    camera: Camera
    glass_center: tuple[float, float, float]
    glass_normal: tuple[float, float, float]   # oriented toward the camera
    background: PlaneTarget
    reflection_mode: str
    reflection_env: Optional[EnvMap]
    reflection_plane: Optional[PlaneTarget]
    config_digest: str


def camera_ray_grid(cam: Camera) -> np.ndarray:
    """Unit directions for all pixel centers, shape (height * width, 3), row-major."""
    xs = (np.arange(cam.width) + 0.5)
    ys = (np.arange(cam.height) + 0.5)
    px, py = np.meshgrid(xs, ys)
    return _rays_for(cam, px.ravel(), py.ravel())


def _rays_for(cam: Camera, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    t = cam.tan_half_fov
    ndc_x = (2.0 * px / cam.width - 1.0) * t
    ndc_y = (1.0 - 2.0 * py / cam.height) * t * cam.height / cam.width
    d = (ndc_x[..., None] * cam.right
         + ndc_y[..., None] * np.asarray(cam.up)
         + np.asarray(cam.forward))
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def camera_ray(scene_or_cam, px: float, py: float):
    """Ray through a (sub)pixel position; returns (origin, unit direction)."""
    cam = scene_or_cam.camera if isinstance(scene_or_cam, Scene) else scene_or_cam
    if not (0 <= px < cam.width and 0 <= py < cam.height):
        raise ValidationError(f"pixel ({px}, {py}) outside {cam.width}x{cam.height}")
    d = _rays_for(cam, np.asarray([px]), np.asarray([py]))[0]
    return np.asarray(cam.position, dtype=np.float64), d


def intersect_plane_batch(origins: np.ndarray, dirs: np.ndarray, plane: PlaneTarget):
    """Vectorized ray/finite-plane test.

    Returns (t, u, v, hit) arrays; texture coords u, v run over the plane
    extents with v = 0 along +v_axis (texture rows top-down).
    """
    n = np.asarray(plane.normal)
    c = np.asarray(plane.center)
    denom = dirs @ n
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((c - origins) @ n) / denom
    valid = (np.abs(denom) > 1e-12) & (t > 1e-9) & np.isfinite(t)
    t = np.where(valid, t, 0.0)
    p = origins + dirs * t[..., None]
    su = (p - c) @ np.asarray(plane.u_axis)
    sv = (p - c) @ np.asarray(plane.v_axis)
    u = 0.5 + su / (2 * plane.half_extent_u)
    v = 0.5 - sv / (2 * plane.half_extent_v)
    hit = valid & (u >= 0) & (u <= 1) & (v >= 0) & (v <= 1)
    return t, u, v, hit


def intersect_plane(ray: tuple[np.ndarray, np.ndarray], plane: PlaneTarget):
    """Single-ray wrapper; returns (t, u, v) or None on a miss."""
    origin, direction = ray
    t, u, v, hit = intersect_plane_batch(
        np.asarray(origin, dtype=np.float64)[None, :],
        np.asarray(direction, dtype=np.float64)[None, :], plane)
    if not hit[0]:
        return None
    return float(t[0]), float(u[0]), float(v[0])


def plane_radiance(origins, dirs, plane: PlaneTarget):
    """Bilinear texture radiance along rays; misses yield zero.

    Returns (radiance (n, 3) float32, miss mask).
    """
    t, u, v, hit = intersect_plane_batch(origins, dirs, plane)
    tex = plane.texture
    x = np.clip(u, 0.0, 1.0) * tex.width - 0.5
    y = np.clip(v, 0.0, 1.0) * tex.height - 0.5
    vals = bilinear_lookup(tex.data, x, y).astype(np.float32)
    vals[~hit] = 0.0
    return vals, ~hit


_CORNER_NAMES = ("top-left", "top-right", "bottom-left", "bottom-right")


def _corner_dirs(cam: Camera) -> np.ndarray:
    px = np.array([0.0, cam.width, 0.0, cam.width])
    py = np.array([0.0, 0.0, cam.height, cam.height])
    return _rays_for(cam, px, py)


def solve_geometry(config: SceneConfig) -> Scene:
    """Build the scene and guarantee texture coverage of both frusta.

    The background plane exactly covers the camera frustum footprint at the
    background distance (times COVERAGE_MARGIN); a planar reflection source
    covers the frustum mirrored about the glass plane.  Raises CoverageError
    naming the first uncovered frustum corner when infeasible.
    """
    if config.glass_distance_m <= 0:
        raise ValidationError("glass distance must be > 0")
    if config.background_distance_m <= config.glass_distance_m:
        raise ValidationError("background must lie behind the glass")
    if config.reflection_mode not in ("envmap", "plane"):
        raise ValidationError(f"unknown reflection mode {config.reflection_mode!r}")

    cam = Camera(width=config.width, height=config.height, fov_x=config.fov_x)
    fwd = np.asarray(cam.forward)
    up = np.asarray(cam.up)
    origin = np.asarray(cam.position)

    # glass plate: normal is -forward rotated by the tilt about the up axis
    tilt = math.radians(config.glass_tilt_deg)
    n0 = -fwd
    right = cam.right
    glass_n = math.cos(tilt) * n0 + math.sin(tilt) * right
    glass_c = origin + fwd * config.glass_distance_m

    # background plane: frustum footprint at its distance, scaled by the margin
    d_bg = config.background_distance_m
    t = cam.tan_half_fov
    half_u = d_bg * t * COVERAGE_MARGIN
    half_v = d_bg * t * (cam.height / cam.width) * COVERAGE_MARGIN
    background = PlaneTarget(
        center=tuple(origin + fwd * d_bg), normal=tuple(-fwd),
        half_extent_u=half_u, half_extent_v=half_v, texture=config.background)

    env = None
    refl_plane = None
    if config.reflection_mode == "envmap":
        env = EnvMap(config.reflection_image, exposure=config.reflection_exposure)
    else:
        corners = _corner_dirs(cam)
        rays = np.vstack([corners, fwd[None, :]])
        denom = rays @ glass_n
        if np.any(denom >= -1e-12):
            idx = int(np.argmax(denom >= -1e-12))
            name = _CORNER_NAMES[idx] if idx < 4 else "center"
            raise CoverageError(
                f"{name} camera ray does not reach the glass plane (tilt too extreme)")
        t_hit = ((glass_c - origin) @ glass_n) / denom
        hits = origin + rays * t_hit[:, None]
        mirrored = rays - 2.0 * (rays @ glass_n)[:, None] * glass_n
        axis = _unit(mirrored[4])
        center = hits[4] + axis * config.reflection_distance_m
        probe = PlaneTarget(center=tuple(center), normal=tuple(-axis),
                            half_extent_u=1.0, half_extent_v=1.0,
                            texture=config.reflection_image)
        pn = np.asarray(probe.normal)
        pd = mirrored[:4] @ pn
        tt = ((center - hits[:4]) @ pn) / pd
        bad = (np.abs(pd) < 1e-12) | (tt <= 0) | ~np.isfinite(tt)
        if np.any(bad):
            raise CoverageError(
                f"mirrored frustum cannot be covered: {_CORNER_NAMES[int(np.argmax(bad))]}"
                " corner never reaches the reflection-source plane")
        pts = hits[:4] + mirrored[:4] * tt[:, None]
        su = (pts - center) @ np.asarray(probe.u_axis)
        sv = (pts - center) @ np.asarray(probe.v_axis)
        refl_plane = PlaneTarget(
            center=tuple(center), normal=tuple(-axis),
            half_extent_u=float(np.max(np.abs(su))) * COVERAGE_MARGIN,
            half_extent_v=float(np.max(np.abs(sv))) * COVERAGE_MARGIN,
            texture=config.reflection_image,
            u_axis=probe.u_axis, v_axis=probe.v_axis)

    return Scene(camera=cam, glass_center=tuple(glass_c), glass_normal=tuple(_unit(glass_n)),
                 background=background, reflection_mode=config.reflection_mode,
                 reflection_env=env, reflection_plane=refl_plane,
                 config_digest=config.digest())
