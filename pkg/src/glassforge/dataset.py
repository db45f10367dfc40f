"""Deterministic dataset generation over asset pools.

Every sample's randomness is derived from splitmix64(master_seed, index),
so the output tree is a pure function of (seed, config, assets) regardless
of worker count.  Wall-clock timings are written to a separate sidecar file
so the manifest itself stays byte-reproducible.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from time import perf_counter

import numpy as np

from .errors import GlassForgeError, ValidationError
from .imagecore import LinearImage, load_image, save_png, srgb_encode
from .optics import GlassMaterial
from .renderer import RenderSettings, render_triple
from .rng import splitmix64
from .scene import SceneConfig, solve_geometry

__all__ = [
    "ParamRanges",
    "AssetPools",
    "SceneTemplate",
    "DatasetConfig",
    "DatasetResult",
    "sample_material",
    "generate_dataset",
    "build_ior_sweep",
    "normalize_exposure",
]

log = logging.getLogger(__name__)

MEAN_LUMINANCE_TARGET = 0.18
_LUMA = np.array([0.2126, 0.7152, 0.0722])


@dataclass(frozen=True)
class ParamRanges:
    ior: tuple[float, float] = (1.25, 1.75)
    roughness: tuple[float, float] = (0.0, 0.05)
    thickness: tuple[float, float] = (0.0, 0.05)
    metallic: tuple[float, float] = (0.0, 0.1)
    base_color_min: float = 0.85
    exposure_log2: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        for name in ("ior", "roughness", "thickness", "metallic", "exposure_log2"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValidationError(f"{name} interval is not well-ordered")
        if not 0.0 < self.base_color_min <= 1.0:
            raise ValidationError("base_color_min must be in (0, 1]")


@dataclass(frozen=True)
class AssetPools:
    hdr_paths: tuple[str, ...]
    srgb_paths: tuple[str, ...]

    @classmethod
    def scan(cls, hdr_dir: str | None, srgb_dir: str | None) -> "AssetPools":
        def _scan(d, exts):
            if not d:
                return ()
            if not os.path.isdir(d):
                raise ValidationError(f"asset directory not found: {d}")
            return tuple(sorted(
                os.path.join(d, f) for f in os.listdir(d)
                if f.lower().endswith(exts)))
        return cls(hdr_paths=_scan(hdr_dir, (".hdr", ".pic")),
                   srgb_paths=_scan(srgb_dir, (".png", ".jpg", ".jpeg")))


@dataclass(frozen=True)
class SceneTemplate:
    width: int = 256
    height: int = 256
    fov_x: float = 60.0
    glass_distance_m: float = 0.5
    background_distance_m: float = 2.0
    reflection_distance_m: float = 1.0
    tilt_deg_range: tuple[float, float] = (-10.0, 10.0)


@dataclass(frozen=True)
class DatasetConfig:
    count: int
    master_seed: int
    output_dir: str
    pools: AssetPools
    ranges: ParamRanges = ParamRanges()
    scene: SceneTemplate = SceneTemplate()
    render: RenderSettings = RenderSettings()
    max_failure_fraction: float = 0.01

    @classmethod
    def from_dict(cls, d: dict, asset_root: str | None = None) -> "DatasetConfig":
        pools_cfg = d.get("pools", {})
        root = asset_root or os.environ.get("GLASSFORGE_ASSET_ROOT")

        def _resolve(p):
            if p and root and not os.path.isabs(p):
                return os.path.join(root, p)
            return p

        pools = AssetPools.scan(_resolve(pools_cfg.get("hdr_dir")),
                                _resolve(pools_cfg.get("srgb_dir")))
        ranges_cfg = {k: tuple(v) if isinstance(v, list) else v
                      for k, v in d.get("ranges", {}).items()}
        scene_cfg = {k: tuple(v) if isinstance(v, list) else v
                     for k, v in d.get("scene", {}).items()}
        return cls(
            count=int(d["count"]),
            master_seed=int(d.get("master_seed", 0)),
            output_dir=d["output_dir"],
            pools=pools,
            ranges=ParamRanges(**ranges_cfg),
            scene=SceneTemplate(**scene_cfg),
            render=RenderSettings(**d.get("render", {})),
        )


@dataclass(frozen=True)
class DatasetResult:
    manifest_path: str
    rendered: int
    failed: int


def sample_material(rng: np.random.Generator, ranges: ParamRanges) -> GlassMaterial:
    """Draw one material, each parameter uniform over its range."""
    ior = rng.uniform(*ranges.ior)
    roughness = rng.uniform(*ranges.roughness)
    thickness = rng.uniform(*ranges.thickness)
    metallic = rng.uniform(*ranges.metallic)
    base_color = tuple(rng.uniform(ranges.base_color_min, 1.0, size=3))
    return GlassMaterial(ior=ior, roughness=roughness, thickness=thickness,
                         base_color=base_color, metallic=metallic)


def normalize_exposure(img: LinearImage, exposure_log2: float) -> LinearImage:
    """Gray-world anchor: scale mean luminance to 0.18, then apply 2^exposure."""
    lum = float(np.mean(img.data.astype(np.float64) @ _LUMA))
    scale = (MEAN_LUMINANCE_TARGET / max(lum, 1e-9)) * 2.0 ** exposure_log2
    return LinearImage(img.data * np.float32(scale))


@lru_cache(maxsize=32)
def _cached_image(path: str) -> LinearImage:
    return load_image(path)


def _render_sample(config: DatasetConfig, index: int) -> dict:
    """Render sample `index`; returns a manifest record (or an error record)."""
    seed = splitmix64(config.master_seed, index)
    rng = np.random.default_rng(seed)
    ranges = config.ranges
    tmpl = config.scene

    # fixed draw order: material, tilt, asset choices, source mode, exposures
    material = sample_material(rng, ranges)
    tilt = rng.uniform(*tmpl.tilt_deg_range)
    if not config.pools.srgb_paths:
        raise ValidationError("sRGB pool is empty")
    bg_idx = int(rng.integers(len(config.pools.srgb_paths)))
    mode_draw = rng.random()
    have_hdr = len(config.pools.hdr_paths) > 0
    mode = "envmap" if (have_hdr and mode_draw < 0.5) else "plane"
    pool = config.pools.hdr_paths if mode == "envmap" else config.pools.srgb_paths
    refl_idx = int(rng.integers(len(pool)))
    e_bg = rng.uniform(*ranges.exposure_log2)
    e_refl = rng.uniform(*ranges.exposure_log2)

    bg_path = config.pools.srgb_paths[bg_idx]
    refl_path = pool[refl_idx]
    background = normalize_exposure(_cached_image(bg_path), e_bg)
    reflection = normalize_exposure(_cached_image(refl_path), e_refl)

    scfg = SceneConfig(
        width=tmpl.width, height=tmpl.height, fov_x=tmpl.fov_x,
        glass_distance_m=tmpl.glass_distance_m, glass_tilt_deg=float(tilt),
        background_distance_m=tmpl.background_distance_m,
        background=background, reflection_mode=mode,
        reflection_image=reflection,
        reflection_distance_m=tmpl.reflection_distance_m)
    scene = solve_geometry(scfg)
    settings = replace(config.render, seed=seed)
    start = perf_counter()
    triple = render_triple(scene, material, settings)
    elapsed_ms = (perf_counter() - start) * 1000.0

    names = {}
    img_dir = os.path.join(config.output_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    for tag, img in (("B", triple.blended), ("T", triple.transmission),
                     ("R", triple.reflection)):
        rel = os.path.join("images", f"{index:06d}_{tag}.png")
        save_png(srgb_encode(img), os.path.join(config.output_dir, rel))
        names[tag] = rel

    return {
        "index": index,
        "seed": seed,
        "scene_digest": scene.config_digest,
        "material": {
            "ior": material.ior, "roughness": material.roughness,
            "thickness": material.thickness,
            "base_color": list(material.base_color),
            "metallic": material.metallic,
        },
        "sources": {"transmission": bg_path, "reflection": refl_path,
                    "reflection_mode": mode},
        "outputs": names,
        "miss_fraction": triple.miss_fraction,
        "max_shift_px": triple.max_shift_px,
        "_render_ms": elapsed_ms,   # stripped into the timing sidecar
    }


def _render_sample_safe(args) -> dict:
    config, index = args
    try:
        return _render_sample(config, index)
    except GlassForgeError as exc:
        log.warning("sample %d skipped: %s", index, exc)
        return {"index": index, "error": str(exc)}


def generate_dataset(config: DatasetConfig, jobs: int | None = None) -> DatasetResult:
    """Render `count` triplets and write manifest.jsonl (plus a timing sidecar)."""
    if config.count > 0 and not config.pools.srgb_paths:
        raise ValidationError("sRGB pool is empty; at least one image is required")
    os.makedirs(config.output_dir, exist_ok=True)
    tasks = [(config, i) for i in range(config.count)]
    if jobs == 1 or config.count <= 1:
        records = [_render_sample_safe(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_render_sample_safe, tasks))
    records.sort(key=lambda r: r["index"])

    manifest_path = os.path.join(config.output_dir, "manifest.jsonl")
    timing_path = os.path.join(config.output_dir, "timings.jsonl")
    failed = 0
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as mf, \
            open(timing_path, "w", encoding="utf-8", newline="\n") as tf:
        mf.write(json.dumps({"kind": "glassforge-manifest", "count": config.count,
                             "master_seed": config.master_seed}) + "\n")
        for rec in records:
            if "error" in rec:
                failed += 1
                continue
            ms = rec.pop("_render_ms")
            mf.write(json.dumps(rec, sort_keys=True) + "\n")
            tf.write(json.dumps({"index": rec["index"], "render_ms": ms}) + "\n")
    return DatasetResult(manifest_path=manifest_path,
                         rendered=config.count - failed, failed=failed)


def build_ior_sweep(config: DatasetConfig, bins: list[tuple[float, float]],
                    scenes: int = 30, jobs: int | None = None) -> list[str]:
    """Render the same fixed scene set once per IoR bin; one manifest per bin.

    Scene seeds depend only on (master_seed, scene index), so across bins
    the entire sample differs in nothing but the IoR draw interval.
    """
    if not bins:
        raise ValidationError("bins must be nonempty")
    ordered = all(bins[i][1] <= bins[i + 1][0] or bins[i] <= bins[i + 1]
                  for i in range(len(bins) - 1))
    if not ordered:
        raise ValidationError("bins must be ordered by increasing IoR")
    manifests = []
    for b, interval in enumerate(bins):
        sub = replace(
            config,
            count=scenes,
            output_dir=os.path.join(config.output_dir, f"ior_bin_{b}"),
            ranges=replace(config.ranges, ior=(float(interval[0]), float(interval[1]))),
        )
        manifests.append(generate_dataset(sub, jobs=jobs).manifest_path)
    return manifests
