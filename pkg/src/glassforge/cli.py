"""Command-line entry point for all pipeline stages.

Exit codes: 0 success, 1 usage error, 2 validation/coverage failure,
3 partial dataset failure (more than the allowed fraction of samples skipped).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
from PIL import Image

from . import dataset as ds
from .alphablend import BlendParams, alpha_blend
from .errors import GlassForgeError
from .imagecore import (LinearImage, SrgbImage, load_image, save_png,
                        srgb_decode, srgb_encode)
from .metrics import LossWeights, SsimSettings, composite_loss, ms_ssim, psnr, ssim
from .optics import GlassMaterial
from .renderer import RenderSettings, render_triple, validate_alignment
from .scene import SceneConfig, solve_geometry
from .tiler import (DEFAULT_MIN_OVERLAP, DEFAULT_TILE_SIZE, TilePlan,
                    plan_tiles, split, stitch)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_PARTIAL = 3


def _asset_path(p: str) -> str:
    root = os.environ.get("GLASSFORGE_ASSET_ROOT")
    if root and not os.path.isabs(p):
        return os.path.join(root, p)
    return p


def _load_scene_config(path: str, overrides: dict | None = None) -> SceneConfig:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if overrides:
        for key, sub in overrides.items():
            d.setdefault(key, {}).update(sub)
    cam = d["camera"]
    glass = d["glass"]
    bg = d["background"]
    refl = d["reflection"]
    return SceneConfig(
        width=int(cam["width"]), height=int(cam["height"]), fov_x=float(cam["fov_x"]),
        glass_distance_m=float(glass["distance_m"]),
        glass_tilt_deg=float(glass.get("tilt_deg", 0.0)),
        background_distance_m=float(bg["distance_m"]),
        background=load_image(_asset_path(bg["image"])),
        reflection_mode=refl["mode"],
        reflection_image=load_image(_asset_path(refl["image"])),
        reflection_distance_m=float(refl.get("distance_m", 1.0)),
        reflection_exposure=float(refl.get("exposure", 1.0)),
    )


def _parse_material(text: str) -> GlassMaterial:
    d = json.loads(text)
    return GlassMaterial(ior=d["ior"], roughness=d.get("roughness", 0.0),
                         thickness=d.get("thickness", 0.0),
                         base_color=tuple(d.get("base_color", (1.0, 1.0, 1.0))),
                         metallic=d.get("metallic", 0.0))


def _emit(args, payload: dict) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True))
    else:
        for k, v in payload.items():
            print(f"{k}: {v}")


def _cmd_render(args) -> int:
    cfg = _load_scene_config(args.config)
    scene = solve_geometry(cfg)
    material = _parse_material(args.material)
    settings = RenderSettings(spp=args.spp, seed=args.seed,
                              refraction_mode=args.mode, max_order=args.max_order)
    triple = render_triple(scene, material, settings)
    os.makedirs(args.out, exist_ok=True)
    for tag, img in (("B", triple.blended), ("T", triple.transmission),
                     ("R", triple.reflection)):
        save_png(srgb_encode(img), os.path.join(args.out, f"{tag}.png"))
    _emit(args, {"out": args.out, "miss_fraction": triple.miss_fraction,
                 "max_shift_px": triple.max_shift_px})
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = _load_scene_config(args.config)
    scene = solve_geometry(cfg)
    material = _parse_material(args.material)
    _emit(args, {"max_shift_px": validate_alignment(scene, material)})
    return EXIT_OK


def _cmd_dataset(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        d = json.load(fh)
    if args.seed is not None:
        d["master_seed"] = args.seed
    if args.out is not None:
        d["output_dir"] = args.out
    config = ds.DatasetConfig.from_dict(d)
    result = ds.generate_dataset(config, jobs=args.jobs)
    _emit(args, {"manifest": result.manifest_path, "rendered": result.rendered,
                 "failed": result.failed})
    if config.count and result.failed / config.count > config.max_failure_fraction:
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_sweep_ior(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        d = json.load(fh)
    if args.seed is not None:
        d["master_seed"] = args.seed
    if args.out is not None:
        d["output_dir"] = args.out
    config = ds.DatasetConfig.from_dict(d)
    bins = [tuple(b) for b in json.loads(args.bins)]
    manifests = ds.build_ior_sweep(config, bins, scenes=args.scenes, jobs=args.jobs)
    _emit(args, {"manifests": manifests})
    return EXIT_OK


def _cmd_blend(args) -> int:
    with Image.open(args.transmission) as im:
        t_img = SrgbImage(np.asarray(im.convert("RGB")))
    with Image.open(args.reflection) as im:
        r_img = SrgbImage(np.asarray(im.convert("RGB")))
    params = BlendParams(alpha=args.alpha, beta=args.beta, blur_sigma=args.sigma)
    if args.space == "linear":
        t_lin, r_lin = srgb_decode(t_img), srgb_decode(r_img)
        out = srgb_encode(alpha_blend(t_lin, r_lin, params))
    else:
        # baseline operates directly on sRGB code values scaled to [0, 1]
        t_lin = LinearImage(t_img.data.astype(np.float32) / 255.0)
        r_lin = LinearImage(r_img.data.astype(np.float32) / 255.0)
        b = alpha_blend(t_lin, r_lin, params)
        out = SrgbImage(np.floor(np.clip(b.data, 0, 1) * 255.0 + 0.5).astype(np.uint8))
    save_png(out, args.out)
    _emit(args, {"out": args.out})
    return EXIT_OK


def _cmd_eval(args) -> int:
    settings = SsimSettings(window=args.window)
    weights = LossWeights(lambda_psnr=args.lambda_psnr, lambda_ssim=args.lambda_ssim)
    names = sorted(f for f in os.listdir(args.pred) if f.lower().endswith(".png"))
    records = []
    for name in names:
        gt_path = os.path.join(args.gt, name)
        if not os.path.exists(gt_path):
            continue
        a = srgb_encode(load_image(os.path.join(args.pred, name)))
        b = srgb_encode(load_image(gt_path))
        rec = {"name": name, "psnr": psnr(a, b), "ssim": ssim(a, b, settings),
               "lpips": None}
        try:
            rec["msssim"] = ms_ssim(a, b)
        except GlassForgeError:
            rec["msssim"] = None
        rec["composite_loss"] = composite_loss(a, b, weights, settings)
        records.append(rec)
    def _mean(key):
        vals = [r[key] for r in records if r[key] is not None]
        return float(np.mean(vals)) if vals else None
    report = {
        "window": args.window,
        "count": len(records),
        "records": records,
        "means": {k: _mean(k) for k in ("psnr", "ssim", "msssim", "composite_loss")},
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
    print(json.dumps(report if args.json else report["means"], sort_keys=True))
    return EXIT_OK


def _cmd_tile(args) -> int:
    img = load_image(args.input)
    plan = plan_tiles(img.width, img.height, tile_size=args.tile_size,
                      min_overlap=args.min_overlap)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "plan.json"), "w", encoding="utf-8") as fh:
        fh.write(plan.to_json())
    for i, tile in enumerate(split(img, plan)):
        save_png(srgb_encode(tile), os.path.join(args.out, f"tile_{i:04d}.png"))
    _emit(args, {"out": args.out, "tiles": plan.tile_count})
    return EXIT_OK


def _cmd_stitch(args) -> int:
    with open(args.plan, encoding="utf-8") as fh:
        plan = TilePlan.from_json(fh.read())
    tiles = [load_image(os.path.join(args.tiles, f"tile_{i:04d}.png"))
             for i in range(plan.tile_count)]
    out = stitch(tiles, plan)
    save_png(srgb_encode(out), args.out)
    _emit(args, {"out": args.out})
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="glassforge",
                description="Physically based glass-reflection data synthesis")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        sp.add_argument("--json", action="store_true",
                        help="emit a machine-readable JSON summary")
        return sp

    sp = add("render", _cmd_render, "render one (B, T, R) triplet")
    sp.add_argument("--config", required=True, help="scene config JSON path")
    sp.add_argument("--material", required=True, help="material JSON literal")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--spp", type=int, default=16, help="samples per pixel")
    sp.add_argument("--seed", type=int, default=0, help="render seed")
    sp.add_argument("--max-order", dest="max_order", type=int, default=3,
                    help="highest ghost bounce order")
    sp.add_argument("--mode", choices=("aligned", "exact"), default="aligned",
                    help="transmitted-ray refraction mode")

    sp = add("validate", _cmd_validate, "report the worst-case refraction shift")
    sp.add_argument("--config", required=True, help="scene config JSON path")
    sp.add_argument("--material", required=True, help="material JSON literal")

    sp = add("dataset", _cmd_dataset, "generate a dataset from a config")
    sp.add_argument("--config", required=True, help="dataset config JSON path")
    sp.add_argument("--jobs", type=int, default=None, help="worker process count")
    sp.add_argument("--seed", type=int, default=None, help="override master seed")
    sp.add_argument("--out", default=None, help="override output directory")

    sp = add("sweep-ior", _cmd_sweep_ior, "build the IoR-sweep benchmark")
    sp.add_argument("--config", required=True, help="dataset config JSON path")
    sp.add_argument("--bins", required=True,
                    help='JSON list of [lo, hi] IoR intervals, ordered')
    sp.add_argument("--scenes", type=int, default=30, help="scenes per bin")
    sp.add_argument("--jobs", type=int, default=None, help="worker process count")
    sp.add_argument("--seed", type=int, default=None, help="override master seed")
    sp.add_argument("--out", default=None, help="override output directory")

    sp = add("blend", _cmd_blend, "alpha-blend two images (screen-space baseline)")
    sp.add_argument("--transmission", required=True, help="transmission image path")
    sp.add_argument("--reflection", required=True, help="reflection image path")
    sp.add_argument("--alpha", type=float, required=True, help="transmission weight")
    sp.add_argument("--beta", type=float, required=True, help="reflection weight")
    sp.add_argument("--sigma", type=float, default=0.0,
                    help="Gaussian blur sigma for the reflection layer, pixels")
    sp.add_argument("--space", choices=("srgb", "linear"), default="srgb",
                    help="blend on sRGB code values or on linearized radiance")
    sp.add_argument("--out", required=True, help="output PNG path")

    sp = add("eval", _cmd_eval, "compute metrics over matching pred/gt PNGs")
    sp.add_argument("--pred", required=True, help="prediction directory")
    sp.add_argument("--gt", required=True, help="ground-truth directory")
    sp.add_argument("--out", default=None, help="write the full JSON report here")
    sp.add_argument("--window", choices=("uniform7", "gaussian11"),
                    default="uniform7", help="SSIM window preset")
    sp.add_argument("--lambda-psnr", dest="lambda_psnr", type=float, default=0.1,
                    help="composite-loss PSNR weight")
    sp.add_argument("--lambda-ssim", dest="lambda_ssim", type=float, default=20.0,
                    help="composite-loss SSIM weight")

    sp = add("tile", _cmd_tile, "split an image into overlapping tiles")
    sp.add_argument("--input", required=True, help="input image path")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--tile-size", dest="tile_size", type=int,
                    default=DEFAULT_TILE_SIZE, help="square tile edge, pixels")
    sp.add_argument("--min-overlap", dest="min_overlap", type=int,
                    default=DEFAULT_MIN_OVERLAP, help="minimum tile overlap, pixels")

    sp = add("stitch", _cmd_stitch, "recombine tiles produced by `tile`")
    sp.add_argument("--plan", required=True, help="plan.json path")
    sp.add_argument("--tiles", required=True, help="directory holding tile PNGs")
    sp.add_argument("--out", required=True, help="output PNG path")
    return p


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help and friends
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.fn(args)
    except GlassForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
