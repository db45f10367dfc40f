"""Dataset generation: sampling, exposure, manifests, determinism, sweep."""

import json
import os

import numpy as np
import pytest

from glassforge.dataset import (
    MEAN_LUMINANCE_TARGET,
    AssetPools,
    DatasetConfig,
    ParamRanges,
    SceneTemplate,
    build_ior_sweep,
    generate_dataset,
    normalize_exposure,
    sample_material,
)
from glassforge.errors import ValidationError
from glassforge.imagecore import LinearImage
from glassforge.renderer import RenderSettings
from glassforge.rng import splitmix64


def _config(asset_dirs, out, **kw):
    hdr_dir, srgb_dir = asset_dirs
    defaults = dict(
        count=3,
        master_seed=7,
        output_dir=str(out),
        pools=AssetPools.scan(hdr_dir, srgb_dir),
        scene=SceneTemplate(width=32, height=32),
        render=RenderSettings(spp=4),
    )
    defaults.update(kw)
    return DatasetConfig(**defaults)


def _manifest_records(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header = json.loads(lines[0])
    return header, [json.loads(l) for l in lines[1:]]


# ---------------------------------------------------------------- sampling

def test_param_ranges_validation():
    with pytest.raises(ValidationError):
        ParamRanges(ior=(1.7, 1.3))
    with pytest.raises(ValidationError):
        ParamRanges(base_color_min=0.0)


def test_sample_material_respects_ranges():
    ranges = ParamRanges()
    rng = np.random.default_rng(0)
    for _ in range(200):
        m = sample_material(rng, ranges)
        assert 1.25 <= m.ior <= 1.75
        assert 0.0 <= m.roughness <= 0.05
        assert 0.0 <= m.thickness <= 0.05
        assert 0.0 <= m.metallic <= 0.1
        assert all(0.85 <= c <= 1.0 for c in m.base_color)


def test_sample_material_deterministic_per_seed():
    a = sample_material(np.random.default_rng(5), ParamRanges())
    b = sample_material(np.random.default_rng(5), ParamRanges())
    assert a == b


def test_normalize_exposure_hits_target():
    rng = np.random.default_rng(1)
    img = LinearImage((rng.random((16, 16, 3)) * 3).astype(np.float32))
    out = normalize_exposure(img, 0.0)
    lum = np.mean(out.data.astype(np.float64) @ [0.2126, 0.7152, 0.0722])
    assert lum == pytest.approx(MEAN_LUMINANCE_TARGET, rel=1e-5)
    doubled = normalize_exposure(img, 1.0)
    assert np.allclose(doubled.data, out.data * 2, rtol=1e-6)


def test_asset_pools_scan(asset_dirs):
    hdr_dir, srgb_dir = asset_dirs
    pools = AssetPools.scan(hdr_dir, srgb_dir)
    assert len(pools.hdr_paths) == 2
    assert len(pools.srgb_paths) == 3
    assert list(pools.srgb_paths) == sorted(pools.srgb_paths)
    with pytest.raises(ValidationError):
        AssetPools.scan("/nonexistent/hdr", srgb_dir)


def test_config_from_dict_env_root(asset_dirs, monkeypatch, tmp_path):
    hdr_dir, srgb_dir = asset_dirs
    root = os.path.dirname(hdr_dir)
    monkeypatch.setenv("GLASSFORGE_ASSET_ROOT", root)
    cfg = DatasetConfig.from_dict({
        "count": 2,
        "output_dir": str(tmp_path / "d"),
        "pools": {"hdr_dir": os.path.basename(hdr_dir),
                  "srgb_dir": os.path.basename(srgb_dir)},
        "ranges": {"ior": [1.3, 1.6]},
        "scene": {"width": 32, "height": 32, "tilt_deg_range": [-5, 5]},
        "render": {"spp": 4},
    })
    assert len(cfg.pools.srgb_paths) == 3
    assert cfg.ranges.ior == (1.3, 1.6)
    assert cfg.scene.width == 32
    assert cfg.render.spp == 4


# ---------------------------------------------------------------- generation

def test_generate_dataset_outputs_and_manifest(asset_dirs, tmp_path):
    config = _config(asset_dirs, tmp_path / "ds")
    result = generate_dataset(config, jobs=1)
    assert result.rendered == 3 and result.failed == 0
    header, records = _manifest_records(result.manifest_path)
    assert header["count"] == 3 and header["master_seed"] == 7
    assert [r["index"] for r in records] == [0, 1, 2]
    for rec in records:
        assert rec["seed"] == splitmix64(7, rec["index"])
        assert rec["material"]["ior"] >= 1.25
        assert rec["sources"]["reflection_mode"] in ("envmap", "plane")
        for tag in ("B", "T", "R"):
            p = os.path.join(config.output_dir, rec["outputs"][tag])
            assert os.path.exists(p)
        assert "_render_ms" not in rec
    # wall-clock timings live in the sidecar, not the manifest
    timing_path = os.path.join(config.output_dir, "timings.jsonl")
    assert os.path.exists(timing_path)
    with open(timing_path, encoding="utf-8") as fh:
        timings = [json.loads(l) for l in fh]
    assert {t["index"] for t in timings} == {0, 1, 2}
    assert all(t["render_ms"] > 0 for t in timings)


def test_generate_dataset_deterministic_across_jobs(asset_dirs, tmp_path):
    import hashlib

    def tree_hash(root):
        digest = hashlib.sha256()
        for dirpath, dirnames, filenames in sorted(os.walk(root)):
            dirnames.sort()
            for name in sorted(filenames):
                if name == "timings.jsonl":   # wall-clock sidecar
                    continue
                rel = os.path.relpath(os.path.join(dirpath, name), root)
                digest.update(rel.encode())
                with open(os.path.join(dirpath, name), "rb") as fh:
                    digest.update(fh.read())
        return digest.hexdigest()

    a = _config(asset_dirs, tmp_path / "seq", count=4)
    b = _config(asset_dirs, tmp_path / "par", count=4)
    generate_dataset(a, jobs=1)
    generate_dataset(b, jobs=4)
    assert tree_hash(a.output_dir) == tree_hash(b.output_dir)


def test_generate_dataset_empty_pool(tmp_path):
    config = DatasetConfig(count=1, master_seed=0, output_dir=str(tmp_path),
                           pools=AssetPools(hdr_paths=(), srgb_paths=()))
    with pytest.raises(ValidationError):
        generate_dataset(config, jobs=1)


def test_generate_dataset_records_failures(asset_dirs, tmp_path):
    # an impossible scene template (glass behind background) fails validation
    # for every sample; failures are counted, manifest keeps the survivors
    config = _config(asset_dirs, tmp_path / "bad", count=2,
                     scene=SceneTemplate(width=32, height=32,
                                         glass_distance_m=3.0))
    result = generate_dataset(config, jobs=1)
    assert result.failed == 2 and result.rendered == 0
    header, records = _manifest_records(result.manifest_path)
    assert records == []


# ---------------------------------------------------------------- ior sweep

def test_build_ior_sweep_bins_share_scenes(asset_dirs, tmp_path):
    config = _config(asset_dirs, tmp_path / "sweep", count=0)
    bins = [(1.1, 1.2), (1.4, 1.5), (1.7, 1.75)]
    manifests = build_ior_sweep(config, bins, scenes=2, jobs=1)
    assert len(manifests) == 3
    per_bin = []
    for b, path in enumerate(manifests):
        assert f"ior_bin_{b}" in path
        _, records = _manifest_records(path)
        assert len(records) == 2
        for rec, (lo, hi) in zip(records, [bins[b]] * 2):
            assert lo <= rec["material"]["ior"] <= hi
        per_bin.append(records)
    # same seeds across bins: everything but the IoR interval is shared
    for r0, r1 in zip(per_bin[0], per_bin[1]):
        assert r0["seed"] == r1["seed"]
        assert r0["material"]["roughness"] == r1["material"]["roughness"]
        assert r0["sources"]["transmission"] == r1["sources"]["transmission"]


def test_build_ior_sweep_rejects_disordered_bins(asset_dirs, tmp_path):
    config = _config(asset_dirs, tmp_path / "s2", count=0)
    with pytest.raises(ValidationError):
        build_ior_sweep(config, [(1.5, 1.6), (1.1, 1.2)], scenes=1, jobs=1)
    with pytest.raises(ValidationError):
        build_ior_sweep(config, [], scenes=1, jobs=1)
