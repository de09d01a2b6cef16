"""End-to-end synthetic dataset generation."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..formats import CloudRecord, DatasetManifest, write_cloud
from ..geometry.camera import IndexImage, backproject_depth
from ..geometry.cloud import LabeledPointCloud
from ..geometry.mesh import TriangleMesh, save_mesh
from ..geometry.raster import RenderResult, rasterize_meshes
from ..labeling.pseudo import FittedBody
from .assets import load_human_assets
from .compose import ComposedScene, PlacementError, SynthConfig, place_humans, sample_cameras
from .noise import NoiseConfig, simulate_kinect_noise

log = logging.getLogger(__name__)


def scene_rng(seed: int, scene_index: int) -> np.random.Generator:
    """Independent stream for one scene; its first draw is the human count."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(scene_index,)))


def worker_count(requested: Optional[int] = None) -> int:
    cap = os.environ.get("HCK_THREADS")
    n = requested if requested is not None else (int(cap) if cap else 1)
    if cap:
        n = min(n, int(cap))
    return max(int(n), 1)


def render_scene(composed: ComposedScene, cam) -> RenderResult:
    meshes = [(composed.scene.with_face_part(None), 0)]
    meshes += [(b.merged_mesh(), b.instance_id) for b in composed.bodies]
    return rasterize_meshes(meshes, cam)


@dataclass
class SceneOutput:
    clouds: list[LabeledPointCloud]
    renders: list[RenderResult] = field(default_factory=list)


def generate_labeled_scene(composed: ComposedScene, noise: Optional[NoiseConfig],
                           rng: np.random.Generator, keep_renders: bool = False) -> SceneOutput:
    """One labeled cloud per camera.

    ``noise=None`` backprojects the clean render. Labels come from the render
    and survive exactly on the pixels that are still valid after noise.
    """
    clouds, renders = [], []
    for cam in composed.cameras:
        render = render_scene(composed, cam)
        depth = render.depth if noise is None else simulate_kinect_noise(render.depth, cam, noise, rng)
        labels = {
            "instance": IndexImage(np.where(depth.valid, render.instance.value, 0)),
            "part": IndexImage(np.where(depth.valid, render.part.value, 0)),
        }
        clouds.append(backproject_depth(depth, cam, labels))
        if keep_renders:
            renders.append(render)
    return SceneOutput(clouds, renders)


def filter_sparse(clouds: Sequence[LabeledPointCloud], min_points: int
                  ) -> tuple[list[LabeledPointCloud], list[dict]]:
    """Drop clouds with fewer than ``min_points`` points; returns (kept, rejection log)."""
    kept, rejected = [], []
    for i, c in enumerate(clouds):
        if len(c) < min_points:
            log.info("dropping cloud %d: %d points < %d", i, len(c), min_points)
            rejected.append({"index": i, "points": len(c)})
        else:
            kept.append(c)
    return kept, rejected


def compose_scene(scene_assets: Sequence[TriangleMesh], human_assets: Sequence[FittedBody],
                  cfg: SynthConfig, rng: np.random.Generator) -> tuple[int, ComposedScene]:
    """Draw the human count, pick assets, place humans and cameras. Order of draws is fixed."""
    lo, hi = cfg.humans_per_scene
    n_humans = int(rng.integers(lo, hi + 1))
    scene = scene_assets[int(rng.integers(len(scene_assets)))]
    picks = rng.integers(len(human_assets), size=n_humans) if n_humans else []
    composed = place_humans(scene, [human_assets[int(k)] for k in picks], cfg, rng)
    return n_humans, sample_cameras(composed, cfg, rng)


def _scene_job(i, scene_assets, human_assets, cfg, noise, out_dir, save_bodies):
    rng = scene_rng(cfg.rng_seed, i)
    record = {"scene": i}
    try:
        n_humans, composed = compose_scene(scene_assets, human_assets, cfg, rng)
    except PlacementError as exc:
        log.warning("scene %d skipped: %s", i, exc)
        record.update(status="placement_failed", error=str(exc))
        return record, []
    record["humans"] = n_humans
    out = generate_labeled_scene(composed, noise, rng)
    kept, rejected = filter_sparse(out.clouds, cfg.min_points)
    kept_ids = [k for k in range(len(out.clouds)) if k not in {r["index"] for r in rejected}]
    cloud_recs = []
    for cam_idx, cloud in zip(kept_ids, kept):
        rel = f"clouds/scene_{i:05d}_cam_{cam_idx}.hck"
        write_cloud(Path(out_dir) / rel, cloud)
        cloud_recs.append(CloudRecord(rel, len(cloud), i, cam_idx))
    record["points"] = [len(c) for c in out.clouds]
    record["rejected"] = [{"camera": r["index"], "points": r["points"]} for r in rejected]
    record["status"] = "ok"
    if save_bodies:
        sdir = Path(out_dir) / "scenes" / f"scene_{i:05d}"
        sdir.mkdir(parents=True, exist_ok=True)
        for b in composed.bodies:
            save_mesh(sdir / f"body_{b.instance_id}.obj", b.mesh,
                      sdir / f"body_{b.instance_id}.parts.json", b.taxonomy.source_parts,
                      extra={"family": b.taxonomy.family, "instance_id": b.instance_id})
        (sdir / "cameras.json").write_text(
            json.dumps([c.to_dict() for c in composed.cameras], indent=1, sort_keys=True) + "\n")
    return record, cloud_recs


def generate_dataset(scene_assets: Sequence[TriangleMesh], human_assets: Sequence[FittedBody],
                     cfg: SynthConfig, noise: Optional[NoiseConfig], out_dir, n_scenes: int,
                     workers: Optional[int] = None, save_bodies: bool = True) -> DatasetManifest:
    """Generate ``n_scenes`` scenes into ``out_dir`` and write ``manifest.json``.

    Each scene draws from its own stream derived from (seed, scene index), so the
    output is identical for any worker count.
    """
    if not scene_assets or not human_assets:
        raise ValueError("need at least one scene asset and one human asset")
    out_dir = Path(out_dir)
    (out_dir / "clouds").mkdir(parents=True, exist_ok=True)
    args = (scene_assets, human_assets, cfg, noise, out_dir, save_bodies)
    n_workers = worker_count(workers)
    if n_workers == 1:
        results = [_scene_job(i, *args) for i in range(n_scenes)]
    else:
        with ThreadPoolExecutor(n_workers) as pool:
            results = list(pool.map(lambda i: _scene_job(i, *args), range(n_scenes)))
    configs = {"synth": cfg.to_dict(), "noise": None if noise is None else noise.to_dict()}
    manifest = DatasetManifest(cfg.rng_seed, configs,
                               [c for _, recs in results for c in recs],
                               [rec for rec, _ in results])
    manifest.write(out_dir / "manifest.json")
    return manifest


def load_scene_bodies(scene_dir) -> list[FittedBody]:
    """Placed bodies saved next to a generated scene."""
    bodies = []
    if not any(Path(scene_dir).glob("body_*.obj")):
        return bodies
    for b in load_human_assets(scene_dir):
        with open(Path(scene_dir) / f"{b.mesh.name[:-4]}.parts.json") as fh:
            iid = int(json.load(fh)["instance_id"])
        bodies.append(FittedBody(b.mesh, iid, b.taxonomy))
    return bodies
