"""Placing fitted bodies into scene meshes and choosing virtual cameras."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..geometry.camera import CameraModel
from ..geometry.mesh import TriangleMesh
from ..labeling.pseudo import FittedBody
from .assets import rot_z


class PlacementError(RuntimeError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    min_points: int = 20_000
    humans_per_scene: tuple[int, int] = (1, 10)
    cameras_per_scene: int = 1
    rng_seed: int = 0
    placement_retries: int = 200
    wall_margin: float = 0.3
    fx: float = 525.0
    width: int = 640
    height: int = 480

    def __post_init__(self):
        lo, hi = self.humans_per_scene
        if self.min_points < 0:
            raise ValueError("min_points must be >= 0")
        if not 0 <= lo <= hi:
            raise ValueError("humans_per_scene must satisfy 0 <= low <= high")
        if self.cameras_per_scene < 1:
            raise ValueError("need at least one camera per scene")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "humans_per_scene", (int(lo), int(hi)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["humans_per_scene"] = list(self.humans_per_scene)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        if "humans_per_scene" in d:
            d["humans_per_scene"] = tuple(d["humans_per_scene"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class ComposedScene:
    scene: TriangleMesh
    bodies: tuple[FittedBody, ...] = ()
    cameras: tuple[CameraModel, ...] = field(default=())


@dataclass(frozen=True)
class Floor:
    height: float
    lo: np.ndarray  # xy
    hi: np.ndarray


def find_floor(scene: TriangleMesh, tol: float = 1e-6) -> Floor:
    """Lowest cluster of horizontal faces; its xy bounding box is the floor extent."""
    tris = scene.triangles()
    n = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    horiz = np.abs(n[:, 2]) > 1.0 - 1e-9
    if not horiz.any():
        raise ValueError("scene has no horizontal support surface")
    z = tris[horiz, :, 2].mean(axis=1)
    z0 = z.min()
    sel = tris[horiz][np.abs(z - z0) <= tol]
    xy = sel[:, :, :2].reshape(-1, 2)
    return Floor(float(z0), xy.min(axis=0), xy.max(axis=0))


def _obstacle_boxes(scene: TriangleMesh, floor: Floor, tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    tris = scene.triangles()
    lo, hi = tris.min(axis=1), tris.max(axis=1)
    flat_floor = (hi[:, 2] - lo[:, 2] <= tol) & (np.abs(lo[:, 2] - floor.height) <= tol)
    return lo[~flat_floor], hi[~flat_floor]


def _overlap(lo, hi, los, his) -> np.ndarray:
    return np.all((lo < his) & (hi > los), axis=-1)


def place_humans(scene: TriangleMesh, humans: Sequence[FittedBody], cfg: SynthConfig,
                 rng: np.random.Generator) -> ComposedScene:
    """Stand each human on the floor at a random position and heading.

    Human bounding boxes are pairwise disjoint and clear of non-floor scene
    geometry. Placed bodies get instance ids 1..N in input order.
    """
    if not humans:
        return ComposedScene(scene)
    floor = find_floor(scene)
    obs_lo, obs_hi = _obstacle_boxes(scene, floor)
    placed: list[FittedBody] = []
    boxes: list[tuple[np.ndarray, np.ndarray]] = []
    for k, human in enumerate(humans):
        v = human.mesh.vertices
        center = 0.5 * (v.min(axis=0) + v.max(axis=0))
        for _ in range(cfg.placement_retries):
            R = rot_z(rng.uniform(0.0, 2.0 * np.pi))
            rv = (v - center) @ R.T
            lo, hi = rv.min(axis=0), rv.max(axis=0)
            xmin = floor.lo + cfg.wall_margin - lo[:2]
            xmax = floor.hi - cfg.wall_margin - hi[:2]
            if np.any(xmin > xmax):
                raise PlacementError(f"placement failed: human {k} ({human.mesh.name or 'body'}) "
                                     "does not fit on the floor")
            xy = rng.uniform(xmin, xmax)
            t = np.array([xy[0], xy[1], floor.height - lo[2]]) - R @ center
            blo = np.array([xy[0] + lo[0], xy[1] + lo[1], floor.height])
            bhi = np.array([xy[0] + hi[0], xy[1] + hi[1], floor.height + hi[2] - lo[2]])
            if any(_overlap(blo, bhi, a, b) for a, b in boxes):
                continue
            if len(obs_lo) and _overlap(blo, bhi, obs_lo, obs_hi).any():
                continue
            placed.append(human.transformed(R, t, instance_id=k + 1))
            boxes.append((blo, bhi))
            break
        else:
            raise PlacementError(f"placement failed: human {k} ({human.mesh.name or 'body'}) "
                                 f"after {cfg.placement_retries} attempts")
    return ComposedScene(scene, tuple(placed))


def body_boxes(bodies: Sequence[FittedBody]) -> list[tuple[np.ndarray, np.ndarray]]:
    return [b.mesh.bounds() for b in bodies]


def sample_cameras(composed: ComposedScene, cfg: SynthConfig, rng: np.random.Generator,
                   attempts: int = 100) -> ComposedScene:
    """Add ``cfg.cameras_per_scene`` cameras looking towards the placed humans."""
    floor = find_floor(composed.scene)
    boxes = body_boxes(composed.bodies)
    if boxes:
        focus = np.mean([0.5 * (lo + hi) for lo, hi in boxes], axis=0)
    else:
        c = 0.5 * (floor.lo + floor.hi)
        focus = np.array([c[0], c[1], floor.height + 1.0])
    cams = []
    for cam_id in range(cfg.cameras_per_scene):
        for _ in range(attempts):
            xy = rng.uniform(floor.lo + cfg.wall_margin, floor.hi - cfg.wall_margin)
            eye = np.array([xy[0], xy[1], floor.height + rng.uniform(1.3, 2.3)])
            target = focus + rng.normal(0.0, 0.3, 3)
            far_enough = np.linalg.norm((target - eye)[:2]) >= 1.5
            clear = all(np.linalg.norm(np.maximum(0, np.maximum(lo - eye, eye - hi))) > 0.5
                        for lo, hi in boxes)
            if far_enough and clear:
                break
        cams.append(CameraModel.look_at(eye, target, fx=cfg.fx, width=cfg.width,
                                        height=cfg.height, cam_id=cam_id))
    return ComposedScene(composed.scene, composed.bodies, tuple(cams))
