"""Occlusion level from the visible share of each fitted body."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ..geometry.camera import CameraModel, project_points
from ..geometry.mesh import TriangleMesh
from ..geometry.raster import rasterize_meshes
from ..labeling.pseudo import FittedBody

LOW, MEDIUM, HIGH = "low", "medium", "high"


@dataclass(frozen=True)
class OcclusionConfig:
    low_bound: float = 0.8
    high_bound: float = 0.5
    splat_radius: int = 1

    def __post_init__(self):
        if not 0 < self.high_bound < self.low_bound < 1:
            raise ValueError("need 0 < high_bound < low_bound < 1")
        if self.splat_radius < 0:
            raise ValueError("splat_radius must be >= 0")

    def bucket(self, ratio: float) -> str:
        if ratio >= self.low_bound:
            return LOW
        if ratio >= self.high_bound:
            return MEDIUM
        return HIGH


def mesh_pixel_area(mesh: TriangleMesh, cam: CameraModel) -> int:
    """Pixels covered by ``mesh`` rendered on its own."""
    return int(np.count_nonzero(rasterize_meshes([(mesh, 1)], cam).depth.valid))


def splat_mask(points: np.ndarray, cam: CameraModel, radius: int = 1) -> np.ndarray:
    """Boolean image of pixels hit by ``points``, each drawn as a (2r+1)^2 square."""
    img = np.zeros((cam.height, cam.width), dtype=bool)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        return img
    proj = project_points(pts, cam)
    r, c = proj.row[proj.in_frame], proj.col[proj.in_frame]
    for dr in range(-radius, radius + 1):
        for dc in range(-radius, radius + 1):
            rr, cc = r + dr, c + dc
            ok = (rr >= 0) & (rr < cam.height) & (cc >= 0) & (cc < cam.width)
            img[rr[ok], cc[ok]] = True
    return img


def visibility_ratio(mesh: Union[TriangleMesh, FittedBody], points: np.ndarray, cam: CameraModel,
                     cfg: OcclusionConfig = OcclusionConfig()) -> float:
    """Annotated-mask pixel area over rendered-mesh pixel area, clamped to [0, 1]."""
    if isinstance(mesh, FittedBody):
        mesh = mesh.mesh
    area = mesh_pixel_area(mesh, cam)
    if area == 0:
        raise ValueError("degenerate render: fitted mesh covers no pixels")
    shown = np.count_nonzero(splat_mask(points, cam, cfg.splat_radius))
    return min(1.0, shown / area)


@dataclass
class SceneOcclusion:
    ratios: list[float]
    min_ratio: float
    bucket: str

    def to_dict(self) -> dict:
        return {"ratios": self.ratios, "min_ratio": self.min_ratio, "bucket": self.bucket}


def scene_occlusion(bodies: Sequence, masks: Sequence[np.ndarray], cam: CameraModel,
                    cfg: OcclusionConfig = OcclusionConfig()) -> SceneOcclusion:
    """Bucket a scene by its most occluded human.

    ``masks[k]`` holds the 3D points annotated as human ``k``; the two lists
    pair up in order.
    """
    if len(bodies) != len(masks):
        raise ValueError("need exactly one fitted mesh per annotated human")
    if not bodies:
        raise ValueError("scene has no annotated humans")
    ratios = [visibility_ratio(b, m, cam, cfg) for b, m in zip(bodies, masks)]
    lo = min(ratios)
    return SceneOcclusion(ratios, lo, cfg.bucket(lo))


def occlusion_levels(bodies_per_scene: Sequence[Sequence], masks_per_scene: Sequence[Sequence[np.ndarray]],
                     cams: Sequence[CameraModel], cfg: OcclusionConfig = OcclusionConfig()
                     ) -> list[SceneOcclusion]:
    if not len(bodies_per_scene) == len(masks_per_scene) == len(cams):
        raise ValueError("bodies, masks and cameras must list the same scenes")
    return [scene_occlusion(b, m, c, cfg) for b, m, c in zip(bodies_per_scene, masks_per_scene, cams)]


def bucket_counts(levels: Sequence[SceneOcclusion]) -> dict[str, int]:
    out = {LOW: 0, MEDIUM: 0, HIGH: 0}
    for lv in levels:
        out[lv.bucket] += 1
    return out
