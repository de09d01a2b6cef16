"""Pseudo ground truth from fitted body meshes.

A point is human when it lies strictly under ``distance_threshold`` of some
fitted body; it takes the instance of the nearest such body (lower instance id
on exact ties) and the merged part of that body's nearest face.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from ..geometry.bvh import DistanceAccelerator
from ..geometry.cloud import BACKGROUND, HUMAN, LabeledPointCloud
from ..geometry.mesh import TriangleMesh
from .taxonomy import BodyPartTaxonomy


@dataclass(frozen=True, eq=False)
class FittedBody:
    mesh: TriangleMesh
    instance_id: int
    taxonomy: BodyPartTaxonomy

    def __post_init__(self):
        if self.instance_id <= 0:
            raise ValueError("instance_id must be positive")
        fp = self.mesh.face_part
        if fp is not None and len(fp) and (fp.min() < -1 or fp.max() >= len(self.taxonomy.source_parts)):
            raise ValueError("face part id outside the taxonomy")

    @cached_property
    def accelerator(self) -> DistanceAccelerator:
        return DistanceAccelerator(self.mesh)

    def transformed(self, rotation, translation, instance_id: Optional[int] = None) -> "FittedBody":
        return FittedBody(self.mesh.transformed(rotation, translation),
                          self.instance_id if instance_id is None else instance_id, self.taxonomy)

    def merged_mesh(self) -> TriangleMesh:
        """Copy of the mesh with face parts mapped to final part ids (0 where unlabeled)."""
        fp = self.mesh.face_part
        if fp is None:
            return self.mesh.with_face_part(None)
        lut = np.concatenate([[0], self.taxonomy.lut()])
        return self.mesh.with_face_part(lut[fp + 1])


@dataclass(frozen=True)
class LabelConfig:
    distance_threshold: float = 0.05

    def __post_init__(self):
        if not self.distance_threshold > 0:
            raise ValueError("distance_threshold must be positive")


def _check_unique(bodies: Sequence[FittedBody]) -> list[FittedBody]:
    ids = [b.instance_id for b in bodies]
    if len(set(ids)) != len(ids):
        raise ValueError("instance ids must be unique within a scene")
    return sorted(bodies, key=lambda b: b.instance_id)


def _near_candidates(points: np.ndarray, accel: DistanceAccelerator, radius: float) -> np.ndarray:
    lo, hi = accel.bounds
    return np.nonzero(np.all((points >= lo - radius) & (points <= hi + radius), axis=1))[0]


def body_distances(cloud: LabeledPointCloud, bodies: Sequence[FittedBody],
                   max_distance: float = np.inf) -> np.ndarray:
    """(n_points, n_bodies) distance matrix, inf beyond ``max_distance``.

    Columns follow ascending instance id.
    """
    bodies = _check_unique(bodies)
    pts = cloud.positions
    out = np.full((len(pts), len(bodies)), np.inf)
    for j, body in enumerate(bodies):
        acc = body.accelerator
        idx = _near_candidates(pts, acc, max_distance) if np.isfinite(max_distance) else np.arange(len(pts))
        if len(idx):
            out[idx, j] = acc.query(pts[idx], max_distance)[0]
    return out


def segment_human_points(cloud: LabeledPointCloud, bodies: Sequence[FittedBody],
                         cfg: LabelConfig = LabelConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (semantic, instance) from distance thresholding."""
    n = len(cloud)
    semantic = np.full(n, BACKGROUND, dtype=np.int64)
    instance = np.zeros(n, dtype=np.int64)
    if not bodies or n == 0:
        return semantic, instance
    ordered = _check_unique(bodies)
    dist = body_distances(cloud, ordered, cfg.distance_threshold)
    # argmin returns the first column on ties, i.e. the lower instance id
    nearest = np.argmin(dist, axis=1)
    best = dist[np.arange(n), nearest]
    human = best < cfg.distance_threshold
    ids = np.array([b.instance_id for b in ordered])
    semantic[human] = HUMAN
    instance[human] = ids[nearest[human]]
    return semantic, instance


def assign_and_merge_parts(cloud: LabeledPointCloud, bodies: Sequence[FittedBody],
                           instance: np.ndarray, taxonomy: BodyPartTaxonomy) -> np.ndarray:
    """Final part id per point from the nearest face of the point's own body."""
    instance = np.asarray(instance, dtype=np.int64)
    if len(instance) != len(cloud):
        raise ValueError("instance labels do not match the cloud")
    part = np.zeros(len(cloud), dtype=np.int64)
    by_id = {b.instance_id: b for b in _check_unique(bodies)}
    lut = taxonomy.lut()
    for iid in np.unique(instance):
        if iid == 0:
            continue
        if iid not in by_id:
            raise ValueError(f"no fitted body with instance id {iid}")
        body = by_id[iid]
        if body.taxonomy.source_parts != taxonomy.source_parts:
            raise ValueError(f"body {iid} uses a different part vocabulary")
        sel = np.nonzero(instance == iid)[0]
        _, face = body.accelerator.query(cloud.positions[sel])
        fp = body.mesh.face_part
        if fp is None or np.any(fp[face] < 0):
            raise ValueError("unlabeled face")
        part[sel] = lut[fp[face]]
    return part


def refine_with_released_masks(semantic: np.ndarray, instance: np.ndarray, part: np.ndarray,
                               external_mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Keep human labels only where the external per-point mask agrees."""
    semantic, instance, part = (np.array(a, dtype=np.int64) for a in (semantic, instance, part))
    ext = np.asarray(external_mask, dtype=bool)
    if not (len(ext) == len(semantic) == len(instance) == len(part)):
        raise ValueError("external mask length does not match the labels")
    drop = ~ext
    semantic[drop] = BACKGROUND
    instance[drop] = 0
    part[drop] = 0
    return semantic, instance, part


def pseudo_label(cloud: LabeledPointCloud, bodies: Sequence[FittedBody], taxonomy: BodyPartTaxonomy,
                 cfg: LabelConfig = LabelConfig(),
                 external_mask: Optional[np.ndarray] = None) -> LabeledPointCloud:
    """Full pseudo-labeling pass; returns the cloud with labels replaced."""
    semantic, instance = segment_human_points(cloud, bodies, cfg)
    part = assign_and_merge_parts(cloud, bodies, instance, taxonomy)
    if external_mask is not None:
        semantic, instance, part = refine_with_released_masks(semantic, instance, part, external_mask)
    return cloud.with_labels(semantic, instance, part)
