"""Lifting 2D instance masks onto point clouds (the image-baseline path)."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import ndimage

from .camera import CameraModel, DepthImage, IndexImage, project_points
from .cloud import LabeledPointCloud


def intersect_instance_semantic(instance_masks: Sequence[np.ndarray],
                                semantic_mask: np.ndarray) -> IndexImage:
    """Combine per-instance 2D masks with a semantic human mask.

    Instance k (1-based) keeps only pixels also marked human; where instance
    masks overlap, the lower index wins.
    """
    sem = np.asarray(semantic_mask, dtype=bool)
    out = np.zeros(sem.shape, dtype=np.int64)
    for k, m in enumerate(instance_masks, start=1):
        m = np.asarray(m, dtype=bool)
        if m.shape != sem.shape:
            raise ValueError("instance and semantic masks differ in shape")
        out[(out == 0) & m & sem] = k
    return IndexImage(out)


def dilate_labels(mask: IndexImage, pixels: int = 1) -> IndexImage:
    """Grow every non-zero label by ``pixels`` (8-connected) into zero pixels.

    Where two labels compete for a pixel the larger id wins.
    """
    val = mask.value
    out = val.copy()
    struct = np.ones((3, 3), dtype=bool)
    for lab in np.unique(val):
        if lab == 0:
            continue
        grown = ndimage.binary_dilation(val == lab, structure=struct, iterations=pixels)
        out[grown & (val == 0)] = lab
    return IndexImage(out)


def project_2d_mask_to_3d(mask2d: IndexImage, depth: DepthImage, cam: CameraModel,
                          cloud: LabeledPointCloud) -> np.ndarray:
    """Per-point label read from ``mask2d`` at each point's pixel.

    Points carrying provenance for ``cam.cam_id`` use their recorded pixel;
    other points are projected. Points that land outside the frame or on a
    pixel that is invalid in ``depth`` get 0.
    """
    if mask2d.value.shape != cam.shape or depth.depth.shape != cam.shape:
        raise ValueError("mask/depth dimensions do not match the camera")
    n = len(cloud)
    rows = np.full(n, -1, dtype=np.int64)
    cols = np.full(n, -1, dtype=np.int64)
    use_prov = np.zeros(n, dtype=bool)
    if cloud.provenance is not None and n:
        use_prov = cloud.provenance[:, 0] == cam.cam_id
        if not use_prov.any():
            raise ValueError(f"camera mismatch: no point has provenance for camera {cam.cam_id}")
        r = cloud.provenance[use_prov, 1]
        c = cloud.provenance[use_prov, 2]
        if r.min() < 0 or c.min() < 0 or r.max() >= cam.height or c.max() >= cam.width:
            raise ValueError("camera mismatch: provenance pixel outside the image")
        rows[use_prov], cols[use_prov] = r, c
    rest = ~use_prov
    if rest.any():
        proj = project_points(cloud.positions[rest], cam)
        rows[rest], cols[rest] = proj.row, proj.col
    ok = rows >= 0
    ok[ok] = depth.valid[rows[ok], cols[ok]]
    out = np.zeros(n, dtype=np.int64)
    out[ok] = mask2d.value[rows[ok], cols[ok]]
    return out
