"""Software z-buffer rasterization of labeled triangle meshes.

A pixel is covered when its centre lies inside the projected triangle; pixel
centres on a shared edge go to exactly one of the two triangles (top-left
style ownership). Depth is interpolated perspective-correctly, i.e. it is
the exact camera-frame z of the triangle's plane along the pixel ray.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .camera import CameraModel, DepthImage, IndexImage
from .mesh import TriangleMesh

# triangles are clipped against this camera-frame plane before projection
NEAR_CLIP = 1e-3


@dataclass(frozen=True, eq=False)
class RenderResult:
    depth: DepthImage
    instance: IndexImage
    part: IndexImage
    face: np.ndarray  # global face index per pixel, -1 where empty

    def __iter__(self):
        # unpacks as (depth, instance, part)
        return iter((self.depth, self.instance, self.part))


@njit(cache=True, inline="always")
def _owns_edge(ax, ay, bx, by):
    dy = by - ay
    return dy > 0.0 or (dy == 0.0 and bx - ax < 0.0)


@njit(cache=True)
def _raster(uv, z, face_inst, face_part, face_id, height, width):
    depth = np.zeros((height, width))
    inst = np.zeros((height, width), dtype=np.int64)
    part = np.zeros((height, width), dtype=np.int64)
    fid = np.full((height, width), -1, dtype=np.int64)
    for t in range(uv.shape[0]):
        x0, y0 = uv[t, 0, 0], uv[t, 0, 1]
        x1, y1 = uv[t, 1, 0], uv[t, 1, 1]
        x2, y2 = uv[t, 2, 0], uv[t, 2, 1]
        z0, z1, z2 = z[t, 0], z[t, 1], z[t, 2]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        if area < 0.0:
            x1, y1, x2, y2 = x2, y2, x1, y1
            z1, z2 = z2, z1
            area = -area
        c_lo = max(int(np.floor(min(x0, x1, x2))), 0)
        c_hi = min(int(np.ceil(max(x0, x1, x2))), width - 1)
        r_lo = max(int(np.floor(min(y0, y1, y2))), 0)
        r_hi = min(int(np.ceil(max(y0, y1, y2))), height - 1)
        own0 = _owns_edge(x1, y1, x2, y2)
        own1 = _owns_edge(x2, y2, x0, y0)
        own2 = _owns_edge(x0, y0, x1, y1)
        iz0, iz1, iz2 = 1.0 / z0, 1.0 / z1, 1.0 / z2
        for r in range(r_lo, r_hi + 1):
            py = float(r)
            for c in range(c_lo, c_hi + 1):
                px = float(c)
                # edge functions opposite each vertex
                w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
                if w0 < 0.0 or (w0 == 0.0 and not own0):
                    continue
                w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
                if w1 < 0.0 or (w1 == 0.0 and not own1):
                    continue
                w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
                if w2 < 0.0 or (w2 == 0.0 and not own2):
                    continue
                inv = (w0 * iz0 + w1 * iz1 + w2 * iz2) / area
                d = 1.0 / inv
                cur = depth[r, c]
                if cur == 0.0 or d < cur:
                    depth[r, c] = d
                    inst[r, c] = face_inst[t]
                    part[r, c] = face_part[t]
                    fid[r, c] = face_id[t]
    return depth, inst, part, fid


def clip_near(tris: np.ndarray, near: float = NEAR_CLIP) -> tuple[np.ndarray, np.ndarray]:
    """Clip camera-frame triangles against z = near.

    Returns the clipped triangles and, for each, the index of its source triangle.
    """
    z = tris[:, :, 2]
    inside = z >= near
    n_in = inside.sum(axis=1)
    keep = n_in == 3
    out = [tris[keep]]
    src = [np.nonzero(keep)[0]]
    for t in np.nonzero((n_in > 0) & (n_in < 3))[0]:
        poly = []
        for k in range(3):
            a, b = tris[t, k], tris[t, (k + 1) % 3]
            ia, ib = a[2] >= near, b[2] >= near
            if ia:
                poly.append(a)
            if ia != ib:
                s = (near - a[2]) / (b[2] - a[2])
                p = a + s * (b - a)
                p[2] = near
                poly.append(p)
        for k in range(1, len(poly) - 1):
            out.append(np.stack([poly[0], poly[k], poly[k + 1]])[None])
            src.append(np.array([t]))
    out, src = np.concatenate(out), np.concatenate(src)
    # keep source order so equal-depth ties resolve to the lower face index
    perm = np.argsort(src, kind="stable")
    return out[perm], src[perm]


def rasterize_meshes(meshes: Sequence[tuple[TriangleMesh, int]], cam: CameraModel,
                     part_lut: Optional[np.ndarray] = None) -> RenderResult:
    """Render (mesh, instance id) pairs into depth, instance and part images.

    The part channel copies each winning face's ``face_part`` (mapped through
    ``part_lut`` when given, e.g. source -> merged ids); meshes without parts
    write 0 there. Background pixels are invalid with zeros in both channels.
    """
    tris, inst, part = [], [], []
    for mesh, instance_id in meshes:
        if mesh.n_faces == 0:
            continue
        tris.append(mesh.triangles())
        inst.append(np.full(mesh.n_faces, instance_id, dtype=np.int64))
        if mesh.face_part is None:
            part.append(np.zeros(mesh.n_faces, dtype=np.int64))
        else:
            fp = mesh.face_part if part_lut is None else np.asarray(part_lut)[mesh.face_part]
            part.append(np.asarray(fp, dtype=np.int64))
    h, w = cam.shape
    if not tris:
        return RenderResult(DepthImage(np.zeros((h, w)), np.zeros((h, w), bool)),
                            IndexImage(np.zeros((h, w))), IndexImage(np.zeros((h, w))),
                            np.full((h, w), -1))
    world = np.concatenate(tris)
    face_inst = np.concatenate(inst)
    face_part = np.concatenate(part)
    cam_tris = cam.to_camera(world.reshape(-1, 3)).reshape(-1, 3, 3)
    clipped, src = clip_near(cam_tris)
    z = clipped[:, :, 2]
    uv = np.empty((len(clipped), 3, 2))
    uv[:, :, 0] = cam.fx * clipped[:, :, 0] / z + cam.cx
    uv[:, :, 1] = cam.fy * clipped[:, :, 1] / z + cam.cy
    depth, ins, prt, fid = _raster(np.ascontiguousarray(uv), np.ascontiguousarray(z),
                                   face_inst[src], face_part[src], src, h, w)
    valid = depth > 0
    return RenderResult(DepthImage(depth, valid), IndexImage(ins), IndexImage(prt), fid)
