"""Bounding-volume hierarchy over triangles for exact nearest-face queries."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .mesh import TriangleMesh

LEAF_SIZE = 4


@njit(cache=True, inline="always")
def _dot(ax, ay, az, bx, by, bz):
    return ax * bx + ay * by + az * bz


@njit(cache=True)
def closest_point_sq(px, py, pz, tri):
    """Squared distance from p to triangle ``tri`` (3x3), Voronoi-region walk."""
    ax, ay, az = tri[0, 0], tri[0, 1], tri[0, 2]
    bx, by, bz = tri[1, 0], tri[1, 1], tri[1, 2]
    cx, cy, cz = tri[2, 0], tri[2, 1], tri[2, 2]
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = _dot(abx, aby, abz, apx, apy, apz)
    d2 = _dot(acx, acy, acz, apx, apy, apz)
    if d1 <= 0.0 and d2 <= 0.0:
        qx, qy, qz = ax, ay, az
    else:
        bpx, bpy, bpz = px - bx, py - by, pz - bz
        d3 = _dot(abx, aby, abz, bpx, bpy, bpz)
        d4 = _dot(acx, acy, acz, bpx, bpy, bpz)
        vc = d1 * d4 - d3 * d2
        if d3 >= 0.0 and d4 <= d3:
            qx, qy, qz = bx, by, bz
        elif vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            v = d1 / (d1 - d3)
            qx, qy, qz = ax + v * abx, ay + v * aby, az + v * abz
        else:
            cpx, cpy, cpz = px - cx, py - cy, pz - cz
            d5 = _dot(abx, aby, abz, cpx, cpy, cpz)
            d6 = _dot(acx, acy, acz, cpx, cpy, cpz)
            vb = d5 * d2 - d1 * d6
            va = d3 * d6 - d5 * d4
            if d6 >= 0.0 and d5 <= d6:
                qx, qy, qz = cx, cy, cz
            elif vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                w = d2 / (d2 - d6)
                qx, qy, qz = ax + w * acx, ay + w * acy, az + w * acz
            elif va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
                w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
                qx, qy, qz = bx + w * (cx - bx), by + w * (cy - by), bz + w * (cz - bz)
            else:
                denom = 1.0 / (va + vb + vc)
                v = vb * denom
                w = vc * denom
                qx = ax + abx * v + acx * w
                qy = ay + aby * v + acy * w
                qz = az + abz * v + acz * w
    dx, dy, dz = px - qx, py - qy, pz - qz
    return dx * dx + dy * dy + dz * dz


@njit(cache=True, inline="always")
def _box_sq(px, py, pz, lo, hi):
    d = 0.0
    if px < lo[0]:
        d += (lo[0] - px) ** 2
    elif px > hi[0]:
        d += (px - hi[0]) ** 2
    if py < lo[1]:
        d += (lo[1] - py) ** 2
    elif py > hi[1]:
        d += (py - hi[1]) ** 2
    if pz < lo[2]:
        d += (lo[2] - pz) ** 2
    elif pz > hi[2]:
        d += (pz - hi[2]) ** 2
    return d


@njit(cache=True)
def _query(points, bound_sq, tris, order, lo, hi, left, right, start, count):
    n = points.shape[0]
    out_d = np.empty(n)
    out_f = np.empty(n, dtype=np.int64)
    stack = np.empty(128, dtype=np.int64)
    stack_d = np.empty(128)
    for i in range(n):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        best = bound_sq[i]
        best_f = -1
        top = 0
        stack[0] = 0
        stack_d[0] = _box_sq(px, py, pz, lo[0], hi[0])
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            if stack_d[top] > best:
                continue
            if count[node] > 0:
                for k in range(start[node], start[node] + count[node]):
                    d = closest_point_sq(px, py, pz, tris[k])
                    f = order[k]
                    if d < best or (d == best and (best_f < 0 or f < best_f)):
                        best = d
                        best_f = f
            else:
                a = left[node]
                b = right[node]
                da = _box_sq(px, py, pz, lo[a], hi[a])
                db = _box_sq(px, py, pz, lo[b], hi[b])
                # push the farther child first so the nearer one is popped next
                if da <= db:
                    stack[top] = b
                    stack_d[top] = db
                    stack[top + 1] = a
                    stack_d[top + 1] = da
                else:
                    stack[top] = a
                    stack_d[top] = da
                    stack[top + 1] = b
                    stack_d[top + 1] = db
                top += 2
        out_d[i] = math.sqrt(best) if best_f >= 0 else np.inf
        out_f[i] = best_f
    return out_d, out_f


class DistanceAccelerator:
    """Immutable BVH answering exact nearest-triangle queries.

    Safe to share between threads; queries never mutate it.
    """

    def __init__(self, mesh: TriangleMesh, leaf_size: int = LEAF_SIZE):
        if mesh.n_faces == 0:
            raise ValueError("empty mesh")
        tris = mesh.triangles()
        cent = tris.mean(axis=1)
        tri_lo = tris.min(axis=1)
        tri_hi = tris.max(axis=1)
        order = np.arange(mesh.n_faces)
        lo, hi, left, right, start, count = [], [], [], [], [], []

        def new_node():
            lo.append(None), hi.append(None)
            left.append(-1), right.append(-1), start.append(0), count.append(0)
            return len(lo) - 1

        # explicit stack: (node, begin, end) over the order array
        root = new_node()
        todo = [(root, 0, mesh.n_faces)]
        while todo:
            node, b, e = todo.pop()
            idx = order[b:e]
            lo[node] = tri_lo[idx].min(axis=0)
            hi[node] = tri_hi[idx].max(axis=0)
            if e - b <= leaf_size:
                start[node], count[node] = b, e - b
                continue
            c = cent[idx]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            # stable sort keeps construction independent of numpy's partition strategy
            srt = idx[np.argsort(c[:, axis], kind="stable")]
            order[b:e] = srt
            mid = (b + e) // 2
            l, r = new_node(), new_node()
            left[node], right[node] = l, r
            todo.append((r, mid, e))
            todo.append((l, b, mid))

        self.n_faces = mesh.n_faces
        self.order = order
        self.tris = np.ascontiguousarray(tris[order])
        self.lo = np.asarray(lo)
        self.hi = np.asarray(hi)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.start = np.asarray(start, dtype=np.int64)
        self.count = np.asarray(count, dtype=np.int64)
        for a in (self.order, self.tris, self.lo, self.hi, self.left, self.right, self.start, self.count):
            a.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.lo)

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.count))

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lo[0], self.hi[0]

    def query(self, points: np.ndarray, max_distance: float = np.inf) -> tuple[np.ndarray, np.ndarray]:
        """Nearest distance and face index per point.

        With a finite ``max_distance`` the search is pruned at that radius;
        points with nothing at or within it get distance inf and face -1.
        Ties go to the lowest face index.
        """
        pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        bound = np.full(len(pts), max_distance * max_distance if np.isfinite(max_distance) else np.inf)
        return _query(pts, bound, self.tris, self.order, self.lo, self.hi,
                      self.left, self.right, self.start, self.count)


def build_distance_accelerator(mesh: TriangleMesh) -> DistanceAccelerator:
    return DistanceAccelerator(mesh)


def point_to_mesh_distance(p, accel: DistanceAccelerator) -> tuple[float, int]:
    d, f = accel.query(np.asarray(p, dtype=np.float64).reshape(1, 3))
    return float(d[0]), int(f[0])
