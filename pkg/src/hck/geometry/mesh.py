"""Triangle meshes: construction, validation, rigid transforms and OBJ + part sidecar I/O."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

# triangles with area below this are dropped at load
MIN_FACE_AREA = 1e-12


def face_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Immutable triangle mesh in meters.

    ``face_part`` optionally labels every face with an integer part id
    (source-part ids for fitted bodies, final-part ids after merging).
    """

    vertices: np.ndarray
    faces: np.ndarray
    face_part: Optional[np.ndarray] = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.ascontiguousarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(f) and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("face index out of range")
        fp = None
        if self.face_part is not None:
            fp = np.ascontiguousarray(self.face_part, dtype=np.int64).reshape(-1)
            if len(fp) != len(f):
                raise ValueError(
                    f"face_part has {len(fp)} entries for {len(f)} faces")
        if len(f):
            keep = face_areas(v, f) >= MIN_FACE_AREA
            if not keep.all():
                log.warning("%s: dropping %d degenerate face(s)",
                            self.name or "mesh", int((~keep).sum()))
                f = f[keep]
                if fp is not None:
                    fp = fp[keep]
        for arr in (v, f, fp):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "face_part", fp)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangles(self) -> np.ndarray:
        """(F, 3, 3) array of corner positions."""
        return self.vertices[self.faces]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if len(self.vertices) == 0:
            raise ValueError("empty mesh")
        used = self.vertices[np.unique(self.faces)] if len(self.faces) else self.vertices
        return used.min(axis=0), used.max(axis=0)

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "TriangleMesh":
        """Apply x -> R x + t."""
        v = self.vertices @ np.asarray(rotation, dtype=np.float64).T + np.asarray(translation, dtype=np.float64)
        return TriangleMesh(v, self.faces, self.face_part, name=self.name)

    def with_face_part(self, face_part: Optional[np.ndarray]) -> "TriangleMesh":
        return TriangleMesh(self.vertices, self.faces, face_part, name=self.name)


def merge_meshes(meshes: Sequence[TriangleMesh], name: str = "") -> TriangleMesh:
    """Concatenate meshes. Part ids are kept only if every input has them."""
    if not meshes:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), name=name)
    verts, faces, parts = [], [], []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        parts.append(m.face_part)
        offset += len(m.vertices)
    fp = None if any(p is None for p in parts) else np.concatenate(parts)
    return TriangleMesh(np.concatenate(verts), np.concatenate(faces), fp, name=name)


# --- OBJ + sidecar -------------------------------------------------------

def read_obj(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Read vertex and face records of a Wavefront OBJ file.

    Polygons are fan-triangulated; texture/normal indices are ignored.
    """
    verts, faces = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                if len(idx) < 3:
                    raise ValueError(f"{path}:{lineno}: face with fewer than 3 vertices")
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
    return (np.asarray(verts, dtype=np.float64).reshape(-1, 3),
            np.asarray(faces, dtype=np.int64).reshape(-1, 3))


def write_obj(path: str | os.PathLike, mesh: TriangleMesh) -> None:
    with open(path, "w") as fh:
        for x, y, z in mesh.vertices.tolist():
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, c in mesh.faces + 1:
            fh.write(f"f {a} {b} {c}\n")


def part_ranges(face_part: np.ndarray, names: Sequence[str]) -> list[dict]:
    """Run-length encode per-face part ids into sidecar range records."""
    out = []
    start = 0
    for i in range(1, len(face_part) + 1):
        if i == len(face_part) or face_part[i] != face_part[start]:
            out.append({"start": start, "stop": i, "part": names[face_part[start]]})
            start = i
    return out


def load_mesh(obj_path: str | os.PathLike, sidecar_path=None,
              part_ids: Optional[dict[str, int]] = None) -> TriangleMesh:
    """Load an OBJ mesh and, optionally, its part sidecar.

    The sidecar is JSON of the form ``{"ranges": [{"start": 0, "stop": 120,
    "part": "head"}, ...]}`` with half-open face index ranges; ``part_ids``
    maps part names to integer ids. Faces not covered by any range get -1.
    """
    v, f = read_obj(obj_path)
    fp = None
    if sidecar_path is not None:
        if part_ids is None:
            raise ValueError("part_ids required to decode a part sidecar")
        with open(sidecar_path) as fh:
            side = json.load(fh)
        fp = np.full(len(f), -1, dtype=np.int64)
        for rec in side["ranges"]:
            name = rec["part"]
            if name not in part_ids:
                raise ValueError(f"unknown part {name!r} in {sidecar_path}")
            fp[int(rec["start"]):int(rec["stop"])] = part_ids[name]
    return TriangleMesh(v, f, fp, name=os.path.basename(str(obj_path)))


def save_mesh(obj_path, mesh: TriangleMesh, sidecar_path=None,
              part_names: Optional[Sequence[str]] = None, extra: Optional[dict] = None) -> None:
    write_obj(obj_path, mesh)
    if sidecar_path is not None:
        if mesh.face_part is None or part_names is None:
            raise ValueError("mesh has no face parts to write")
        doc = dict(extra or {})
        doc["ranges"] = part_ranges(mesh.face_part, part_names)
        with open(sidecar_path, "w") as fh:
            json.dump(doc, fh, indent=1)


# --- primitive builders ----------------------------------------------------

def box_mesh(lo, hi, subdiv: int = 1) -> TriangleMesh:
    """Axis-aligned box with each face split into ``subdiv`` x ``subdiv`` quads."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    n = max(int(subdiv), 1)
    t = np.linspace(0.0, 1.0, n + 1)
    verts, faces = [], []
    for axis in range(3):
        u_ax, v_ax = [a for a in range(3) if a != axis]
        for side in (0, 1):
            base = len(verts)
            uu, vv = np.meshgrid(t, t, indexing="ij")
            p = np.empty((n + 1, n + 1, 3))
            p[..., axis] = hi[axis] if side else lo[axis]
            p[..., u_ax] = lo[u_ax] + uu * (hi[u_ax] - lo[u_ax])
            p[..., v_ax] = lo[v_ax] + vv * (hi[v_ax] - lo[v_ax])
            verts.extend(p.reshape(-1, 3))
            idx = base + np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
            a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
            c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
            # winding is not normalized; nothing downstream culls back faces
            faces.extend(np.stack([a, b, c], 1))
            faces.extend(np.stack([a, c, d], 1))
    return TriangleMesh(np.asarray(verts), np.asarray(faces))


def grid_mesh(origin, u_vec, v_vec, nu: int, nv: int) -> TriangleMesh:
    """Planar parallelogram origin + s*u + t*v, s,t in [0,1], split into nu x nv quads."""
    origin, u_vec, v_vec = (np.asarray(x, dtype=np.float64) for x in (origin, u_vec, v_vec))
    s = np.linspace(0, 1, nu + 1)
    t = np.linspace(0, 1, nv + 1)
    ss, tt = np.meshgrid(s, t, indexing="ij")
    verts = origin + ss[..., None] * u_vec + tt[..., None] * v_vec
    idx = np.arange((nu + 1) * (nv + 1)).reshape(nu + 1, nv + 1)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    faces = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return TriangleMesh(verts.reshape(-1, 3), faces)


def icosphere(radius: float = 1.0, subdivisions: int = 2, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    phi = (1 + 5 ** 0.5) / 2
    verts = [(-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
             (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
             (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.asarray(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.asarray(verts) * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(v, np.asarray(faces))
