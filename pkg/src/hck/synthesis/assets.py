"""Procedural stand-ins for fitted bodies and indoor rooms.

Bodies are articulated box figures whose faces carry the SMPL-X (or SMPL)
source-part names, so the labeling and merging code paths see the same kind
of input a real fitted mesh would give them. Local frame: z up, standing on
z = 0, facing +y, the figure's left side towards -x.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from ..geometry.mesh import TriangleMesh, box_mesh, grid_mesh, load_mesh, merge_meshes, save_mesh
from ..labeling.pseudo import FittedBody
from ..labeling.taxonomy import SMPLX, build_taxonomy

# (part, lo, hi) for a 1.75 m figure; the figure's left is -x
_LEFT_BOXES = {
    "leftToeBase": ((-0.16, 0.10, 0.00), (-0.06, 0.20, 0.05)),
    "leftFoot": ((-0.16, -0.05, 0.00), (-0.06, 0.10, 0.08)),
    "leftLeg": ((-0.16, -0.05, 0.08), (-0.05, 0.06, 0.50)),
    "leftUpLeg": ((-0.17, -0.07, 0.50), (-0.03, 0.08, 0.90)),
    "leftShoulder": ((-0.26, -0.08, 1.34), (-0.18, 0.08, 1.46)),
    "leftArm": ((-0.32, -0.045, 1.12), (-0.24, 0.045, 1.42)),
    "leftForeArm": ((-0.315, -0.04, 0.86), (-0.245, 0.04, 1.12)),
    "leftHand": ((-0.31, -0.04, 0.74), (-0.25, 0.04, 0.86)),
    "leftHandIndex1": ((-0.30, 0.01, 0.68), (-0.28, 0.03, 0.74)),
    "leftEye": ((-0.06, 0.10, 1.64), (-0.02, 0.115, 1.67)),
}
_CENTER_BOXES = {
    "hips": ((-0.18, -0.10, 0.90), (0.18, 0.10, 1.02)),
    "spine": ((-0.16, -0.09, 1.02), (0.16, 0.09, 1.15)),
    "spine1": ((-0.17, -0.09, 1.15), (0.17, 0.10, 1.28)),
    "spine2": ((-0.18, -0.09, 1.28), (0.18, 0.10, 1.42)),
    "neck": ((-0.05, -0.05, 1.42), (0.05, 0.05, 1.52)),
    "head": ((-0.09, -0.10, 1.52), (0.09, 0.10, 1.75)),
}
_ARM_CHAIN = ("Arm", "ForeArm", "Hand", "HandIndex1")
_LEG_CHAIN = ("UpLeg", "Leg", "Foot", "ToeBase")
_SHOULDER_JOINT = np.array([0.25, 0.0, 1.42])  # x sign set per side
_ELBOW_Z, _HIP_JOINT, _KNEE_Z = 1.12, np.array([0.10, 0.0, 0.90]), 0.50


def _mirror(name: str) -> str:
    return "right" + name[len("left"):]


def _rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def _about(mesh: TriangleMesh, R: np.ndarray, pivot: np.ndarray) -> TriangleMesh:
    return mesh.transformed(R, pivot - R @ pivot)


def make_body(rng: np.random.Generator, family: str = SMPLX, subdiv: int = 3,
              instance_id: int = 1, scale: Optional[float] = None) -> FittedBody:
    """Random articulated box figure with per-face source-part labels."""
    tax = build_taxonomy(family)
    ids = tax.source_ids
    boxes = dict(_CENTER_BOXES)
    for name, (lo, hi) in _LEFT_BOXES.items():
        boxes[name] = (lo, hi)
        boxes[_mirror(name)] = ((-hi[0], lo[1], lo[2]), (-lo[0], hi[1], hi[2]))
    parts = {}
    for name, (lo, hi) in boxes.items():
        if name not in ids:  # SMPL has no eyes
            continue
        m = box_mesh(lo, hi, subdiv)
        parts[name] = m.with_face_part(np.full(m.n_faces, ids[name]))

    for side, sx in (("left", -1.0), ("right", 1.0)):
        # arm: swing about x at the shoulder, abduct about y, bend the elbow
        swing = rng.uniform(-0.7, 0.7)
        abduct = sx * rng.uniform(0.0, 0.9)
        bend = -rng.uniform(0.0, 1.2)
        shoulder = _SHOULDER_JOINT * np.array([sx, 1, 1])
        elbow = np.array([sx * 0.28, 0.0, _ELBOW_Z])
        for j, seg in enumerate(_ARM_CHAIN):
            m = parts[side + seg]
            if j > 0:
                m = _about(m, _rot_x(bend), elbow)
            parts[side + seg] = _about(m, _rot_y(abduct) @ _rot_x(swing), shoulder)
        # leg: swing about x at the hip, bend the knee backwards
        swing = rng.uniform(-0.45, 0.45)
        bend = rng.uniform(0.0, 0.6)
        hip = _HIP_JOINT * np.array([sx, 1, 1])
        knee = np.array([sx * 0.105, 0.0, _KNEE_Z])
        for j, seg in enumerate(_LEG_CHAIN):
            m = parts[side + seg]
            if j > 0:
                m = _about(m, _rot_x(-bend), knee)
            parts[side + seg] = _about(m, _rot_x(swing), hip)

    order = [p for p in tax.source_parts if p in parts]
    mesh = merge_meshes([parts[p] for p in order], name="body")
    s = rng.uniform(0.85, 1.1) if scale is None else scale
    v = mesh.vertices * s
    v[:, 2] -= v[:, 2].min()
    return FittedBody(TriangleMesh(v, mesh.faces, mesh.face_part, name="body"), instance_id, tax)


def make_room(rng: np.random.Generator, size: Optional[tuple[float, float]] = None,
              height: float = 3.0, n_furniture: Optional[int] = None, cell: float = 0.5) -> TriangleMesh:
    """Rectangular room: floor at z = 0 spanning [0, W] x [0, D], four walls, box furniture."""
    w, d = size if size is not None else (rng.uniform(6.0, 10.0), rng.uniform(6.0, 10.0))
    nw, nd, nh = max(int(w / cell), 1), max(int(d / cell), 1), max(int(height / cell), 1)
    pieces = [
        grid_mesh((0, 0, 0), (w, 0, 0), (0, d, 0), nw, nd),
        grid_mesh((0, 0, 0), (w, 0, 0), (0, 0, height), nw, nh),
        grid_mesh((0, d, 0), (w, 0, 0), (0, 0, height), nw, nh),
        grid_mesh((0, 0, 0), (0, d, 0), (0, 0, height), nd, nh),
        grid_mesh((w, 0, 0), (0, d, 0), (0, 0, height), nd, nh),
    ]
    k = rng.integers(0, 4) if n_furniture is None else n_furniture
    for _ in range(k):
        fw, fd, fh = rng.uniform(0.4, 1.2), rng.uniform(0.4, 1.2), rng.uniform(0.4, 1.0)
        # furniture hugs a wall so the middle of the room stays free
        if rng.random() < 0.5:
            x = rng.uniform(0.0, w - fw)
            y = 0.0 if rng.random() < 0.5 else d - fd
        else:
            y = rng.uniform(0.0, d - fd)
            x = 0.0 if rng.random() < 0.5 else w - fw
        pieces.append(box_mesh((x, y, 0.0), (x + fw, y + fd, fh), 1))
    return merge_meshes(pieces, name="room")


# --- on-disk asset library ------------------------------------------------------

def write_asset_library(root, n_bodies: int = 8, n_rooms: int = 4, seed: int = 0,
                        family: str = SMPLX) -> Path:
    """Write procedural bodies (OBJ + part sidecar) and rooms (OBJ) under ``root``."""
    root = Path(root)
    (root / "humans").mkdir(parents=True, exist_ok=True)
    (root / "scenes").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    tax = build_taxonomy(family)
    for i in range(n_bodies):
        body = make_body(rng, family)
        save_mesh(root / "humans" / f"body_{i:03d}.obj", body.mesh,
                  root / "humans" / f"body_{i:03d}.parts.json", tax.source_parts,
                  extra={"family": family})
    for i in range(n_rooms):
        save_mesh(root / "scenes" / f"room_{i:03d}.obj", make_room(rng))
    return root


def load_human_assets(directory) -> list[FittedBody]:
    """Load ``*.obj`` bodies with ``*.parts.json`` sidecars (family read from the sidecar)."""
    out = []
    for obj in sorted(Path(directory).glob("*.obj")):
        side = obj.with_suffix(".parts.json")
        with open(side) as fh:
            family = json.load(fh).get("family", SMPLX)
        tax = build_taxonomy(family)
        mesh = load_mesh(obj, side, tax.source_ids)
        out.append(FittedBody(mesh, 1, tax))
    if not out:
        raise FileNotFoundError(f"no human assets in {directory}")
    return out


def load_scene_assets(directory) -> list[TriangleMesh]:
    out = [load_mesh(p) for p in sorted(Path(directory).glob("*.obj"))]
    if not out:
        raise FileNotFoundError(f"no scene assets in {directory}")
    return out


def default_assets(seed: int = 0, n_bodies: int = 8, n_rooms: int = 4,
                   family: str = SMPLX) -> tuple[list[TriangleMesh], list[FittedBody]]:
    """In-memory equivalent of :func:`write_asset_library`."""
    rng = np.random.default_rng(seed)
    bodies = [make_body(rng, family) for _ in range(n_bodies)]
    rooms = [make_room(rng) for _ in range(n_rooms)]
    return rooms, bodies


__all__ = ["default_assets", "load_human_assets", "load_scene_assets", "make_body", "make_room",
           "rot_z", "write_asset_library"]
