"""Pinhole cameras, depth/index images, and the 3D <-> pixel mappings.

Pixel convention: ``cx``/``cy`` are given in pixel-index coordinates, so
pixel (r, c) is the unit square centred on index coordinates (c, r) and a
camera-frame point projects to column ``floor(fx * x / z + cx + 0.5)``. In
edge coordinates this is the ray through (c + 0.5, r + 0.5). Depth is the
camera-frame z, not the ray length.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cloud import LabeledPointCloud

KINECT_F = 525.0
KINECT_W, KINECT_H = 640, 480


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    cam_id: int = 0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")
        R = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if np.abs(R @ R.T - np.eye(3)).max() > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation must be orthonormal with determinant +1")
        object.__setattr__(self, "rotation", _frozen(R))
        object.__setattr__(self, "translation", _frozen(t))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @classmethod
    def kinect(cls, rotation=None, translation=None, cam_id: int = 0) -> "CameraModel":
        """Kinect-like defaults: f = 525 px, 640 x 480, centred principal point."""
        return cls(KINECT_F, KINECT_F, (KINECT_W - 1) / 2, (KINECT_H - 1) / 2, KINECT_W, KINECT_H,
                   np.eye(3) if rotation is None else rotation,
                   np.zeros(3) if translation is None else translation, cam_id)

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 0.0, 1.0), fx=KINECT_F, fy=None,
                width=KINECT_W, height=KINECT_H, cx=None, cy=None, cam_id: int = 0) -> "CameraModel":
        """Camera at ``eye`` looking at ``target`` (x right, y down, z forward)."""
        eye = np.asarray(eye, dtype=np.float64)
        fwd = np.asarray(target, dtype=np.float64) - eye
        fwd /= np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(up, dtype=np.float64))
        if np.linalg.norm(right) < 1e-9:
            raise ValueError("view direction parallel to up vector")
        right /= np.linalg.norm(right)
        down = np.cross(fwd, right)
        R = np.stack([right, down, fwd])
        return cls(fx, fx if fy is None else fy,
                   (width - 1) / 2 if cx is None else cx,
                   (height - 1) / 2 if cy is None else cy,
                   width, height, R, -R @ eye, cam_id)

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64).reshape(-1, 3) @ self.rotation.T + self.translation

    def to_world(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64).reshape(-1, 3) - self.translation) @ self.rotation

    def transformed(self, rotation, translation) -> "CameraModel":
        """Pose of this camera after the world is moved by x -> Q x + s."""
        Q = np.asarray(rotation, dtype=np.float64)
        s = np.asarray(translation, dtype=np.float64)
        R = self.rotation @ Q.T
        return CameraModel(self.fx, self.fy, self.cx, self.cy, self.width, self.height,
                           R, self.translation - R @ s, self.cam_id)

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height,
                "rotation": self.rotation.tolist(), "translation": self.translation.tolist(),
                "cam_id": self.cam_id}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(d["fx"], d["fy"], d["cx"], d["cy"], d["width"], d["height"],
                   np.asarray(d.get("rotation", np.eye(3))),
                   np.asarray(d.get("translation", np.zeros(3))), int(d.get("cam_id", 0)))


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Camera-frame z per pixel; invalid pixels hold 0 and must not be read."""

    depth: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        d = np.array(self.depth, dtype=np.float64)
        v = np.array(self.valid, dtype=bool)
        if d.ndim != 2 or d.shape != v.shape:
            raise ValueError("depth and valid must be 2D arrays of equal shape")
        if not np.all(np.isfinite(d[v]) & (d[v] > 0)):
            raise ValueError("valid pixels must carry finite positive depth")
        d[~v] = 0.0
        object.__setattr__(self, "depth", _frozen(d))
        object.__setattr__(self, "valid", _frozen(v))

    @classmethod
    def from_array(cls, depth: np.ndarray) -> "DepthImage":
        """Treat non-finite or non-positive entries as invalid."""
        d = np.asarray(depth, dtype=np.float64)
        v = np.isfinite(d) & (d > 0)
        return cls(np.where(v, d, 0.0), v)

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]


@dataclass(frozen=True, eq=False)
class IndexImage:
    value: np.ndarray

    def __post_init__(self):
        v = np.array(self.value, dtype=np.int64)
        if v.ndim != 2:
            raise ValueError("index image must be 2D")
        object.__setattr__(self, "value", _frozen(v))

    @property
    def height(self) -> int:
        return self.value.shape[0]

    @property
    def width(self) -> int:
        return self.value.shape[1]


@dataclass(frozen=True)
class Projection:
    row: np.ndarray
    col: np.ndarray
    depth: np.ndarray
    in_frame: np.ndarray


def project_points(points: np.ndarray, cam: CameraModel) -> Projection:
    """Pinhole projection of world points; rows/cols are -1 where out of frame."""
    pc = cam.to_camera(points)
    z = pc[:, 2]
    in_front = z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(in_front, cam.fx * pc[:, 0] / np.where(in_front, z, 1.0) + cam.cx, -1.0)
        v = np.where(in_front, cam.fy * pc[:, 1] / np.where(in_front, z, 1.0) + cam.cy, -1.0)
    col = np.floor(u + 0.5)
    row = np.floor(v + 0.5)
    ok = in_front & (col >= 0) & (col < cam.width) & (row >= 0) & (row < cam.height)
    return Projection(np.where(ok, row, -1).astype(np.int64),
                      np.where(ok, col, -1).astype(np.int64), z, ok)


def pixel_rays(cam: CameraModel, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Camera-frame direction with unit z through the given pixel centres."""
    x = (np.asarray(cols, dtype=np.float64) - cam.cx) / cam.fx
    y = (np.asarray(rows, dtype=np.float64) - cam.cy) / cam.fy
    return np.stack([x, y, np.ones_like(x)], axis=1)


def backproject_depth(depth: DepthImage, cam: CameraModel,
                      labels: Optional[dict[str, IndexImage]] = None) -> LabeledPointCloud:
    """One world-frame point per valid pixel.

    ``labels`` may carry ``"semantic"``, ``"instance"`` and ``"part"`` images;
    if only instance is given, semantic is derived as instance != 0.
    """
    if depth.depth.shape != cam.shape:
        raise ValueError(f"depth image {depth.depth.shape} does not match camera {cam.shape}")
    labels = labels or {}
    for name, img in labels.items():
        if img.value.shape != depth.depth.shape:
            raise ValueError(f"label image {name!r} shape {img.value.shape} "
                             f"does not match depth {depth.depth.shape}")
    rows, cols = np.nonzero(depth.valid)
    z = depth.depth[rows, cols]
    pc = pixel_rays(cam, rows, cols) * z[:, None]
    positions = cam.to_world(pc)
    n = len(rows)
    inst = labels["instance"].value[rows, cols] if "instance" in labels else np.zeros(n, np.int64)
    part = labels["part"].value[rows, cols] if "part" in labels else np.zeros(n, np.int64)
    if "semantic" in labels:
        sem = labels["semantic"].value[rows, cols]
    else:
        sem = ((inst != 0) | (part != 0)).astype(np.int64)
    prov = np.stack([np.full(n, cam.cam_id), rows, cols], axis=1)
    return LabeledPointCloud(positions, sem, inst, part, prov)


def backproject_pixels(cam: CameraModel, rows, cols, depth) -> np.ndarray:
    """World positions for explicit pixel/depth triples."""
    pc = pixel_rays(cam, rows, cols) * np.asarray(depth, dtype=np.float64)[:, None]
    return cam.to_world(pc)


def transform_points(points: np.ndarray, rotation, translation) -> np.ndarray:
    return np.asarray(points, dtype=np.float64) @ np.asarray(rotation).T + np.asarray(translation)


def cameras_to_json(cams: Sequence[CameraModel]) -> list[dict]:
    return [c.to_dict() for c in cams]
