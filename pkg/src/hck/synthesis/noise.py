"""Kinect-style depth noise in the disparity domain.

Per valid pixel: depth -> disparity ``fx * baseline / z``, add Gaussian noise,
snap to multiples of ``1 / scale_factor``, convert back, then drop pixels that
leave [z_near, z_far] or that sit on a depth discontinuity. A pixel is on a
discontinuity when, inside the ``filter_size`` x ``filter_size`` window
around it, more than half of the valid input pixels differ from it in
disparity by more than ``inlier_distance`` (one quantization step unless set).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..geometry.camera import CameraModel, DepthImage


@dataclass(frozen=True)
class NoiseConfig:
    scale_factor: float = 100.0
    baseline: float = 0.075
    sigma: float = 0.5
    filter_size: int = 6
    z_near: float = 0.01
    z_far: float = 20.0
    inlier_distance: Optional[float] = None

    def __post_init__(self):
        if not (self.scale_factor > 0 and self.baseline > 0 and self.z_near > 0 and self.z_far > 0):
            raise ValueError("noise parameters must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not self.z_near < self.z_far:
            raise ValueError("z_near must be below z_far")
        if int(self.filter_size) != self.filter_size or self.filter_size < 1:
            raise ValueError("filter_size must be an integer >= 1")
        if self.inlier_distance is not None and not self.inlier_distance > 0:
            raise ValueError("inlier_distance must be positive")

    @property
    def step(self) -> float:
        """Disparity quantization step in pixels."""
        return 1.0 / self.scale_factor

    def to_dict(self) -> dict:
        return asdict(self)


def discontinuity_mask(disparity: np.ndarray, valid: np.ndarray, filter_size: int,
                       inlier_distance: float) -> np.ndarray:
    """True where more than half of the window's valid pixels are outliers.

    For even sizes the window spans offsets -size//2 .. size//2 - 1.
    """
    h, w = disparity.shape
    lo = -(filter_size // 2)
    hi = lo + filter_size - 1
    pad = max(-lo, hi)
    d = np.pad(np.where(valid, disparity, 0.0), pad)
    v = np.pad(valid, pad)
    n_valid = np.zeros((h, w), dtype=np.int64)
    n_far = np.zeros((h, w), dtype=np.int64)
    for dr in range(lo, hi + 1):
        for dc in range(lo, hi + 1):
            vs = v[pad + dr:pad + dr + h, pad + dc:pad + dc + w]
            ds = d[pad + dr:pad + dr + h, pad + dc:pad + dc + w]
            n_valid += vs
            n_far += vs & (np.abs(ds - disparity) > inlier_distance)
    return valid & (2 * n_far > n_valid)


def simulate_kinect_noise(depth: DepthImage, cam: CameraModel, cfg: NoiseConfig,
                          rng: np.random.Generator) -> DepthImage:
    """Noisy copy of ``depth``; the output validity mask is a subset of the input's.

    Consumes exactly one standard-normal draw per pixel of the image.
    """
    valid = depth.valid
    fb = cam.fx * cfg.baseline
    disp = np.where(valid, fb / np.where(valid, depth.depth, 1.0), 0.0)
    inlier = cfg.step if cfg.inlier_distance is None else cfg.inlier_distance
    edge = discontinuity_mask(disp, valid, int(cfg.filter_size), inlier)
    noise = rng.standard_normal(disp.shape) * cfg.sigma
    q = np.round((disp + noise) * cfg.scale_factor) / cfg.scale_factor
    ok = valid & ~edge & (q > 0)
    z = np.where(ok, fb / np.where(ok, q, 1.0), 0.0)
    ok &= (z >= cfg.z_near) & (z <= cfg.z_far)
    return DepthImage(np.where(ok, z, 0.0), ok)
