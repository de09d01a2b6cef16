from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

BACKGROUND, HUMAN = 0, 1
N_FINAL_PARTS = 15


@dataclass(frozen=True, eq=False)
class LabeledPointCloud:
    """Points with per-point semantic class, human instance id and body-part id.

    ``provenance`` rows are (camera id, pixel row, pixel col). Construction only
    checks shapes; call :meth:`validate` for the label invariants.
    """

    positions: np.ndarray
    semantic: Optional[np.ndarray] = None
    instance: Optional[np.ndarray] = None
    part: Optional[np.ndarray] = None
    provenance: Optional[np.ndarray] = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64).reshape(-1, 3)
        n = len(pos)

        def lab(a, dtype):
            if a is None:
                return np.zeros(n, dtype=dtype)
            a = np.array(a, dtype=dtype).reshape(-1)
            if len(a) != n:
                raise ValueError(f"label array has {len(a)} entries for {n} points")
            return a

        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "semantic", lab(self.semantic, np.int64))
        object.__setattr__(self, "instance", lab(self.instance, np.int64))
        object.__setattr__(self, "part", lab(self.part, np.int64))
        if self.provenance is not None:
            prov = np.array(self.provenance, dtype=np.int64).reshape(-1, 3)
            if len(prov) != n:
                raise ValueError("provenance must have one row per point")
            object.__setattr__(self, "provenance", prov)
        for a in (self.positions, self.semantic, self.instance, self.part, self.provenance):
            if a is not None:
                a.setflags(write=False)

    def __len__(self) -> int:
        return len(self.positions)

    def validate(self) -> None:
        """Raise ValueError if a label invariant is violated."""
        if np.any((self.part != 0) & (self.semantic != HUMAN)):
            raise ValueError("point with a body part is not labeled human")
        if np.any((self.instance != 0) & (self.semantic != HUMAN)):
            raise ValueError("point with an instance id is not labeled human")
        if np.any((self.part < 0) | (self.part > N_FINAL_PARTS)):
            raise ValueError("part id outside the 15-part taxonomy")
        if np.any((self.semantic != BACKGROUND) & (self.semantic != HUMAN)):
            raise ValueError("semantic id must be 0 (background) or 1 (human)")
        if np.any(self.instance < 0):
            raise ValueError("negative instance id")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("non-finite position")

    def with_labels(self, semantic=None, instance=None, part=None) -> "LabeledPointCloud":
        return LabeledPointCloud(
            self.positions,
            self.semantic if semantic is None else semantic,
            self.instance if instance is None else instance,
            self.part if part is None else part,
            self.provenance)

    def subset(self, mask: np.ndarray) -> "LabeledPointCloud":
        return LabeledPointCloud(
            self.positions[mask], self.semantic[mask], self.instance[mask], self.part[mask],
            None if self.provenance is None else self.provenance[mask])

    def instance_masks(self) -> dict[int, np.ndarray]:
        """Boolean mask per non-zero instance id, ordered by id."""
        return {int(i): self.instance == i for i in np.unique(self.instance) if i != 0}


def concatenate(clouds) -> LabeledPointCloud:
    clouds = list(clouds)
    if not clouds:
        return LabeledPointCloud(np.zeros((0, 3)))
    prov = None
    if all(c.provenance is not None for c in clouds):
        prov = np.concatenate([c.provenance for c in clouds])
    return LabeledPointCloud(
        np.concatenate([c.positions for c in clouds]),
        np.concatenate([c.semantic for c in clouds]),
        np.concatenate([c.instance for c in clouds]),
        np.concatenate([c.part for c in clouds]),
        prov)
