from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry.cloud import HUMAN


@dataclass(frozen=True, eq=False)
class InstancePrediction:
    """Per-point membership (binary or soft in [0, 1]) with a class and a confidence.

    ``class_probs`` optionally holds a distribution over part classes, indexed by
    final part id - 1.
    """

    mask: np.ndarray
    label: int = HUMAN
    confidence: float = 1.0
    class_probs: Optional[np.ndarray] = None

    def __post_init__(self):
        m = np.array(self.mask, dtype=np.float64).reshape(-1)
        if np.any((m < 0) | (m > 1)) or not np.all(np.isfinite(m)):
            raise ValueError("mask values must lie in [0, 1]")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)
        if self.class_probs is not None:
            p = np.array(self.class_probs, dtype=np.float64).reshape(-1)
            p.setflags(write=False)
            object.__setattr__(self, "class_probs", p)

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.mask == 0) | (self.mask == 1)))

    def binary(self, threshold: float = 0.5) -> np.ndarray:
        return self.mask >= threshold

    def to_dict(self, sparse: bool = True) -> dict:
        d = {"label": int(self.label), "confidence": float(self.confidence)}
        if sparse and self.is_binary:
            d["n_points"] = len(self.mask)
            d["indices"] = np.nonzero(self.mask)[0].tolist()
        else:
            d["mask"] = self.mask.tolist()
        if self.class_probs is not None:
            d["class_probs"] = self.class_probs.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "InstancePrediction":
        if "indices" in d:
            m = np.zeros(int(d["n_points"]))
            m[np.asarray(d["indices"], dtype=np.int64)] = 1.0
        else:
            m = np.asarray(d["mask"], dtype=np.float64)
        return cls(m, int(d.get("label", HUMAN)), float(d.get("confidence", 1.0)), d.get("class_probs"))


def predictions_to_json(preds: Sequence[InstancePrediction]) -> str:
    return json.dumps([p.to_dict() for p in preds])


def predictions_from_json(text: str) -> list[InstancePrediction]:
    return [InstancePrediction.from_dict(d) for d in json.loads(text)]


def masks_from_labels(labels: np.ndarray) -> list[np.ndarray]:
    """Boolean mask per non-zero id, ordered by id."""
    labels = np.asarray(labels)
    return [labels == i for i in np.unique(labels) if i != 0]
