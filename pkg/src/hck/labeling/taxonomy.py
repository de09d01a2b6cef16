"""Body-part vocabularies and the merge onto 15 final parts."""

from __future__ import annotations

import json
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

SMPLX, SMPL = "SMPL-X", "SMPL"

# final ids follow the figure legend order: Head = 1 ... LeftFoot = 15
FINAL_PARTS = (
    "head", "rightArm", "leftArm", "rightForeArm", "leftForeArm", "rightHand", "leftHand",
    "torso", "hips", "rightUpLeg", "leftUpLeg", "rightLeg", "leftLeg", "rightFoot", "leftFoot",
)

SMPLX_PARTS = (
    "rightHand", "rightUpLeg", "leftArm", "head", "leftEye", "rightEye", "leftLeg",
    "leftToeBase", "leftFoot", "spine1", "spine2", "leftShoulder", "rightShoulder",
    "rightFoot", "rightArm", "leftHandIndex1", "rightLeg", "rightHandIndex1",
    "leftForeArm", "rightForeArm", "neck", "rightToeBase", "spine", "leftUpLeg",
    "leftHand", "hips",
)

MERGE_GROUPS = {
    "head": ("leftEye", "rightEye", "neck", "head"),
    "leftFoot": ("leftToeBase", "leftFoot"),
    "rightFoot": ("rightToeBase", "rightFoot"),
    "leftHand": ("leftHandIndex1", "leftHand"),
    "rightHand": ("rightHandIndex1", "rightHand"),
    "torso": ("spine", "spine1", "spine2", "leftShoulder", "rightShoulder"),
}


@dataclass(frozen=True)
class BodyPartTaxonomy:
    family: str
    source_parts: tuple[str, ...]
    merge_map: Mapping[str, str]
    final_parts: tuple[str, ...] = FINAL_PARTS

    @property
    def source_ids(self) -> dict[str, int]:
        """Source part name -> id (0-based, in ``source_parts`` order)."""
        return {name: i for i, name in enumerate(self.source_parts)}

    @property
    def final_ids(self) -> dict[str, int]:
        """Final part name -> id in 1..15."""
        return {name: i + 1 for i, name in enumerate(self.final_parts)}

    def merge(self, source: str) -> str:
        return self.merge_map[source]

    def lut(self) -> np.ndarray:
        """Array mapping source id -> final id."""
        fid = self.final_ids
        return np.array([fid[self.merge_map[s]] for s in self.source_parts], dtype=np.int64)

    def merge_ids(self, source_ids: np.ndarray) -> np.ndarray:
        source_ids = np.asarray(source_ids, dtype=np.int64)
        if source_ids.size and (source_ids.min() < 0 or source_ids.max() >= len(self.source_parts)):
            raise ValueError("source part id outside the taxonomy")
        return self.lut()[source_ids]

    def to_json(self) -> str:
        return json.dumps({
            "family": self.family,
            "source": list(self.source_parts),
            "merge": [[s, self.merge_map[s]] for s in self.source_parts],
            "final": list(self.final_parts),
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "BodyPartTaxonomy":
        doc = json.loads(text)
        tax = cls(doc["family"], tuple(doc["source"]), MappingProxyType(dict(doc["merge"])),
                  tuple(doc["final"]))
        _check(tax)
        return tax


def _check(tax: BodyPartTaxonomy) -> None:
    expected = {SMPLX: 26, SMPL: 24}.get(tax.family)
    if expected is None:
        raise ValueError(f"unknown body model family {tax.family!r}")
    if len(tax.source_parts) != expected or len(set(tax.source_parts)) != expected:
        raise ValueError(f"{tax.family} needs {expected} distinct source parts")
    if set(tax.merge_map) != set(tax.source_parts):
        raise ValueError("merge map must cover exactly the source parts")
    if set(tax.merge_map.values()) != set(FINAL_PARTS) or tuple(tax.final_parts) != FINAL_PARTS:
        raise ValueError("merge map must land on the 15 final parts")


def build_taxonomy(family: str = SMPLX) -> BodyPartTaxonomy:
    if family == SMPLX:
        source = SMPLX_PARTS
    elif family == SMPL:
        # SMPL has no separate eye parts
        source = tuple(p for p in SMPLX_PARTS if p not in ("leftEye", "rightEye"))
    else:
        raise ValueError(f"unknown body model family {family!r}")
    merge = {p: p for p in source}
    for final, group in MERGE_GROUPS.items():
        for p in group:
            if p in merge:
                merge[p] = final
    tax = BodyPartTaxonomy(family, source, MappingProxyType(merge))
    _check(tax)
    return tax
