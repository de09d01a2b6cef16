"""Labeled point-cloud container (``.hck``), PLY export and dataset manifests.

Cloud layout, all little-endian::

    magic    4 bytes  b"HCK1"
    flags    uint32   bit 0: provenance present; other bits must be 0
    count    uint64   number of point records
    records  count x (float32 x, y, z; uint8 semantic; int32 instance; uint8 part;
                      [int32 camera, int32 row, int32 col if bit 0])

Records are packed without padding (18 bytes, or 30 with provenance).
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry.cloud import LabeledPointCloud

MAGIC = b"HCK1"
FLAG_PROVENANCE = 0x1
KNOWN_FLAGS = FLAG_PROVENANCE
_HEADER = struct.Struct("<4sIQ")

_BASE_FIELDS = [("pos", "<f4", (3,)), ("semantic", "u1"), ("instance", "<i4"), ("part", "u1")]
RECORD = np.dtype(_BASE_FIELDS)
RECORD_PROV = np.dtype(_BASE_FIELDS + [("prov", "<i4", (3,))])


class CloudFormatError(ValueError):
    pass


class BadMagicError(CloudFormatError):
    pass


class TruncatedFileError(CloudFormatError):
    pass


class FlagMismatchError(CloudFormatError):
    pass


def encode_cloud(cloud: LabeledPointCloud) -> bytes:
    """Serialize; refuses clouds that break the label invariants or do not fit the field widths."""
    cloud.validate()
    i32 = np.iinfo(np.int32)
    if len(cloud) and cloud.instance.max() > i32.max:
        raise ValueError("instance id does not fit in int32")
    has_prov = cloud.provenance is not None
    if has_prov and len(cloud) and (cloud.provenance.min() < i32.min or cloud.provenance.max() > i32.max):
        raise ValueError("provenance does not fit in int32")
    rec = np.zeros(len(cloud), dtype=RECORD_PROV if has_prov else RECORD)
    rec["pos"] = cloud.positions
    rec["semantic"] = cloud.semantic
    rec["instance"] = cloud.instance
    rec["part"] = cloud.part
    if has_prov:
        rec["prov"] = cloud.provenance
    flags = FLAG_PROVENANCE if has_prov else 0
    return _HEADER.pack(MAGIC, flags, len(cloud)) + rec.tobytes()


def decode_cloud(data: bytes, expect_provenance: Optional[bool] = None) -> LabeledPointCloud:
    if len(data) < _HEADER.size:
        if not MAGIC.startswith(data[:4]):
            raise BadMagicError("not an HCK1 cloud")
        raise TruncatedFileError("truncated header")
    magic, flags, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if flags & ~KNOWN_FLAGS:
        raise FlagMismatchError(f"unknown flag bits 0x{flags & ~KNOWN_FLAGS:x}")
    has_prov = bool(flags & FLAG_PROVENANCE)
    if expect_provenance is not None and expect_provenance != has_prov:
        raise FlagMismatchError(f"provenance flag is {has_prov}, expected {expect_provenance}")
    dt = RECORD_PROV if has_prov else RECORD
    body = len(data) - _HEADER.size
    if body < count * dt.itemsize:
        raise TruncatedFileError(f"{body} payload bytes for {count} records of {dt.itemsize}")
    if body > count * dt.itemsize:
        raise FlagMismatchError("payload longer than the header's flags and count describe")
    rec = np.frombuffer(data, dtype=dt, count=count, offset=_HEADER.size)
    return LabeledPointCloud(
        rec["pos"].astype(np.float64), rec["semantic"], rec["instance"], rec["part"],
        rec["prov"] if has_prov else None)


def write_cloud(path, cloud: LabeledPointCloud) -> int:
    """Write ``cloud`` to ``path``; returns the number of bytes written."""
    data = encode_cloud(cloud)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
    return len(data)


def read_cloud(path, expect_provenance: Optional[bool] = None) -> LabeledPointCloud:
    with open(path, "rb") as fh:
        return decode_cloud(fh.read(), expect_provenance)


def export_ply(path, cloud: LabeledPointCloud) -> None:
    """Lossy ASCII PLY for viewers (positions printed to 6 decimals)."""
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(cloud)}\n")
        for name in ("x", "y", "z"):
            fh.write(f"property float {name}\n")
        for name in ("semantic", "instance", "part"):
            fh.write(f"property int {name}\n")
        fh.write("end_header\n")
        for p, s, i, q in zip(cloud.positions, cloud.semantic, cloud.instance, cloud.part):
            fh.write(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {s} {i} {q}\n")


def read_ply_points(path) -> np.ndarray:
    """xyz columns of an ASCII PLY vertex element."""
    with open(path) as fh:
        n = None
        for line in fh:
            if line.startswith("element vertex"):
                n = int(line.split()[2])
            if line.strip() == "end_header":
                break
        if n is None:
            raise ValueError(f"{path}: no vertex element")
        rows = [fh.readline().split()[:3] for _ in range(n)]
    return np.asarray(rows, dtype=np.float64).reshape(-1, 3)


def load_points(path) -> LabeledPointCloud:
    """Read either a ``.hck`` cloud or an ASCII ``.ply`` (positions only)."""
    if str(path).endswith(".ply"):
        return LabeledPointCloud(read_ply_points(path))
    return read_cloud(path)


# --- manifest -------------------------------------------------------------------

MANIFEST_VERSION = 1


@dataclass
class CloudRecord:
    path: str
    points: int
    scene: int
    camera: int

    def to_dict(self) -> dict:
        return {"path": self.path, "points": self.points, "scene": self.scene, "camera": self.camera}


@dataclass
class DatasetManifest:
    seed: int
    configs: dict
    clouds: list[CloudRecord] = field(default_factory=list)
    scenes: list[dict] = field(default_factory=list)
    format_version: int = MANIFEST_VERSION

    def __post_init__(self):
        paths = [c.path for c in self.clouds]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest paths must be unique")

    def to_json(self) -> str:
        doc = {
            "format_version": self.format_version,
            "seed": self.seed,
            "configs": self.configs,
            "clouds": [c.to_dict() for c in self.clouds],
            "scenes": self.scenes,
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        if doc.get("format_version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {doc.get('format_version')}")
        return cls(doc["seed"], doc["configs"], [CloudRecord(**c) for c in doc["clouds"]],
                   doc.get("scenes", []), doc["format_version"])

    def write(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        return cls.from_json(Path(path).read_text())

    def validate(self, root) -> None:
        """Check every listed file exists and holds the recorded point count."""
        for rec in self.clouds:
            p = Path(root) / rec.path
            with open(p, "rb") as fh:
                head = fh.read(_HEADER.size)
            if len(head) < _HEADER.size:
                raise TruncatedFileError(f"{p}: truncated header")
            magic, _, count = _HEADER.unpack(head)
            if magic != MAGIC:
                raise BadMagicError(f"{p}: bad magic")
            if count != rec.points:
                raise ValueError(f"{p}: {count} points, manifest says {rec.points}")
