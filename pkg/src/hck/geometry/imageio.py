"""Raw image dumps: 8-byte header (width, height as uint32 LE) then row-major payload.

Depth payloads are float64 with 0 marking invalid pixels; index payloads are int32.
"""

from __future__ import annotations

import struct

import numpy as np

from .camera import DepthImage, IndexImage

_HEADER = struct.Struct("<II")


def _write(path, arr: np.ndarray) -> None:
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(w, h))
        fh.write(np.ascontiguousarray(arr).tobytes())


def _read(path, dtype) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        w, h = _HEADER.unpack(head)
        payload = fh.read()
    dt = np.dtype(dtype)
    if len(payload) != w * h * dt.itemsize:
        raise ValueError(f"{path}: payload has {len(payload)} bytes, expected {w * h * dt.itemsize}")
    return np.frombuffer(payload, dtype=dt).reshape(h, w).copy()


def write_depth(path, img: DepthImage) -> None:
    _write(path, np.where(img.valid, img.depth, 0.0).astype("<f8"))


def read_depth(path) -> DepthImage:
    return DepthImage.from_array(_read(path, "<f8"))


def write_index(path, img: IndexImage) -> None:
    if img.value.size and (img.value.min() < np.iinfo(np.int32).min or img.value.max() > np.iinfo(np.int32).max):
        raise ValueError("index values exceed int32")
    _write(path, img.value.astype("<i4"))


def read_index(path) -> IndexImage:
    return IndexImage(_read(path, "<i4"))
