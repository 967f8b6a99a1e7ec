"""GAM1 float raster container.

Layout: 16-byte header ``b"GAM1"`` + ``<u4 height`` + ``<u4 width`` +
``<u4 instance_id`` (0 for a joint map), then row-major ``<f4`` payload.
Probability files reuse the header with the ``instance_id`` field holding the
number of class planes K, followed by K stacked ``height x width`` planes.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"GAM1"
HEADER = struct.Struct("<4sIII")


class MapFileError(ValueError):
    pass


@dataclass(frozen=True)
class MapFileHeader:
    height: int
    width: int
    instance_id: int = 0

    def pack(self) -> bytes:
        return HEADER.pack(MAGIC, self.height, self.width, self.instance_id)

    @classmethod
    def unpack(cls, raw: bytes) -> "MapFileHeader":
        if len(raw) < HEADER.size:
            raise MapFileError("truncated GAM1 header")
        magic, h, w, inst = HEADER.unpack(raw[:HEADER.size])
        if magic != MAGIC:
            raise MapFileError(f"bad magic {magic!r}, expected {MAGIC!r}")
        return cls(h, w, inst)


def encode(values: np.ndarray, instance_id: int = 0) -> bytes:
    v = np.asarray(values)
    planes = v if v.ndim == 3 else v[None]
    if planes.ndim != 3:
        raise MapFileError(f"expected a 2-D map or (K, H, W) planes, got shape {v.shape}")
    _, h, w = planes.shape
    return MapFileHeader(h, w, instance_id).pack() + planes.astype("<f4").tobytes(order="C")


def decode(raw: bytes, planes: int | None = None) -> tuple[np.ndarray, MapFileHeader]:
    """Parse a GAM1 blob.

    With ``planes=None`` a single map is expected; pass ``planes="header"`` to
    read K planes with K taken from the header field.
    """
    hdr = MapFileHeader.unpack(raw)
    k = hdr.instance_id if planes == "header" else (planes or 1)
    expected = k * hdr.height * hdr.width * 4
    payload = raw[HEADER.size:]
    if len(payload) != expected:
        raise MapFileError(f"payload is {len(payload)} bytes, expected {expected}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(k, hdr.height, hdr.width)
    return (arr if planes is not None else arr[0]).astype(np.float32), hdr


def write_map(path, values: np.ndarray, instance_id: int = 0) -> Path:
    """Write atomically: a temp file is renamed into place on success."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(encode(values, instance_id))
    os.replace(tmp, path)
    return path


def read_map(path) -> tuple[np.ndarray, int]:
    """Return ``(float32 map, instance_id)``."""
    arr, hdr = decode(Path(path).read_bytes())
    return arr, hdr.instance_id


def write_prob(path, probs: np.ndarray) -> Path:
    probs = np.asarray(probs)
    return write_map(path, probs, instance_id=probs.shape[0])


def read_prob(path) -> np.ndarray:
    """Return the (K, H, W) float32 probability planes."""
    arr, _ = decode(Path(path).read_bytes(), planes="header")
    return arr
