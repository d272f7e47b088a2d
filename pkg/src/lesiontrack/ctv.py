"""CTV volume files.

Layout, all little-endian, no padding::

    offset  size   field
    0       4      magic b"CTV1"
    4       12     nx, ny, nz   (uint32)
    16      24     sx, sy, sz   (float64, mm per voxel)
    40      2*N    voxels       (int16, x-fastest, N = nx*ny*nz)
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import Union

import numpy as np

from lesiontrack.errors import (
    BadMagicError,
    FormatError,
    ParameterError,
    PayloadSizeError,
    TruncatedPayloadError,
)
from lesiontrack.volume import Volume3D

MAGIC = b"CTV1"
_HEADER = struct.Struct("<4s3I3d")
HEADER_SIZE = _HEADER.size

PathLike = Union[str, os.PathLike]


def encode_volume(v: Volume3D) -> bytes:
    header = _HEADER.pack(MAGIC, *v.dims, *v.spacing)
    return header + v.flat().astype("<i2").tobytes()


def decode_volume(data: bytes) -> Volume3D:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < HEADER_SIZE:
        raise TruncatedPayloadError("file ends inside the header")
    _, nx, ny, nz, sx, sy, sz = _HEADER.unpack_from(data)
    if min(nx, ny, nz) < 1:
        raise FormatError(f"invalid dims ({nx}, {ny}, {nz})")
    n = nx * ny * nz
    payload = len(data) - HEADER_SIZE
    if payload < 2 * n:
        raise TruncatedPayloadError(f"payload holds {payload // 2} voxels, header declares {n}")
    if payload > 2 * n:
        raise PayloadSizeError(f"payload holds {payload} bytes, header declares {2 * n}")
    try:
        spacing = (sx, sy, sz)
        flat = np.frombuffer(data, dtype="<i2", count=n, offset=HEADER_SIZE)
        return Volume3D.from_flat(flat, (nx, ny, nz), spacing)
    except ParameterError as exc:
        raise FormatError(str(exc)) from exc


def save_volume(v: Volume3D, path: PathLike) -> None:
    Path(path).write_bytes(encode_volume(v))


def load_volume(path: PathLike) -> Volume3D:
    return decode_volume(Path(path).read_bytes())


def import_raw(path: PathLike, dims, spacing=(1.0, 1.0, 1.0)) -> Volume3D:
    """Read a headerless payload of little-endian int16 voxels, x-fastest."""
    data = Path(path).read_bytes()
    n = int(np.prod([int(d) for d in dims]))
    if len(data) < 2 * n:
        raise TruncatedPayloadError(f"raw payload holds {len(data) // 2} voxels, need {n}")
    if len(data) > 2 * n:
        raise PayloadSizeError(f"raw payload holds {len(data)} bytes, need {2 * n}")
    return Volume3D.from_flat(np.frombuffer(data, dtype="<i2"), dims, spacing)
