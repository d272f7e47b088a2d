"""Rigid transforms of voxel coordinates and inverse-warp resampling.

Coordinates are voxel indices ``(x, y, z)``. A :class:`LinearMap` sends a
point ``u`` to ``W @ u + offset``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from numba import njit

from lesiontrack.errors import ParameterError
from lesiontrack.volume import INT16_MAX, INT16_MIN, Volume3D

AIR = -1024
_EDGE_TOL = 1e-6


@dataclass(frozen=True)
class RigidParams:
    """Euler angles (radians), translation (voxels) and uniform scale."""

    rotations: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    translations: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    scale: float = 1.0

    def __post_init__(self):
        rot = tuple(float(v) for v in self.rotations)
        tra = tuple(float(v) for v in self.translations)
        if len(rot) != 3 or len(tra) != 3:
            raise ParameterError("rotations and translations need three components each")
        if not all(np.isfinite(rot + tra)):
            raise ParameterError("rigid parameters must be finite")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ParameterError(f"scale must be > 0, got {self.scale}")
        object.__setattr__(self, "rotations", rot)
        object.__setattr__(self, "translations", tra)
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def from_vector(cls, vec: Sequence[float]) -> "RigidParams":
        """Inverse of :meth:`as_vector`."""
        rx, ry, rz, tx, ty, tz, s = vec
        return cls((rx, ry, rz), (tx, ty, tz), s)

    def as_vector(self) -> Tuple[float, ...]:
        """``(rx, ry, rz, tx, ty, tz, scale)``."""
        return self.rotations + self.translations + (self.scale,)

    def norm(self) -> float:
        """L2 norm of the displacement from identity (scale enters as ``s - 1``)."""
        return float(np.linalg.norm(self.rotations + self.translations + (self.scale - 1.0,)))


@dataclass(frozen=True, eq=False)
class LinearMap:
    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64).reshape(3, 3)
        t = np.array(self.offset, dtype=np.float64).reshape(3)
        m.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", t)

    @classmethod
    def identity(cls) -> "LinearMap":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        """Map points given as ``(..., 3)``."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix.T + self.offset

    def compose(self, other: "LinearMap") -> "LinearMap":
        """``self ∘ other``: apply ``other`` first."""
        return LinearMap(self.matrix @ other.matrix, self.matrix @ other.offset + self.offset)

    def is_invertible(self) -> bool:
        det = np.linalg.det(self.matrix)
        return bool(np.isfinite(det) and abs(det) > 1e-12)

    def inverse(self) -> "LinearMap":
        if not self.is_invertible():
            raise ParameterError("linear map is not invertible")
        inv = np.linalg.inv(self.matrix)
        return LinearMap(inv, -inv @ self.offset)

    def homogeneous(self) -> np.ndarray:
        h = np.eye(4)
        h[:3, :3] = self.matrix
        h[:3, 3] = self.offset
        return h

    def allclose(self, other: "LinearMap", atol: float = 1e-9) -> bool:
        return bool(np.allclose(self.matrix, other.matrix, atol=atol, rtol=0)
                    and np.allclose(self.offset, other.offset, atol=atol, rtol=0))


def rotation_matrix(rx: float, ry: float, rz: float) -> np.ndarray:
    """``Rz @ Ry @ Rx`` (x rotation applied first)."""
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


def volume_center(dims) -> np.ndarray:
    return (np.asarray(dims, dtype=np.float64) - 1.0) / 2.0


def build_map(p: RigidParams, center=(0.0, 0.0, 0.0)) -> LinearMap:
    """Map ``u -> c + s * R @ (u + t - c)``.

    The translation is applied first, then rotation (``Rz Ry Rx``) and scale
    about ``center``.
    """
    c = np.asarray(center, dtype=np.float64)
    w = p.scale * rotation_matrix(*p.rotations)
    t = np.asarray(p.translations)
    return LinearMap(w, c + w @ (t - c))


@njit(cache=True, nogil=True)
def _warp_nearest(data, m, t, background):
    nx, ny, nz = data.shape
    out = np.empty((nx, ny, nz), dtype=np.int64)
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                u = m[0, 0] * x + m[0, 1] * y + m[0, 2] * z + t[0]
                v = m[1, 0] * x + m[1, 1] * y + m[1, 2] * z + t[1]
                w = m[2, 0] * x + m[2, 1] * y + m[2, 2] * z + t[2]
                i = int(np.floor(u + 0.5))
                j = int(np.floor(v + 0.5))
                k = int(np.floor(w + 0.5))
                if 0 <= i < nx and 0 <= j < ny and 0 <= k < nz:
                    out[x, y, z] = data[i, j, k]
                else:
                    out[x, y, z] = background
    return out


def _trilinear(data, coords, background):
    shape = np.asarray(data.shape)
    inside = np.all((coords >= -_EDGE_TOL) & (coords <= shape - 1 + _EDGE_TOL), axis=1)
    out = np.full(len(coords), background, dtype=np.int64)
    c = np.clip(coords[inside], 0, shape - 1)
    i0 = np.minimum(np.floor(c).astype(np.int64), np.maximum(shape - 2, 0))
    frac = c - i0
    i1 = np.minimum(i0 + 1, shape - 1)
    acc = np.zeros(len(c))
    vals = data.astype(np.float64)
    for cx in (0, 1):
        wx = frac[:, 0] if cx else 1.0 - frac[:, 0]
        ix = i1[:, 0] if cx else i0[:, 0]
        for cy in (0, 1):
            wy = frac[:, 1] if cy else 1.0 - frac[:, 1]
            iy = i1[:, 1] if cy else i0[:, 1]
            for cz in (0, 1):
                wz = frac[:, 2] if cz else 1.0 - frac[:, 2]
                iz = i1[:, 2] if cz else i0[:, 2]
                acc += wx * wy * wz * vals[ix, iy, iz]
    out[inside] = np.floor(acc + 0.5).astype(np.int64)
    return out


def resample(b: Volume3D, transform: LinearMap, interpolation: str = "nearest",
             background: Optional[int] = AIR) -> Volume3D:
    """Warp ``b`` by ``transform`` onto its own grid.

    Output voxel ``p`` takes the value of ``b`` at ``transform^-1(p)``; points
    that fall outside ``b`` get ``background``. Trilinear values are rounded
    to the nearest integer (halves round up). Quantization metadata is kept
    for nearest interpolation only.
    """
    if interpolation not in ("nearest", "trilinear"):
        raise ParameterError(f"unknown interpolation {interpolation!r}")
    if not transform.is_invertible():
        raise ParameterError("cannot resample under a non-invertible map")
    inv = transform.inverse()
    data = b.voxels
    nx, ny, nz = b.dims
    if interpolation == "nearest":
        out = _warp_nearest(np.ascontiguousarray(data), inv.matrix, inv.offset, int(background))
        return Volume3D(np.clip(out, INT16_MIN, INT16_MAX), b.spacing, b.quantization)
    out = np.empty(b.dims, dtype=np.int64)
    xs, ys = np.meshgrid(np.arange(nx, dtype=np.float64), np.arange(ny, dtype=np.float64), indexing="ij")
    plane = np.stack([xs.ravel(), ys.ravel(), np.zeros(nx * ny)], axis=1)
    for z in range(nz):
        plane[:, 2] = z
        src = inv.apply(plane)
        out[:, :, z] = _trilinear(data, src, background).reshape(nx, ny)
    return Volume3D(np.clip(out, INT16_MIN, INT16_MAX), b.spacing)
