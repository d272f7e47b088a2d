"""Approximate average common submatrix (A-ACSM) similarity in 2D and 3D.

For every anchor position of the first image the largest square (cube)
starting there is sought that also occurs in the second image, where two
patches count as equal when they agree on the sampling lattice only: the
offsets that are multiples of the per-axis intervals. The similarity is the
mean over anchors of that patch's area (volume), normalized per anchor by
the largest patch that fits, so identical inputs score exactly 1.
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from lesiontrack.acsm import kernels
from lesiontrack.acsm.params import SimilarityParams, SimilarityValue, reduce_exact
from lesiontrack.errors import ParameterError
from lesiontrack.volume import Image2D, Volume3D


def _as_kernel_array(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(arr, dtype=np.int64)


def _check_inside(pos, shape, what):
    if len(pos) != len(shape) or not all(0 <= int(p) < n for p, n in zip(pos, shape)):
        raise ParameterError(f"{what} {tuple(pos)} lies outside shape {tuple(shape)}")


def _patch_fits(pos, k, shape):
    return all(int(p) >= 0 and int(p) + k <= n for p, n in zip(pos, shape))


def patch_match_2d(a: Image2D, pa, b: Image2D, pb, size: int, dx: int, dy: int) -> bool:
    """Lattice equality of the ``size``-square at ``pa`` in ``a`` and ``pb`` in ``b``.

    Positions are ``(row, col)``. Rows are sampled every ``dy``, columns
    every ``dx``, starting at offset ``(0, 0)``.
    """
    if size < 1 or dx < 1 or dy < 1:
        raise ParameterError("size and intervals must be >= 1")
    if not (_patch_fits(pa, size, a.shape) and _patch_fits(pb, size, b.shape)):
        raise ParameterError(f"{size}x{size} square does not fit at {tuple(pa)} / {tuple(pb)}")
    (ra, ca), (rb, cb) = pa, pb
    pa_view = a.pixels[ra:ra + size:dy, ca:ca + size:dx]
    pb_view = b.pixels[rb:rb + size:dy, cb:cb + size:dx]
    return bool(np.array_equal(pa_view, pb_view))


def patch_match_3d(c1: Volume3D, p, c2: Volume3D, q, size: int, intervals: Sequence[int]) -> bool:
    """Lattice equality of the ``size``-cubes at ``p`` in ``c1`` and ``q`` in ``c2``."""
    dx, dy, dz = intervals
    if size < 1 or min(intervals) < 1:
        raise ParameterError("size and intervals must be >= 1")
    if not (_patch_fits(p, size, c1.dims) and _patch_fits(q, size, c2.dims)):
        raise ParameterError(f"{size}-cube does not fit at {tuple(p)} / {tuple(q)}")
    (px, py, pz), (qx, qy, qz) = p, q
    va = c1.voxels[px:px + size:dx, py:py + size:dy, pz:pz + size:dz]
    vb = c2.voxels[qx:qx + size:dx, qy:qy + size:dy, qz:qz + size:dz]
    return bool(np.array_equal(va, vb))


def largest_match_2d(a: Image2D, pa, b: Image2D, params: SimilarityParams,
                     return_anchor: bool = False):
    """Side of the largest square at ``pa`` in ``a`` that matches inside ``b``.

    With ``return_anchor=True`` returns ``(k, (row, col))`` where the anchor
    is the first match in row-major scan order, or ``None`` when ``k == 0``.
    """
    _check_inside(pa, a.shape, "anchor")
    pr, pc = (int(v) for v in pa)
    dx, dy, _ = params.intervals
    kmax = min(a.shape[0] - pr, a.shape[1] - pc, params.patch_cap())
    r = params.radius_or(max(b.shape) + max(a.shape))
    k, qr, qc = kernels.anchor_2d(
        _as_kernel_array(a.pixels), _as_kernel_array(b.pixels), pr, pc, kmax, dy, dx, r
    )
    if return_anchor:
        return int(k), ((int(qr), int(qc)) if k else None)
    return int(k)


def largest_match_3d(c1: Volume3D, p, c2: Volume3D, params: SimilarityParams,
                     return_anchor: bool = False):
    """Side of the largest cube at ``p`` in ``c1`` matching near ``p`` in ``c2``.

    Candidates ``q`` satisfy ``max|q - p| <= r`` and the cube must fit in
    ``c2``. With ``return_anchor=True`` returns ``(k, q)``; ``q`` is the first
    match in (z, y, x) scan order, or ``None`` when ``k == 0``.
    """
    _check_inside(p, c1.dims, "anchor")
    px, py, pz = (int(v) for v in p)
    dx, dy, dz = params.intervals
    kmax = min(c1.dims[0] - px, c1.dims[1] - py, c1.dims[2] - pz, params.patch_cap())
    r = params.radius_or(max(c1.dims) + max(c2.dims))
    k, qx, qy, qz = kernels.anchor_3d(
        _as_kernel_array(c1.voxels), _as_kernel_array(c2.voxels), px, py, pz, kmax, dx, dy, dz, r
    )
    if return_anchor:
        return int(k), ((int(qx), int(qy), int(qz)) if k else None)
    return int(k)


def k_map_2d(a: Image2D, b: Image2D, params: SimilarityParams) -> Tuple[np.ndarray, np.ndarray]:
    """Per-anchor largest match and largest fitting side, on the stride grid."""
    dx, dy, _ = params.intervals
    r = params.radius_or(max(b.shape) + max(a.shape))
    return kernels.k_map_2d(
        _as_kernel_array(a.pixels), _as_kernel_array(b.pixels),
        params.anchor_stride, params.patch_cap(), dy, dx, r,
    )


def k_map_3d(c1: Volume3D, c2: Volume3D, params: SimilarityParams) -> Tuple[np.ndarray, np.ndarray]:
    dx, dy, dz = params.intervals
    r = params.radius_or(max(c1.dims) + max(c2.dims))
    # int16 keeps the working set of 3D volumes small; both sides share a dtype.
    return kernels.k_map_3d(
        np.ascontiguousarray(c1.voxels), np.ascontiguousarray(c2.voxels),
        params.anchor_stride, params.patch_cap(), dx, dy, dz, r,
    )


def acsm_2d(a: Image2D, b: Image2D, params: SimilarityParams) -> SimilarityValue:
    """Baseline 2D A-ACSM of ``a`` against ``b`` (not symmetric)."""
    if not isinstance(a, Image2D) or not isinstance(b, Image2D):
        raise ParameterError("acsm_2d expects two Image2D")
    kmap, kmax = k_map_2d(a, b, params)
    return reduce_exact(kmap, kmax, 2)


def acsm_3d(c1: Volume3D, c2: Volume3D, params: SimilarityParams) -> SimilarityValue:
    """3D A-ACSM of ``c1`` against ``c2`` with a restricted search window.

    Both volumes should hold quantized levels from the same
    :class:`~lesiontrack.volume.QuantizationSpec`; dims may differ.
    """
    if not isinstance(c1, Volume3D) or not isinstance(c2, Volume3D):
        raise ParameterError("acsm_3d expects two Volume3D")
    kmap, kmax = k_map_3d(c1, c2, params)
    return reduce_exact(kmap, kmax, 3)
