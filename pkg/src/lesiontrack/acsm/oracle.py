"""Brute-force reference implementation of A-ACSM.

Every patch size at every anchor is compared against every candidate anchor
in the second image, with no early exit and no pruning; the per-anchor
result is the largest size that matched anywhere allowed. This is slow and
only meant for small inputs and for checking the fast kernels.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from lesiontrack.acsm.params import SimilarityParams, SimilarityValue
from lesiontrack.errors import ParameterError
from lesiontrack.volume import Image2D, Volume3D


def _positions(shape, step=1):
    axes = [np.arange(0, n, step) for n in shape]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _lattice(k, steps):
    return list(itertools.product(*[range(0, k, s) for s in steps]))


def k_map_oracle(c1: np.ndarray, c2: np.ndarray, steps, radius, stride, cap):
    """Largest matching patch side for every anchor, by exhaustive search.

    Works for any number of axes; ``steps`` gives the lattice step per axis
    in array-axis order. Returns ``(anchors, k, kmax)``.
    """
    c1 = np.asarray(c1)
    c2 = np.asarray(c2)
    anchors = _positions(c1.shape, stride)
    fit = (np.asarray(c1.shape)[None, :] - anchors).min(axis=1)
    kmax = np.minimum(fit, cap)
    best = np.zeros(len(anchors), dtype=np.int64)
    for k in range(1, int(kmax.max()) + 1):
        pidx = np.nonzero(kmax >= k)[0]
        if any(n < k for n in c2.shape):
            continue
        P = anchors[pidx]
        Q = _positions([n - k + 1 for n in c2.shape])
        match = np.ones((len(P), len(Q)), dtype=bool)
        for off in _lattice(k, steps):
            off = np.asarray(off)
            va = c1[tuple((P + off).T)]
            vb = c2[tuple((Q + off).T)]
            match &= va[:, None] == vb[None, :]
        if radius is not None:
            cheb = np.abs(P[:, None, :] - Q[None, :, :]).max(axis=2)
            match &= cheb <= radius
        hit = match.any(axis=1)
        best[pidx[hit]] = np.maximum(best[pidx[hit]], k)
    return anchors, best, kmax


def _average(best, kmax, dim):
    n = len(best)
    raw = sum(Fraction(int(k) ** dim) for k in best) / n
    norm = sum(Fraction(int(k) ** dim, int(m) ** dim) for k, m in zip(best, kmax)) / n
    return SimilarityValue(float(norm), float(raw), n)


def _cap(params):
    return np.iinfo(np.int64).max if params.max_patch is None else params.max_patch


def acsm_2d_oracle(a: Image2D, b: Image2D, params: SimilarityParams) -> SimilarityValue:
    if a.pixels.size == 0 or b.pixels.size == 0:
        raise ParameterError("images must be non-empty")
    dx, dy, _ = params.intervals
    _, best, kmax = k_map_oracle(
        a.pixels, b.pixels, (dy, dx), params.neighborhood_radius, params.anchor_stride, _cap(params)
    )
    return _average(best, kmax, 2)


def acsm_3d_oracle(c1: Volume3D, c2: Volume3D, params: SimilarityParams) -> SimilarityValue:
    if c1.size == 0 or c2.size == 0:
        raise ParameterError("volumes must be non-empty")
    _, best, kmax = k_map_oracle(
        c1.voxels, c2.voxels, params.intervals, params.neighborhood_radius,
        params.anchor_stride, _cap(params),
    )
    return _average(best, kmax, 3)
