from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from lesiontrack.errors import ParameterError


@dataclass(frozen=True)
class SimilarityParams:
    """Sampling and search parameters of the A-ACSM measure.

    Parameters
    ----------
    intervals : (dx, dy, dz)
        Lattice steps along x (columns), y (rows) and z. Equality is checked
        only at patch offsets that are multiples of these. ``dz`` is ignored
        in 2D.
    neighborhood_radius : int or None
        Matches for an anchor ``p`` are sought at anchors ``q`` with
        ``max|q - p| <= r`` in the second image, i.e. a cube of side
        ``2r + 1``. ``None`` searches the whole second image.
    anchor_stride : int
        Anchors are the positions whose coordinates are all multiples of
        the stride.
    max_patch : int or None
        Cap on the patch side; also caps the per-anchor maximum used for
        normalization.
    """

    intervals: Tuple[int, int, int] = (2, 2, 2)
    neighborhood_radius: Optional[int] = 1
    anchor_stride: int = 1
    max_patch: Optional[int] = None

    def __post_init__(self):
        iv = tuple(self.intervals)
        if len(iv) == 2:
            iv = (iv[0], iv[1], 1)
        if len(iv) != 3 or any(int(d) != d or d < 1 for d in iv):
            raise ParameterError(f"intervals must be positive integers, got {self.intervals}")
        object.__setattr__(self, "intervals", tuple(int(d) for d in iv))
        r = self.neighborhood_radius
        if r is not None and (int(r) != r or r < 0):
            raise ParameterError(f"neighborhood_radius must be an integer >= 0 or None, got {r}")
        if int(self.anchor_stride) != self.anchor_stride or self.anchor_stride < 1:
            raise ParameterError(f"anchor_stride must be an integer >= 1, got {self.anchor_stride}")
        if self.max_patch is not None and (int(self.max_patch) != self.max_patch or self.max_patch < 1):
            raise ParameterError(f"max_patch must be an integer >= 1, got {self.max_patch}")

    def radius_or(self, unbounded: int) -> int:
        return unbounded if self.neighborhood_radius is None else int(self.neighborhood_radius)

    def patch_cap(self) -> int:
        return np.iinfo(np.int32).max if self.max_patch is None else int(self.max_patch)


@dataclass(frozen=True)
class SimilarityValue:
    """Result of one A-ACSM evaluation.

    ``normalized`` is the mean over anchors of ``k**d / kmax**d`` and lies in
    ``[0, 1]``; ``raw_average`` is the mean of ``k**d`` (area or volume).
    """

    normalized: float
    raw_average: float
    anchors_evaluated: int

    def __post_init__(self):
        if not 0.0 <= self.normalized <= 1.0:
            raise ParameterError(f"normalized similarity out of range: {self.normalized}")
        if self.anchors_evaluated < 1:
            raise ParameterError("at least one anchor must be evaluated")


def anchor_axis(n: int, stride: int) -> np.ndarray:
    return np.arange(0, n, stride)


def reduce_exact(k_map: np.ndarray, kmax_map: np.ndarray, dim: int) -> SimilarityValue:
    """Average per-anchor results with exact rational arithmetic.

    Anchors are grouped by their maximum size so that only one division per
    distinct maximum is needed; the final float is the correctly rounded
    value of the exact mean, independent of summation order.
    """
    k = k_map.ravel().astype(np.int64)
    kmax = kmax_map.ravel().astype(np.int64)
    n = int(k.size)
    powers = k**dim
    raw = Fraction(int(powers.sum()), n)
    norm = Fraction(0)
    for m in np.unique(kmax):
        norm += Fraction(int(powers[kmax == m].sum()), int(m) ** dim)
    norm /= n
    return SimilarityValue(float(norm), float(raw), n)
