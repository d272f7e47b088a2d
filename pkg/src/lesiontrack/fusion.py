"""Subtraction fusion of aligned exams and thresholded change maps."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from scipy import ndimage

from lesiontrack.ctv import save_volume
from lesiontrack.errors import ParameterError
from lesiontrack.volume import Volume3D

DEFAULT_THRESHOLD = 40

# face neighbours only
_SIX_CONNECTED = ndimage.generate_binary_structure(3, 1)


@dataclass(frozen=True, eq=False)
class DifferenceVolume:
    """Signed voxelwise difference ``source - registered target``."""

    values: np.ndarray
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.int32)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dims(self):
        return tuple(int(d) for d in self.values.shape)

    def __neg__(self):
        return DifferenceVolume(-self.values, self.spacing)


@dataclass(frozen=True)
class Component:
    voxels: int
    bbox_min: Tuple[int, int, int]
    bbox_max: Tuple[int, int, int]  # inclusive


@dataclass(frozen=True, eq=False)
class ChangeMap:
    mask: np.ndarray
    threshold: int
    components: Tuple[Component, ...] = field(default=())
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    @property
    def changed(self) -> int:
        return int(self.mask.sum())

    @property
    def total(self) -> int:
        return int(self.mask.size)

    def as_volume(self) -> Volume3D:
        return Volume3D(self.mask.astype(np.int16), self.spacing)


def difference(a: Volume3D, b_registered: Volume3D) -> DifferenceVolume:
    """``D = A - B`` voxel by voxel on raw intensities."""
    if a.dims != b_registered.dims:
        raise ParameterError(f"dims differ: {a.dims} vs {b_registered.dims}")
    diff = a.voxels.astype(np.int32) - b_registered.voxels.astype(np.int32)
    return DifferenceVolume(diff, a.spacing)


def label_components(mask: np.ndarray) -> Tuple[np.ndarray, List[Component]]:
    """6-connected components, largest first, ties by bounding-box origin.

    Returns the label volume (labels follow the sorted order, from 1) and
    the component summaries.
    """
    labels, n = ndimage.label(mask, structure=_SIX_CONNECTED)
    comps = []
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        count = int((labels[sl] == lab).sum())
        lo = tuple(int(s.start) for s in sl)
        hi = tuple(int(s.stop) - 1 for s in sl)
        comps.append((count, lo, hi, lab))
    comps.sort(key=lambda c: (-c[0], c[1]))
    relabel = np.zeros(n + 1, dtype=np.int32)
    for new, (_, _, _, old) in enumerate(comps, start=1):
        relabel[old] = new
    return relabel[labels], [Component(c, lo, hi) for c, lo, hi, _ in comps]


def threshold(d: DifferenceVolume, t: int = DEFAULT_THRESHOLD, min_component_size: int = 0) -> ChangeMap:
    """Mark voxels with ``|D| > t`` (strict).

    Components smaller than ``min_component_size`` voxels are dropped from
    the mask when that option is positive; by default nothing is filtered.
    """
    if t < 0:
        raise ParameterError(f"threshold must be >= 0, got {t}")
    mask = np.abs(d.values.astype(np.int64)) > t
    labels, comps = label_components(mask)
    if min_component_size > 0:
        keep = [i for i, c in enumerate(comps, start=1) if c.voxels >= min_component_size]
        mask = np.isin(labels, keep)
        comps = [c for c in comps if c.voxels >= min_component_size]
    return ChangeMap(mask.astype(np.uint8), int(t), tuple(comps), d.spacing)


def slice_counts(m: ChangeMap) -> np.ndarray:
    """Changed voxels per z slice."""
    return m.mask.sum(axis=(0, 1)).astype(np.int64)


def dice(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=bool)
    y = np.asarray(y, dtype=bool)
    denom = int(x.sum()) + int(y.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((x & y).sum()) / denom


def change_report(m: ChangeMap, out_dir) -> Dict:
    """Write the mask and summary tables into ``out_dir``.

    Files: ``mask.ctv`` (0/1 voxels); ``slices.tsv`` with columns
    ``z, changed``; ``components.tsv`` with columns ``rank, voxels,
    xmin, ymin, zmin, xmax, ymax, zmax``. Returns the summary as a dict.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mask_path = out / "mask.ctv"
    save_volume(m.as_volume(), mask_path)

    slices_path = out / "slices.tsv"
    rows = ["z\tchanged"] + [f"{z}\t{n}" for z, n in enumerate(slice_counts(m))]
    slices_path.write_text("\n".join(rows) + "\n")

    comps_path = out / "components.tsv"
    rows = ["rank\tvoxels\txmin\tymin\tzmin\txmax\tymax\tzmax"]
    for rank, c in enumerate(m.components, start=1):
        rows.append("\t".join(str(v) for v in (rank, c.voxels, *c.bbox_min, *c.bbox_max)))
    comps_path.write_text("\n".join(rows) + "\n")

    return {
        "threshold": m.threshold,
        "changed": m.changed,
        "total": m.total,
        "component_count": len(m.components),
        "components": [
            {"voxels": c.voxels, "bbox_min": list(c.bbox_min), "bbox_max": list(c.bbox_max)}
            for c in m.components
        ],
        "files": {"mask": str(mask_path), "slices": str(slices_path), "components": str(comps_path)},
    }
