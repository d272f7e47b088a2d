"""Volume and image containers, intensity quantization and synthetic phantoms.

Volumes hold signed 16-bit intensities in a numpy array indexed ``[x, y, z]``.
The canonical flat layout (used by the CTV file format) is x-fastest, which is
Fortran order for that array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from lesiontrack.errors import ParameterError

INT16_MIN = -32768
INT16_MAX = 32767

Dims3 = Tuple[int, int, int]
Spacing3 = Tuple[float, float, float]


def _check_int16(values: np.ndarray) -> None:
    if values.size and (values.min() < INT16_MIN or values.max() > INT16_MAX):
        raise ParameterError("intensities must fit in a signed 16-bit integer")


@dataclass(frozen=True)
class QuantizationSpec:
    """Binning of raw intensities into ``levels`` discrete levels.

    Intensities are clamped to ``[min_intensity, max_intensity]`` before
    binning; the bin width is ``(max - min) / levels``.
    """

    levels: int = 16
    min_intensity: int = -1024
    max_intensity: int = 3071

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 2:
            raise ParameterError(f"levels must be an integer >= 2, got {self.levels}")
        if not self.min_intensity < self.max_intensity:
            raise ParameterError("min_intensity must be smaller than max_intensity")

    def level_of(self, value: float) -> int:
        """Level of a single intensity."""
        return int(quantize_array(np.array([value]), self)[0])


@dataclass(frozen=True, eq=False)
class Volume3D:
    """Immutable 3D grid of integer intensities.

    Parameters
    ----------
    voxels : array_like, shape (nx, ny, nz)
        Intensities indexed ``[x, y, z]``.
    spacing : tuple of float
        Millimetres per voxel along x, y, z.
    quantization : QuantizationSpec, optional
        Set when the voxels are quantized levels rather than raw intensities.
        Not stored in CTV files and ignored by equality.
    """

    voxels: np.ndarray
    spacing: Spacing3 = (1.0, 1.0, 1.0)
    quantization: Optional[QuantizationSpec] = field(default=None)

    def __post_init__(self):
        arr = np.asarray(self.voxels)
        if arr.ndim != 3:
            raise ParameterError(f"volume must be 3-dimensional, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ParameterError(f"all dims must be >= 1, got {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.array_equal(arr, np.round(arr)):
                raise ParameterError("voxel intensities must be integers")
        _check_int16(arr)
        arr = np.array(arr, dtype=np.int16)
        arr.setflags(write=False)
        object.__setattr__(self, "voxels", arr)
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or not all(np.isfinite(s) and s > 0 for s in spacing):
            raise ParameterError(f"spacing must be three positive reals, got {self.spacing}")
        object.__setattr__(self, "spacing", spacing)

    @classmethod
    def from_flat(cls, flat: Sequence[int], dims: Dims3, spacing: Spacing3 = (1.0, 1.0, 1.0)):
        """Build a volume from an x-fastest flat sequence."""
        flat = np.asarray(flat)
        nx, ny, nz = (int(d) for d in dims)
        if flat.size != nx * ny * nz:
            raise ParameterError(f"expected {nx * ny * nz} voxels for dims {dims}, got {flat.size}")
        return cls(flat.reshape((nx, ny, nz), order="F"), spacing)

    @property
    def dims(self) -> Dims3:
        return tuple(int(d) for d in self.voxels.shape)

    @property
    def size(self) -> int:
        return int(self.voxels.size)

    def flat(self) -> np.ndarray:
        """Voxels in x-fastest order."""
        return self.voxels.ravel(order="F")

    def with_voxels(self, voxels: np.ndarray, quantization: Optional[QuantizationSpec] = None) -> "Volume3D":
        return Volume3D(voxels, self.spacing, quantization)

    def __eq__(self, other):
        if not isinstance(other, Volume3D):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and bool(np.array_equal(self.voxels, other.voxels))
        )

    def __hash__(self):
        return hash((self.dims, self.spacing, self.voxels.tobytes()))

    def __repr__(self):
        q = "" if self.quantization is None else f", levels={self.quantization.levels}"
        return f"Volume3D(dims={self.dims}, spacing={self.spacing}{q})"


@dataclass(frozen=True, eq=False)
class Image2D:
    """Immutable 2D image indexed ``[row, col]`` (row-major).

    ``dims`` is ``(nx, ny)``: columns then rows.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise ParameterError(f"image must be 2-dimensional, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ParameterError("image must be non-empty")
        arr = np.array(arr, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def dims(self) -> Tuple[int, int]:
        ny, nx = self.pixels.shape
        return int(nx), int(ny)

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(int(d) for d in self.pixels.shape)

    def __eq__(self, other):
        if not isinstance(other, Image2D):
            return NotImplemented
        return bool(np.array_equal(self.pixels, other.pixels))

    def __hash__(self):
        return hash((self.shape, self.pixels.tobytes()))


def quantize_array(values: np.ndarray, q: QuantizationSpec) -> np.ndarray:
    """Bin ``values`` into levels ``0..L-1``.

    Integer input is binned with exact integer arithmetic; float input
    (e.g. mean-pooled levels) is floored.
    """
    values = np.asarray(values)
    lo, hi, levels = q.min_intensity, q.max_intensity, q.levels
    if np.issubdtype(values.dtype, np.integer):
        clamped = np.clip(values.astype(np.int64), lo, hi)
        out = (levels * (clamped - lo)) // (hi - lo)
    else:
        clamped = np.clip(values.astype(np.float64), lo, hi)
        out = np.floor(levels * (clamped - lo) / (hi - lo)).astype(np.int64)
    return np.minimum(out, levels - 1)


def quantize(v: Volume3D, q: QuantizationSpec) -> Volume3D:
    """Replace every intensity by its level; dims and spacing are kept."""
    if not isinstance(q, QuantizationSpec):
        raise ParameterError("quantize expects a QuantizationSpec")
    return Volume3D(quantize_array(v.voxels, q), v.spacing, q)


@dataclass(frozen=True)
class Lesion:
    center: Tuple[float, float, float]
    radius: float
    intensity: int


@dataclass(frozen=True)
class PhantomSpec:
    dims: Dims3
    background: int = 0
    lesions: Tuple[Lesion, ...] = ()
    noise: int = 0
    seed: int = 0
    spacing: Spacing3 = (1.0, 1.0, 1.0)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ParameterError(f"phantom dims must be three integers >= 1, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        lesions = tuple(
            les if isinstance(les, Lesion) else Lesion(tuple(les[0]), les[1], les[2])
            for les in self.lesions
        )
        object.__setattr__(self, "lesions", lesions)
        for les in lesions:
            if len(les.center) != 3 or not all(0 <= c <= n - 1 for c, n in zip(les.center, dims)):
                raise ParameterError(f"lesion center {les.center} lies outside dims {dims}")
            if les.radius < 0:
                raise ParameterError(f"lesion radius must be >= 0, got {les.radius}")
        if self.noise < 0:
            raise ParameterError("noise amplitude must be >= 0")


def sphere_mask(dims: Dims3, center: Sequence[float], radius: float) -> np.ndarray:
    """Voxels strictly closer than ``radius`` to ``center`` (voxel units)."""
    x, y, z = np.indices(dims, dtype=np.float64)
    cx, cy, cz = center
    return (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2 < float(radius) ** 2


def generate_phantom(spec: PhantomSpec) -> Volume3D:
    """Constant background with spherical lesions and uniform integer jitter.

    Lesions are painted in order, so later ones overwrite earlier ones. The
    jitter is drawn from ``[-noise, noise]`` with a generator seeded by
    ``spec.seed`` and applied after painting.
    """
    vol = np.full(spec.dims, spec.background, dtype=np.int64)
    for les in spec.lesions:
        vol[sphere_mask(spec.dims, les.center, les.radius)] = les.intensity
    if spec.noise > 0:
        rng = np.random.default_rng(spec.seed)
        vol += rng.integers(-spec.noise, spec.noise + 1, size=spec.dims, dtype=np.int64)
    return Volume3D(np.clip(vol, INT16_MIN, INT16_MAX), spec.spacing)
