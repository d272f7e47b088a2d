"""Rigid registration by maximizing A-ACSM over a parameter grid.

The similarity is piecewise constant in the transform parameters, so the
search is a deterministic coarse grid followed by local re-gridding with
halved steps around the incumbent, optionally on a mean-pooled pyramid.

Sign convention: the result ``T`` is the map for which ``resample(b, T)``
lines up with ``a``. If ``b`` was produced as ``resample(a, M)`` then ``T`` is
``M^-1``; for a pure translation by ``d`` that is ``-d``.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from lesiontrack.acsm import SimilarityParams, SimilarityValue, acsm_3d
from lesiontrack.errors import ParameterError
from lesiontrack.transform import AIR, RigidParams, build_map, resample, volume_center
from lesiontrack.volume import QuantizationSpec, Volume3D, quantize_array

logger = logging.getLogger(__name__)

PARAM_NAMES = ("rx", "ry", "rz", "tx", "ty", "tz", "scale")
IDENTITY = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0)
_TRANSLATION = slice(3, 6)


def default_similarity() -> SimilarityParams:
    return SimilarityParams(intervals=(1, 1, 1), neighborhood_radius=0, anchor_stride=2, max_patch=4)


@dataclass(frozen=True)
class SearchSpec:
    """Bounds, grid steps and schedule of the parameter search.

    Bounds and steps are 7-tuples in :data:`PARAM_NAMES` order (radians,
    voxels, unitless scale). A parameter whose lower and upper bound are equal
    is held fixed. Coarse grids are anchored at the identity, so identity is
    always evaluated.
    """

    lower: Tuple[float, ...] = (0.0, 0.0, -0.2, -15.0, -15.0, -15.0, 1.0)
    upper: Tuple[float, ...] = (0.0, 0.0, 0.2, 15.0, 15.0, 15.0, 1.0)
    steps: Tuple[float, ...] = (0.05, 0.05, 0.05, 3.0, 3.0, 3.0, 0.05)
    refinement_levels: int = 2
    similarity: SimilarityParams = field(default_factory=default_similarity)
    pyramid_levels: int = 0

    def __post_init__(self):
        for name in ("lower", "upper", "steps"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != 7:
                raise ParameterError(f"{name} needs 7 entries ({', '.join(PARAM_NAMES)})")
            object.__setattr__(self, name, vals)
        for n, lo, hi, ident in zip(PARAM_NAMES, self.lower, self.upper, IDENTITY):
            if lo > hi:
                raise ParameterError(f"empty search range for {n}: [{lo}, {hi}]")
            if not lo <= ident <= hi:
                raise ParameterError(f"bounds for {n} must contain the identity value {ident}")
        if any(not s > 0 for s in self.steps):
            raise ParameterError("grid steps must be > 0")
        if self.lower[6] <= 0:
            raise ParameterError("scale bounds must be positive")
        if self.refinement_levels < 0 or self.pyramid_levels < 0:
            raise ParameterError("refinement and pyramid levels must be >= 0")

    @classmethod
    def symmetric(cls, translation: float = 15.0, translation_step: float = 3.0,
                  rotation: float = 0.2, rotation_step: float = 0.05,
                  rotation_axes: str = "z", scale: float = 0.0, scale_step: float = 0.05,
                  **kwargs) -> "SearchSpec":
        """Bounds ``±range`` on all translations and on the named rotation axes."""
        rot = tuple(rotation if ax in rotation_axes else 0.0 for ax in "xyz")
        lower = tuple(-r for r in rot) + (-translation,) * 3 + (1.0 - scale,)
        upper = rot + (translation,) * 3 + (1.0 + scale,)
        steps = (rotation_step,) * 3 + (translation_step,) * 3 + (scale_step,)
        return cls(lower, upper, steps, **kwargs)

    def free(self) -> Tuple[bool, ...]:
        return tuple(hi > lo for lo, hi in zip(self.lower, self.upper))

    def coarse_grid(self) -> List[Tuple[float, ...]]:
        axes = []
        for lo, hi, step, ident, free in zip(self.lower, self.upper, self.steps, IDENTITY, self.free()):
            if not free:
                axes.append([ident])
                continue
            i_lo = int(np.ceil((lo - ident) / step - 1e-9))
            i_hi = int(np.floor((hi - ident) / step + 1e-9))
            axes.append([ident + i * step for i in range(i_lo, i_hi + 1)])
        return list(itertools.product(*axes))


@dataclass(frozen=True)
class TraceEntry:
    level: int
    params: RigidParams
    similarity: float


@dataclass
class RegistrationResult:
    best_params: RigidParams
    best_similarity: SimilarityValue
    evaluations: int
    trace: List[TraceEntry]

    def finest_trace(self) -> List[TraceEntry]:
        return [e for e in self.trace if e.level == 0]


def _check_quantized(a: Volume3D, b: Volume3D) -> QuantizationSpec:
    if a.quantization is None or b.quantization is None:
        raise ParameterError("registration inputs must be quantized")
    if a.quantization != b.quantization:
        raise ParameterError(
            f"inputs quantized differently: {a.quantization} vs {b.quantization}"
        )
    return a.quantization


def evaluate_candidate_value(a: Volume3D, b: Volume3D, params: RigidParams,
                             simparams: SimilarityParams) -> SimilarityValue:
    q = _check_quantized(a, b)
    moved = resample(b, build_map(params, volume_center(b.dims)), "nearest",
                     background=q.level_of(AIR))
    return acsm_3d(a, moved, simparams)


def evaluate_candidate(a: Volume3D, b: Volume3D, params: RigidParams,
                       simparams: SimilarityParams) -> float:
    """Normalized similarity of ``a`` and ``b`` warped by ``params``."""
    return evaluate_candidate_value(a, b, params, simparams).normalized


def downsample(v: Volume3D) -> Volume3D:
    """2x2x2 mean pooling of quantized levels followed by re-quantization.

    A trailing odd slab along any axis is dropped.
    """
    q = v.quantization
    if q is None:
        raise ParameterError("pyramid levels are built from quantized volumes")
    nx, ny, nz = (d // 2 for d in v.dims)
    if min(nx, ny, nz) < 1:
        raise ParameterError(f"volume {v.dims} too small for another pyramid level")
    data = v.voxels[: 2 * nx, : 2 * ny, : 2 * nz].astype(np.float64)
    pooled = data.reshape(nx, 2, ny, 2, nz, 2).mean(axis=(1, 3, 5))
    levels = quantize_array(pooled, QuantizationSpec(q.levels, 0, q.levels - 1))
    spacing = tuple(2 * s for s in v.spacing)
    return Volume3D(levels, spacing, q)


def _scale_vector(vec, factor):
    vec = list(vec)
    vec[_TRANSLATION] = [t * factor for t in vec[_TRANSLATION]]
    return tuple(vec)


class _Search:
    """Evaluation bookkeeping for one pyramid level."""

    def __init__(self, a, b, simparams, level, lower, upper, trace, workers):
        self.a, self.b = a, b
        self.simparams = simparams
        self.level = level
        self.lower, self.upper = lower, upper
        self.trace = trace
        self.workers = workers
        self.seen: Dict[Tuple[float, ...], SimilarityValue] = {}
        self.best: Optional[Tuple[Tuple[float, ...], SimilarityValue]] = None

    def _key(self, vec):
        return tuple(round(v, 12) + 0.0 for v in vec)

    def run(self, candidates: Sequence[Tuple[float, ...]]) -> None:
        fresh = []
        for vec in candidates:
            key = self._key(vec)
            if key in self.seen or key in fresh:
                continue
            if any(v < lo - 1e-12 or v > hi + 1e-12 for v, lo, hi in zip(key, self.lower, self.upper)):
                continue
            fresh.append(key)
        if not fresh:
            return

        def work(vec):
            return evaluate_candidate_value(self.a, self.b, RigidParams.from_vector(vec), self.simparams)

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                values = list(pool.map(work, fresh))
        else:
            values = [work(vec) for vec in fresh]

        scale = 2 ** self.level
        for vec, val in zip(fresh, values):
            self.seen[vec] = val
            params = RigidParams.from_vector(_scale_vector(vec, scale))
            self.trace.append(TraceEntry(self.level, params, val.normalized))
            if self._better(vec, val):
                self.best = (vec, val)

    def _better(self, vec, val) -> bool:
        if self.best is None:
            return True
        bvec, bval = self.best
        if val.normalized != bval.normalized:
            return val.normalized > bval.normalized
        return RigidParams.from_vector(vec).norm() < RigidParams.from_vector(bvec).norm()

    def refine(self, steps, free, rounds) -> Tuple[float, ...]:
        steps = list(steps)
        for _ in range(rounds):
            steps = [s / 2 for s in steps]
            center = self.best[0]
            axes = [
                [c - s, c, c + s] if f else [c]
                for c, s, f in zip(center, steps, free)
            ]
            self.run(itertools.product(*axes))
            logger.debug("level %d refine step %s best %.6f", self.level, steps, self.best[1].normalized)
        return tuple(steps)


def register(a: Volume3D, b: Volume3D, spec: SearchSpec, workers: int = 1) -> RegistrationResult:
    """Find rigid parameters maximizing ``acsm_3d(a, resample(b, T))``.

    Ties on similarity go to the parameter vector closest to identity, then
    to the earlier evaluation. With ``pyramid_levels > 0`` the coarse grid
    runs on the coarsest level with translation bounds and steps scaled
    down; each finer level re-grids once around the upscaled incumbent at
    that level's step and then refines.
    """
    _check_quantized(a, b)
    if workers < 1:
        raise ParameterError("workers must be >= 1")
    free = spec.free()
    grid = spec.coarse_grid()
    if not grid:
        raise ParameterError("search grid is empty")

    pyr_a, pyr_b = [a], [b]
    for _ in range(spec.pyramid_levels):
        pyr_a.append(downsample(pyr_a[-1]))
        pyr_b.append(downsample(pyr_b[-1]))

    trace: List[TraceEntry] = []
    top = spec.pyramid_levels
    shrink = 1.0 / 2 ** top
    search = _Search(pyr_a[top], pyr_b[top], spec.similarity, top,
                     _scale_vector(spec.lower, shrink), _scale_vector(spec.upper, shrink),
                     trace, workers)
    search.run([_scale_vector(vec, shrink) for vec in grid])
    search.refine(_scale_vector(spec.steps, shrink), free, spec.refinement_levels)

    for level in range(top - 1, -1, -1):
        incumbent = _scale_vector(search.best[0], 2.0)
        factor = 1.0 / 2 ** level
        search = _Search(pyr_a[level], pyr_b[level], spec.similarity, level,
                         _scale_vector(spec.lower, factor), _scale_vector(spec.upper, factor),
                         trace, workers)
        search.run([incumbent])
        steps = _scale_vector(spec.steps, factor)
        # one re-grid at this level's own coarse step, then the usual halvings
        search.refine([2 * s for s in steps], free, 1)
        search.refine(steps, free, spec.refinement_levels)

    best_vec, best_val = search.best
    return RegistrationResult(RigidParams.from_vector(best_vec), best_val, len(trace), trace)


def format_trace(result: RegistrationResult) -> str:
    """Tab-separated trace, one row per evaluation, floats in ``repr`` form."""
    lines = ["\t".join(("index", "level") + PARAM_NAMES + ("similarity",))]
    for i, e in enumerate(result.trace):
        fields = [str(i), str(e.level)] + [repr(v) for v in e.params.as_vector()] + [repr(e.similarity)]
        lines.append("\t".join(fields))
    return "\n".join(lines) + "\n"


def write_trace(result: RegistrationResult, path) -> None:
    Path(path).write_text(format_trace(result))
