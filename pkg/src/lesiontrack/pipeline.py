"""Exam catalog and the two comparison workflows.

Catalog files are tab-separated text with a header row naming the columns
(any order)::

    exam_id  patient_id  timestamp  modality  body_part  stroke_related  volume_path

``timestamp`` is ISO-8601, ``stroke_related`` one of true/false/yes/no/1/0,
and relative ``volume_path`` entries resolve against the catalog's own
directory. Lines starting with ``#`` and blank lines are skipped.

Every run writes into a temporary sibling of the output directory and renames
it into place only once all files exist, so a failed run leaves nothing
behind.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import shutil
import tempfile
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from lesiontrack.ctv import load_volume, save_volume
from lesiontrack.errors import (
    CatalogError,
    DuplicateExamError,
    MissingVolumeError,
    ParameterError,
    PreconditionError,
    WorkflowError,
)
from lesiontrack.fusion import DEFAULT_THRESHOLD, change_report, dice, difference, threshold
from lesiontrack.registration import SearchSpec, register, write_trace
from lesiontrack.transform import AIR, build_map, resample, volume_center
from lesiontrack.volume import QuantizationSpec, quantize

logger = logging.getLogger(__name__)

CATALOG_FIELDS = ("exam_id", "patient_id", "timestamp", "modality", "body_part",
                  "stroke_related", "volume_path")
_TRUE = {"true", "yes", "1"}
_FALSE = {"false", "no", "0"}


@dataclass(frozen=True)
class ExamRecord:
    exam_id: str
    patient_id: str
    timestamp: datetime
    modality: str
    body_part: str
    stroke_related: bool
    volume_path: Path

    def is_brain_ct(self) -> bool:
        return self.modality.upper() == "CT" and self.body_part.upper() == "BRAIN"

    def sort_key(self):
        return (self.timestamp, self.exam_id)


def _parse_bool(text: str, where: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise CatalogError(f"{where}: stroke_related must be true/false, got {text!r}")


def _parse_time(text: str, where: str) -> datetime:
    try:
        return datetime.fromisoformat(text.strip())
    except ValueError:
        raise CatalogError(f"{where}: timestamp {text!r} is not ISO-8601") from None


class Catalog:
    """Exam records indexed by id."""

    def __init__(self, records: Sequence[ExamRecord]):
        self._by_id: Dict[str, ExamRecord] = {}
        for rec in records:
            if rec.exam_id in self._by_id:
                raise DuplicateExamError(f"duplicate exam_id {rec.exam_id!r}")
            self._by_id[rec.exam_id] = rec
        # mixing aware and naive stamps would break the total order
        aware = {r.timestamp.tzinfo is not None for r in records}
        if len(aware) > 1:
            raise CatalogError("timestamps mix timezone-aware and naive values")

    @classmethod
    def load(cls, path) -> "Catalog":
        path = Path(path)
        base = path.parent
        try:
            text = path.read_text()
        except OSError as exc:
            raise CatalogError(f"cannot read catalog {path}: {exc}") from exc
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        reader = csv.DictReader(lines, delimiter="\t")
        missing = set(CATALOG_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise CatalogError(f"{path}: header lacks columns {sorted(missing)}")
        records = []
        for i, row in enumerate(reader, start=2):
            where = f"{path}:{i}"
            if None in row or any(row[f] is None for f in CATALOG_FIELDS):
                raise CatalogError(f"{where}: wrong number of fields")
            vol = Path(row["volume_path"].strip())
            if not vol.is_absolute():
                vol = base / vol
            if not vol.is_file():
                raise MissingVolumeError(f"{where}: volume file {vol} for exam {row['exam_id']!r} does not exist")
            records.append(ExamRecord(
                exam_id=row["exam_id"].strip(),
                patient_id=row["patient_id"].strip(),
                timestamp=_parse_time(row["timestamp"], where),
                modality=row["modality"].strip(),
                body_part=row["body_part"].strip(),
                stroke_related=_parse_bool(row["stroke_related"], where),
                volume_path=vol,
            ))
        return cls(records)

    @property
    def records(self) -> List[ExamRecord]:
        return list(self._by_id.values())

    def __len__(self):
        return len(self._by_id)

    def __contains__(self, exam_id):
        return exam_id in self._by_id

    def get(self, exam_id: str) -> ExamRecord:
        try:
            return self._by_id[exam_id]
        except KeyError:
            raise PreconditionError(f"exam {exam_id!r} is not in the catalog") from None

    def patient_exams(self, patient_id: str) -> List[ExamRecord]:
        return sorted((r for r in self._by_id.values() if r.patient_id == patient_id),
                      key=ExamRecord.sort_key)


def write_catalog(records: Sequence[ExamRecord], path) -> None:
    """Write records in the documented column order."""
    rows = ["\t".join(CATALOG_FIELDS)]
    for r in records:
        rows.append("\t".join((r.exam_id, r.patient_id, r.timestamp.isoformat(), r.modality,
                               r.body_part, "true" if r.stroke_related else "false",
                               str(r.volume_path))))
    Path(path).write_text("\n".join(rows) + "\n")


def filter_prior_exams(c: Catalog, patient_id: str) -> List[ExamRecord]:
    """Brain CTs of the patient unrelated to the stroke, oldest first."""
    return [r for r in c.patient_exams(patient_id) if r.is_brain_ct() and not r.stroke_related]


def stroke_exams(c: Catalog, patient_id: str) -> List[ExamRecord]:
    """Stroke-related brain CTs of the patient, oldest first."""
    return [r for r in c.patient_exams(patient_id) if r.is_brain_ct() and r.stroke_related]


@dataclass(frozen=True)
class PipelineConfig:
    search: SearchSpec = field(default_factory=SearchSpec)
    quantization: QuantizationSpec = field(default_factory=QuantizationSpec)
    threshold: int = DEFAULT_THRESHOLD
    min_component_size: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.threshold < 0:
            raise ParameterError(f"threshold must be >= 0, got {self.threshold}")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")


@dataclass
class RunReport:
    step: str
    patient_id: str
    source_exam: str
    target_exam: str
    registration: Dict
    fusion: Dict
    changes: Dict
    files: Dict[str, str]
    timings: Dict[str, float]
    dice: Optional[float] = None

    def to_dict(self) -> Dict:
        return asdict(self)


@contextmanager
def atomic_output(out_dir: Path):
    """Yield a temp directory that becomes ``out_dir`` only on clean exit."""
    out_dir = Path(out_dir)
    if out_dir.exists():
        raise ParameterError(f"output directory {out_dir} already exists")
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    os.rename(tmp, out_dir)


class _Timer:
    def __init__(self):
        self.timings: Dict[str, float] = {}

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        yield
        self.timings[name] = time.perf_counter() - t0


def _compare(step, patient_id, source: ExamRecord, target: ExamRecord,
             cfg: PipelineConfig, out_dir, truth=None) -> RunReport:
    out_dir = Path(out_dir)
    timer = _Timer()
    with atomic_output(out_dir) as tmp:
        with timer.stage("load"):
            a = load_volume(source.volume_path)
            b = load_volume(target.volume_path)
            if a.dims != b.dims:
                raise PreconditionError(
                    f"exams {source.exam_id} and {target.exam_id} have different dims {a.dims} vs {b.dims}"
                )
        with timer.stage("quantize"):
            qa, qb = quantize(a, cfg.quantization), quantize(b, cfg.quantization)
        with timer.stage("register"):
            result = register(qa, qb, cfg.search, workers=cfg.workers)
        with timer.stage("resample"):
            m = build_map(result.best_params, volume_center(b.dims))
            registered = resample(b, m, "trilinear", background=AIR)
        with timer.stage("fuse"):
            cmap = threshold(difference(a, registered), cfg.threshold, cfg.min_component_size)
        with timer.stage("write"):
            save_volume(registered, tmp / "registered.ctv")
            write_trace(result, tmp / "trace.tsv")
            summary = change_report(cmap, tmp)

        score = None
        if truth is not None:
            if truth.dims != a.dims:
                raise ParameterError(f"truth mask dims {truth.dims} differ from {a.dims}")
            score = dice(cmap.mask, truth.voxels != 0)

        files = {k: str(out_dir / Path(p).name) for k, p in summary.pop("files").items()}
        files.update(registered=str(out_dir / "registered.ctv"), trace=str(out_dir / "trace.tsv"),
                     report=str(out_dir / "report.json"))
        p = result.best_params
        report = RunReport(
            step=step,
            patient_id=patient_id,
            source_exam=source.exam_id,
            target_exam=target.exam_id,
            registration={
                "rotations": list(p.rotations),
                "translations": list(p.translations),
                "scale": p.scale,
                "similarity": result.best_similarity.normalized,
                "evaluations": result.evaluations,
            },
            fusion={"threshold": cfg.threshold, "min_component_size": cfg.min_component_size},
            changes=summary,
            files=files,
            timings=timer.timings,
            dice=score,
        )
        (tmp / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    logger.info("%s %s: %d changed voxels -> %s", step, patient_id, cmap.changed, out_dir)
    return report


def step1_compare(c: Catalog, patient_id: str, selected_prior_exam_id: str,
                  cfg: PipelineConfig, out_dir, truth=None) -> RunReport:
    """Register a prior exam onto the latest stroke exam and map the changes.

    ``truth``, when given, is a 0/1 volume scored against the change map.
    """
    priors = filter_prior_exams(c, patient_id)
    if not priors:
        raise WorkflowError(f"patient {patient_id!r} has no prior brain CT; continue with step 2")
    strokes = stroke_exams(c, patient_id)
    if not strokes:
        raise WorkflowError(
            f"patient {patient_id!r} has no stroke-related brain CT to anchor the comparison"
        )
    if selected_prior_exam_id not in {r.exam_id for r in priors}:
        raise PreconditionError(
            f"exam {selected_prior_exam_id!r} is not a prior brain CT of patient {patient_id!r}"
        )
    target = c.get(selected_prior_exam_id)
    return _compare("step1", patient_id, strokes[-1], target, cfg, out_dir, truth)


def step2_compare(c: Catalog, patient_id: str, exam_id_1: str, exam_id_2: str,
                  cfg: PipelineConfig, out_dir, truth=None) -> RunReport:
    """Compare two stroke exams: the later one is the source frame."""
    if exam_id_1 == exam_id_2:
        raise ParameterError("step 2 needs two different exams")
    pair = []
    for eid in (exam_id_1, exam_id_2):
        rec = c.get(eid)
        if rec.patient_id != patient_id or not (rec.is_brain_ct() and rec.stroke_related):
            raise PreconditionError(
                f"exam {eid!r} is not a stroke-related brain CT of patient {patient_id!r}"
            )
        pair.append(rec)
    target, source = sorted(pair, key=ExamRecord.sort_key)
    return _compare("step2", patient_id, source, target, cfg, out_dir, truth)
