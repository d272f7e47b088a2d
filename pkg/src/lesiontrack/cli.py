"""Command-line entry point.

Exit status is 0 on success, 2 on usage errors (argparse prints the
synopsis) and 1 on any other failure, with a one-line diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from lesiontrack.acsm import SimilarityParams, acsm_3d
from lesiontrack.ctv import import_raw, load_volume, save_volume
from lesiontrack.errors import LesiontrackError, ParameterError
from lesiontrack.fusion import DEFAULT_THRESHOLD, change_report, difference, threshold
from lesiontrack.pipeline import (
    Catalog,
    PipelineConfig,
    atomic_output,
    filter_prior_exams,
    step1_compare,
    step2_compare,
    stroke_exams,
)
from lesiontrack.registration import SearchSpec, default_similarity, register, write_trace
from lesiontrack.volume import Lesion, PhantomSpec, QuantizationSpec, generate_phantom, quantize

PROG = "lesiontrack"
_SIM = default_similarity()
_SEARCH = SearchSpec()
_Q = QuantizationSpec()


class _Formatter(argparse.ArgumentDefaultsHelpFormatter):
    pass


def _radius(text):
    return None if text.lower() in ("none", "inf", "unbounded") else int(text)


def _optional_int(text):
    return None if text.lower() == "none" else int(text)


def _lesion(text):
    try:
        x, y, z, r, val = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z,radius,intensity, got {text!r}") from None
    return Lesion((x, y, z), r, int(val))


def _add_similarity(p, sim: SimilarityParams = _SIM):
    g = p.add_argument_group("similarity")
    g.add_argument("--intervals", type=int, nargs=3, metavar=("DX", "DY", "DZ"), default=list(sim.intervals),
                   help="sampling lattice steps inside a patch")
    g.add_argument("--radius", type=_radius, default=sim.neighborhood_radius,
                   help="L-inf search radius around each anchor ('none' = whole volume)")
    g.add_argument("--stride", type=int, default=sim.anchor_stride, help="anchor stride")
    g.add_argument("--max-patch", type=_optional_int, default=sim.max_patch,
                   help="largest patch side considered ('none' = no cap)")


def _add_quantization(p):
    g = p.add_argument_group("quantization")
    g.add_argument("--levels", type=int, default=_Q.levels, help="number of intensity levels")
    g.add_argument("--min-intensity", type=int, default=_Q.min_intensity, help="lower clamp")
    g.add_argument("--max-intensity", type=int, default=_Q.max_intensity, help="upper clamp")


def _add_search(p):
    g = p.add_argument_group("search")
    g.add_argument("--translation", type=float, default=_SEARCH.upper[3], help="translation range +/- (voxels)")
    g.add_argument("--translation-step", type=float, default=_SEARCH.steps[3], help="coarse translation step")
    g.add_argument("--rotation", type=float, default=_SEARCH.upper[2], help="rotation range +/- (radians)")
    g.add_argument("--rotation-step", type=float, default=_SEARCH.steps[2], help="coarse rotation step")
    g.add_argument("--rotation-axes", default="z", help="axes searched for rotation, subset of 'xyz'")
    g.add_argument("--scale", type=float, default=0.0, help="scale range +/- around 1")
    g.add_argument("--scale-step", type=float, default=_SEARCH.steps[6], help="coarse scale step")
    g.add_argument("--refinement-levels", type=int, default=_SEARCH.refinement_levels,
                   help="number of step halvings around the incumbent")
    g.add_argument("--pyramid-levels", type=int, default=_SEARCH.pyramid_levels,
                   help="2x downsampled levels searched first")
    g.add_argument("--workers", type=int, default=1, help="threads evaluating candidates")
    _add_similarity(p)


def _add_fusion(p):
    g = p.add_argument_group("fusion")
    g.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD, help="changed when |D| > threshold")
    g.add_argument("--min-component-size", type=int, default=0,
                   help="drop components smaller than this many voxels (0 = keep all)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Registration and change maps for serial CT volumes.",
                                     formatter_class=_Formatter)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("import-raw", help="wrap a headerless int16 payload as CTV", formatter_class=_Formatter)
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--dims", type=int, nargs=3, required=True, metavar=("NX", "NY", "NZ"))
    p.add_argument("--spacing", type=float, nargs=3, default=[1.0, 1.0, 1.0], metavar=("SX", "SY", "SZ"))

    p = sub.add_parser("make-phantom", help="write a synthetic phantom", formatter_class=_Formatter)
    p.add_argument("output", type=Path)
    p.add_argument("--dims", type=int, nargs=3, required=True, metavar=("NX", "NY", "NZ"))
    p.add_argument("--background", type=int, default=0)
    p.add_argument("--lesion", type=_lesion, action="append", default=[], metavar="X,Y,Z,R,I",
                   help="sphere (repeatable; later ones overwrite earlier ones)")
    p.add_argument("--noise", type=int, default=0, help="uniform integer jitter amplitude")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spacing", type=float, nargs=3, default=[1.0, 1.0, 1.0], metavar=("SX", "SY", "SZ"))

    p = sub.add_parser("similarity", help="A-ACSM of two volumes after quantization",
                       formatter_class=_Formatter)
    p.add_argument("a", type=Path)
    p.add_argument("b", type=Path)
    _add_similarity(p, SimilarityParams())
    _add_quantization(p)

    p = sub.add_parser("register", help="search rigid parameters aligning b to a", formatter_class=_Formatter)
    p.add_argument("a", type=Path, help="source volume")
    p.add_argument("b", type=Path, help="target volume, resampled into a's frame")
    p.add_argument("--trace", type=Path, default=None, help="write the evaluation trace here (TSV)")
    _add_search(p)
    _add_quantization(p)

    p = sub.add_parser("fuse", help="difference and change map of aligned volumes", formatter_class=_Formatter)
    p.add_argument("a", type=Path, help="source volume")
    p.add_argument("b", type=Path, help="registered target volume")
    p.add_argument("out_dir", type=Path, help="output directory (must not exist)")
    _add_fusion(p)

    p = sub.add_parser("pipeline", help="catalog-driven comparison workflows", formatter_class=_Formatter)
    steps = p.add_subparsers(dest="step", required=True)
    s = steps.add_parser("list", help="show prior and stroke-related brain CTs of a patient",
                         formatter_class=_Formatter)
    s.add_argument("catalog", type=Path)
    s.add_argument("patient")
    for name, helptext, ids in (
        ("step1", "compare a prior exam with the latest stroke exam", ("prior_exam",)),
        ("step2", "compare two stroke exams", ("exam1", "exam2")),
    ):
        s = steps.add_parser(name, help=helptext, formatter_class=_Formatter)
        s.add_argument("catalog", type=Path)
        s.add_argument("patient")
        for i in ids:
            s.add_argument(i)
        s.add_argument("out_dir", type=Path, help="output directory (must not exist)")
        s.add_argument("--truth", type=Path, default=None, help="0/1 CTV mask; report Dice against it")
        _add_search(s)
        _add_quantization(s)
        _add_fusion(s)
    return parser


def _similarity(args) -> SimilarityParams:
    return SimilarityParams(tuple(args.intervals), args.radius, args.stride, args.max_patch)


def _quantization(args) -> QuantizationSpec:
    return QuantizationSpec(args.levels, args.min_intensity, args.max_intensity)


def _search(args) -> SearchSpec:
    return SearchSpec.symmetric(
        args.translation, args.translation_step, args.rotation, args.rotation_step,
        args.rotation_axes, args.scale, args.scale_step,
        refinement_levels=args.refinement_levels, similarity=_similarity(args),
        pyramid_levels=args.pyramid_levels,
    )


def _cmd_import_raw(args):
    save_volume(import_raw(args.input, tuple(args.dims), tuple(args.spacing)), args.output)
    print(f"wrote {args.output}")


def _cmd_make_phantom(args):
    spec = PhantomSpec(tuple(args.dims), args.background, tuple(args.lesion), args.noise, args.seed,
                       tuple(args.spacing))
    save_volume(generate_phantom(spec), args.output)
    print(f"wrote {args.output}")


def _cmd_similarity(args):
    q = _quantization(args)
    a, b = quantize(load_volume(args.a), q), quantize(load_volume(args.b), q)
    val = acsm_3d(a, b, _similarity(args))
    print(f"normalized\t{val.normalized!r}")
    print(f"raw_average\t{val.raw_average!r}")
    print(f"anchors\t{val.anchors_evaluated}")


def _cmd_register(args):
    q = _quantization(args)
    a, b = quantize(load_volume(args.a), q), quantize(load_volume(args.b), q)
    result = register(a, b, args.search, workers=args.workers)
    if args.trace is not None:
        write_trace(result, args.trace)
    p = result.best_params
    print(json.dumps({
        "rotations": list(p.rotations),
        "translations": list(p.translations),
        "scale": p.scale,
        "similarity": result.best_similarity.normalized,
        "evaluations": result.evaluations,
    }))


def _cmd_fuse(args):
    a, b = load_volume(args.a), load_volume(args.b)
    cmap = threshold(difference(a, b), args.threshold, args.min_component_size)
    with atomic_output(args.out_dir) as tmp:
        summary = change_report(cmap, tmp)
        summary["files"] = {k: str(args.out_dir / Path(v).name) for k, v in summary["files"].items()}
        (tmp / "report.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"changed {cmap.changed} of {cmap.total} voxels in {len(cmap.components)} components")


def _cmd_pipeline(args):
    catalog = Catalog.load(args.catalog)
    if args.step == "list":
        for label, recs in (("prior", filter_prior_exams(catalog, args.patient)),
                            ("stroke", stroke_exams(catalog, args.patient))):
            for r in recs:
                print(f"{label}\t{r.exam_id}\t{r.timestamp.isoformat()}")
        return
    cfg = PipelineConfig(args.search, _quantization(args), args.threshold, args.min_component_size, args.workers)
    truth = load_volume(args.truth) if args.truth is not None else None
    if args.step == "step1":
        report = step1_compare(catalog, args.patient, args.prior_exam, cfg, args.out_dir, truth)
    else:
        report = step2_compare(catalog, args.patient, args.exam1, args.exam2, cfg, args.out_dir, truth)
    print(f"source {report.source_exam} target {report.target_exam}: "
          f"{report.changes['changed']} changed voxels; report {report.files['report']}")
    if report.dice is not None:
        print(f"dice\t{report.dice!r}")


_COMMANDS = {
    "import-raw": _cmd_import_raw,
    "make-phantom": _cmd_make_phantom,
    "similarity": _cmd_similarity,
    "register": _cmd_register,
    "fuse": _cmd_fuse,
    "pipeline": _cmd_pipeline,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    # flag combinations that cannot form a valid search are usage errors
    if hasattr(args, "translation"):
        try:
            args.search = _search(args)
        except ParameterError as exc:
            parser.error(str(exc))
    try:
        _COMMANDS[args.command](args)
    except (LesiontrackError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
