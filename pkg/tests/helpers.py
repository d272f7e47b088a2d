"""Phantom builders shared by registration, pipeline and acceptance tests."""

import numpy as np

from lesiontrack.volume import Lesion, PhantomSpec, generate_phantom, sphere_mask

# intensities chosen to land in distinct levels of the default quantization
LESION_INTENSITIES = (300, 700, 1100, 1500, 1900, 2300, 2700, 3000)


def head_phantom(seed, n=32, noise=0):
    """Air-filled volume holding a centred 'head' sphere and off-centre lesions."""
    rng = np.random.default_rng(seed)
    c0 = (n - 1) / 2
    lesions = [Lesion((c0, c0, c0), 13.5 * n / 32, 40)]
    for intensity in LESION_INTENSITIES:
        ang = rng.uniform(0, 2 * np.pi)
        rad = rng.uniform(5, 11) * n / 32
        z = c0 + rng.uniform(-8, 8) * n / 32
        radius = float(rng.uniform(2, 3.5)) * n / 32
        lesions.append(Lesion((c0 + rad * np.cos(ang), c0 + rad * np.sin(ang), z), radius, intensity))
    return generate_phantom(PhantomSpec((n, n, n), -1024, tuple(lesions), noise=noise, seed=seed))


GROWTH_CENTER = (19.5, 12.5, 15.5)
GROWTH_SHIFT = (3, 0, 0)


def growth_exams(n=32, noise=2, r0=3, r1=5, intensity=400, landmarks_seed=11):
    """Day-1 and day-3 exams of a growing lesion plus the analytic shell mask.

    Day 3 is the reference frame; day 1 is its anatomy shifted by
    ``GROWTH_SHIFT`` voxels. Static landmark lesions give registration
    something to lock onto that does not change between exams.
    """
    rng = np.random.default_rng(landmarks_seed)
    c0 = (n - 1) / 2
    statics = [Lesion((c0, c0, c0), 13.5 * n / 32, 40)]
    for k, val in enumerate((1100, 1900, 2700, -600)):
        ang = np.pi / 2 + k * np.pi / 3 + rng.uniform(-0.2, 0.2)
        statics.append(Lesion((c0 + 8 * np.cos(ang), c0 + 8 * np.sin(ang), c0 + rng.uniform(-6, 6)), 3.0, val))

    def exam(radius, shift, seed):
        lesions = [Lesion(tuple(np.add(l.center, shift)), l.radius, l.intensity) for l in statics]
        lesions.append(Lesion(tuple(np.add(GROWTH_CENTER, shift)), radius, intensity))
        return generate_phantom(PhantomSpec((n, n, n), -1024, tuple(lesions), noise=noise, seed=seed))

    day1 = exam(r0, GROWTH_SHIFT, 1)
    day3 = exam(r1, (0, 0, 0), 3)
    shell = sphere_mask((n, n, n), GROWTH_CENTER, r1) & ~sphere_mask((n, n, n), GROWTH_CENTER, r0)
    return day1, day3, shell


def write_exam_catalog(directory, exams):
    """Save volumes and a catalog; ``exams`` holds (id, patient, day, modality, part, stroke, volume)."""
    from datetime import datetime, timedelta
    from pathlib import Path

    from lesiontrack.ctv import save_volume
    from lesiontrack.pipeline import ExamRecord, write_catalog

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records = []
    for eid, patient, day, modality, part, stroke, vol in exams:
        save_volume(vol, directory / f"{eid}.ctv")
        records.append(ExamRecord(eid, patient, datetime(2024, 3, 1) + timedelta(days=day), modality, part,
                                  stroke, Path(f"{eid}.ctv")))
    write_catalog(records, directory / "catalog.tsv")
    return directory / "catalog.tsv"
