import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lesiontrack.ctv import load_volume
from lesiontrack.errors import ParameterError
from lesiontrack.fusion import (
    DifferenceVolume,
    change_report,
    dice,
    difference,
    label_components,
    slice_counts,
    threshold,
)
from lesiontrack.volume import PhantomSpec, Volume3D, generate_phantom, sphere_mask


def test_difference_of_equal_volumes(rng):
    a = Volume3D(rng.integers(-1024, 3000, size=(4, 4, 4)))
    assert not difference(a, a).values.any()


def test_difference_constant():
    d = difference(Volume3D(np.full((3, 3, 3), 50)), Volume3D(np.full((3, 3, 3), 30)))
    assert np.all(d.values == 20)


def test_difference_elementwise(rng):
    a = Volume3D(rng.integers(-32768, 32768, size=(5, 4, 3)))
    b = Volume3D(rng.integers(-32768, 32768, size=(5, 4, 3)))
    d = difference(a, b)
    for idx in np.ndindex(a.dims):
        assert d.values[idx] == int(a.voxels[idx]) - int(b.voxels[idx])


def test_difference_dims_mismatch():
    with pytest.raises(ParameterError):
        difference(Volume3D(np.zeros((2, 2, 2))), Volume3D(np.zeros((2, 2, 3))))


def test_threshold_zero_difference():
    m = threshold(DifferenceVolume(np.zeros((4, 4, 4))), 10)
    assert m.changed == 0 and len(m.components) == 0 and m.total == 64


def test_threshold_is_strict():
    vals = np.zeros((3, 3, 3))
    vals[1, 1, 1] = 40
    vals[0, 0, 0] = -41
    m = threshold(DifferenceVolume(vals), 40)
    assert m.mask[1, 1, 1] == 0
    assert m.mask[0, 0, 0] == 1
    assert m.changed == 1


def test_threshold_rejects_negative():
    with pytest.raises(ParameterError):
        threshold(DifferenceVolume(np.zeros((2, 2, 2))), -1)


def test_inserted_sphere_is_one_component():
    dims = (20, 20, 20)
    a = generate_phantom(PhantomSpec(dims, 40, noise=3, seed=2))
    sphere = sphere_mask(dims, (9, 10, 11), 4)
    b = Volume3D(np.where(sphere, a.voxels + 100, a.voxels))
    m = threshold(difference(a, b), 50)
    assert len(m.components) == 1
    np.testing.assert_array_equal(m.mask.astype(bool), sphere)
    comp = m.components[0]
    assert comp.voxels == int(sphere.sum())
    assert comp.bbox_min == (6, 7, 8) and comp.bbox_max == (12, 13, 14)


def test_components_use_six_connectivity():
    mask = np.zeros((4, 4, 4), dtype=bool)
    mask[0, 0, 0] = mask[1, 1, 0] = True  # edge neighbours only
    mask[3, 3, 3] = mask[3, 3, 2] = mask[3, 2, 3] = True
    _, comps = label_components(mask)
    assert [c.voxels for c in comps] == [3, 1, 1]
    assert comps[1].bbox_min == (0, 0, 0)  # equal sizes ordered by origin
    assert comps[2].bbox_min == (1, 1, 0)


def test_min_component_size_filter():
    vals = np.zeros((6, 6, 6))
    vals[0, 0, 0] = 100
    vals[3:5, 3:5, 3:5] = 100
    assert threshold(DifferenceVolume(vals), 10).changed == 9
    m = threshold(DifferenceVolume(vals), 10, min_component_size=2)
    assert m.changed == 8 and len(m.components) == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 200), st.integers(0, 200))
def test_threshold_monotone(seed, t1, t2):
    rng = np.random.default_rng(seed)
    d = DifferenceVolume(rng.integers(-300, 300, size=(5, 5, 5)))
    t1, t2 = sorted((t1, t2))
    assert threshold(d, t1).changed >= threshold(d, t2).changed


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 100))
def test_swap_antisymmetry(seed, t):
    rng = np.random.default_rng(seed)
    a = Volume3D(rng.integers(-200, 200, size=(4, 5, 3)))
    b = Volume3D(rng.integers(-200, 200, size=(4, 5, 3)))
    np.testing.assert_array_equal(difference(a, b).values, -difference(b, a).values)
    np.testing.assert_array_equal(threshold(difference(a, b), t).mask, threshold(difference(b, a), t).mask)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 1000))
def test_self_fusion_is_empty(seed, t):
    rng = np.random.default_rng(seed)
    a = Volume3D(rng.integers(-1024, 3071, size=(4, 4, 4)))
    assert threshold(difference(a, a), t).changed == 0


def test_dice():
    x = np.array([1, 1, 0, 0], bool)
    y = np.array([1, 0, 1, 0], bool)
    assert dice(x, y) == 0.5
    assert dice(x, x) == 1.0


def test_change_report_empty(tmp_path):
    m = threshold(DifferenceVolume(np.zeros((3, 3, 2))), 5)
    rep = change_report(m, tmp_path)
    assert rep["changed"] == 0 and rep["component_count"] == 0
    assert (tmp_path / "components.tsv").read_text() == "rank\tvoxels\txmin\tymin\tzmin\txmax\tymax\tzmax\n"
    assert (tmp_path / "slices.tsv").read_text().splitlines() == ["z\tchanged", "0\t0", "1\t0"]


def test_change_report_sphere_round_trip(tmp_path):
    dims = (12, 12, 12)
    sphere = sphere_mask(dims, (6, 5, 7), 3)
    m = threshold(DifferenceVolume(np.where(sphere, 200, 0)), 50)
    rep = change_report(m, tmp_path)
    assert rep["component_count"] == 1
    lo, hi = rep["components"][0]["bbox_min"], rep["components"][0]["bbox_max"]
    idx = np.argwhere(sphere)
    assert np.all(idx >= lo) and np.all(idx <= hi)
    mask = load_volume(tmp_path / "mask.ctv")
    np.testing.assert_array_equal(mask.voxels, m.mask)
    rows = (tmp_path / "slices.tsv").read_text().splitlines()[1:]
    assert [int(r.split("\t")[1]) for r in rows] == slice_counts(m).tolist()
    assert sum(int(r.split("\t")[1]) for r in rows) == rep["changed"]
