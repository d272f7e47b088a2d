import numpy as np
import pytest
from hypothesis import given, strategies as st

from lesiontrack.errors import ParameterError
from lesiontrack.volume import (
    Image2D,
    Lesion,
    PhantomSpec,
    QuantizationSpec,
    Volume3D,
    generate_phantom,
    quantize,
    quantize_array,
)


def test_volume_invariants():
    with pytest.raises(ParameterError):
        Volume3D(np.zeros((0, 2, 2)))
    with pytest.raises(ParameterError):
        Volume3D(np.zeros((2, 2, 2)), spacing=(1.0, 0.0, 1.0))
    with pytest.raises(ParameterError):
        Volume3D(np.full((1, 1, 1), 40000))
    with pytest.raises(ParameterError):
        Volume3D.from_flat(range(7), (2, 2, 2))


def test_volume_is_read_only():
    v = Volume3D(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        v.voxels[0, 0, 0] = 1


def test_flat_layout_is_x_fastest():
    v = Volume3D.from_flat(range(8), (2, 2, 2))
    assert v.voxels[1, 0, 0] == 1
    assert v.voxels[0, 1, 0] == 2
    assert v.voxels[0, 0, 1] == 4
    assert list(v.flat()) == list(range(8))


def test_image_dims_are_columns_then_rows():
    img = Image2D(np.zeros((3, 5)))
    assert img.dims == (5, 3)


@pytest.mark.parametrize("value,level", [(0, 0), (100, 3), (10, 0), (30, 1), (55, 2), (80, 3)])
def test_quantize_examples(value, level):
    q = QuantizationSpec(4, 0, 100)
    v = quantize(Volume3D(np.full((1, 1, 1), value)), q)
    assert v.voxels[0, 0, 0] == level


def test_quantize_clamps_and_keeps_geometry():
    q = QuantizationSpec(4, 0, 100)
    v = Volume3D(np.array([-50, 150]).reshape(2, 1, 1), spacing=(0.5, 0.7, 2.0))
    out = quantize(v, q)
    assert list(out.flat()) == [0, 3]
    assert out.spacing == v.spacing and out.dims == v.dims
    assert out.quantization == q


@pytest.mark.parametrize("args", [(1, 0, 10), (4, 5, 5), (4, 6, 5)])
def test_quantization_spec_validation(args):
    with pytest.raises(ParameterError):
        QuantizationSpec(*args)


@given(
    st.integers(2, 64),
    st.integers(-2000, 2000),
    st.integers(1, 4000),
    st.lists(st.integers(-5000, 5000), min_size=2, max_size=40),
)
def test_quantize_monotone(levels, lo, width, values):
    q = QuantizationSpec(levels, lo, lo + width)
    xs = np.sort(np.array(values))
    out = quantize_array(xs, q)
    assert np.all(np.diff(out) >= 0)
    assert out.min() >= 0 and out.max() <= levels - 1


@given(st.integers(2, 40), st.data())
def test_quantize_idempotent_on_levels(levels, data):
    q = QuantizationSpec(levels, 0, levels - 1)
    xs = np.array(data.draw(st.lists(st.integers(0, levels - 1), min_size=1, max_size=50)))
    np.testing.assert_array_equal(quantize_array(xs, q), xs)
    np.testing.assert_array_equal(quantize_array(quantize_array(xs, q), q), quantize_array(xs, q))


def test_phantom_constant_background():
    v = generate_phantom(PhantomSpec((4, 5, 6), background=40))
    assert v.dims == (4, 5, 6)
    assert np.all(v.voxels == 40)


def test_phantom_deterministic():
    spec = PhantomSpec((12, 12, 12), -1024, (Lesion((5, 6, 7), 3, 200),), noise=5, seed=9)
    a, b = generate_phantom(spec), generate_phantom(spec)
    assert a.voxels.tobytes() == b.voxels.tobytes()
    c = generate_phantom(PhantomSpec((12, 12, 12), -1024, (Lesion((5, 6, 7), 3, 200),), noise=5, seed=10))
    assert a != c


def test_phantom_noise_amplitude():
    v = generate_phantom(PhantomSpec((10, 10, 10), 100, noise=3, seed=1))
    assert v.voxels.min() >= 97 and v.voxels.max() <= 103


def test_phantom_sphere_count_matches_lattice_enumeration():
    center = (8, 8, 8)
    v = generate_phantom(PhantomSpec((16, 16, 16), 0, (Lesion(center, 3, 500),)))
    expected = sum(
        1
        for x in range(16)
        for y in range(16)
        for z in range(16)
        if (x - 8) ** 2 + (y - 8) ** 2 + (z - 8) ** 2 < 9
    )
    assert expected == 93
    assert int((v.voxels == 500).sum()) == expected


def test_phantom_later_lesions_overwrite():
    v = generate_phantom(PhantomSpec((9, 9, 9), 0, (Lesion((4, 4, 4), 3, 10), Lesion((4, 4, 4), 1, 20))))
    assert v.voxels[4, 4, 4] == 20
    assert v.voxels[4, 4, 6] == 10


def test_phantom_rejects_center_outside():
    with pytest.raises(ParameterError):
        PhantomSpec((8, 8, 8), 0, (Lesion((8, 0, 0), 2, 1),))
    with pytest.raises(ParameterError):
        PhantomSpec((8, 8, 8), 0, (Lesion((1, 1, 1), -1, 1),))
