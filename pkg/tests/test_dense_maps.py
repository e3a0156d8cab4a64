import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vita.dense_maps import (
    DenseMapError,
    DimensionMismatchError,
    DmapDimensionOverflowError,
    DmapFormatError,
    DmapHeaderError,
    DmapNonFiniteError,
    DmapTruncatedError,
    NonFiniteError,
    OutOfUnitIntervalError,
    as_unit_map,
    clamp_to_unit,
    dumps_dmap,
    elementwise,
    load_dmap,
    loads_dmap,
    new_filled,
    save_dmap,
)


def test_new_filled_zeros():
    m = new_filled(2, 3, 0.0)
    assert m.shape == (2, 3)
    assert np.all(m == 0.0)


def test_new_filled_single_cell():
    m = new_filled(1, 1, 0.5)
    assert m.shape == (1, 1) and m[0, 0] == 0.5


def test_new_filled_nan_rejected():
    with pytest.raises(NonFiniteError):
        new_filled(2, 2, float("nan"))


@pytest.mark.parametrize("h, w", [(0, 3), (3, 0), (-1, 2)])
def test_new_filled_bad_dimensions(h, w):
    with pytest.raises(DenseMapError):
        new_filled(h, w, 1.0)


def test_dmap_round_trip_constant(tmp_path):
    m = new_filled(4, 4, 0.25)
    save_dmap(m, tmp_path / "m.dmap")
    back = load_dmap(tmp_path / "m.dmap")
    assert np.array_equal(back, m)


def test_dmap_layout_is_documented():
    m = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    data = dumps_dmap(m)
    assert data.startswith(b"DMAP 2 3\n")
    assert struct.unpack("<6f", data[len(b"DMAP 2 3\n"):]) == (1, 2, 3, 4, 5, 6)


def test_dmap_truncated():
    data = b"DMAP 2 2\n" + struct.pack("<3f", 1, 2, 3)
    with pytest.raises(DmapTruncatedError):
        loads_dmap(data)


def test_dmap_inf_payload():
    data = b"DMAP 1 2\n" + struct.pack("<2f", 1.0, float("inf"))
    with pytest.raises(DmapNonFiniteError):
        loads_dmap(data)


@pytest.mark.parametrize("header", [b"DMAP 2\n", b"dmap 1 1\n", b"DMAP 1 1", b"DMAP -1 1\n", b"DMAP 0 4\n"])
def test_dmap_malformed_header(header):
    with pytest.raises(DmapHeaderError):
        loads_dmap(header + b"\0" * 16)


def test_dmap_dimension_overflow():
    with pytest.raises(DmapDimensionOverflowError):
        loads_dmap(b"DMAP 100000 100000\n")


def test_dmap_error_kinds_are_distinct():
    kinds = {DmapHeaderError, DmapDimensionOverflowError, DmapTruncatedError, DmapNonFiniteError}
    assert len(kinds) == 4
    assert all(issubclass(k, DmapFormatError) for k in kinds)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(width=32, allow_nan=False, allow_infinity=False)))
def test_dmap_round_trip_property(values):
    back = loads_dmap(dumps_dmap(values.astype(np.float64)))
    assert back.shape == values.shape
    assert np.array_equal(back.astype(np.float32), values)


def test_elementwise_examples():
    ones = new_filled(2, 2, 1.0)
    half = new_filled(2, 2, 0.5)
    assert np.all(elementwise(ones, half, "mul") == 0.5)
    r = np.random.default_rng(0).random((3, 4))
    assert np.all(elementwise(r, r, "sub") == 0.0)
    with pytest.raises(DimensionMismatchError):
        elementwise(new_filled(2, 2, 0), new_filled(2, 3, 0), "add")


def test_elementwise_ops_are_pointwise(rng):
    a, b = rng.normal(size=(3, 5)), rng.normal(size=(3, 5))
    expected = {"add": a + b, "sub": a - b, "mul": a * b, "min": np.minimum(a, b), "max": np.maximum(a, b)}
    for op, want in expected.items():
        assert np.array_equal(elementwise(a, b, op), want)
        # changing one pixel changes only that pixel
        a2 = a.copy()
        a2[1, 2] += 1.0
        diff = elementwise(a2, b, op) != elementwise(a, b, op)
        untouched = np.ones_like(diff)
        untouched[1, 2] = False
        assert not diff[untouched].any()


def test_elementwise_unknown_op():
    with pytest.raises(ValueError):
        elementwise(new_filled(1, 1, 0), new_filled(1, 1, 0), "div")


def test_elementwise_overflow_rejected():
    with pytest.raises(NonFiniteError):
        elementwise(new_filled(1, 1, 1e308), new_filled(1, 1, 1e308), "add")


def test_unit_map_never_clamps():
    with pytest.raises(OutOfUnitIntervalError):
        as_unit_map([[1.0 + 1e-16 * 2]])
    with pytest.raises(OutOfUnitIntervalError):
        as_unit_map([[-1e-300]])
    assert clamp_to_unit([[1.0 + 2e-16, -1e-300]]).tolist() == [[1.0, 0.0]]
