import io
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from airhighway.errors import DimensionMismatch, FieldFormatError, OutOfBounds
from airhighway.grid import Grid, ScalarFieldND, interpolate, read_field


def test_header_layout():
    g = Grid((0.0, -1.0), (2.0, 1.0), (3, 4))
    f = ScalarFieldND(g, np.arange(12.0).reshape(3, 4), -0.5)
    data = f.to_bytes()
    assert data[:4] == b"HJVF"
    assert struct.unpack("<II", data[4:12]) == (1, 2)
    assert struct.unpack("<Qdd", data[12:36]) == (3, 0.0, 2.0)
    assert struct.unpack("<Qdd", data[36:60]) == (4, -1.0, 1.0)
    assert struct.unpack("<d", data[60:68]) == (-0.5,)
    assert np.array_equal(np.frombuffer(data[68:], "<f8"), np.arange(12.0))


@given(st.integers(1, 4), st.integers(0, 2**31), st.floats(-10, 0))
def test_roundtrip(ndim, seed, t):
    rng = np.random.default_rng(seed)
    counts = tuple(rng.integers(3, 6, ndim))
    lo = tuple(rng.uniform(-5, 0, ndim))
    g = Grid(lo, tuple(np.add(lo, rng.uniform(0.5, 5, ndim))), counts)
    f = ScalarFieldND(g, rng.normal(size=counts), t)
    back = read_field(io.BytesIO(f.to_bytes()))
    assert back.grid == g and back.time == f.time
    assert np.array_equal(back.values, f.values)


def test_bad_records():
    g = Grid((0, 0), (1, 1), (3, 3))
    data = ScalarFieldND(g, np.zeros((3, 3))).to_bytes()
    with pytest.raises(FieldFormatError):
        read_field(io.BytesIO(b"XXXX" + data[4:]))
    with pytest.raises(FieldFormatError):
        read_field(io.BytesIO(data[:-8]))
    with pytest.raises(DimensionMismatch):
        ScalarFieldND(Grid((0, 0), (1, 1), (2, 3)), np.zeros((2, 3)))
    with pytest.raises(FieldFormatError):
        ScalarFieldND(g, np.full((3, 3), np.nan))


@given(st.integers(0, 2**31))
def test_interpolation_exact_on_affine(seed):
    rng = np.random.default_rng(seed)
    g = Grid((0, 0, 0), (1, 2, 3), (4, 5, 3))
    a, c = rng.normal(size=3), rng.normal()
    V = g.states() @ a + c
    P = rng.uniform(g.mins, g.maxs, (20, 3))
    assert np.allclose(interpolate(g, V, P), P @ a + c)


def test_interpolation_out_of_bounds():
    g = Grid((0, 0), (1, 1), (3, 3))
    with pytest.raises(OutOfBounds):
        interpolate(g, np.zeros((3, 3)), [[1.2, 0.5]])
