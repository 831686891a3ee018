import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cubeknot.lattice import (
    CellKey,
    Scale,
    cell_support,
    cofaces_of,
    faces_of,
    lookup,
    member,
    pack,
    unpack,
    window_cubes,
)


def cells(d=3):
    anchors = st.tuples(*[st.integers(-5, 5)] * d)
    axes = st.sets(st.integers(0, d - 1)).map(tuple)
    return st.builds(CellKey, anchors, axes)


def test_support_of_unit_cube():
    b = cell_support(CellKey((0, 0, 0), (0, 1, 2)), Scale(1))
    assert b.lo.tolist() == [0, 0, 0] and b.hi.tolist() == [1, 1, 1]


def test_support_of_translated_square():
    b = cell_support(CellKey((2, -1, 0), (0, 1)), Scale(1))
    assert b.lo.tolist() == [2, -1, 0] and b.hi.tolist() == [3, 0, 0]


def test_support_scales_with_m():
    b = cell_support(CellKey.cube((0, 0, 0)), Scale(4))
    assert b.hi.tolist() == [0.25, 0.25, 0.25]


@pytest.mark.parametrize("dim,k,count", [(3, 2, 6), (3, 1, 12), (3, 0, 8), (2, 0, 4), (2, 1, 4)])
def test_face_counts(dim, k, count):
    c = CellKey((0, 0, 0), tuple(range(dim)))
    faces = faces_of(c, k)
    assert len(faces) == count == len(set(faces))
    assert all(f.dim == k for f in faces)


def test_faces_out_of_range():
    with pytest.raises(ValueError):
        faces_of(CellKey.cube((0, 0, 0)), 4)


def test_cofaces_examples():
    square = CellKey((0, 0, 0), (0, 1))
    assert cofaces_of(square, 3) == [CellKey.cube((0, 0, -1)), CellKey.cube((0, 0, 0))]
    assert len(cofaces_of(CellKey((0, 0, 0), (0,)), 2)) == 4
    assert len(cofaces_of(CellKey.vertex((0, 0, 0)), 1)) == 6


def test_cofaces_out_of_range():
    with pytest.raises(ValueError):
        cofaces_of(CellKey((0, 0, 0), (0, 1)), 1)


def test_canonical_form():
    assert CellKey((1, 2, 3), (2, 0)) == CellKey((1, 2, 3), (0, 2))
    with pytest.raises(ValueError):
        CellKey((0, 0, 0), (1, 1))
    with pytest.raises(ValueError):
        CellKey((0, 0), (2,))


@given(cells())
def test_faces_and_cofaces_agree(c):
    for k in range(c.dim + 1):
        for f in faces_of(c, k):
            assert c in cofaces_of(f, c.dim)
    for k in range(c.dim, 4):
        for g in cofaces_of(c, k):
            assert c in faces_of(g, c.dim)


@given(cells(), st.integers(1, 8))
def test_faces_lie_in_support(c, m):
    s = Scale(m)
    box = cell_support(c, s)
    for f in faces_of(c, 0):
        assert box.contains(np.array(f.anchor) / m, tol=1e-12)


def test_every_square_has_two_cubes_in_window():
    # exhaustive over the squares of a 3x3x3 window
    window = set(window_cubes((0, 0, 0), (3, 3, 3)))
    squares = {f for c in window for f in faces_of(c, 2)}
    for sq in squares:
        assert len(cofaces_of(sq, 3)) == 2
    inner = [sq for sq in squares if all(q in window for q in cofaces_of(sq, 3))]
    # 3 orientations x 2 interior planes x 9 squares
    assert len(inner) == 54


@given(st.lists(st.tuples(*[st.integers(-(2**19), 2**19 - 1)] * 3), min_size=1, max_size=50))
def test_pack_round_trip(points):
    arr = np.array(points, dtype=np.int64)
    assert np.array_equal(unpack(pack(arr)), arr)


def test_pack_preserves_order():
    pts = np.array(list(itertools.product(range(-2, 3), repeat=3)))
    keys = pack(pts)
    assert np.all(np.diff(keys) > 0)


def test_pack_overflow():
    with pytest.raises(OverflowError):
        pack(np.array([[2**19, 0, 0]]))


def test_member_and_lookup():
    keys = np.sort(pack(np.array([[0, 0, 0], [1, 2, 3], [-4, 0, 1]])))
    q = pack(np.array([[1, 2, 3], [9, 9, 9]]))
    assert member(keys, q).tolist() == [True, False]
    idx = lookup(keys, q)
    assert keys[idx[0]] == q[0] and idx[1] == -1
    assert lookup(np.array([], dtype=np.int64), q).tolist() == [-1, -1]
