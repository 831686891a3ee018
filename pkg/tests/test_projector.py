import json
import math

import numpy as np
import pytest

from cubeknot.errors import PreconditionError
from cubeknot.hyperplane import Hyperplane, Window, line_crossing_interval, plane_boundary, plane_cube_anchors
from cubeknot.knot import make_knot, rm_frame, tube_surface
from cubeknot.lattice import Scale, pack
from cubeknot.projector import (
    LatticeCycle,
    NotAnnulusError,
    SurfacePath,
    bridge,
    containment_violations,
    face_tube,
    locate,
    push_to_surface,
    skeleton_cycle,
)
from cubeknot.surface import extract_surfaces, square_corners
from cubeknot.voxelizer import CubeSet, boundary_components, classify_sides, cubes_meeting


@pytest.fixture(scope="module")
def sheet():
    """The top face z = 0 of a 12 x 12 layer of cubes."""
    layer = [(x, y, -1) for x in range(-6, 6) for y in range(-6, 6)]
    (s,) = extract_surfaces(pack(np.array(layer)), 1)
    return s


def circle(cx, cy, radius, n=400):
    t = 2 * np.pi * np.arange(n) / n
    return np.stack([cx + radius * np.cos(t), cy + radius * np.sin(t), np.zeros(n)], axis=1)


def squares_meeting_circle(cx, cy, radius):
    """Unit squares of the plane whose closed region meets the circle."""
    out = set()
    for i in range(-4, 4):
        for j in range(-4, 4):
            corners = [(i + a - cx, j + b - cy) for a in (0, 1) for b in (0, 1)]
            far = max(math.hypot(*c) for c in corners)
            nx = min(max(cx, i), i + 1) - cx
            ny = min(max(cy, j), j + 1) - cy
            if math.hypot(nx, ny) <= radius <= far:
                out.add((i, j))
    return out


def top_squares(s, idx):
    return {(int(s.squares[i, 0]), int(s.squares[i, 1])) for i in idx}


def boundary_edge_count(cells):
    """Edges of a set of unit squares used by exactly one of them."""
    count = {}
    for i, j in cells:
        for e in (((i, j), (i + 1, j)), ((i, j + 1), (i + 1, j + 1)), ((i, j), (i, j + 1)), ((i + 1, j), (i + 1, j + 1))):
            count[e] = count.get(e, 0) + 1
    return sum(v == 1 for v in count.values())


def test_ring_around_a_square_centre(sheet):
    path = SurfacePath.from_points(sheet, circle(0.5, 0.5, 1.2))
    tube = face_tube(path)
    cells = top_squares(sheet, tube)
    assert cells == squares_meeting_circle(0.5, 0.5, 1.2) and len(cells) == 8
    cycle, both = skeleton_cycle(tube, sheet, return_both=True)
    assert sorted(len(c) for c in both) == [4, 12]
    assert boundary_edge_count(cells) == 16
    assert cycle.is_simple() and cycle.is_unit_steps()
    # the chosen cycle holds the smallest vertex of the two
    assert tuple(cycle.vertices[0]) == min(tuple(v) for c in both for v in c.vertices.tolist())


def test_circle_round_a_vertex_fills_a_disk(sheet):
    path = SurfacePath.from_points(sheet, circle(0.0, 0.0, 1.2))
    tube = face_tube(path)
    cells = top_squares(sheet, tube)
    assert cells == squares_meeting_circle(0.0, 0.0, 1.2) and len(cells) == 12
    with pytest.raises(NotAnnulusError, match="not an annulus"):
        skeleton_cycle(tube, sheet)


def test_path_inside_one_square(sheet):
    pts = np.array([[0.2, 0.2, 0], [0.8, 0.3, 0], [0.5, 0.7, 0]])
    path = SurfacePath.from_points(sheet, pts)
    tube = face_tube(path)
    assert top_squares(sheet, tube) == {(0, 0)}
    with pytest.raises(NotAnnulusError):
        skeleton_cycle(tube, sheet)


def test_open_path_is_rejected(sheet):
    path = SurfacePath.from_points(sheet, circle(0.5, 0.5, 1.2), closed=False)
    with pytest.raises(NotAnnulusError, match="not an annulus"):
        face_tube(path)


def test_sparse_path_walks_across_the_plane(sheet):
    pts = circle(0.5, 0.5, 2.5, n=6)
    path = SurfacePath.from_points(sheet, pts)
    assert path.gaps() > 0
    tube = face_tube(path)
    cycle = skeleton_cycle(tube, sheet)
    assert cycle.is_simple()


def test_locate(sheet):
    i = locate(sheet, (0.5, 0.5, 0.0))
    assert tuple(sheet.squares[i]) == (0, 0, 0, 2)
    assert locate(sheet, (1.0, 1.0, 0.0)) >= 0
    with pytest.raises(PreconditionError):
        locate(sheet, (0.5, 0.5, 0.5))


def test_bridge_is_symmetric(sheet):
    a = locate(sheet, (0.5, 0.5, 0))
    b = locate(sheet, (2.5, 1.5, 0))
    ab = bridge(sheet, a, b)
    assert ab is not None and len(ab) == 2
    assert bridge(sheet, b, a) == ab[::-1]
    assert bridge(sheet, a, locate(sheet, (4.5, 4.5, 0))) is None


def test_flat_plane_exit_points():
    rng = np.random.default_rng(11)
    for _ in range(5):
        n = rng.normal(size=3)
        P = Hyperplane.from_normal(n / np.linalg.norm(n), rng.uniform(-0.5, 0.5))
        s = Scale(1)
        w = Window.cube(-8, 8)
        res = plane_boundary(P, s, w)
        plus = next(sh for sh in res["sheets"] if sh.side == "+")
        anchors = plane_cube_anchors(P, s, w)
        B = P.basis()
        t = 2 * np.pi * np.arange(60) / 60
        section = P.offset * P.n + 1.5 * (np.outer(np.cos(t), B[0]) + np.outer(np.sin(t), B[1]))
        normals = np.tile(P.n, (len(section), 1))
        cubes = CubeSet(s, pack(anchors))
        path = push_to_surface(section, normals, plus, cubes=cubes)
        assert path.stats["reentries"] == 0
        for k in section:
            a, b = line_crossing_interval(P, k, anchors, s)
            expect = k + b * P.n
            assert np.linalg.norm(path.points - expect, axis=1).min() < 1e-5


def test_edge_aimed_ray_is_jittered():
    layer = [(x, y, 0) for x in range(-3, 3) for y in range(-3, 3)]
    (s,) = extract_surfaces(pack(np.array(layer)), 1)
    top = s.index_of(np.array([[0, 0, 1]]), np.array([2]))
    assert top[0] >= 0
    # the first sample sits right under the lattice edge x = 1, y free, z = 1
    section = np.array([[1.0, 0.5, 0.5], [0.7, 0.6, 0.5], [0.8, 0.2, 0.5]])
    path = push_to_surface(section, np.tile([0, 0, 1.0], (3, 1)), s)
    hit = path.points[0]
    assert abs(hit[2] - 1) < 1e-12 and abs(hit[0] - 1) <= 2e-6 and hit[0] != 1.0
    corners = square_corners(s.squares[path.squares[0], :3][None], s.squares[path.squares[0], 3:4])[0]
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    assert np.all(hit >= lo) and np.all(hit <= hi)


@pytest.fixture(scope="module")
def unknot_stage():
    c = make_knot("unknot", 0.1, radius=2)
    tube = tube_surface(c, rm_frame(c), 0.5, 16)
    m = Scale(32)
    qm = cubes_meeting(tube, m)
    plus, minus = classify_sides(boundary_components(qm), c.samples, 0.5)
    return c, tube, qm, plus


def run_projection(tube, qm, plus):
    path = push_to_surface(tube.section, tube.section_normals, plus, cubes=qm)
    squares = face_tube(path)
    return path, squares, skeleton_cycle(squares, plus, path, return_both=True)


def test_unknot_projection(unknot_stage):
    c, tube, qm, plus = unknot_stage
    path, squares, (cycle, both) = run_projection(tube, qm, plus)
    assert path.closed and path.gaps() == 0
    assert path.stats["bisection_depth"] <= 12 and path.stats["reentries"] == 0
    assert cycle.is_simple() and cycle.is_unit_steps()
    assert all(c is not None for c in both)
    assert (len(both[0]) - len(both[1])) % 2 == 0
    assert containment_violations(cycle, qm) == 0


def test_reversed_input_reverses_cycle(unknot_stage):
    c, tube, qm, plus = unknot_stage
    _, _, (cycle, _) = run_projection(tube, qm, plus)
    rc = c.reversed()
    rtube = tube_surface(rc, rm_frame(rc), 0.5, 16)
    _, _, (back, _) = run_projection(rtube, qm, plus)
    assert np.array_equal(back.vertices, cycle.reversed().vertices)


def test_cycle_json_round_trip(tmp_path):
    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
    c = LatticeCycle(4, v)
    assert c.is_simple() and c.is_unit_steps()
    back = LatticeCycle.from_json(c.to_json())
    assert back.m == 4 and np.array_equal(back.vertices, v)
    assert json.loads(c.to_json()) == {"m": 4, "vertices": v.tolist()}
    path = tmp_path / "c.json"
    c.write(path)
    assert np.array_equal(LatticeCycle.read(path).vertices, v)
    assert np.allclose(c.world(), v / 4)
    assert np.array_equal(c.reversed().vertices, v[[0, 3, 2, 1]])


@pytest.mark.parametrize("text", ['{"m": 4, "vertices": [[0,0', '{"vertices": []}', '{"m": 0, "vertices": [[0,0,0]]}', "[]"])
def test_malformed_cycle_json(text):
    with pytest.raises(PreconditionError, match="malformed"):
        LatticeCycle.from_json(text)


def test_containment_counts_missing_edges():
    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
    c = LatticeCycle(1, v)
    assert containment_violations(c, CubeSet(Scale(1), pack(np.array([[0, 0, 0]])))) == 0
    # the cube below touches every edge too; one far away touches none
    assert containment_violations(c, CubeSet(Scale(1), pack(np.array([[0, 0, -1]])))) == 0
    assert containment_violations(c, CubeSet(Scale(1), pack(np.array([[5, 5, 5]])))) == 4
    # only the edge x = 1 borders the cube at (1, 0, 0)
    assert containment_violations(c, CubeSet(Scale(1), pack(np.array([[1, 0, 0]])))) == 3
    bad = LatticeCycle(1, np.array([[0, 0, 0], [2, 0, 0], [2, 1, 0], [0, 1, 0]]))
    assert containment_violations(bad, CubeSet(Scale(1), pack(np.array([[0, 0, 0], [1, 0, 0]])))) >= 2
