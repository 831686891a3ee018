"""Push a curve on the tube surface onto the outer cube sheet, then into the
1-skeleton.

Stage 1 casts a ray along the outward normal from every sample of the section
and keeps the first square of the ``+`` sheet it crosses; gaps between
non-adjacent hits are closed by bisecting the section.  Stage 2 takes the
squares carrying the resulting path (an annulus on the sheet) and returns one
of its two boundary cycles, which consists of lattice edges.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvariantViolation, PreconditionError, ScaleError
from .lattice import pack
from .rays import cells_along
from .surface import (
    CubicalSurface,
    edge_ring,
    square_corners,
    square_edges,
    subsurface_topology,
)
from .voxelizer import CubeSet, first_hit, surface_lookup

# square corner slot -> the two edge slots meeting there
_CORNER_EDGES = {0: (0, 2), 1: (0, 3), 2: (1, 2), 3: (1, 3)}
# edge slot -> its two corner slots
_EDGE_CORNERS = {0: (0, 1), 1: (2, 3), 2: (0, 2), 3: (1, 3)}


class NotAnnulusError(ScaleError):
    pass


@dataclass
class SurfacePath:
    """Points (lattice units) on a cubical surface with their carrying squares."""

    surface: CubicalSurface
    points: np.ndarray
    squares: np.ndarray
    closed: bool = True
    stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points)

    def world(self) -> np.ndarray:
        return self.points / self.surface.m

    def gaps(self) -> int:
        """Consecutive points on squares that are neither equal nor adjacent."""
        n = len(self.squares)
        stop = n if self.closed else n - 1
        return sum(
            not self.surface.adjacent(int(self.squares[i]), int(self.squares[(i + 1) % n]))
            for i in range(stop)
        )

    @classmethod
    def from_points(cls, surface: CubicalSurface, points, closed: bool = True) -> "SurfacePath":
        """Locate each point (lattice units) on a square of ``surface``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.array([locate(surface, p) for p in points], dtype=np.int64)
        return cls(surface, points, idx, closed)

    def to_json(self) -> dict:
        return {
            "m": self.surface.m,
            "points": self.world().tolist(),
            "squares": self.surface.squares[self.squares].tolist(),
        }


def locate(surface: CubicalSurface, p, tol: float = 1e-9) -> int:
    """Index of a square of ``surface`` containing the point ``p`` (lattice units)."""
    p = np.asarray(p, dtype=float)
    for a in range(3):
        if abs(p[a] - round(p[a])) > tol:
            continue
        base = np.floor(p + tol).astype(np.int64)
        base[a] = round(p[a])
        others = [i for i in range(3) if i != a]
        for du in (0, -1):
            for dv in (0, -1):
                anchor = base.copy()
                # on an edge, the square may lie on either side
                if du and abs(p[others[0]] - round(p[others[0]])) > tol:
                    continue
                if dv and abs(p[others[1]] - round(p[others[1]])) > tol:
                    continue
                anchor[others[0]] += du
                anchor[others[1]] += dv
                idx = int(surface.index_of(anchor, a)[0])
                if idx >= 0:
                    return idx
    raise PreconditionError(f"point {p.tolist()} does not lie on the surface")


def push_to_surface(
    section,
    normals,
    surface: CubicalSurface,
    seed: int = 0,
    t_max: float | None = None,
    max_depth: int = 12,
    cubes: CubeSet | None = None,
) -> SurfacePath:
    """Project a closed polyline (world coordinates) onto ``surface`` along
    its outward normals.

    ``cubes``, when given, is the cube union bounded by ``surface``; each
    ray is then checked to meet it in one contiguous run of cells.  Rays
    from the section samples are counted under ``reentries``; rays from
    bisection midpoints, which may graze a cube edge, under
    ``reentries_refined``.

    Bisection that runs out of depth is a jump across a square the rays only
    graze; it is closed with the shortest chain of at most three adjacent
    squares (counted under ``bridged``) before giving up.
    """
    m = surface.m
    t_max = 4 * math.sqrt(3) if t_max is None else t_max
    table = surface_lookup(surface)
    inside = set(cubes.keys.tolist()) if cubes is not None else None
    reentries = [0, 0]  # section rays, bisection rays
    n_rays = 0

    def cast(x, n, refined=True):
        nonlocal n_rays
        n = n / np.linalg.norm(n)
        hit = first_hit(table, x, n, t_max, seed)
        if hit is None:
            raise ScaleError("bicollar violation: outward ray misses the + sheet", {"origin": (x / m).tolist()})
        n_rays += 1
        if inside is not None and _reenters(inside, x, n, t_max):
            reentries[refined] += 1
        return hit[1], hit[2]

    x = np.asarray(section, dtype=float) * m
    nv = np.asarray(normals, dtype=float)
    base = [cast(x[i], nv[i], False) for i in range(len(x))]
    pts, sqs = [], []
    max_used = 0
    bridged = 0
    centroids = surface.centroids()

    def heal(xa, na, ha, xb, nb, hb, depth):
        nonlocal max_used, bridged
        if surface.adjacent(ha[1], hb[1]):
            return []
        if depth >= max_depth:
            # the projection jumps across a square the rays only graze
            chain = bridge(surface, ha[1], hb[1])
            if chain is None:
                raise ScaleError("bisection depth exhausted while healing a gap")
            bridged += 1
            return [(centroids[c], c) for c in chain]
        max_used = max(max_used, depth + 1)
        xm = (xa + xb) / 2
        nm = (na + nb) / np.linalg.norm(na + nb)
        hm = cast(xm, nm)
        return heal(xa, na, ha, xm, nm, hm, depth + 1) + [hm] + heal(xm, nm, hm, xb, nb, hb, depth + 1)

    for i in range(len(x)):
        j = (i + 1) % len(x)
        pts.append(base[i][0])
        sqs.append(base[i][1])
        for p, s in heal(x[i], nv[i], base[i], x[j], nv[j], base[j], 0):
            pts.append(p)
            sqs.append(s)
    stats = {
        "rays": n_rays,
        "bisection_depth": max_used,
        "bridged": bridged,
        "reentries": reentries[0],
        "reentries_refined": reentries[1],
    }
    return SurfacePath(surface, np.array(pts), np.array(sqs, dtype=np.int64), True, stats)


def bridge(surface: CubicalSurface, a: int, b: int, max_len: int = 3) -> list[int] | None:
    """Intermediate squares of a shortest chain of at most ``max_len``
    adjacent steps from ``a`` to ``b``, or ``None``.  Symmetric in the
    endpoints, so reversing a path reverses its bridges."""
    if a > b:
        chain = bridge(surface, b, a, max_len)
        return None if chain is None else chain[::-1]
    prev = {a: -1}
    frontier = [a]
    for _ in range(max_len):
        nxt = []
        for s in frontier:
            for n in surface.neighbors[s]:
                n = int(n)
                if n >= 0 and n not in prev:
                    prev[n] = s
                    nxt.append(n)
        if b in prev:
            chain = []
            s = prev[b]
            while s != a:
                chain.append(s)
                s = prev[s]
            return chain[::-1]
        frontier = nxt
    return None


def _reenters(inside: set, x, n, t_max) -> bool:
    cells, _ = cells_along(x, n, 0.0, t_max)
    state = np.array([int(pack(np.array(c))) in inside for c in cells])
    # membership along the ray must be one contiguous run
    runs = np.count_nonzero(np.diff(state.astype(np.int8)) == 1) + int(state[0])
    return runs > 1


def face_tube(path: SurfacePath, surface: CubicalSurface | None = None) -> np.ndarray:
    """Indices of the squares met by the path.

    Consecutive points on non-adjacent squares lying in one lattice plane are
    joined by a walk through the squares their segment crosses.
    """
    surface = path.surface if surface is None else surface
    if not path.closed:
        raise NotAnnulusError("tube not an annulus: path is open")
    tube = set(int(s) for s in path.squares)
    n = len(path)
    for i in range(n):
        a, b = int(path.squares[i]), int(path.squares[(i + 1) % n])
        if surface.adjacent(a, b):
            continue
        sa, sb = surface.squares[a], surface.squares[b]
        if sa[3] == sb[3] and sa[sa[3]] == sb[sb[3]]:
            tube.update(_planar_walk(surface, path.points[i], path.points[(i + 1) % n], int(sa[3]), int(sa[sa[3]])))
    idx = np.array(sorted(tube), dtype=np.int64)
    topo = subsurface_topology(surface, idx)
    if topo["components"] != 1:
        raise ScaleError(f"disconnected tube ({topo['components']} pieces): sampling too sparse")
    return idx


def _planar_walk(surface, p, q, axis, level):
    others = [i for i in range(3) if i != axis]
    o = np.array([p[others[0]], p[others[1]], 0.5])
    d = np.array([q[others[0]] - p[others[0]], q[others[1]] - p[others[1]], 0.0])
    length = np.linalg.norm(d)
    if length == 0:
        return []
    cells, _ = cells_along(o, d / length, 0.0, length)
    out = []
    for c in cells:
        anchor = np.zeros(3, dtype=np.int64)
        anchor[others[0]], anchor[others[1]], anchor[axis] = c[0], c[1], level
        idx = int(surface.index_of(anchor, axis)[0])
        if idx < 0:
            raise ScaleError("path segment leaves the surface")
        out.append(idx)
    return out


# --- lattice cycles ---------------------------------------------------------


@dataclass
class LatticeCycle:
    m: int
    vertices: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.vertices)

    def world(self) -> np.ndarray:
        return self.vertices / self.m

    def steps(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    def is_unit_steps(self) -> bool:
        return bool(np.all(np.abs(self.steps()).sum(axis=1) == 1))

    def is_simple(self) -> bool:
        return len(np.unique(self.vertices, axis=0)) == len(self.vertices)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Edges as (minimal endpoint, axis)."""
        nxt = np.roll(self.vertices, -1, axis=0)
        axis = np.argmax(np.abs(nxt - self.vertices), axis=1)
        return np.minimum(self.vertices, nxt), axis

    def reversed(self) -> "LatticeCycle":
        return LatticeCycle(self.m, np.r_[self.vertices[:1], self.vertices[:0:-1]])

    def to_json(self) -> str:
        return json.dumps({"m": self.m, "vertices": self.vertices.tolist()}, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "LatticeCycle":
        try:
            data = json.loads(text)
            m = int(data["m"])
            verts = np.asarray(data["vertices"], dtype=np.int64)
        except (ValueError, KeyError, TypeError) as exc:
            raise PreconditionError(f"malformed cycle JSON: {exc}") from exc
        if verts.ndim != 2 or verts.shape[1] != 3 or len(verts) < 4:
            raise PreconditionError("malformed cycle JSON: vertices must be a list of [i, j, k]")
        cycle = cls(m, verts)
        if not cycle.is_unit_steps():
            raise PreconditionError("malformed cycle: consecutive vertices must differ by one unit step")
        return cycle

    def write(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def read(cls, path) -> "LatticeCycle":
        return cls.from_json(Path(path).read_text())

    def write_obj(self, path) -> None:
        from .knot import write_polyline_obj

        write_polyline_obj(self.world(), path)


def _edge_endpoints(anchor, normal, slot):
    corners = square_corners(np.atleast_2d(anchor), np.atleast_1d(normal))[0]
    a, b = _EDGE_CORNERS[slot]
    return corners[a], corners[b]


def _trace_boundary(surface: CubicalSurface, tube: np.ndarray) -> list[list[tuple[int, ...]]]:
    mask = np.zeros(len(surface), dtype=bool)
    mask[tube] = True
    nb = surface.neighbors
    anchors, normals = surface.anchors, surface.normals
    corners = square_corners(anchors[tube], normals[tube])
    corner_of = {int(s): {tuple(c): k for k, c in enumerate(cs)} for s, cs in zip(tube, corners)}
    e_anchor, e_axis = square_edges(anchors[tube], normals[tube])
    edge_of = {int(s): [(tuple(e_anchor[i, k]), int(e_axis[i, k])) for k in range(4)] for i, s in enumerate(tube)}

    def is_boundary(s, k):
        n = nb[s, k]
        return n < 0 or not mask[n]

    def corners_of(s):
        if s not in corner_of:
            cs = square_corners(anchors[s : s + 1], normals[s : s + 1])[0]
            corner_of[s] = {tuple(c): k for k, c in enumerate(cs)}
            ea, ex = square_edges(anchors[s : s + 1], normals[s : s + 1])
            edge_of[s] = [(tuple(ea[0, k]), int(ex[0, k])) for k in range(4)]
        return corner_of[s]

    def rotate(s, k, v):
        """Next boundary edge around vertex ``v`` starting from boundary edge (s, k)."""
        for _ in range(64):
            c = corners_of(s)[v]
            k2 = [e for e in _CORNER_EDGES[c] if e != k][0]
            if is_boundary(s, k2):
                return s, k2
            n = int(nb[s, k2])
            lattice_edge = edge_of[s][k2]
            corners_of(n)
            back = [e for e in range(4) if nb[n, e] == s and edge_of[n][e] == lattice_edge]
            if not back:
                raise InvariantViolation("inconsistent surface gluing")
            s, k = n, back[0]
        raise InvariantViolation("vertex link does not close")

    todo = {(int(s), k) for s in tube for k in range(4) if is_boundary(int(s), k)}
    cycles = []
    while todo:
        start = min(todo)
        s, k = start
        a, b = (tuple(x) for x in _edge_endpoints(anchors[s], normals[s], k))
        verts = [a]
        cur = (s, k)
        head = b
        while True:
            todo.discard(cur)
            verts.append(head)
            nxt = rotate(cur[0], cur[1], head)
            if nxt == start:
                break
            if nxt not in todo:
                raise InvariantViolation("boundary trace revisits an edge")
            p, q = (tuple(x) for x in _edge_endpoints(anchors[nxt[0]], normals[nxt[0]], nxt[1]))
            head = q if p == head else p
            cur = nxt
        if verts[-1] != verts[0]:
            raise InvariantViolation("boundary trace did not close")
        cycles.append(verts[:-1])
    return cycles


def _remove_small_loops(verts: list[tuple[int, ...]], max_loop: int = 6):
    """Cut off short loops at repeated vertices (each bounding at most two
    squares); returns ``None`` if a long loop remains."""
    verts = list(verts)
    while True:
        seen: dict[tuple[int, ...], int] = {}
        rep = None
        for i, v in enumerate(verts):
            if v in seen:
                rep = (seen[v], i)
                break
            seen[v] = i
        if rep is None:
            return verts
        i, j = rep
        inner = j - i
        outer = len(verts) - inner
        if min(inner, outer) > max_loop:
            return None
        if inner <= outer:
            verts = verts[:i] + verts[j:]
        else:
            verts = verts[i:j]


def _canonical(verts: np.ndarray) -> np.ndarray:
    start = min(range(len(verts)), key=lambda i: tuple(verts[i]))
    return np.roll(verts, -start, axis=0)


def _orient_like(verts: np.ndarray, path_points: np.ndarray) -> np.ndarray:
    """Orient a cycle to run the same way round as a dense closed path."""
    _, idx = cKDTree(path_points).query(verts.astype(float))
    n = len(path_points)
    d = np.diff(np.r_[idx, idx[0]])
    d = (d + n // 2) % n - n // 2
    if d.sum() < 0:
        verts = np.r_[verts[:1], verts[:0:-1]]
    return verts


def skeleton_cycle(
    tube: np.ndarray,
    surface: CubicalSurface,
    path: SurfacePath | None = None,
    return_both: bool = False,
):
    """One boundary cycle of an annulus of squares.

    The annulus test is: connected, Euler characteristic 0 and exactly two
    boundary cycles.  Of the two cycles the one containing the
    lexicographically smallest vertex is returned, unless it cannot be made
    simple; it starts at that vertex and, when ``path`` is given, runs the
    same way round as the path.
    """
    tube = np.unique(np.asarray(tube, dtype=np.int64))
    topo = subsurface_topology(surface, tube)
    if topo["components"] != 1 or topo["euler_characteristic"] != 0:
        raise NotAnnulusError(
            f"tube not an annulus: {topo['components']} components, chi={topo['euler_characteristic']}"
        )
    loops = _trace_boundary(surface, tube)
    if len(loops) != 2:
        raise NotAnnulusError(f"tube not an annulus: {len(loops)} boundary cycles")
    if (len(loops[0]) - len(loops[1])) % 2:
        raise InvariantViolation("annulus boundary lengths differ by an odd number")
    cleaned = [_remove_small_loops(l) for l in loops]
    order = sorted(range(2), key=lambda i: min(loops[i]))
    cycles = []
    for i in order:
        if cleaned[i] is None:
            cycles.append(None)
            continue
        v = np.array(cleaned[i], dtype=np.int64)
        if path is not None:
            v = _orient_like(v, path.points)
        v = _canonical(v)
        if path is not None:
            v = _orient_like(v, path.points)
        cycles.append(LatticeCycle(surface.m, v))
    chosen = next((c for c in cycles if c is not None), None)
    if chosen is None:
        raise ScaleError("both boundary cycles of the tube fail simplicity")
    if return_both:
        return chosen, cycles
    return chosen


def containment_violations(cycle: LatticeCycle, cubes: CubeSet) -> int:
    """Edges of the cycle that are not an edge of any cube of ``cubes``
    (or are not unit lattice steps)."""
    bad = int(np.sum(np.abs(cycle.steps()).sum(axis=1) != 1))
    anchor, axis = cycle.edges()
    ring, _, _ = edge_ring(anchor, axis)
    inside = np.isin(pack(ring.reshape(-1, 3)), cubes.keys).reshape(-1, 4)
    return bad + int(np.sum(~inside.any(axis=1)))
