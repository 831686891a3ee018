"""Cubes meeting a hyperplane, computed exactly on bounded windows.

These are the linear cases of the construction: the cube union ``Q_P`` of a
hyperplane, the face of a disjoint cube closest to the plane, the crossing
interval of a normal line with ``Q_P`` and the lattice path obtained from a
pair of orthogonal planes.  They double as oracles for the curved pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DisconnectedError, InvariantViolation, PreconditionError
from .lattice import CellKey, Scale, pack, unpack
from .surface import CubicalSurface, empty_side_centers, extract_surfaces, square_corners, square_edges

EPS = 1e-9


@dataclass(frozen=True)
class Hyperplane:
    """The plane ``{x : <x, normal> = offset}`` with a unit normal."""

    normal: tuple[float, ...]
    offset: float = 0.0

    def __post_init__(self):
        n = tuple(float(x) for x in self.normal)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise PreconditionError(f"normal {n} is not a unit vector")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_normal(cls, normal, offset: float = 0.0) -> "Hyperplane":
        """Normalise ``normal``; ``offset`` refers to the normalised equation."""
        n = np.asarray(normal, dtype=float)
        return cls(tuple(n / np.linalg.norm(n)), offset)

    @classmethod
    def through(cls, normal, point) -> "Hyperplane":
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        return cls(tuple(n), float(np.dot(n, point)))

    @property
    def n(self) -> np.ndarray:
        return np.asarray(self.normal)

    @property
    def dim(self) -> int:
        return len(self.normal)

    def signed_distance(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.n - self.offset

    def project(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x - np.multiply.outer(self.signed_distance(x), self.n)

    def basis(self) -> np.ndarray:
        """Orthonormal basis of the direction space, shape (d-1, d)."""
        q, _ = np.linalg.qr(np.column_stack([self.n, np.eye(self.dim)]))
        return q[:, 1 : self.dim].T

    def axis(self) -> int | None:
        """Index of the coordinate axis when the normal is +-e_i exactly."""
        nz = [i for i, x in enumerate(self.normal) if x != 0.0]
        if len(nz) == 1 and abs(self.normal[nz[0]]) == 1.0:
            return nz[0]
        return None


@dataclass(frozen=True)
class Window:
    """Cubes with integer anchors in ``[lo, hi)`` (lattice units of the scale)."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(int(x) for x in self.lo)
        hi = tuple(int(x) for x in self.hi)
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise PreconditionError(f"empty window {lo}..{hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, lo: int, hi: int, d: int = 3) -> "Window":
        return cls((lo,) * d, (hi,) * d)

    def padded(self, k: int) -> "Window":
        return Window(tuple(a - k for a in self.lo), tuple(b + k for b in self.hi))

    def anchors(self) -> np.ndarray:
        grids = np.meshgrid(*[np.arange(a, b) for a, b in zip(self.lo, self.hi)], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)

    @property
    def size(self) -> int:
        return int(np.prod([b - a for a, b in zip(self.lo, self.hi)]))


def _cube_range(P: Hyperplane, anchors: np.ndarray, m: int):
    """min and max of <v, n> over the corners of each cube, in lattice units."""
    n = P.n
    base = anchors @ n
    return base + np.minimum(n, 0).sum(), base + np.maximum(n, 0).sum()


def meets_plane(P: Hyperplane, anchors: np.ndarray, s: Scale) -> np.ndarray:
    """Closed-cube test ``Q cap P != {}`` for an array of cube anchors."""
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.int64))
    ax = P.axis()
    if ax is not None:
        # exact: the plane is x_ax = +-offset, compared in lattice units as rationals
        target = Fraction(P.offset) * s.m * int(np.sign(P.normal[ax]))
        return np.array([int(a) <= target <= int(a) + 1 for a in anchors[:, ax]], dtype=bool)
    lo, hi = _cube_range(P, anchors, s.m)
    off = P.offset * s.m
    return (lo - EPS <= off) & (off <= hi + EPS)


def plane_cube_anchors(P: Hyperplane, s: Scale, w: Window) -> np.ndarray:
    anchors = w.anchors()
    return anchors[meets_plane(P, anchors, s)]


def plane_cubes(P: Hyperplane, s: Scale, w: Window) -> list[CellKey]:
    """Cubes of the window whose closed support meets ``P``, sorted."""
    if P.dim != len(w.lo):
        raise PreconditionError("plane and window dimensions differ")
    return [CellKey.cube(tuple(a)) for a in plane_cube_anchors(P, s, w)]


def nearest_face(Q: CellKey, P: Hyperplane, s: Scale) -> CellKey:
    """The face of cube ``Q`` made of the points closest to ``P``.

    Along each axis where the normal vanishes the face keeps its full extent;
    along the others it sits at the end nearer to the plane.
    """
    if Q.dim != Q.ambient_dim:
        raise PreconditionError("nearest_face expects a top-dimensional cube")
    a = np.asarray([Q.anchor])
    if meets_plane(P, a, s)[0]:
        raise PreconditionError(f"cube {Q.anchor} meets the plane")
    n = P.n
    lo, _ = _cube_range(P, a, s.m)
    above = lo[0] > P.offset * s.m
    anchor = list(Q.anchor)
    axes = []
    for i, ni in enumerate(n):
        if abs(ni) <= 1e-12:
            axes.append(i)
        elif (ni < 0) == above:
            # distance decreases toward the high end of this axis
            anchor[i] += 1
    return CellKey(tuple(anchor), tuple(axes))


def clip_line(origin, direction, anchors: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parameter intervals of the line ``origin + t*direction`` inside unit cubes.

    Everything in lattice units.  Returns (t_lo, t_hi, hit_mask).
    """
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    a = np.asarray(anchors, dtype=float)
    t_lo = np.full(len(a), -np.inf)
    t_hi = np.full(len(a), np.inf)
    ok = np.ones(len(a), dtype=bool)
    for i in range(len(o)):
        if abs(d[i]) < 1e-15:
            ok &= (a[:, i] - EPS <= o[i]) & (o[i] <= a[:, i] + 1 + EPS)
            continue
        t0 = (a[:, i] - o[i]) / d[i]
        t1 = (a[:, i] + 1 - o[i]) / d[i]
        t_lo = np.maximum(t_lo, np.minimum(t0, t1))
        t_hi = np.minimum(t_hi, np.maximum(t0, t1))
    ok &= t_lo <= t_hi + EPS
    return t_lo, t_hi, ok


def interval_union(t_lo: np.ndarray, t_hi: np.ndarray, tol: float = EPS) -> list[tuple[float, float]]:
    order = np.argsort(t_lo, kind="stable")
    out: list[list[float]] = []
    for lo, hi in zip(t_lo[order], t_hi[order]):
        if out and lo <= out[-1][1] + tol:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([float(lo), float(hi)])
    return [tuple(x) for x in out]


def line_crossing_interval(P: Hyperplane, k, QP, s: Scale) -> tuple[float, float]:
    """The interval ``[a, b]`` with ``{k + t n : a <= t <= b} = L_k cap Q_P``.

    ``QP`` is a collection of cubes (``CellKey`` or an anchor array) that must
    cover the crossing.  Raises :class:`DisconnectedError` if the union of the
    per-cube intervals has a gap.
    """
    k = np.asarray(k, dtype=float)
    if abs(P.signed_distance(k)) > 1e-7:
        raise PreconditionError("point is not on the plane")
    anchors = _as_anchors(QP)
    t_lo, t_hi, ok = clip_line(k * s.m, P.n, anchors)
    if not np.any(ok):
        raise PreconditionError("normal line misses the supplied cubes; window too small")
    pieces = interval_union(t_lo[ok], t_hi[ok])
    if len(pieces) != 1:
        raise DisconnectedError(f"normal line meets Q_P in {len(pieces)} intervals: {pieces}")
    a, b = float(pieces[0][0]) / s.m, float(pieces[0][1]) / s.m
    if not a < 0 < b:
        raise InvariantViolation(f"plane point not interior to Q_P: interval [{a}, {b}]")
    return a, b


def exit_points(P: Hyperplane, points, QP, s: Scale) -> tuple[np.ndarray, np.ndarray]:
    """The images of ``points`` under the two normal-line projections onto the
    boundary of ``Q_P`` (the far end on the + side and on the - side)."""
    points = np.atleast_2d(points)
    anchors = _as_anchors(QP)
    plus, minus = [], []
    for k in points:
        a, b = line_crossing_interval(P, k, anchors, s)
        plus.append(k + b * P.n)
        minus.append(k + a * P.n)
    return np.array(plus), np.array(minus)


def _as_anchors(cells) -> np.ndarray:
    if isinstance(cells, np.ndarray):
        return np.atleast_2d(cells).astype(np.int64)
    return np.array([c.anchor for c in cells], dtype=np.int64)


def slab_window(P: Hyperplane, s: Scale, w: Window) -> np.ndarray:
    """Anchors of the window whose cube lies within ``4 sqrt(d)`` (unit-cube
    diameters) of the plane: the only cubes the linear constructions need."""
    anchors = w.anchors()
    lo, hi = _cube_range(P, anchors, s.m)
    off = P.offset * s.m
    dist = np.maximum(0.0, np.maximum(lo - off, off - hi))
    return anchors[dist <= 4 * np.sqrt(P.dim) + EPS]


# --- boundary of Q_P on a window --------------------------------------------


def plane_boundary(P: Hyperplane, s: Scale, w: Window, pad: int = 3) -> dict:
    """Boundary sheets of ``Q_P`` computed on ``w`` padded by ``pad`` cells.

    Returns the sheets reaching into the inner window, labelled by the side of
    the plane they face, plus the fragments cut off by the outer window.
    """
    if P.dim != 3:
        raise PreconditionError("boundary extraction is implemented for R^3")
    big = w.padded(pad)
    keys = pack(plane_cube_anchors(P, s, big))
    surfaces = extract_surfaces(keys, s.m, window=(big.lo, big.hi))
    lo, hi = np.asarray(w.lo), np.asarray(w.hi)
    sheets, fragments = [], []
    for surf in surfaces:
        inside = np.all((surf.anchors >= lo) & (surf.anchors <= hi), axis=1)
        side = np.sign(P.signed_distance(empty_side_centers(surf) / s.m))
        surf.side = "+" if side.mean() > 0 else "-"
        (sheets if inside.any() else fragments).append(surf)
    return {"sheets": sheets, "fragments": fragments, "cubes": keys, "window": big}


# --- pair of orthogonal planes ----------------------------------------------


@dataclass
class PlanePairConstruction:
    scale: Scale
    sheet: CubicalSurface
    band: np.ndarray
    vertices: np.ndarray
    edges: list[CellKey]


def plane_pair_construction(
    P1: Hyperplane, P2: Hyperplane, s: Scale, w: Window, pad: int = 3
) -> PlanePairConstruction:
    """Push ``P1 cap P2`` into the 1-skeleton.

    The + sheet ``E`` of ``Q_P1`` carries the normal projection of the line
    ``P1 cap P2``, which is ``E cap P2``; the squares of ``E`` meeting ``P2``
    form a band whose boundary on the + side of ``P2`` is the returned path.
    """
    if P1.dim != 3 or P2.dim != 3:
        raise PreconditionError("plane pairs are implemented for R^3")
    if abs(np.dot(P1.n, P2.n)) > 1e-9:
        raise PreconditionError("non-orthogonal planes")
    sheets = [x for x in plane_boundary(P1, s, w, pad)["sheets"] if x.side == "+"]
    if not sheets:
        raise PreconditionError("window too small: no + sheet of Q_P1")
    E = sheets[0]

    corners = square_corners(E.anchors, E.normals) / s.m
    val = corners @ P2.n - P2.offset
    in_band = (val.min(axis=1) <= EPS) & (val.max(axis=1) >= -EPS)
    band = np.nonzero(in_band)[0]
    if len(band) == 0:
        raise PreconditionError("window too small: P1 cap P2 misses the window")

    nb = E.neighbors[band]
    open_edge = (nb >= 0) & ~in_band[np.maximum(nb, 0)]
    rows, slots = np.nonzero(open_edge)
    e_anchor, e_axis = square_edges(E.anchors[band], E.normals[band])
    ea = e_anchor[rows, slots]
    eb = e_axis[rows, slots]
    eye = np.eye(3, dtype=np.int64)
    p0, p1 = ea, ea + eye[eb]
    mid = (p0 + p1) / 2 / s.m
    plus = mid @ P2.n - P2.offset > 0
    lo, hi = np.asarray(w.lo), np.asarray(w.hi)
    in_w = np.all((p0 >= lo) & (p0 <= hi) & (p1 >= lo) & (p1 <= hi), axis=1)
    sel = plus & in_w
    ea, eb, p0, p1 = ea[sel], eb[sel], p0[sel], p1[sel]
    if len(ea) == 0:
        raise PreconditionError("window too small: band boundary leaves the window")

    ekeys = np.unique(pack(ea) * 4 + eb)  # an edge may border two band squares only once
    ea, eb = unpack(ekeys // 4), ekeys % 4
    p0, p1 = ea, ea + eye[eb]
    verts, inv = np.unique(np.concatenate([p0, p1]), axis=0, return_inverse=True)
    inv = inv.ravel()
    ne = len(ea)
    src, dst = inv[:ne], inv[ne:]
    deg = np.bincount(np.concatenate([src, dst]), minlength=len(verts))
    if deg.max() > 2:
        raise InvariantViolation("band boundary branches: not a simple path")
    g = coo_matrix((np.ones(ne), (src, dst)), shape=(len(verts), len(verts)))
    ncomp, comp = connected_components(g, directed=False)
    if ncomp != 1:
        raise PreconditionError(f"window too small: path clipped into {ncomp} pieces")

    direction = np.cross(P1.n, P2.n)
    adj: dict[int, list[int]] = {i: [] for i in range(len(verts))}
    for a, b in zip(src, dst):
        adj[int(a)].append(int(b))
        adj[int(b)].append(int(a))
    ends = [i for i in adj if len(adj[i]) == 1]
    if len(ends) != 2:
        raise InvariantViolation("band boundary inside the window is not an open path")
    start = min(ends, key=lambda i: float(verts[i] @ direction))
    order = [start]
    prev = -1
    while len(order) < len(verts):
        nxt = [j for j in adj[order[-1]] if j != prev]
        prev = order[-1]
        order.append(nxt[0])
    path = verts[order]
    edges = []
    for a, b in zip(path[:-1], path[1:]):
        ax = int(np.nonzero(a != b)[0][0])
        edges.append(CellKey(tuple(int(x) for x in np.minimum(a, b)), (ax,)))
    return PlanePairConstruction(s, E, band, path, edges)


def plane_pair_cycle(P1: Hyperplane, P2: Hyperplane, s: Scale, w: Window) -> list[CellKey]:
    """Ordered lattice edges of the path replacing ``P1 cap P2`` inside ``w``."""
    return plane_pair_construction(P1, P2, s, w).edges
