"""Boundary surfaces of finite sets of lattice cubes in R^3.

The boundary of a union of closed cubes is the set of squares with exactly
one coface in the set.  Around an edge where four boundary squares meet (two
diagonal solid cubes), adjacency is resolved by pairing the squares that bound
the same empty cube, which turns the boundary into a closed 2-manifold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .lattice import CellKey, lookup, member, pack, unpack

_E = np.eye(3, dtype=np.int64)
# the two in-square axes for each normal axis
_OTHER = np.array([[1, 2], [0, 2], [0, 1]], dtype=np.int64)


def square_key(anchor: np.ndarray, normal: np.ndarray) -> np.ndarray:
    return (pack(anchor) << 2) | np.asarray(normal, dtype=np.int64)


def edge_key(anchor: np.ndarray, axis: np.ndarray) -> np.ndarray:
    return (pack(anchor) << 2) | np.asarray(axis, dtype=np.int64)


def split_key(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keys = np.asarray(keys, dtype=np.int64)
    return unpack(keys >> 2), keys & 3


def _pair_table() -> list[list[tuple[int, int]]]:
    # wall w sits between cube w and cube w+1 (cyclically) around an edge;
    # walls bounding one run of empty cubes are glued together
    table = []
    for pattern in range(16):
        bits = [(pattern >> i) & 1 for i in range(4)]
        pairs = []
        if 0 < sum(bits) < 4:
            for i in range(4):
                if bits[i] == 0 and bits[(i - 1) % 4] == 1:
                    j = i
                    while bits[(j + 1) % 4] == 0:
                        j = (j + 1) % 4
                    pairs.append(((i - 1) % 4, j))
        table.append(pairs)
    return table


_PAIRS = _pair_table()


def edge_ring(anchor: np.ndarray, axis: np.ndarray):
    """Cubes and walls around lattice edges, in cyclic order.

    Returns ``cubes`` of shape (N, 4, 3) and wall anchors/normals of shapes
    (N, 4, 3) and (N, 4); wall ``w`` separates cube ``w`` from cube ``w+1``.
    """
    anchor = np.asarray(anchor, dtype=np.int64)
    axis = np.asarray(axis, dtype=np.int64)
    u = _OTHER[axis, 0]
    v = _OTHER[axis, 1]
    eu, ev = _E[u], _E[v]
    cubes = np.stack([anchor, anchor - eu, anchor - eu - ev, anchor - ev], axis=1)
    walls = np.stack([anchor, anchor - eu, anchor - ev, anchor], axis=1)
    normals = np.stack([u, v, u, v], axis=1)
    return cubes, walls, normals


def square_edges(anchor: np.ndarray, normal: np.ndarray):
    """The four edges of each square as (anchor, axis) arrays of shape (N, 4, ...)."""
    u = _OTHER[normal, 0]
    v = _OTHER[normal, 1]
    eu, ev = _E[u], _E[v]
    anchors = np.stack([anchor, anchor + ev, anchor, anchor + eu], axis=1)
    axes = np.stack([u, u, v, v], axis=1)
    return anchors, axes


def square_corners(anchor: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Corner slots 0..3 = p, p+e_u, p+e_v, p+e_u+e_v; shape (N, 4, 3)."""
    u = _OTHER[normal, 0]
    v = _OTHER[normal, 1]
    eu, ev = _E[u], _E[v]
    return np.stack([anchor, anchor + eu, anchor + ev, anchor + eu + ev], axis=1)


def corner_slot(sq_anchor, sq_normal, point) -> np.ndarray:
    u = _OTHER[sq_normal, 0]
    v = _OTHER[sq_normal, 1]
    d = np.asarray(point) - np.asarray(sq_anchor)
    rows = np.arange(len(d))
    return d[rows, u] + 2 * d[rows, v]


def edge_slot(sq_anchor, sq_normal, e_anchor, e_axis) -> np.ndarray:
    u = _OTHER[sq_normal, 0]
    same = np.all(np.asarray(e_anchor) == np.asarray(sq_anchor), axis=1)
    return np.where(e_axis == u, np.where(same, 0, 1), np.where(same, 2, 3))


@dataclass
class CubicalSurface:
    """A closed (or window-clipped) surface made of lattice squares.

    ``squares`` holds rows (i, j, k, normal_axis) sorted by packed key;
    ``neighbors[s, e]`` is the square glued to ``s`` across its edge slot ``e``
    (-1 where the surface is open).  ``outward`` is +1 when the empty side of
    the square lies toward increasing coordinate along its normal.
    """

    m: int
    squares: np.ndarray
    outward: np.ndarray
    neighbors: np.ndarray
    n_vertices: int = 0
    n_edges: int = 0
    side: str | None = None
    keys: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.keys = square_key(self.squares[:, :3], self.squares[:, 3])

    def __len__(self) -> int:
        return len(self.squares)

    @property
    def n_faces(self) -> int:
        return len(self.squares)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    @property
    def area(self) -> float:
        return self.n_faces / self.m**2

    @property
    def anchors(self) -> np.ndarray:
        return self.squares[:, :3]

    @property
    def normals(self) -> np.ndarray:
        return self.squares[:, 3]

    def index_of(self, anchor, normal) -> np.ndarray:
        return lookup(self.keys, square_key(np.atleast_2d(anchor), np.atleast_1d(normal)))

    def centroids(self) -> np.ndarray:
        """Square centres in lattice units."""
        c = self.anchors.astype(float) + 0.5
        rows = np.arange(len(c))
        c[rows, self.normals] -= 0.5
        return c

    def cells(self) -> list[CellKey]:
        return [
            CellKey(tuple(int(x) for x in row[:3]), tuple(int(a) for a in _OTHER[row[3]]))
            for row in self.squares
        ]

    def is_closed(self) -> bool:
        return bool(np.all(self.neighbors >= 0))

    def adjacent(self, a: int, b: int) -> bool:
        return a == b or bool(np.any(self.neighbors[a] == b))

    def stats(self) -> dict:
        return {
            "side": self.side,
            "faces": self.n_faces,
            "edges": self.n_edges,
            "vertices": self.n_vertices,
            "euler_characteristic": self.euler_characteristic,
            "area": self.area,
        }


def empty_side_centers(surface: CubicalSurface) -> np.ndarray:
    """Centres (lattice units) of the cube outside the set beyond each square."""
    c = surface.centroids()
    rows = np.arange(len(c))
    c[rows, surface.normals] += 0.5 * surface.outward
    return c


def boundary_squares(cube_keys: np.ndarray, window=None):
    """Squares with exactly one coface among ``cube_keys``.

    Returns (anchors, normals, outward).  With an integer ``window`` (lo, hi)
    on cube anchors, faces whose empty coface lies outside the window are
    dropped: their status is unknown.
    """
    cube_keys = np.unique(np.asarray(cube_keys, dtype=np.int64))
    cubes = unpack(cube_keys)
    anchors, normals, outward = [], [], []
    for a in range(3):
        for sgn in (1, -1):
            nb = cubes + sgn * _E[a]
            empty = ~member(cube_keys, pack(nb))
            if window is not None:
                lo, hi = np.asarray(window[0]), np.asarray(window[1])
                empty &= np.all((nb >= lo) & (nb < hi), axis=1)
            c = cubes[empty]
            anchors.append(c + _E[a] if sgn > 0 else c)
            normals.append(np.full(len(c), a, dtype=np.int64))
            outward.append(np.full(len(c), sgn, dtype=np.int64))
    return np.concatenate(anchors), np.concatenate(normals), np.concatenate(outward)


def _glue(cube_keys, sq_anchor, sq_normal, sq_keys, window=None):
    """Resolved neighbour table plus the list of glued (a, b, edge) pairs."""
    n = len(sq_keys)
    e_anchor, e_axis = square_edges(sq_anchor, sq_normal)
    ekeys = edge_key(e_anchor.reshape(-1, 3), e_axis.reshape(-1))
    uniq, first = np.unique(ekeys, return_index=True)
    ua = e_anchor.reshape(-1, 3)[first]
    ub = e_axis.reshape(-1)[first]
    cubes, walls, wnormals = edge_ring(ua, ub)
    inside = member(cube_keys, pack(cubes.reshape(-1, 3))).reshape(-1, 4)
    known = np.ones(len(uniq), dtype=bool)
    if window is not None:
        lo, hi = np.asarray(window[0]), np.asarray(window[1])
        known = np.all((cubes >= lo) & (cubes < hi), axis=(1, 2))
    pattern = (inside * np.array([1, 2, 4, 8])).sum(axis=1)
    wall_idx = lookup(sq_keys, square_key(walls.reshape(-1, 3), wnormals.reshape(-1))).reshape(-1, 4)

    pa, pb, pe = [], [], []
    for pat in range(1, 15):
        sel = np.nonzero((pattern == pat) & known)[0]
        if len(sel) == 0:
            continue
        for w0, w1 in _PAIRS[pat]:
            a = wall_idx[sel, w0]
            b = wall_idx[sel, w1]
            ok = (a >= 0) & (b >= 0)
            pa.append(a[ok])
            pb.append(b[ok])
            pe.append(sel[ok])
    if pa:
        pa, pb, pe = np.concatenate(pa), np.concatenate(pb), np.concatenate(pe)
    else:
        pa = pb = pe = np.zeros(0, dtype=np.int64)

    neighbors = np.full((n, 4), -1, dtype=np.int64)
    slot_a = edge_slot(sq_anchor[pa], sq_normal[pa], ua[pe], ub[pe])
    slot_b = edge_slot(sq_anchor[pb], sq_normal[pb], ua[pe], ub[pe])
    neighbors[pa, slot_a] = pb
    neighbors[pb, slot_b] = pa
    return neighbors, pa, pb, ua[pe], ub[pe]


def _vertex_classes(sq_anchor, sq_normal, n, pa, pb, e_anchor, e_axis):
    """Label every (square, corner) by its vertex of the resolved complex."""
    src, dst = [], []
    for end in (0, 1):
        pt = e_anchor + end * _E[e_axis]
        ca = 4 * pa + corner_slot(sq_anchor[pa], sq_normal[pa], pt)
        cb = 4 * pb + corner_slot(sq_anchor[pb], sq_normal[pb], pt)
        src.append(ca)
        dst.append(cb)
    src = np.concatenate(src) if src else np.zeros(0, dtype=np.int64)
    dst = np.concatenate(dst) if dst else np.zeros(0, dtype=np.int64)
    g = coo_matrix((np.ones(len(src)), (src, dst)), shape=(4 * n, 4 * n))
    _, labels = connected_components(g, directed=False)
    return labels


def extract_surfaces(cube_keys: np.ndarray, m: int, window=None) -> list[CubicalSurface]:
    """Connected components of the boundary of a cube set, largest first."""
    cube_keys = np.unique(np.asarray(cube_keys, dtype=np.int64))
    anchor, normal, outward = boundary_squares(cube_keys, window)
    keys = square_key(anchor, normal)
    order = np.argsort(keys)
    anchor, normal, outward, keys = anchor[order], normal[order], outward[order], keys[order]
    return _components(cube_keys, m, anchor, normal, outward, keys, window)


def _components(cube_keys, m, anchor, normal, outward, keys, window):
    n = len(keys)
    if n == 0:
        return []
    neighbors, pa, pb, ea, eb = _glue(cube_keys, anchor, normal, keys, window)
    g = coo_matrix((np.ones(len(pa)), (pa, pb)), shape=(n, n))
    ncomp, comp = connected_components(g, directed=False)
    vlabel = _vertex_classes(anchor, normal, n, pa, pb, ea, eb)

    surfaces = []
    for c in range(ncomp):
        idx = np.nonzero(comp == c)[0]
        remap = np.full(n, -1, dtype=np.int64)
        remap[idx] = np.arange(len(idx))
        nb = neighbors[idx]
        nb = np.where(nb >= 0, remap[np.maximum(nb, 0)], -1)
        n_edges = int(np.sum(comp[pa] == c))
        n_vertices = len(np.unique(vlabel.reshape(n, 4)[idx]))
        sq = np.column_stack([anchor[idx], normal[idx]])
        surfaces.append(
            CubicalSurface(m, sq, outward[idx], nb, n_vertices=n_vertices, n_edges=n_edges)
        )
    surfaces.sort(key=lambda s: (-len(s), tuple(s.squares[0])))
    return surfaces


def subsurface_topology(surface: CubicalSurface, selected: np.ndarray) -> dict:
    """Euler characteristic and component count of a set of squares of a surface."""
    selected = np.asarray(selected, dtype=np.int64)
    n = len(surface)
    mask = np.zeros(n, dtype=bool)
    mask[selected] = True
    nb = surface.neighbors
    s_idx, slot = np.nonzero(mask[:, None] & (nb >= 0))
    t_idx = nb[s_idx, slot]
    inner = mask[t_idx]
    s_in, slot_in, t_in = s_idx[inner], slot[inner], t_idx[inner]
    keep = s_in < t_in
    pa, pb, slot_a = s_in[keep], t_in[keep], slot_in[keep]
    n_inner_edges = len(pa)
    n_boundary_edges = int(np.sum(mask[:, None] & ~((nb >= 0) & mask[np.maximum(nb, 0)])))

    e_anchor, e_axis = square_edges(surface.anchors[pa], surface.normals[pa])
    ea = e_anchor[np.arange(len(pa)), slot_a]
    eb = e_axis[np.arange(len(pa)), slot_a]
    vlabel = _vertex_classes(surface.anchors, surface.normals, n, pa, pb, ea, eb).reshape(n, 4)
    n_vertices = len(np.unique(vlabel[selected]))

    g = coo_matrix((np.ones(len(pa)), (pa, pb)), shape=(n, n))
    _, comp = connected_components(g, directed=False)
    n_comp = len(np.unique(comp[selected]))
    return {
        "faces": len(selected),
        "edges": n_inner_edges + n_boundary_edges,
        "vertices": n_vertices,
        "euler_characteristic": n_vertices - n_inner_edges - n_boundary_edges + len(selected),
        "components": n_comp,
        "vertex_labels": vlabel,
    }


def write_obj(surface: CubicalSurface, path, scale: bool = True) -> None:
    """Write the surface as an OBJ of quads (world coordinates when ``scale``)."""
    write_squares_obj(surface.squares, surface.m, path, scale)


def write_squares_obj(squares: np.ndarray, m: int, path, scale: bool = True) -> None:
    """OBJ of quads for rows (i, j, k, normal_axis), sharing vertices."""
    squares = np.asarray(squares)
    corners = square_corners(squares[:, :3], squares[:, 3])
    quads = corners[:, [0, 1, 3, 2]].reshape(-1, 3)
    verts, inv = np.unique(quads, axis=0, return_inverse=True)
    inv = inv.reshape(-1, 4)
    f = 1.0 / m if scale else 1.0
    with open(path, "w") as fh:
        for v in verts:
            fh.write(f"v {v[0] * f:.9g} {v[1] * f:.9g} {v[2] * f:.9g}\n")
        for q in inv:
            fh.write("f " + " ".join(str(i + 1) for i in q) + "\n")
