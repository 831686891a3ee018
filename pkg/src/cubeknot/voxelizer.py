"""Cubes of a subdivision meeting a triangle mesh, and the two boundary sheets.

``cubes_meeting`` decides each (triangle, cube) pair with the 13-axis
separating-axis test on closed cubes.  ``boundary_components`` extracts the
boundary of the resulting cube union; for a fine enough subdivision it has
exactly two components, one on each side of the surface.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import PreconditionError, ScaleError
from .knot import TubeSurface, curvature_radii
from .lattice import CellKey, Scale, pack, unpack
from .rays import jitter_rng, on_grid, walk
from .surface import CubicalSurface, empty_side_centers, extract_surfaces, square_key

EPS = 1e-9
AUTO_CONSTANT = 6 * math.sqrt(3)
MAX_SCALE = 4096


@dataclass
class CubeSet:
    scale: Scale
    keys: np.ndarray

    def __post_init__(self):
        self.keys = np.unique(np.asarray(self.keys, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.keys)

    def anchors(self) -> np.ndarray:
        return unpack(self.keys)

    def cells(self) -> list[CellKey]:
        return [CellKey.cube(tuple(int(x) for x in a)) for a in self.anchors()]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CubeSet)
            and self.scale == other.scale
            and np.array_equal(self.keys, other.keys)
        )

    def to_json(self) -> dict:
        return {"m": self.scale.m, "anchors": self.anchors().tolist()}


# --- separating axis test ---------------------------------------------------


def tri_box_overlap(tri: np.ndarray, anchors: np.ndarray, eps: float = EPS) -> np.ndarray:
    """Closed unit cubes at ``anchors`` (P, 3) against triangles ``tri`` (P, 3, 3).

    Lattice units.  Touching counts as overlapping; the cube is inflated by
    ``eps`` along every tested axis.
    """
    c = anchors.astype(float) + 0.5
    v = tri - c[:, None, :]
    f = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 1], v[:, 0] - v[:, 2]], axis=1)
    sep = np.zeros(len(c), dtype=bool)

    def test(axis):
        p = np.einsum("pkj,pj->pk", v, axis)
        rad = 0.5 * np.abs(axis).sum(axis=1) + eps * np.linalg.norm(axis, axis=1)
        return (p.min(axis=1) > rad) | (p.max(axis=1) < -rad)

    for k in range(3):
        sep |= (v[:, :, k].min(axis=1) > 0.5 + eps) | (v[:, :, k].max(axis=1) < -0.5 - eps)
    sep |= test(np.cross(f[:, 0], f[:, 1]))
    eye = np.eye(3)
    for k in range(3):
        for j in range(3):
            sep |= test(np.cross(np.broadcast_to(eye[k], f[:, j].shape), f[:, j]))
    return ~sep


def _candidate_pairs(tri: np.ndarray, margin: float):
    lo = np.ceil(tri.min(axis=1) - margin - EPS).astype(np.int64) - 1
    hi = np.floor(tri.max(axis=1) + margin + EPS).astype(np.int64)
    ext = hi - lo + 1
    counts = ext.prod(axis=1)
    tid = np.repeat(np.arange(len(tri)), counts)
    start = np.r_[0, np.cumsum(counts)[:-1]]
    local = np.arange(counts.sum()) - np.repeat(start, counts)
    e = ext[tid]
    i = local // (e[:, 1] * e[:, 2])
    j = (local // e[:, 2]) % e[:, 1]
    k = local % e[:, 2]
    anchors = lo[tid] + np.stack([i, j, k], axis=1)
    return tid, anchors


def _chunk_hits(tri: np.ndarray, margin: float) -> np.ndarray:
    tid, anchors = _candidate_pairs(tri, margin)
    hit = tri_box_overlap(tri[tid], anchors)
    return np.unique(pack(anchors[hit]))


def cubes_meeting(
    M: TubeSurface,
    s: Scale,
    margin: float = 0.0,
    threads: int | None = None,
    chunk_pairs: int = 400_000,
) -> CubeSet:
    """Cubes of ``C_m`` whose closed support meets some triangle of ``M``.

    Candidates for a triangle are the cubes touching its bounding box dilated
    by ``margin`` lattice units (any margin gives the same answer; the
    distance bound ``4 sqrt(3)`` of the linear case is the natural upper one).
    """
    tris = M.vertices[M.triangles] * s.m
    size = (np.ceil(tris.max(axis=1) + margin) - np.floor(tris.min(axis=1) - margin) + 2).prod(axis=1)
    chunks, cur, acc = [], [], 0
    for t, sz in zip(range(len(tris)), size):
        cur.append(t)
        acc += sz
        if acc >= chunk_pairs:
            chunks.append(np.array(cur))
            cur, acc = [], 0
    if cur:
        chunks.append(np.array(cur))
    threads = threads or os.cpu_count() or 1
    if threads == 1:
        parts = [_chunk_hits(tris[c], margin) for c in chunks]
    else:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda c: _chunk_hits(tris[c], margin), chunks))
    keys = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    return CubeSet(s, keys)


def cubes_meeting_exhaustive(M: TubeSurface, s: Scale, pad: int = 2, chunk: int = 2_000_000) -> CubeSet:
    """Reference enumeration: every cube of the padded bounding window against
    every triangle, no pruning."""
    tris = M.vertices[M.triangles] * s.m
    lo = np.floor(tris.reshape(-1, 3).min(axis=0)).astype(np.int64) - pad
    hi = np.floor(tris.reshape(-1, 3).max(axis=0)).astype(np.int64) + pad
    grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij")
    cubes = np.stack([g.ravel() for g in grids], axis=1)
    hit = np.zeros(len(cubes), dtype=bool)
    per = max(1, chunk // len(tris))
    for a in range(0, len(cubes), per):
        block = cubes[a : a + per]
        ci = np.repeat(np.arange(len(block)), len(tris))
        ti = np.tile(np.arange(len(tris)), len(block))
        ok = tri_box_overlap(tris[ti], block[ci])
        hit[a : a + per] = np.bincount(ci[ok], minlength=len(block)) > 0
    return CubeSet(s, pack(cubes[hit]))


def slab_cubes(M: TubeSurface, s: Scale) -> CubeSet:
    """Every cube within ``4 sqrt(3)`` lattice units of a mesh vertex's
    bounding box: the pruned candidate region."""
    tris = M.vertices[M.triangles] * s.m
    r = 4 * math.sqrt(3)
    _, anchors = _candidate_pairs(tris, r)
    return CubeSet(s, pack(anchors))


# --- boundary ---------------------------------------------------------------


def boundary_components(QM: CubeSet, window=None, expect: int | None = 2) -> list[CubicalSurface]:
    """Boundary sheets of a cube union; raises ``ScaleError`` unless there are
    exactly ``expect`` of them."""
    if len(QM) == 0:
        raise PreconditionError("empty cube set")
    comps = extract_surfaces(QM.keys, QM.scale.m, window=window)
    if expect is not None and len(comps) != expect:
        raise ScaleError(
            f"not a bicollar at this scale: {len(comps)} boundary components",
            {"components": [c.stats() for c in comps]},
        )
    return comps


class _PolylineDistance:
    def __init__(self, points: np.ndarray):
        self.a = np.asarray(points, dtype=float)
        self.b = np.roll(self.a, -1, axis=0)
        self.tree = cKDTree(self.a)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        n = len(self.a)
        k = min(8, n)
        _, idx = self.tree.query(x, k=k)
        idx = idx.reshape(len(x), k)
        segs = np.concatenate([idx, (idx - 1) % n], axis=1)
        a, b = self.a[segs], self.b[segs]
        ab = b - a
        t = np.clip(np.einsum("pkj,pkj->pk", x[:, None] - a, ab) / np.einsum("pkj,pkj->pk", ab, ab), 0, 1)
        d = np.linalg.norm(a + t[..., None] * ab - x[:, None], axis=2)
        return d.min(axis=1)


def polyline_distance(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    return _PolylineDistance(points)(x)


def classify_sides(components: list[CubicalSurface], curve_points: np.ndarray, r: float):
    """Label the sheet facing the core of the tube ``-`` and the other ``+``.

    A square is judged by the centre of the empty cube beyond it, which stays
    at least half a cube away from the mesh; it is inner when that centre is
    closer than ``r`` to the core curve.  Returns ``(plus, minus)``.  Every
    square of a sheet must agree.
    """
    if len(components) != 2:
        raise PreconditionError("side classification needs exactly two components")
    dist = _PolylineDistance(curve_points)
    labels = []
    for comp in components:
        d = dist(empty_side_centers(comp) / comp.m)
        inner = d < r
        if inner.all():
            labels.append("-")
        elif not inner.any():
            labels.append("+")
        else:
            raise ScaleError(
                "scale too coarse: sheet straddles the tube surface",
                {"inner_fraction": float(inner.mean())},
            )
    if sorted(labels) != ["+", "-"]:
        raise ScaleError(f"both sheets labelled {labels[0]!r}")
    for comp, lab in zip(components, labels):
        comp.side = lab
    plus = components[labels.index("+")]
    minus = components[labels.index("-")]
    return plus, minus


def choose_scale(M: TubeSurface, r: float, policy: str | int = "auto") -> Scale:
    """Subdivision for a tube of radius ``r``.

    ``auto``: the smallest power of two with ``m r >= 6 sqrt 3`` and
    ``m rho >= 6 sqrt 3`` (``rho`` the minimum curvature radius of the core
    curve).  An integer policy is returned as is.
    """
    if policy != "auto":
        return Scale(int(policy))
    if r <= 0:
        raise PreconditionError("tube radius must be positive")
    from .knot import KnotCurve

    core = KnotCurve(M.centers, np.zeros_like(M.centers))
    rho = float(curvature_radii(core).min())
    need = AUTO_CONSTANT / min(r, rho)
    if need > MAX_SCALE:
        raise PreconditionError(f"scale overflow: would need m >= {need:.3g} (limit {MAX_SCALE})")
    m = 2
    while m < need - 1e-12:
        m *= 2
    return Scale(m)


# --- ray checks ---------------------------------------------------------------


def surface_lookup(surface: CubicalSurface) -> dict[int, int]:
    return {int(k): i for i, k in enumerate(surface.keys)}


def first_hit(
    table: dict[int, int], origin, direction, t_max: float, seed: int = 0, max_attempts: int = 16
):
    """First square of a surface crossed by a ray (lattice units).

    Non-generic crossings (edges, vertices, rays inside lattice planes) are
    retried with a seeded jitter of 1e-6 lattice units.  Returns
    ``(t, point, square_index)`` or ``None`` if nothing is hit before ``t_max``.
    """
    o0 = np.asarray(origin, dtype=float)
    d0 = np.asarray(direction, dtype=float)
    o, d = o0, d0
    for attempt in range(max_attempts):
        if not on_grid(o, d):
            result = _scan(table, o, d, t_max)
            if result != "tie":
                if result is None:
                    return None
                t, idx = result
                return t, o + t * d, idx
        rng = jitter_rng(seed, o0, attempt)
        o = o0 + rng.uniform(-1e-6, 1e-6, 3)
        d = d0 + rng.uniform(-1e-6, 1e-6, 3)
        d = d / np.linalg.norm(d)
    raise ScaleError("ray stays non-generic after jitter")


def _scan(table, o, d, t_max):
    for t, anchor, axis, _, tie in walk(o, d, 0.0, t_max):
        key = int(square_key(np.array([anchor]), np.array([axis]))[0])
        if tie:
            return "tie"
        if key in table:
            return t, table[key]
    return None


def count_crossings(table: dict[int, int], origin, direction, t_max: float) -> tuple[int, bool]:
    n = 0
    tie = on_grid(origin, direction)
    for _, anchor, axis, _, t in walk(origin, direction, 0.0, t_max):
        tie |= t
        key = int(square_key(np.array([anchor]), np.array([axis]))[0])
        n += key in table
    return n, tie


def bicollar_ray_test(
    M: TubeSurface,
    plus: CubicalSurface,
    minus: CubicalSurface,
    n_rays: int = 200,
    seed: int = 0,
    t_max: float | None = None,
) -> dict:
    """Cast rays from sampled mesh points along the outward normal and its
    opposite; each must cross the matching sheet exactly once within
    ``t_max`` lattice units (default ``4 sqrt 3``)."""
    m = plus.m
    t_max = 4 * math.sqrt(3) if t_max is None else t_max
    rng = np.random.default_rng(seed)
    tri = rng.integers(0, len(M.triangles), n_rays)
    bary = rng.dirichlet(np.ones(3), n_rays)
    v = M.vertices[M.triangles[tri]]
    pts = np.einsum("pk,pkj->pj", bary, v) * m
    normals = M.face_normals()[tri]
    tp, tm = surface_lookup(plus), surface_lookup(minus)
    failures = []
    for k, (x, n) in enumerate(zip(pts, normals)):
        for attempt in range(16):
            cp, tie1 = count_crossings(tp, x, n, t_max)
            cm, tie2 = count_crossings(tm, x, -n, t_max)
            if not (tie1 or tie2):
                break
            j = jitter_rng(seed, x, attempt)
            x = x + j.uniform(-1e-6, 1e-6, 3)
        if cp != 1 or cm != 1:
            failures.append({"ray": k, "plus_crossings": cp, "minus_crossings": cm})
    return {"rays": n_rays, "failures": failures, "t_max": t_max}


def vertices_inside(M: TubeSurface, QM: CubeSet) -> bool:
    """Every mesh vertex lies in the union of the cubes."""
    p = M.vertices * QM.scale.m
    base = np.floor(p).astype(np.int64)
    ok = np.zeros(len(p), dtype=bool)
    # a vertex on a lattice plane belongs to the cubes on either side
    for off in np.ndindex(2, 2, 2):
        cand = base - np.array(off) * (np.isclose(p, base, atol=EPS))
        ok |= np.isin(pack(cand), QM.keys)
    return bool(ok.all())
