"""Closed space curves, their normal framings and the boundary torus of a tube.

The tube surface is ``x(t, theta) = gamma(t) + r (cos(theta) e1 + sin(theta) e2)``
for a rotation-minimizing frame ``(e1, e2)`` closed up by spreading the
holonomy uniformly along the curve.  The curve ``theta = 0`` on the torus is
the section that later gets pushed into the lattice.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PreconditionError

PRESETS = ("unknot", "torus", "trefoil", "figure_eight", "polyline")


@dataclass
class KnotCurve:
    samples: np.ndarray
    tangents: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        return self.samples, np.roll(self.samples, -1, axis=0)

    def segment_lengths(self) -> np.ndarray:
        a, b = self.segments
        return np.linalg.norm(b - a, axis=1)

    def length(self) -> float:
        return float(self.segment_lengths().sum())

    def reversed(self) -> "KnotCurve":
        """Same curve, opposite orientation, same base point."""
        idx = np.r_[0, np.arange(len(self) - 1, 0, -1)]
        return from_points(self.samples[idx], meta=dict(self.meta, reversed=True))

    def rotated(self, k: int) -> "KnotCurve":
        return from_points(np.roll(self.samples, -k, axis=0), meta=dict(self.meta))


def central_tangents(points: np.ndarray) -> np.ndarray:
    d = np.roll(points, -1, axis=0) - np.roll(points, 1, axis=0)
    n = np.linalg.norm(d, axis=1, keepdims=True)
    if np.any(n == 0):
        raise PreconditionError("degenerate tangent: repeated or back-tracking samples")
    return d / n


def from_points(points, meta: dict | None = None, check: bool = True) -> KnotCurve:
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3:
        raise PreconditionError("curve samples must have shape (N, 3)")
    if len(points) < 3:
        raise PreconditionError(f"a closed curve needs at least 3 samples, got {len(points)}")
    seg = np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1)
    if np.any(seg <= 1e-12):
        raise PreconditionError("zero-length segment in curve")
    curve = KnotCurve(points, central_tangents(points), dict(meta or {}))
    if check:
        sep = min_separation(curve, exclude=1)
        if sep <= 1e-9:
            raise PreconditionError(f"curve self-intersects (min segment distance {sep:.3g})")
    return curve


# --- presets ----------------------------------------------------------------


def _torus_knot(p, q, R, r_t):
    def f(t):
        rr = R + r_t * np.cos(q * t)
        return np.stack([rr * np.cos(p * t), rr * np.sin(p * t), r_t * np.sin(q * t)], axis=-1)

    return f


def _figure_eight(scale):
    def f(t):
        rr = 2 + np.cos(2 * t)
        return scale * np.stack([rr * np.cos(3 * t), rr * np.sin(3 * t), np.sin(4 * t)], axis=-1)

    return f


def _unknot(radius):
    def f(t):
        return radius * np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], axis=-1)

    return f


def sample_by_arclength(f, h_max: float, dense: int = 20000) -> np.ndarray:
    """Sample a closed parametrised curve on [0, 2pi) with chords <= h_max."""
    t = np.linspace(0, 2 * np.pi, dense + 1)
    pts = f(t)
    s = np.r_[0, np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))]
    n = max(3, math.ceil(s[-1] / h_max - 1e-9))
    ts = np.interp(np.arange(n) * s[-1] / n, s, t)
    return f(ts)


def make_knot(preset: str, h_max: float = 0.1, **params) -> KnotCurve:
    """Build a sampled closed curve from a preset name and its parameters.

    Presets: ``unknot`` (radius), ``torus`` / ``trefoil`` (p, q, R, r_t),
    ``figure_eight`` (scale) and ``polyline`` (path to a text file).
    """
    if h_max <= 0:
        raise PreconditionError("h_max must be positive")
    if preset == "unknot":
        radius = float(params.pop("radius", 2.0))
        if radius <= 0:
            raise PreconditionError("radius must be positive")
        f = _unknot(radius)
        meta = {"preset": preset, "radius": radius}
    elif preset in ("torus", "trefoil"):
        p = int(params.pop("p", 2))
        q = int(params.pop("q", 3))
        R = float(params.pop("R", 2.0))
        r_t = float(params.pop("r_t", 0.8))
        if p < 1 or q < 1 or math.gcd(p, q) != 1:
            raise PreconditionError(f"torus knot needs coprime p, q >= 1, got ({p}, {q})")
        if not 0 < r_t < R:
            raise PreconditionError("torus knot needs 0 < r_t < R")
        f = _torus_knot(p, q, R, r_t)
        meta = {"preset": preset, "p": p, "q": q, "R": R, "r_t": r_t}
    elif preset == "figure_eight":
        scale = float(params.pop("scale", 1.0))
        f = _figure_eight(scale)
        meta = {"preset": preset, "scale": scale}
    elif preset == "polyline":
        path = params.pop("path")
        curve = read_polyline(path)
        if np.max(curve.segment_lengths()) > h_max + 1e-12:
            raise PreconditionError(f"polyline gap exceeds h_max={h_max}")
        curve.meta = {"preset": preset, "path": str(path)}
        return curve
    else:
        raise PreconditionError(f"unknown preset {preset!r}; choose from {PRESETS}")
    if params:
        raise PreconditionError(f"unexpected parameters for {preset}: {sorted(params)}")
    meta["h_max"] = h_max
    return from_points(sample_by_arclength(f, h_max), meta)


def read_polyline(path) -> KnotCurve:
    pts = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise PreconditionError(f"bad polyline line: {line!r}")
        pts.append([float(x) for x in parts])
    return from_points(np.array(pts), {"path": str(path)})


def write_polyline(curve: KnotCurve, path) -> None:
    with open(path, "w") as fh:
        for x, y, z in curve.samples.tolist():
            fh.write(f"{x!r} {y!r} {z!r}\n")


# --- geometry of the curve --------------------------------------------------


def curvature_radii(curve: KnotCurve) -> np.ndarray:
    """Circumradius of each triple of consecutive samples."""
    a = np.roll(curve.samples, 1, axis=0)
    b = curve.samples
    c = np.roll(curve.samples, -1, axis=0)
    ab = np.linalg.norm(b - a, axis=1)
    bc = np.linalg.norm(c - b, axis=1)
    ca = np.linalg.norm(a - c, axis=1)
    area2 = np.linalg.norm(np.cross(b - a, c - a), axis=1)
    with np.errstate(divide="ignore"):
        return np.where(area2 > 0, ab * bc * ca / (2 * area2), np.inf)


def segment_distances(p0, p1, q0, q1) -> np.ndarray:
    """Distances between segment pairs [p0,p1] and [q0,q1] (arrays of shape (N, 3))."""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-14 * a * e, np.clip((b * f - c * e) / denom, 0, 1), 0.0)
        t = (b * s + f) / e
        t = np.clip(t, 0, 1)
        s = np.clip((b * t - c) / a, 0, 1)
        t = np.clip((b * s + f) / e, 0, 1)
    diff = (p0 + s[:, None] * d1) - (q0 + t[:, None] * d2)
    return np.linalg.norm(diff, axis=1)


def min_separation(curve: KnotCurve, exclude: int = 1, exclude_arc: float = 0.0) -> float:
    """Smallest distance between segments that are not neighbours.

    Pairs closer than ``exclude`` segments in index, or closer than
    ``exclude_arc`` in arc length (measured the short way round), are skipped.
    """
    n = len(curve)
    p0, p1 = curve.segments
    i, j = np.triu_indices(n, k=1)
    gap = np.minimum(j - i, n - (j - i))
    keep = gap > exclude
    if exclude_arc > 0:
        s = np.r_[0, np.cumsum(curve.segment_lengths())]
        total = s[-1]
        arc = np.abs(s[j] - s[i + 1])
        arc = np.minimum(arc, total - np.abs(s[j + 1] - s[i]))
        keep &= arc > exclude_arc
    i, j = i[keep], j[keep]
    if len(i) == 0:
        return math.inf
    best = math.inf
    for lo in range(0, len(i), 500_000):
        sl = slice(lo, lo + 500_000)
        d = segment_distances(p0[i[sl]], p1[i[sl]], p0[j[sl]], p1[j[sl]])
        best = min(best, float(d.min()))
    return best


def reach_bounds(curve: KnotCurve) -> dict:
    """Upper bounds for a tube radius: half the global self-distance and the
    smallest curvature radius.  Segment pairs within half a turn of the
    tightest bend are treated as neighbours."""
    rho = float(curvature_radii(curve).min())
    sep = min_separation(curve, exclude=1, exclude_arc=math.pi * rho)
    return {"half_separation": sep / 2, "curvature_radius": rho}


# --- framing ----------------------------------------------------------------


@dataclass
class Framing:
    e1: np.ndarray
    e2: np.ndarray
    defect_angle: float
    closure_error: float


def _reflect(v, n):
    nn = np.dot(n, n)
    return v - 2 * np.dot(n, v) / nn * n


def rm_frame(curve: KnotCurve) -> Framing:
    """Rotation-minimizing normal frames by double reflection, closed by
    rotating frame ``i`` through ``-defect * s_i / L``."""
    x, t = curve.samples, curve.tangents
    n = len(x)
    if n < 3:
        raise PreconditionError("need at least 3 samples")
    if np.any(curve.segment_lengths() <= 1e-12):
        raise PreconditionError("degenerate tangent: zero-length segment")
    ref = np.eye(3)[int(np.argmin(np.abs(t[0])))]
    e = ref - np.dot(ref, t[0]) * t[0]
    e1 = np.empty((n + 1, 3))
    e1[0] = e / np.linalg.norm(e)
    for i in range(n):
        j = (i + 1) % n
        v1 = x[j] - x[i]
        r_l = _reflect(e1[i], v1)
        t_l = _reflect(t[i], v1)
        v2 = t[j] - t_l
        e1[i + 1] = _reflect(r_l, v2) if np.dot(v2, v2) > 1e-30 else r_l
        e1[i + 1] -= np.dot(e1[i + 1], t[j]) * t[j]
        e1[i + 1] /= np.linalg.norm(e1[i + 1])
    e2_0 = np.cross(t[0], e1[0])
    defect = math.atan2(np.dot(e1[n], e2_0), np.dot(e1[n], e1[0]))

    s = np.r_[0, np.cumsum(curve.segment_lengths())]
    phi = -defect * s / s[-1]
    e2 = np.cross(t, e1[:n])
    c, sn = np.cos(phi[:n])[:, None], np.sin(phi[:n])[:, None]
    f1 = c * e1[:n] + sn * e2
    f2 = np.cross(t, f1)
    # the transported frame at s = L, corrected, must coincide with frame 0
    closed = math.cos(phi[n]) * e1[n] + math.sin(phi[n]) * np.cross(t[0], e1[n])
    return Framing(f1, f2, defect, float(np.linalg.norm(closed - f1[0])))


# --- tube -------------------------------------------------------------------


@dataclass
class TubeSurface:
    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray
    radius: float
    n_t: int
    n_theta: int
    centers: np.ndarray

    @property
    def section(self) -> np.ndarray:
        """The ``theta = 0`` ring, one point per curve sample."""
        return self.vertices.reshape(self.n_t, self.n_theta, 3)[:, 0]

    @property
    def section_normals(self) -> np.ndarray:
        return self.normals.reshape(self.n_t, self.n_theta, 3)[:, 0]

    def euler_characteristic(self) -> int:
        edges = {tuple(sorted(e)) for tri in self.triangles for e in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0]))}
        return len(self.vertices) - len(edges) + len(self.triangles)

    def edge_use_counts(self) -> np.ndarray:
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        _, counts = np.unique(np.sort(e, axis=1), axis=0, return_counts=True)
        return counts

    def is_oriented(self) -> bool:
        """Every directed edge used once: consistent orientation of a closed mesh."""
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        return len(np.unique(e, axis=0)) == len(e)

    def face_normals(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)


def tube_surface(curve: KnotCurve, frame: Framing, r: float, n_theta: int = 16) -> TubeSurface:
    if r <= 0 or n_theta < 3:
        raise PreconditionError("need r > 0 and n_theta >= 3")
    bounds = reach_bounds(curve)
    if not (r < bounds["half_separation"] and r < bounds["curvature_radius"]):
        raise PreconditionError(
            "tube self-intersects: r={:.4g} must be below half the self-distance {:.4g} "
            "and the minimum curvature radius {:.4g}".format(
                r, bounds["half_separation"], bounds["curvature_radius"]
            )
        )
    n = len(curve)
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    dirs = (
        np.cos(theta)[None, :, None] * frame.e1[:, None, :]
        + np.sin(theta)[None, :, None] * frame.e2[:, None, :]
    )
    verts = (curve.samples[:, None, :] + r * dirs).reshape(-1, 3)
    normals = dirs.reshape(-1, 3)

    i = np.arange(n)[:, None]
    j = np.arange(n_theta)[None, :]
    a = (i * n_theta + j).ravel()
    b = (((i + 1) % n) * n_theta + j).ravel()
    c = (((i + 1) % n) * n_theta + (j + 1) % n_theta).ravel()
    d = (i * n_theta + (j + 1) % n_theta).ravel()
    quad = np.stack([a, b, c, d], axis=1)
    # split along the diagonal through the lexicographically smallest corner so
    # the mesh does not depend on the orientation of the curve
    corner = np.array([min(range(4), key=lambda k: tuple(verts[q[k]])) for q in quad])
    tris = []
    for k in range(4):
        sel = quad[corner == k]
        q = np.roll(sel, -k, axis=1)
        tris.append(np.stack([q[:, 0], q[:, 1], q[:, 2]], axis=1))
        tris.append(np.stack([q[:, 0], q[:, 2], q[:, 3]], axis=1))
    tris = np.concatenate(tris)
    # orient outward
    v = verts[tris]
    fn = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    out = normals[tris].sum(axis=1)
    flip = np.einsum("ij,ij->i", fn, out) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return TubeSurface(verts, tris, normals, float(r), n, n_theta, curve.samples)


# --- export -----------------------------------------------------------------


def write_mesh_obj(tube: TubeSurface, path) -> None:
    with open(path, "w") as fh:
        for v in tube.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for t in tube.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def write_polyline_obj(points, path, closed: bool = True) -> None:
    points = np.asarray(points, dtype=float)
    with open(path, "w") as fh:
        for v in points:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        idx = list(range(1, len(points) + 1)) + ([1] if closed else [])
        fh.write("l " + " ".join(map(str, idx)) + "\n")


def write_section_json(tube: TubeSurface, path) -> None:
    Path(path).write_text(json.dumps(tube.section.tolist()))
