"""Knot diagrams of closed polylines and the invariants used to compare them.

A diagram is the orthogonal projection along a direction ``d``.  Plane
coordinates use a right-handed frame ``(u, w)`` with ``u x w`` along ``d``,
so the viewer sits on the ``+d`` side; the over strand is the one with the
larger depth ``<p, d>``.  A crossing is positive when the over strand turns
counterclockwise into the under strand (``cross(over, under) > 0``).

Lattice input (integer vertices) is projected exactly: integer directions,
integer plane coordinates and rational crossing parameters.
"""

from __future__ import annotations

import cmath
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import CubeKnotError, PreconditionError

MAX_ATTEMPTS = 64
FLOAT_TOL = 1e-9


class GenericityError(CubeKnotError):
    pass


class CapExceeded(CubeKnotError):
    pass


# --- Laurent polynomials ----------------------------------------------------


class LaurentPoly:
    """Integer Laurent polynomial in one variable, stored as exponent -> coefficient."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        if isinstance(terms, LaurentPoly):
            terms = terms.terms
        self.terms = {int(e): int(c) for e, c in (terms or {}).items() if c}

    @classmethod
    def monomial(cls, exp: int, coeff: int = 1) -> "LaurentPoly":
        return cls({exp: coeff})

    def __add__(self, other):
        out = dict(self.terms)
        for e, c in LaurentPoly(other).terms.items():
            out[e] = out.get(e, 0) + c
        return LaurentPoly(out)

    def __neg__(self):
        return LaurentPoly({e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-LaurentPoly(other))

    def __mul__(self, other):
        if isinstance(other, int):
            return LaurentPoly({e: c * other for e, c in self.terms.items()})
        out: dict[int, int] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                out[e1 + e2] = out.get(e1 + e2, 0) + c1 * c2
        return LaurentPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = LaurentPoly.monomial(0)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, int):
            other = LaurentPoly.monomial(0, other)
        return isinstance(other, LaurentPoly) and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def shift(self, k: int) -> "LaurentPoly":
        return LaurentPoly({e + k: c for e, c in self.terms.items()})

    def mirror(self) -> "LaurentPoly":
        """Substitute the variable by its inverse."""
        return LaurentPoly({-e: c for e, c in self.terms.items()})

    def substitute_power(self, k: int) -> "LaurentPoly":
        """Rewrite in ``y = x**k``; every exponent must be divisible by ``k``."""
        if any(e % k for e in self.terms):
            raise ValueError(f"exponents not divisible by {k}")
        return LaurentPoly({e // k: c for e, c in self.terms.items()})

    def __call__(self, x):
        return sum(c * x**e for e, c in self.terms.items())

    def exact_divide(self, other: "LaurentPoly") -> "LaurentPoly":
        q: dict[int, int] = {}
        r = LaurentPoly(self)
        d_hi = max(other.terms)
        d_c = other.terms[d_hi]
        while r:
            hi = max(r.terms)
            c, rem = divmod(r.terms[hi], d_c)
            if rem or hi - d_hi < min(self.terms) - min(other.terms):
                raise ValueError("polynomial division is not exact")
            q[hi - d_hi] = c
            r = r - other * LaurentPoly.monomial(hi - d_hi, c)
        return LaurentPoly(q)

    def to_dict(self) -> dict[str, int]:
        return {str(e): self.terms[e] for e in sorted(self.terms)}

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, reverse=True):
            c = self.terms[e]
            mono = "" if e == 0 else ("A" if e == 1 else f"A^{e}")
            coef = str(abs(c)) if abs(c) != 1 or not mono else ""
            parts.append(("-" if c < 0 else "+") + coef + mono)
        s = "".join(parts)
        return s[1:] if s[0] == "+" else s


A = LaurentPoly.monomial(1)
DELTA = -(LaurentPoly.monomial(2)) - LaurentPoly.monomial(-2)


# --- diagrams ---------------------------------------------------------------


@dataclass
class Crossing:
    over: tuple[int, object]  # (segment, parameter along it)
    under: tuple[int, object]
    sign: int


@dataclass
class KnotDiagram:
    direction: np.ndarray
    crossings: list[Crossing]
    gauss: list[tuple[int, bool]]  # (crossing, is_over) in curve order
    exact: bool
    attempts: int = 1
    perturbed: bool = False
    stats: dict = field(default_factory=dict)

    @property
    def n_crossings(self) -> int:
        return len(self.crossings)

    @property
    def writhe(self) -> int:
        return sum(c.sign for c in self.crossings)

    def signed_gauss(self) -> list[int]:
        """Gauss code as signed 1-based labels: positive for over passages."""
        return [(i + 1) * (1 if over else -1) for i, over in self.gauss]

    def is_alternating(self) -> bool:
        g = self.gauss
        return all(g[k][1] != g[(k + 1) % len(g)][1] for k in range(len(g)))

    def pd_code(self) -> list[tuple[int, int, int, int]]:
        return pd_from_gauss(self.gauss, [c.sign for c in self.crossings])

    def mirror(self) -> "KnotDiagram":
        """The same projection with every crossing switched."""
        flipped = [Crossing(c.under, c.over, -c.sign) for c in self.crossings]
        gauss = [(i, not o) for i, o in self.gauss]
        return KnotDiagram(self.direction, flipped, gauss, self.exact, self.attempts, self.perturbed)

    def flip(self, k: int) -> "KnotDiagram":
        """Switch a single crossing."""
        cr = list(self.crossings)
        c = cr[k]
        cr[k] = Crossing(c.under, c.over, -c.sign)
        gauss = [(i, (not o) if i == k else o) for i, o in self.gauss]
        return KnotDiagram(self.direction, cr, gauss, self.exact, self.attempts, self.perturbed)


def _is_lattice(points: np.ndarray) -> bool:
    return np.issubdtype(points.dtype, np.integer)


def _frame(d):
    d = np.asarray(d)
    ref = np.zeros(3, dtype=d.dtype)
    ref[int(np.argmin(np.abs(d)))] = 1
    u = np.cross(d, ref)
    w = np.cross(d, u)
    return u, w


def _sgn(x, tol):
    if tol == 0:
        return np.sign(x)
    return np.where(x > tol, 1, np.where(x < -tol, -1, 0))


def _project(points, d, exact):
    u, w = _frame(d)
    if not exact:
        u = u / np.linalg.norm(u)
        w = w / np.linalg.norm(w)
        d = d / np.linalg.norm(d)
    return np.c_[points @ u, points @ w], points @ d


def _find_crossings(points, d, exact):
    """Crossings of the projection along ``d``, or raise GenericityError."""
    xy, depth = _project(points, d, exact)
    n = len(points)
    p0, p1 = xy, np.roll(xy, -1, axis=0)
    z0, z1 = depth, np.roll(depth, -1)
    v = p1 - p0
    scale = float(np.abs(xy).max()) + 1.0 if not exact else 0.0
    tol = 0 if exact else FLOAT_TOL * scale
    lengths = np.abs(v).sum(axis=1)
    if np.any(lengths <= tol):
        raise GenericityError("a segment projects to a point")
    # consecutive segments folding back onto each other
    vn = np.roll(v, -1, axis=0)
    cr = v[:, 0] * vn[:, 1] - v[:, 1] * vn[:, 0]
    dot = (v * vn).sum(axis=1)
    if np.any((_sgn(cr, tol * scale) == 0) & (dot < 0)):
        raise GenericityError("consecutive segments overlap in projection")

    lo, hi = np.minimum(p0, p1), np.maximum(p0, p1)
    found = []
    block = max(1, 2_000_000 // max(n, 1))
    for start in range(0, n, block):
        i = np.arange(start, min(n, start + block))[:, None]
        j = np.arange(n)[None, :]
        # each unordered pair once; neighbours share a vertex
        keep = (j > i) & (j != i + 1) & ~((i == 0) & (j == n - 1))
        keep &= (lo[i, 0] <= hi[j, 0] + tol) & (lo[j, 0] <= hi[i, 0] + tol)
        keep &= (lo[i, 1] <= hi[j, 1] + tol) & (lo[j, 1] <= hi[i, 1] + tol)
        ii, jj = np.nonzero(keep)
        ii = ii + start
        if len(ii) == 0:
            continue

        def orient(a, b, c):
            return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])

        t = tol * scale
        d1 = _sgn(orient(p0[jj], p1[jj], p0[ii]), t)
        d2 = _sgn(orient(p0[jj], p1[jj], p1[ii]), t)
        d3 = _sgn(orient(p0[ii], p1[ii], p0[jj]), t)
        d4 = _sgn(orient(p0[ii], p1[ii], p1[jj]), t)
        proper = (d1 * d2 < 0) & (d3 * d4 < 0)
        touch = ~proper & (d1 * d2 <= 0) & (d3 * d4 <= 0)
        if np.any(touch):
            raise GenericityError("a vertex projects onto another segment")
        found.extend(zip(ii[proper].tolist(), jj[proper].tolist()))

    crossings = []
    points_seen = set()
    for a, b in found:
        pa, qa, pb, qb = p0[a], p1[a], p0[b], p1[b]
        if exact:
            pa, qa, pb, qb = ([int(x) for x in arr] for arr in (pa, qa, pb, qb))
            num_a = (qb[0] - pb[0]) * (pa[1] - pb[1]) - (qb[1] - pb[1]) * (pa[0] - pb[0])
            den = (qa[0] - pa[0]) * (qb[1] - pb[1]) - (qa[1] - pa[1]) * (qb[0] - pb[0])
            num_b = (qa[0] - pa[0]) * (pa[1] - pb[1]) - (qa[1] - pa[1]) * (pa[0] - pb[0])
            ta, tb = Fraction(num_a, den), Fraction(num_b, den)
            za = int(z0[a]) + ta * (int(z1[a]) - int(z0[a]))
            zb = int(z0[b]) + tb * (int(z1[b]) - int(z0[b]))
            key = (pa[0] + ta * (qa[0] - pa[0]), pa[1] + ta * (qa[1] - pa[1]))
            same_depth = za == zb
        else:
            va, vb = qa - pa, qb - pb
            den = va[0] * vb[1] - va[1] * vb[0]
            ta = ((pb[0] - pa[0]) * vb[1] - (pb[1] - pa[1]) * vb[0]) / den
            tb = ((pb[0] - pa[0]) * va[1] - (pb[1] - pa[1]) * va[0]) / den
            za = z0[a] + ta * (z1[a] - z0[a])
            zb = z0[b] + tb * (z1[b] - z0[b])
            pt = pa + ta * va
            key = tuple(np.round(pt / (FLOAT_TOL * scale * 1e3)).astype(np.int64).tolist())
            same_depth = abs(za - zb) <= FLOAT_TOL * scale
        if same_depth:
            raise GenericityError("curve meets itself at a crossing")
        if key in points_seen:
            raise GenericityError("triple point")
        points_seen.add(key)
        over, under = ((a, ta), (b, tb)) if za > zb else ((b, tb), (a, ta))
        vo, vu = v[over[0]], v[under[0]]
        s = vo[0] * vu[1] - vo[1] * vu[0]
        crossings.append(Crossing(over, under, 1 if s > 0 else -1))
    return crossings


def _gauss(crossings):
    passages = []
    for k, c in enumerate(crossings):
        passages.append((c.over[0], c.over[1], k, True))
        passages.append((c.under[0], c.under[1], k, False))
    passages.sort(key=lambda p: (p[0], p[1]))
    return [(k, over) for _, _, k, over in passages]


def _random_direction(rng, exact):
    if exact:
        while True:
            d = rng.integers(-50, 51, 3)
            if np.all(d != 0):
                return d.astype(np.int64)
    d = rng.normal(size=3)
    return d / np.linalg.norm(d)


def extract_diagram(curve, direction="auto", seed: int = 0) -> KnotDiagram:
    """Diagram of a closed polyline (``(N, 3)`` array, a ``KnotCurve`` or a
    ``LatticeCycle``).

    With an explicit ``direction`` that turns out non-generic, seeded random
    directions are tried instead and the diagram is marked ``perturbed``.
    """
    points = _points_of(curve)
    exact = _is_lattice(points)
    rng = np.random.default_rng(seed)
    perturbed = False
    last = None
    for attempt in range(MAX_ATTEMPTS):
        if attempt == 0 and not (isinstance(direction, str) and direction == "auto"):
            d = np.asarray(direction)
            if exact:
                d = np.asarray(np.round(d), dtype=np.int64) if np.allclose(d, np.round(d)) else None
                if d is None or np.any(d == 0):
                    # axis-parallel lattice segments would project to points
                    perturbed = True
                    continue
            else:
                d = d / np.linalg.norm(d)
        else:
            d = _random_direction(rng, exact)
        try:
            cr = _find_crossings(points, d, exact)
        except GenericityError as exc:
            last = exc
            if attempt == 0:
                perturbed = True
            continue
        return KnotDiagram(np.asarray(d), cr, _gauss(cr), exact, attempt + 1, perturbed)
    raise GenericityError(f"no generic projection found in {MAX_ATTEMPTS} attempts: {last}")


def _points_of(curve) -> np.ndarray:
    if hasattr(curve, "samples"):
        return np.asarray(curve.samples, dtype=float)
    if hasattr(curve, "vertices"):
        return np.asarray(curve.vertices, dtype=np.int64)
    arr = np.asarray(curve)
    if len(arr) < 3:
        raise PreconditionError("a closed curve needs at least three vertices")
    return arr


# --- polygon simplification ------------------------------------------------


def _orient3d(a, b, c, p):
    """Sign-carrying volume of (b-a, c-a, p-a); rows of ``p`` broadcast."""
    return np.einsum("...i,...i->...", np.cross(b - a, c - a), p - a)


def _orient2d(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def _on_segment2d(a, b, p):
    """``p`` (collinear with ``a b``) lies on the closed segment."""
    return (
        (np.minimum(a[..., 0], b[..., 0]) <= p[..., 0])
        & (p[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
        & (np.minimum(a[..., 1], b[..., 1]) <= p[..., 1])
        & (p[..., 1] <= np.maximum(a[..., 1], b[..., 1]))
    )


def _segments_meet2d(p, q, a, b):
    o1, o2 = np.sign(_orient2d(a, b, p)), np.sign(_orient2d(a, b, q))
    o3, o4 = np.sign(_orient2d(p, q, a)), np.sign(_orient2d(p, q, b))
    hit = (o1 * o2 < 0) & (o3 * o4 < 0)
    hit |= (o1 == 0) & _on_segment2d(a, b, p)
    hit |= (o2 == 0) & _on_segment2d(a, b, q)
    hit |= (o3 == 0) & _on_segment2d(p, q, a)
    hit |= (o4 == 0) & _on_segment2d(p, q, b)
    return hit


def segments_meet_triangle(p, q, a, b, c) -> np.ndarray:
    """Closed segments ``p[i] q[i]`` meeting the closed triangle ``a b c``;
    exact for integer input."""
    op, oq = np.sign(_orient3d(a, b, c, p)), np.sign(_orient3d(a, b, c, q))
    out = np.zeros(len(p), dtype=bool)
    cross = (op * oq <= 0) & ~((op == 0) & (oq == 0))
    if np.any(cross):
        pp, qq = p[cross], q[cross]
        s1 = np.sign(_orient3d(pp, qq, a, b))
        s2 = np.sign(_orient3d(pp, qq, b, c))
        s3 = np.sign(_orient3d(pp, qq, c, a))
        out[cross] = ((s1 >= 0) & (s2 >= 0) & (s3 >= 0)) | ((s1 <= 0) & (s2 <= 0) & (s3 <= 0))
    flat = (op == 0) & (oq == 0)
    if np.any(flat):
        n = np.cross(b - a, c - a)
        keep = [i for i in range(3) if i != int(np.argmax(np.abs(n)))]
        pp, qq = p[flat][:, keep], q[flat][:, keep]
        A2, B2, C2 = a[keep], b[keep], c[keep]
        s1 = np.sign(_orient2d(A2, B2, pp))
        s2 = np.sign(_orient2d(B2, C2, pp))
        s3 = np.sign(_orient2d(C2, A2, pp))
        inside = ((s1 >= 0) & (s2 >= 0) & (s3 >= 0)) | ((s1 <= 0) & (s2 <= 0) & (s3 <= 0))
        hit = inside
        for u, v in ((A2, B2), (B2, C2), (C2, A2)):
            hit = hit | _segments_meet2d(pp, qq, np.broadcast_to(u, pp.shape), np.broadcast_to(v, pp.shape))
        out[flat] = hit
    return out


def _wedge_contains(a, u, v, x) -> bool:
    """Ray from ``a`` towards ``x`` lies in the closed planar sector spanned by
    ``u``, ``v`` at ``a`` (all coplanar)."""
    n = np.cross(u, v)
    d = x - a
    return bool(np.cross(u, d) @ n >= 0 and np.cross(d, v) @ n >= 0)


def simplify_polygon(points: np.ndarray) -> np.ndarray:
    """Delete vertices whose triangle with its neighbours meets no other
    segment of the closed polygon.  Each deletion is an isotopy, and the
    surviving vertices are a subset of the input, so integer input stays
    integer and every test is exact."""
    pts = [np.asarray(p) for p in np.asarray(points)]
    if not np.issubdtype(np.asarray(points).dtype, np.integer):
        raise PreconditionError("polygon simplification needs integer vertices")
    changed = True
    while changed and len(pts) > 3:
        changed = False
        i = 0
        while i < len(pts) and len(pts) > 3:
            n = len(pts)
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % n]
            if _removable(pts, i, a, b, c):
                del pts[i]
                changed = True
            else:
                i += 1
    return np.array(pts, dtype=np.int64)


def _removable(pts, i, a, b, c) -> bool:
    n = len(pts)
    if np.all(np.cross(b - a, c - b) == 0):
        return bool(np.dot(b - a, c - b) > 0)
    arr = np.asarray(pts)
    # segments not touching the triangle's corners a, b, c
    starts = np.arange(n)
    others = [(i - 2) % n, (i - 1) % n, i, (i + 1) % n]
    mask = np.ones(n, dtype=bool)
    mask[others] = False
    if mask.any():
        s = starts[mask]
        if segments_meet_triangle(arr[s], arr[(s + 1) % n], a, b, c).any():
            return False
    # the segments entering a and leaving c touch the triangle at a corner
    a_prev, c_next = pts[(i - 2) % n], pts[(i + 2) % n]
    if _orient3d(a, b, c, a_prev) == 0 and _wedge_contains(a, b - a, c - a, a_prev):
        return False
    if _orient3d(a, b, c, c_next) == 0 and _wedge_contains(c, a - c, b - c, c_next):
        return False
    return True


# --- PD codes and simplification -------------------------------------------


def pd_from_gauss(gauss, signs) -> list[tuple[int, int, int, int]]:
    """PD code: per crossing the four edge labels counterclockwise starting at
    the incoming under strand.  Edge ``k`` runs from passage ``k`` to ``k+1``."""
    n = len(gauss)
    slots: dict[int, dict[str, int]] = {}
    for k, (c, over) in enumerate(gauss):
        s = slots.setdefault(c, {})
        s["over_in" if over else "under_in"] = (k - 1) % n
        s["over_out" if over else "under_out"] = k
    pd = []
    for c in range(len(signs)):
        s = slots[c]
        if signs[c] > 0:
            pd.append((s["under_in"], s["over_out"], s["under_out"], s["over_in"]))
        else:
            pd.append((s["under_in"], s["over_in"], s["under_out"], s["over_out"]))
    return pd


def reduce_kinks(gauss, signs):
    """Remove crossings whose two passages are consecutive in the Gauss code
    (curls), repeatedly.  Returns the reduced code, signs, and the removed
    writhe."""
    gauss = list(gauss)
    signs = dict(enumerate(signs))
    removed = 0
    changed = True
    while changed and gauss:
        changed = False
        n = len(gauss)
        for k in range(n):
            if gauss[k][0] == gauss[(k + 1) % n][0]:
                c = gauss[k][0]
                removed += signs.pop(c)
                gauss = [g for g in gauss if g[0] != c]
                changed = True
                break
    order = {c: i for i, c in enumerate(sorted(signs))}
    return [(order[c], o) for c, o in gauss], [signs[c] for c in sorted(signs)], removed


# --- Kauffman bracket -------------------------------------------------------


def _contraction_order(pd):
    if not pd:
        return []
    remaining = set(range(len(pd)))
    order = [0]
    remaining.discard(0)
    seen = set(pd[0])
    while remaining:
        best = max(sorted(remaining), key=lambda c: sum(e in seen for e in pd[c]))
        order.append(best)
        remaining.discard(best)
        seen.update(pd[best])
    return order


def _join(state: dict, x: int, y: int) -> int:
    """Add an arc joining edge ends ``x`` and ``y`` to the partial smoothing.

    ``state`` pairs the two open ends of every unfinished strand.  Returns
    the number of loops closed (0 or 1).
    """
    if x == y:
        return 1
    ex = state.pop(x, x)
    ey = state.pop(y, y)
    if ex == y:
        return 1
    state[ex] = ey
    state[ey] = ex
    return 0


def bracket_pd(pd) -> LaurentPoly:
    """Kauffman bracket of a PD code, normalised so a single circle gives 1."""
    if not pd:
        return LaurentPoly.monomial(0)
    states: dict[tuple, LaurentPoly] = {(): LaurentPoly.monomial(0)}
    for c in _contraction_order(pd):
        a, b, cc, d = pd[c]
        nxt: dict[tuple, LaurentPoly] = {}
        for key, poly in states.items():
            for weight, arcs in ((1, ((a, b), (cc, d))), (-1, ((a, d), (b, cc)))):
                st = dict(key)
                loops = sum(_join(st, x, y) for x, y in arcs)
                p = poly.shift(weight)
                for _ in range(loops):
                    p = p * DELTA
                k = tuple(sorted(st.items()))
                nxt[k] = nxt[k] + p if k in nxt else p
        states = nxt
    total = states[()]
    return total.exact_divide(DELTA)


def bracket_brute(pd) -> LaurentPoly:
    """State sum over all ``2^c`` smoothings with loops counted by union-find."""
    if not pd:
        return LaurentPoly.monomial(0)
    labels = sorted({e for x in pd for e in x})
    index = {e: i for i, e in enumerate(labels)}
    total = LaurentPoly()
    for choice in itertools.product((1, -1), repeat=len(pd)):
        parent = list(range(len(labels)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for (a, b, c, d), w in zip(pd, choice):
            pairs = ((a, b), (c, d)) if w == 1 else ((a, d), (b, c))
            for x, y in pairs:
                parent[find(index[x])] = find(index[y])
        loops = len({find(i) for i in range(len(labels))})
        total = total + DELTA ** (loops - 1) * LaurentPoly.monomial(sum(choice))
    return total


def kauffman_bracket(D: KnotDiagram, cap: int = 22) -> LaurentPoly:
    """Writhe-normalised bracket ``(-A^3)^(-w) <D>`` in the variable ``A``.

    Curls are removed first; the cap applies to the remaining crossings.
    """
    gauss, signs, _ = reduce_kinks(D.gauss, [c.sign for c in D.crossings])
    if len(signs) > cap:
        raise CapExceeded(f"{len(signs)} crossings exceed the bracket cap {cap}")
    bracket = bracket_pd(pd_from_gauss(gauss, signs))
    w = sum(signs)
    factor = LaurentPoly.monomial(-3 * w, -1 if w % 2 else 1)
    return bracket * factor


def jones(f: LaurentPoly) -> LaurentPoly:
    """Jones polynomial in ``t`` from the normalised bracket, with ``t = A^-4``."""
    return f.mirror().substitute_power(4)


def equal_up_to_mirror(f: LaurentPoly, g: LaurentPoly) -> bool:
    return f == g or f == g.mirror()


# --- determinant ------------------------------------------------------------


def _faces(pd):
    where: dict[int, list[tuple[int, int]]] = {}
    for x, row in enumerate(pd):
        for s, e in enumerate(row):
            where.setdefault(e, []).append((x, s))

    def other_end(x, s):
        a, b = where[pd[x][s]]
        return b if a == (x, s) else a

    face_of = {}
    n_faces = 0
    for x in range(len(pd)):
        for p in range(4):
            if (x, p) in face_of:
                continue
            cur = (x, p)
            while cur not in face_of:
                face_of[cur] = n_faces
                y, q = other_end(cur[0], (cur[1] + 1) % 4)
                cur = (y, q)
            n_faces += 1
    return face_of, n_faces


def _bareiss_det(mat: list[list[int]]) -> int:
    n = len(mat)
    if n == 0:
        return 1
    m = [row[:] for row in mat]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if m[i][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def goeritz_matrix(pd) -> list[list[int]]:
    """Goeritz matrix over the white faces of a checkerboard colouring."""
    face_of, n_faces = _faces(pd)
    if n_faces != len(pd) + 2:
        raise CubeKnotError(f"diagram has {n_faces} faces, expected {len(pd) + 2}")
    # faces on either side of an edge end get opposite colours
    adj: dict[int, set[int]] = {f: set() for f in range(n_faces)}
    for x in range(len(pd)):
        for s in range(4):
            f1, f2 = face_of[(x, (s - 1) % 4)], face_of[(x, s)]
            adj[f1].add(f2)
            adj[f2].add(f1)
    colour = {0: 0}
    queue = deque([0])
    while queue:
        f = queue.popleft()
        for g in adj[f]:
            if g not in colour:
                colour[g] = 1 - colour[f]
                queue.append(g)
            elif colour[g] == colour[f]:
                raise CubeKnotError("diagram faces are not two-colourable")
    white = sorted(f for f in range(n_faces) if colour[f] == 0)
    idx = {f: i for i, f in enumerate(white)}
    G = [[0] * len(white) for _ in white]
    for x in range(len(pd)):
        corners = [face_of[(x, p)] for p in range(4)]
        if colour[corners[0]] == 0:
            eta, f, g = 1, corners[0], corners[2]
        else:
            eta, f, g = -1, corners[1], corners[3]
        if f == g:
            continue
        i, j = idx[f], idx[g]
        G[i][j] -= eta
        G[j][i] -= eta
        G[i][i] += eta
        G[j][j] += eta
    return G


def determinant(D: KnotDiagram) -> int:
    """Knot determinant from the Goeritz matrix of the diagram."""
    if not D.crossings:
        return 1
    G = goeritz_matrix(D.pd_code())
    return abs(_bareiss_det([row[1:] for row in G[1:]]))


def determinant_from_bracket(f: LaurentPoly) -> int:
    """``|V(-1)|``, i.e. the bracket evaluated at a primitive 8th root of unity."""
    return round(abs(f(cmath.exp(1j * math.pi / 4))))


# --- comparison -------------------------------------------------------------


def invariants_of(curve, seed: int = 0, cap: int = 22, direction="auto") -> dict:
    """Determinant of the curve's own diagram, plus the Jones polynomial.

    Lattice polygons are first reduced by triangle deletions, which keeps
    the bracket under the cap; the reduced diagram's determinant must agree
    with the raw one.
    """
    D = extract_diagram(curve, direction, seed)
    out = {
        "vertices": len(_points_of(curve)),
        "crossings": D.n_crossings,
        "writhe": D.writhe,
        "attempts": D.attempts,
        "determinant": determinant(D),
        "jones": None,
        "reduced_vertices": None,
        "reduced_crossings": None,
    }
    small = D
    if D.exact and D.n_crossings > 0:
        reduced = simplify_polygon(_points_of(curve))
        out["reduced_vertices"] = len(reduced)
        small = extract_diagram(reduced, "auto", seed)
        if determinant(small) != out["determinant"]:
            raise CubeKnotError("polygon reduction changed the determinant")
    gauss, _, _ = reduce_kinks(small.gauss, [c.sign for c in small.crossings])
    out["reduced_crossings"] = len({c for c, _ in gauss})
    try:
        out["jones"] = kauffman_bracket(small, cap)
    except CapExceeded:
        pass
    return out


def verify_pair(reference, output, seed: int = 0, cap: int = 22) -> dict:
    """Compare invariants of an input curve and an output cycle.

    PASS needs equal determinants, and equal Jones polynomials up to mirror
    whenever both fit under the crossing cap.
    """
    a = invariants_of(reference, seed, cap)
    b = invariants_of(output, seed, cap)
    det_ok = a["determinant"] == b["determinant"]
    if a["jones"] is not None and b["jones"] is not None:
        jones_ok = equal_up_to_mirror(a["jones"], b["jones"])
        mirror = jones_ok and a["jones"] != b["jones"]
    else:
        jones_ok, mirror = None, None

    def public(r):
        return {
            "vertices": r["vertices"],
            "crossings": r["crossings"],
            "reduced_vertices": r["reduced_vertices"],
            "reduced_crossings": r["reduced_crossings"],
            "writhe": r["writhe"],
            "determinant": r["determinant"],
            "jones": None if r["jones"] is None else r["jones"].to_dict(),
            "projection_attempts": r["attempts"],
        }

    return {
        "input": public(a),
        "output": public(b),
        "determinant_match": det_ok,
        "jones_match": jones_ok,
        "jones_mirrored": mirror,
        "status": "PASS" if det_ok and jones_ok is not False else "FAIL",
    }


def format_report(report: dict) -> str:
    lines = [
        f"determinant: input {report['input']['determinant']}, output {report['output']['determinant']}",
        f"crossings: input {report['input']['crossings']}, output {report['output']['crossings']}",
    ]
    if report["jones_match"] is None:
        lines.append("jones: skipped (crossing cap)")
    else:
        note = " (mirror)" if report["jones_mirrored"] else ""
        lines.append(f"jones: {'match' if report['jones_match'] else 'mismatch'}{note}")
    lines.append(report["status"])
    return "\n".join(lines)
