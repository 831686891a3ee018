"""Cells of the canonical cubulation of R^d and its subdivisions.

A cell is stored in lattice units: ``anchor`` is the integer minimal corner
(in units of ``1/m``) and ``axes`` lists the coordinate directions along
which the cell has extent one lattice step.  Incidence is pure integer
arithmetic; floating point only enters through :func:`cell_support`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np


@dataclass(frozen=True, order=True)
class CellKey:
    anchor: tuple[int, ...]
    axes: tuple[int, ...]

    def __post_init__(self):
        anchor = tuple(int(a) for a in self.anchor)
        axes = tuple(sorted(int(a) for a in self.axes))
        if len(set(axes)) != len(axes):
            raise ValueError(f"repeated axis in {axes}")
        if any(a < 0 or a >= len(anchor) for a in axes):
            raise ValueError(f"axes {axes} out of range for dimension {len(anchor)}")
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "axes", axes)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def ambient_dim(self) -> int:
        return len(self.anchor)

    def vertices(self) -> list[tuple[int, ...]]:
        """Integer corners of the cell, in lexicographic order."""
        out = []
        for bits in itertools.product((0, 1), repeat=self.dim):
            v = list(self.anchor)
            for ax, b in zip(self.axes, bits):
                v[ax] += b
            out.append(tuple(v))
        return sorted(out)

    @classmethod
    def cube(cls, anchor) -> "CellKey":
        return cls(tuple(anchor), tuple(range(len(anchor))))

    @classmethod
    def vertex(cls, point) -> "CellKey":
        return cls(tuple(point), ())


@dataclass(frozen=True)
class Scale:
    m: int = 1

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"scale must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))

    @property
    def h(self) -> float:
        """Side length of a cube of the subdivision."""
        return 1.0 / self.m


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.lo) > np.asarray(self.hi)):
            raise ValueError("box with lo > hi")

    def contains(self, p, tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))


def cell_support(c: CellKey, s: Scale) -> Box:
    lo = np.asarray(c.anchor, dtype=float) / s.m
    ext = np.zeros(c.ambient_dim)
    ext[list(c.axes)] = 1.0
    return Box(lo, lo + ext / s.m)


def faces_of(c: CellKey, k: int) -> list[CellKey]:
    """All k-dimensional faces of ``c``, canonical and sorted."""
    if not 0 <= k <= c.dim:
        raise ValueError(f"face dimension {k} outside [0, {c.dim}]")
    out = []
    for keep in itertools.combinations(c.axes, k):
        fixed = [a for a in c.axes if a not in keep]
        for bits in itertools.product((0, 1), repeat=len(fixed)):
            anchor = list(c.anchor)
            for ax, b in zip(fixed, bits):
                anchor[ax] += b
            out.append(CellKey(tuple(anchor), keep))
    out.sort()
    assert len(out) == comb(c.dim, k) * 2 ** (c.dim - k)
    return out


def cofaces_of(c: CellKey, k: int, d: int | None = None) -> list[CellKey]:
    """All k-dimensional cells of the cubulation of R^d having ``c`` as a face."""
    d = c.ambient_dim if d is None else d
    if d != c.ambient_dim:
        raise ValueError(f"cell lives in R^{c.ambient_dim}, not R^{d}")
    if not c.dim <= k <= d:
        raise ValueError(f"coface dimension {k} outside [{c.dim}, {d}]")
    free = [a for a in range(d) if a not in c.axes]
    out = []
    for extra in itertools.combinations(free, k - c.dim):
        for bits in itertools.product((0, -1), repeat=len(extra)):
            anchor = list(c.anchor)
            for ax, b in zip(extra, bits):
                anchor[ax] += b
            out.append(CellKey(tuple(anchor), tuple(c.axes) + extra))
    out.sort()
    return out


def window_cubes(lo, hi) -> list[CellKey]:
    """Cubes with anchors in the integer box ``[lo, hi)``."""
    ranges = [range(a, b) for a, b in zip(lo, hi)]
    return [CellKey.cube(a) for a in itertools.product(*ranges)]


# --- packed integer keys for 3D bulk work -----------------------------------

_BITS = 20
_OFF = 1 << (_BITS - 1)
_MASK = (1 << _BITS) - 1


def pack(ijk: np.ndarray) -> np.ndarray:
    """Pack integer 3-vectors (..., 3) into sortable int64 keys."""
    ijk = np.asarray(ijk, dtype=np.int64) + _OFF
    if np.any(ijk < 0) or np.any(ijk > _MASK):
        raise OverflowError("lattice coordinate outside packable range")
    return (ijk[..., 0] << (2 * _BITS)) | (ijk[..., 1] << _BITS) | ijk[..., 2]


def unpack(keys: np.ndarray) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64)
    out = np.stack(
        [(keys >> (2 * _BITS)) & _MASK, (keys >> _BITS) & _MASK, keys & _MASK], axis=-1
    )
    return out - _OFF


def member(sorted_keys: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Vectorised membership of ``query`` in a sorted unique key array."""
    if len(sorted_keys) == 0:
        return np.zeros(np.shape(query), dtype=bool)
    idx = np.searchsorted(sorted_keys, query)
    idx = np.minimum(idx, len(sorted_keys) - 1)
    return sorted_keys[idx] == query


def lookup(sorted_keys: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Index of each query key in ``sorted_keys``, or -1 when absent."""
    if len(sorted_keys) == 0:
        return np.full(np.shape(query), -1, dtype=np.int64)
    idx = np.searchsorted(sorted_keys, query)
    idx = np.minimum(idx, len(sorted_keys) - 1)
    return np.where(sorted_keys[idx] == query, idx, -1)
