"""Grid traversal of rays through unit lattice cells (Amanatides-Woo)."""

from __future__ import annotations

import math
import zlib

import numpy as np

TIE = 1e-9


def walk(origin, direction, t_min: float, t_max: float):
    """Yield the lattice squares crossed by ``origin + t*direction``.

    Coordinates are lattice units.  Each item is
    ``(t, anchor, axis, step, tie)``: the crossing parameter, the square's
    integer anchor and normal axis, the direction of travel along that axis,
    and whether the crossing is non-generic (through an edge or a vertex).
    Crossings with ``t_min < t <= t_max`` are reported in order.
    """
    o = [float(x) for x in origin]
    d = [float(x) for x in direction]
    p0 = [o[i] + t_min * d[i] for i in range(3)]
    cell = [math.floor(x) for x in p0]
    t_next = [math.inf] * 3
    delta = [math.inf] * 3
    step = [0] * 3
    for i in range(3):
        if abs(d[i]) < 1e-15:
            continue
        step[i] = 1 if d[i] > 0 else -1
        bound = cell[i] + 1 if d[i] > 0 else cell[i]
        if d[i] < 0 and p0[i] == cell[i]:
            bound -= 1
            cell[i] -= 1
        t_next[i] = t_min + (bound - p0[i]) / d[i]
        delta[i] = 1.0 / abs(d[i])
    while True:
        i = min(range(3), key=t_next.__getitem__)
        t = t_next[i]
        if t > t_max:
            return
        tie = any(j != i and abs(t_next[j] - t) <= TIE for j in range(3))
        anchor = list(cell)
        if step[i] > 0:
            anchor[i] += 1
        yield t, tuple(anchor), i, step[i], tie
        cell[i] += step[i]
        t_next[i] += delta[i]


def cells_along(origin, direction, t_min: float, t_max: float):
    """Cells visited on ``[t_min, t_max]`` in order, plus a tie flag."""
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    p0 = o + t_min * d
    # same start-cell convention as walk(): on a boundary, moving down
    start = tuple(int(math.floor(x)) - (1 if dx < -1e-15 and x == math.floor(x) else 0) for x, dx in zip(p0, d))
    cells = [start]
    tie = on_grid(o + t_min * d, d)
    cur = list(start)
    for _, anchor, axis, step, t in walk(o, d, t_min, t_max):
        tie |= t
        cur[axis] += step
        cells.append(tuple(cur))
    return cells, tie


def on_grid(point, direction, tol: float = TIE) -> bool:
    """True when the ray runs inside a lattice plane (degenerate for walking)."""
    for x, dx in zip(point, direction):
        if abs(dx) < 1e-15 and abs(x - round(x)) <= tol:
            return True
    return False


def jitter_rng(seed: int, origin, attempt: int) -> np.random.Generator:
    """Generator depending only on the seed, the ray origin and the attempt:
    the same ray gets the same jitter regardless of evaluation order."""
    h = zlib.crc32(np.asarray(origin, dtype=np.float64).tobytes())
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, h, attempt])
