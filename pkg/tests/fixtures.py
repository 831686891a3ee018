"""Small lattice knots built from grid diagrams.

A grid diagram places one X and one O marker in every row and column.
Vertical strands join the markers of a column at height 2, horizontal strands
join those of a row at height 0, so every vertical strand passes over every
horizontal one.  Coordinates are doubled so a strand can be pushed down to
height -1 at a chosen crossing, which switches it.
"""

import numpy as np

# trefoil: column i has O in row i and X in row (i + 2) mod 5
TREFOIL_O = [0, 1, 2, 3, 4]
TREFOIL_X = [2, 3, 4, 0, 1]


def _expand(corners):
    out = [np.asarray(corners[0])]
    for target in corners[1:] + corners[:1]:
        target = np.asarray(target)
        while not np.array_equal(out[-1], target):
            step = np.sign(target - out[-1])
            axis = int(np.flatnonzero(step)[0])
            nxt = out[-1].copy()
            nxt[axis] += step[axis]
            out.append(nxt)
    return np.array(out[:-1], dtype=np.int64)


def grid_knot(o_rows, x_rows, dips=()):
    """Lattice polygon of a grid diagram.

    ``dips`` lists (column, row) crossings where the vertical strand goes
    under instead of over.
    """
    n = len(o_rows)
    col_of_o = {r: c for c, r in enumerate(o_rows)}
    corners = []
    col = 0
    for _ in range(n):
        y0, y1 = 2 * o_rows[col], 2 * x_rows[col]
        x = 2 * col
        corners.append((x, y0, 2))
        step = 1 if y1 > y0 else -1
        rows = sorted((2 * r for c, r in dips if c == col and min(y0, y1) < 2 * r < max(y0, y1)), key=lambda y: step * y)
        for y in rows:
            a, b = y - step, y + step
            corners += [(x, a, 2), (x, a, -1), (x, b, -1), (x, b, 2)]
        corners.append((x, y1, 2))
        corners.append((x, y1, 0))
        nxt = col_of_o[x_rows[col]]
        corners.append((2 * nxt, y1, 0))
        corners.append((2 * nxt, y1, 2))
        col = nxt
    return _expand(corners)


def grid_crossings(o_rows, x_rows):
    """(column, row) pairs where a vertical strand crosses a horizontal one."""
    n = len(o_rows)
    col_o = {r: c for c, r in enumerate(o_rows)}
    col_x = {r: c for c, r in enumerate(x_rows)}
    return [
        (c, r)
        for c in range(n)
        for r in range(n)
        if min(o_rows[c], x_rows[c]) < r < max(o_rows[c], x_rows[c])
        and min(col_o[r], col_x[r]) < c < max(col_o[r], col_x[r])
    ]


def lattice_trefoil():
    return grid_knot(TREFOIL_O, TREFOIL_X)


def corrupted_trefoil():
    """The lattice trefoil with one crossing switched (an unknot)."""
    return grid_knot(TREFOIL_O, TREFOIL_X, dips=[(1, 2)])
