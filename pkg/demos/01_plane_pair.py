"""Two orthogonal planes meet in a line.  Replace that line by a path in the
1-skeleton of the cube grid, once for an axis-aligned pair and once for a
tilted pair, and measure how far the path strays from the true line."""

import numpy as np

from cubeknot.hyperplane import Hyperplane, Window, plane_pair_construction
from cubeknot.lattice import Scale


def show(label, p1, p2, m):
    path = plane_pair_construction(p1, p2, Scale(m), Window.cube(-3 * m, 3 * m)).vertices
    d = np.cross(p1.n, p2.n)
    d /= np.linalg.norm(d)
    x0 = np.linalg.lstsq(np.stack([p1.n, p2.n]), [p1.offset, p2.offset], rcond=None)[0]
    rel = path / m - x0
    off = np.linalg.norm(rel - np.outer(rel @ d, d), axis=1)
    print(f"{label}, m={m}: {len(path)} vertices, worst distance to the line {off.max():.3f}"
          f" (cell diagonal {np.sqrt(3) / m:.3f})")
    print("  first steps:", path[:6].tolist())


show("axis-aligned", Hyperplane((0, 0, 1), 0.5), Hyperplane((1, 0, 0), 0.5), 1)
for m in (1, 4):
    show("tilted", Hyperplane.from_normal((1, 1, 1), 0.2), Hyperplane.from_normal((1, -1, 0), 0.1), m)
