"""The checker must notice a wrong knot.  Switch one crossing of a lattice
trefoil so it unknots, save it as a cycle, and verify it against the trefoil."""

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from fixtures import corrupted_trefoil, lattice_trefoil  # noqa: E402

from cubeknot.cli import main  # noqa: E402
from cubeknot.projector import LatticeCycle  # noqa: E402

with tempfile.TemporaryDirectory() as d:
    for name, pts in (("lattice trefoil", lattice_trefoil()), ("one crossing switched", corrupted_trefoil())):
        path = Path(d) / "cycle.json"
        LatticeCycle(1, pts).write(path)
        print(f"-- {name}")
        code = main(["verify", str(path), "--preset", "trefoil"])
        print(f"exit code {code}\n")
