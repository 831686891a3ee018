"""Run configuration, manifests and the three end-to-end commands."""

from __future__ import annotations

import json
import logging
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CubeKnotError, InvariantViolation, PreconditionError, ScaleError
from .hyperplane import Hyperplane, Window, plane_pair_construction
from .invariants import determinant, extract_diagram, format_report, verify_pair
from .knot import make_knot, rm_frame, tube_surface, write_mesh_obj
from .lattice import Scale
from .projector import LatticeCycle, containment_violations, face_tube, push_to_surface, skeleton_cycle
from .surface import write_obj, write_squares_obj
from .voxelizer import (
    MAX_SCALE,
    bicollar_ray_test,
    boundary_components,
    choose_scale,
    classify_sides,
    cubes_meeting,
)

log = logging.getLogger("cubeknot")

DEFAULT_RADIUS = {"unknot": 0.5, "trefoil": 0.35, "torus": 0.35, "figure_eight": 0.35}
MAX_RETRIES = 3


@dataclass
class RunConfig:
    preset: str = "trefoil"
    polyline: str = ""
    r: float = 0.0  # 0 selects the preset's default radius
    scale: str = "auto"
    h_max: float = 0.1
    n_theta: int = 16
    seed: int = 0
    cap: int = 22
    out: str = "out"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scale = str(self.scale)
        if self.r == 0.0:
            self.r = DEFAULT_RADIUS.get(self.preset, 0.0)
        self.validate()

    def validate(self) -> None:
        if self.r <= 0:
            raise PreconditionError("tube radius r must be positive (no default for polyline input)")
        if self.h_max <= 0 or self.n_theta < 3 or self.cap <= 0 or self.seed < 0:
            raise PreconditionError("h_max, n_theta, cap must be positive and seed non-negative")
        if self.scale != "auto":
            try:
                m = int(self.scale)
            except ValueError:
                raise PreconditionError(f"scale must be 'auto' or a positive integer, got {self.scale!r}") from None
            if m <= 0:
                raise PreconditionError("scale must be positive")
        if self.preset == "polyline" and not self.polyline:
            raise PreconditionError("polyline preset needs a polyline file")

    @property
    def policy(self):
        return "auto" if self.scale == "auto" else int(self.scale)

    def knot_params(self) -> dict:
        params = dict(self.params)
        if self.preset == "polyline":
            params["path"] = self.polyline
        return params

    def to_dict(self) -> dict:
        return asdict(self)

    # flat ``key = value`` text; preset parameters use ``param.<name>``
    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            if f.name == "params":
                continue
            lines.append(f"{f.name} = {getattr(self, f.name)}")
        for k in sorted(self.params):
            lines.append(f"param.{k} = {self.params[k]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs: dict = {}
        params: dict = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise PreconditionError(f"config line {n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key.startswith("param."):
                params[key[6:]] = _number(value)
            elif key in types and key != "params":
                kind = types[key]
                kwargs[key] = int(value) if kind == "int" else float(value) if kind == "float" else value
            else:
                raise PreconditionError(f"config line {n}: unknown key {key!r}")
        return cls(params=params, **kwargs)

    @classmethod
    def read(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            return text


def write_atomic(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


@dataclass
class RunManifest:
    config: dict
    scale: int
    retries: int
    retry_log: list
    components: dict
    cycle: dict
    report: dict
    stages: dict
    timings: dict
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_jsonable)

    def write(self, path) -> None:
        write_atomic(path, self.to_json() + "\n")


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x)}")


class _Stages:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def run(self, name, fn, *args, **kwargs):
        t = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except CubeKnotError as exc:
            exc.stage = exc.stage or name
            raise
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t


@dataclass
class RunResult:
    manifest: RunManifest
    cycle: LatticeCycle
    exit_code: int
    artifacts: dict


def cubulate(config: RunConfig, threads: int | None = None, write: bool = True) -> RunResult:
    """Knot -> tube -> cube union -> outer sheet -> lattice cycle -> invariants."""
    st = _Stages()
    curve = st.run("make_knot", make_knot, config.preset, config.h_max, **config.knot_params())
    frame = st.run("rm_frame", rm_frame, curve)
    tube = st.run("tube_surface", tube_surface, curve, frame, config.r, config.n_theta)
    scale = st.run("choose_scale", choose_scale, tube, config.r, config.policy)

    retry_log = []
    while True:
        try:
            QM = st.run("cubes_meeting", cubes_meeting, tube, scale, threads=threads)
            comps = st.run("boundary_components", boundary_components, QM)
            plus, minus = st.run("classify_sides", classify_sides, comps, curve.samples, config.r)
            bic = st.run("bicollar", bicollar_ray_test, tube, plus, minus, seed=config.seed)
            if bic["failures"]:
                exc = ScaleError(f"bicollar ray test: {len(bic['failures'])} failures", {"failures": bic["failures"][:5]})
                exc.stage = "bicollar"
                raise exc
            path = st.run(
                "push_to_surface",
                push_to_surface,
                tube.section,
                tube.section_normals,
                plus,
                seed=config.seed,
                cubes=QM,
            )
            if path.stats["reentries"]:
                exc = ScaleError(f"{path.stats['reentries']} section rays re-enter the cube union")
                exc.stage = "push_to_surface"
                raise exc
            squares = st.run("face_tube", face_tube, path)
            cycle, both = st.run("skeleton_cycle", skeleton_cycle, squares, plus, path, return_both=True)
            break
        except ScaleError as exc:
            stage = exc.stage or "scale"
            if len(retry_log) >= MAX_RETRIES or scale.m * 2 > MAX_SCALE:
                exc.args = (f"{exc.args[0]} (scale retries exhausted at m={scale.m})",)
                raise
            retry_log.append({"m": scale.m, "stage": stage, "reason": str(exc)})
            log.warning("m=%d failed at %s: %s; retrying at m=%d", scale.m, stage, exc, scale.m * 2)
            scale = Scale(scale.m * 2)

    bad = containment_violations(cycle, QM)
    if bad:
        raise InvariantViolation(f"{bad} cycle edges are not edges of the cube union")
    report = st.run("verify", verify_pair, curve, cycle, config.seed, config.cap)
    other = next((c for c in both if c is not None and c is not cycle), None)
    other_det = None
    if other is not None:
        other_det = st.run("verify_other", lambda c: determinant(extract_diagram(c, seed=config.seed)), other)
        if other_det != report["output"]["determinant"]:
            report["status"] = "FAIL"
    exit_code = 0 if report["status"] == "PASS" else 1

    manifest = RunManifest(
        config=config.to_dict(),
        scale=scale.m,
        retries=len(retry_log),
        retry_log=retry_log,
        components={
            "cubes": len(QM),
            "plus": plus.stats(),
            "minus": minus.stats(),
            "bicollar_rays": bic["rays"],
            "bicollar_failures": len(bic["failures"]),
        },
        cycle={
            "length": len(cycle),
            "simple": cycle.is_simple(),
            "containment_violations": bad,
            "path_points": len(path),
            "path": path.stats,
            "tube_squares": len(squares),
            "other_length": None if other is None else len(other),
            "other_determinant": other_det,
        },
        report=report,
        stages={
            "curve_samples": len(curve),
            "curve_length": curve.length(),
            "mesh_triangles": len(tube.triangles),
            "closure_defect": frame.defect_angle,
        },
        timings={k: round(v, 4) for k, v in st.timings.items()},
    )
    artifacts = {}
    if write:
        artifacts = _write_artifacts(config, manifest, cycle, plus, tube)
    return RunResult(manifest, cycle, exit_code, artifacts)


def _write_artifacts(config, manifest, cycle, plus, tube) -> dict:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "cycle_json": out / "cycle.json",
        "cycle_obj": out / "cycle.obj",
        "surface_obj": out / "surface_plus.obj",
        "mesh_obj": out / "tube.obj",
        "report": out / "report.txt",
        "manifest": out / "manifest.json",
    }
    write_atomic(paths["cycle_json"], cycle.to_json() + "\n")
    cycle.write_obj(paths["cycle_obj"])
    write_obj(plus, paths["surface_obj"])
    write_mesh_obj(tube, paths["mesh_obj"])
    write_atomic(paths["report"], format_report(manifest.report) + "\n")
    manifest.write(paths["manifest"])
    return {k: str(v) for k, v in paths.items()}


# --- plane pairs -----------------------------------------------------------


def parse_plane(text: str) -> Hyperplane:
    """``"a,b,c,d"`` is the plane ``a x + b y + c z = d`` (normalised)."""
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise PreconditionError(f"plane must be 'a,b,c,d', got {text!r}") from None
    if len(vals) != 4:
        raise PreconditionError(f"plane must be 'a,b,c,d', got {text!r}")
    n = np.array(vals[:3])
    norm = np.linalg.norm(n)
    if norm == 0:
        raise PreconditionError("plane normal is zero")
    return Hyperplane.from_normal(n / norm, vals[3] / norm)


def plane_demo(p1: Hyperplane, p2: Hyperplane, m: int, half: int, out: str | None = None) -> dict:
    """Lattice path for ``p1 cap p2`` in the window ``[-half, half)^3`` (lattice units)."""
    s = Scale(m)
    w = Window.cube(-half, half)
    c = plane_pair_construction(p1, p2, s, w)
    result = {
        "m": m,
        "window": [list(w.lo), list(w.hi)],
        "vertices": c.vertices.tolist(),
        "edges": [[list(e.anchor), list(e.axes)] for e in c.edges],
    }
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        write_atomic(d / "path.json", json.dumps(result, separators=(",", ":")) + "\n")
        write_obj(c.sheet, d / "sheet.obj")
        write_squares_obj(c.sheet.squares[c.band], m, d / "band.obj")
    return result


# --- verification only -----------------------------------------------------


def verify_cycle(cycle_path, preset: str = "trefoil", polyline: str = "", seed: int = 0, cap: int = 22, h_max: float = 0.1, **params) -> dict:
    cycle = LatticeCycle.read(cycle_path)
    if not cycle.is_simple():
        raise PreconditionError("cycle is not simple")
    if preset == "polyline":
        params["path"] = polyline
    curve = make_knot(preset, h_max, **params)
    return verify_pair(curve, cycle, seed, cap)
