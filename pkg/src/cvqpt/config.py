"""Job configuration files (YAML or JSON) for the command line front end."""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .exceptions import ValidationError
from .kernels import kernel_from_spec
from .probe import make_probe
from .tomography import DetectorModel, RefinementOptions, ShotConfig

AXES = ("x", "y", "w", "z")


def _section(doc, name, required=False):
    sec = doc.get(name)
    if sec is None:
        if required:
            raise ValidationError(f"{name}: required section missing")
        return None
    if not isinstance(sec, dict):
        raise ValidationError(f"{name}: expected a mapping")
    return sec


def _num(sec, path, key, default=None, required=False, positive=True, integer=False):
    where = f"{path}.{key}"
    if key not in sec or sec[key] is None:
        if required:
            raise ValidationError(f"{where}: required field missing")
        return default
    val = sec[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ValidationError(f"{where}: expected a number, got {val!r}")
    if integer and int(val) != val:
        raise ValidationError(f"{where}: expected an integer, got {val!r}")
    if not math.isfinite(val):
        raise ValidationError(f"{where}: must be finite")
    if positive and val <= 0:
        raise ValidationError(f"{where}: must be positive, got {val!r}")
    return int(val) if integer else float(val)


@dataclass
class ChoiSpec:
    lam: float = 0.8
    extent: float = 4.0
    n_points: int = 24
    threshold: float = 1e-3
    surrogate: str = "relative"
    scan_csv: Optional[str] = None


@dataclass
class ShotSpec:
    config: ShotConfig
    repetitions: int = 200


@dataclass
class JobConfig:
    raw: dict
    kernel: object
    detector: DetectorModel
    probe: object
    epsilon: float
    refinement: RefinementOptions
    point: Optional[tuple] = None
    mesh: Optional[list] = None
    shots: Optional[ShotSpec] = None
    choi: Optional[ChoiSpec] = None
    prefix: str = "result"
    base_dir: Path = field(default_factory=Path.cwd)


def _axis_values(spec, path):
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return np.array([float(spec)])
    if isinstance(spec, list):
        if not spec:
            raise ValidationError(f"{path}: empty value list")
        return np.array([float(v) for v in spec])
    if isinstance(spec, dict):
        start = _num(spec, path, "start", required=True, positive=False)
        stop = _num(spec, path, "stop", required=True, positive=False)
        num = _num(spec, path, "num", required=True, integer=True)
        return np.linspace(start, stop, num)
    raise ValidationError(f"{path}: expected a number, a list or {{start, stop, num}}")


def parse_mesh(sec):
    """Mesh points from explicit ``points`` or per-axis ``axes`` with optional ``tie``."""
    if "points" in sec:
        pts = sec["points"]
        if not isinstance(pts, list) or not pts:
            raise ValidationError("mesh.points: expected a nonempty list")
        out = []
        for i, p in enumerate(pts):
            if not isinstance(p, list) or len(p) != 4:
                raise ValidationError(f"mesh.points[{i}]: expected four coordinates")
            out.append(tuple(float(v) for v in p))
        return out
    axes = sec.get("axes")
    if not isinstance(axes, dict):
        raise ValidationError("mesh.axes: required (or give mesh.points)")
    tie = sec.get("tie") or {}
    if not isinstance(tie, dict):
        raise ValidationError("mesh.tie: expected a mapping like {y: x}")
    for k, v in tie.items():
        if k not in AXES or v not in AXES or k == v:
            raise ValidationError(f"mesh.tie.{k}: must map one axis name to another")
        if v in tie:
            raise ValidationError(f"mesh.tie.{k}: chained ties are not supported")
    free = [a for a in AXES if a not in tie]
    values = {}
    for a in free:
        if a not in axes:
            raise ValidationError(f"mesh.axes.{a}: required")
        values[a] = _axis_values(axes[a], f"mesh.axes.{a}")
    grids = np.meshgrid(*[values[a] for a in free], indexing="ij")
    cols = {a: g.ravel() for a, g in zip(free, grids)}
    for k, v in tie.items():
        cols[k] = cols[v]
    return [tuple(float(cols[a][i]) for a in AXES) for i in range(len(cols["x"]))]


def parse_config(doc, base_dir=None, need=()):
    """Validate a config mapping; ``need`` names sections the command requires."""
    if not isinstance(doc, dict):
        raise ValidationError("config: top level must be a mapping")
    kernel_sec = doc.get("kernel")
    if kernel_sec is None:
        raise ValidationError("kernel: required section missing")
    kernel = kernel_from_spec(kernel_sec)

    det_sec = _section(doc, "detector", required=True)
    detector = DetectorModel(_num(det_sec, "detector", "delta", required=True))
    probe_sec = _section(doc, "probe", required=True)
    probe = make_probe(
        _num(probe_sec, "probe", "support", required=True),
        _num(probe_sec, "probe", "threshold", default=0.05),
    )
    ref_sec = _section(doc, "refinement", required=True)
    epsilon = _num(ref_sec, "refinement", "epsilon", required=True)
    refinement = RefinementOptions(
        max_depth=_num(ref_sec, "refinement", "max_depth", default=12, positive=False, integer=True),
        subset_size=_num(ref_sec, "refinement", "subset_size", integer=True),
        abs_floor=_num(ref_sec, "refinement", "abs_floor"),
        seed=_num(ref_sec, "refinement", "seed", default=0, positive=False, integer=True),
    )

    point = None
    if "point" in doc:
        p = doc["point"]
        if not isinstance(p, list) or len(p) != 4:
            raise ValidationError("point: expected four coordinates [a, b, c, d]")
        point = tuple(float(v) for v in p)
    elif "point" in need:
        raise ValidationError("point: required for this command")

    mesh = None
    mesh_sec = _section(doc, "mesh", required="mesh" in need)
    if mesh_sec is not None:
        mesh = parse_mesh(mesh_sec)

    shots = None
    shot_sec = _section(doc, "shots", required="shots" in need)
    if shot_sec is not None:
        m = shot_sec.get("m_runs")
        if m is not None and (isinstance(m, bool) or not isinstance(m, int) or m < 1):
            raise ValidationError(f"shots.m_runs: must be an integer >= 1, got {m!r}")
        shots = ShotSpec(
            ShotConfig(
                m_runs=m,
                epsilon_est=_num(shot_sec, "shots", "epsilon", default=0.1),
                p_fail=_num(shot_sec, "shots", "p", default=0.05),
                seed=_num(shot_sec, "shots", "seed", default=0, positive=False, integer=True),
            ),
            repetitions=_num(shot_sec, "shots", "repetitions", default=200, integer=True),
        )

    choi = None
    choi_sec = _section(doc, "choi", required="choi" in need)
    if choi_sec is not None:
        lam = _num(choi_sec, "choi", "lambda", default=0.8)
        if not lam < 1.0:
            raise ValidationError(f"choi.lambda: must be < 1, got {lam!r}")
        choi = ChoiSpec(
            lam=lam,
            extent=_num(choi_sec, "choi", "extent", default=4.0),
            n_points=_num(choi_sec, "choi", "n_points", default=24, integer=True),
            threshold=_num(choi_sec, "choi", "threshold", default=1e-3),
            surrogate=str(choi_sec.get("surrogate", "relative")),
            scan_csv=choi_sec.get("scan_csv"),
        )
        if choi.surrogate not in ("relative", "direct"):
            raise ValidationError("choi.surrogate: must be 'relative' or 'direct'")

    out_sec = _section(doc, "output") or {}
    prefix = str(out_sec.get("prefix", "result"))
    return JobConfig(doc, kernel, detector, probe, epsilon, refinement, point, mesh,
                     shots, choi, prefix, Path(base_dir) if base_dir else Path.cwd())


def load_config(path, need=()):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"config: cannot read {path}: {exc.strerror}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"config: parse error in {path}: {exc}") from None
    return parse_config(doc, base_dir=path.parent, need=need)
