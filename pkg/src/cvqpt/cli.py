"""Command line front end: ``cvqpt {estimate,scan,choi-compare,shot-study,kernels}``.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 non-convergence.
"""

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .choi import compare_reconstruction
from .config import load_config
from .exceptions import NonConvergenceError, NumericalError, ValidationError
from .kernels import BUILTINS
from .tomography import (
    ElementEstimate,
    PointFailure,
    Region4,
    chernoff_shots,
    gates_from_region,
    normalization,
    point_seed,
    refine_region,
    scan_mesh,
    simulate_shots,
)

log = logging.getLogger("cvqpt")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_NONCONVERGENCE = 0, 1, 2, 3

SCAN_COLUMNS = [
    "index", "a", "b", "c", "d", "re_est", "im_est", "re_true", "im_true", "depth",
    "width_a", "width_b", "width_c", "width_d", "quad_err", "spread", "m_runs", "error",
]


def _cplx(z):
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _region(r):
    return {"center": list(r.center), "widths": list(r.widths), "volume": r.volume}


def _gates(g):
    return {"a": g.a, "b": g.b, "c": g.c, "d": g.d,
            "r_a": g.r_a, "r_b": g.r_b, "r_c": g.r_c, "r_d": g.r_d, "R": g.R}


def _shots(stats):
    if not stats:
        return None
    sx, sy = stats
    return {
        "m_runs": sx.m_runs,
        "seed": sx.rng_seed,
        "x": {"plus": sx.counts_plus, "minus": sx.counts_minus, "null": sx.counts_null},
        "y": {"plus": sy.counts_plus, "minus": sy.counts_minus, "null": sy.counts_null},
    }


def _params(cfg):
    return {
        "kernel": cfg.kernel.name,
        "delta": cfg.detector.delta,
        "support": cfg.probe.delta_support,
        "threshold": cfg.probe.threshold,
        "probe_C": cfg.probe.C,
        "epsilon": cfg.epsilon,
        "max_depth": cfg.refinement.max_depth,
        "subset_size": cfg.refinement.subset_size,
        "A": normalization(cfg.detector, cfg.probe),
    }


def _write_json(path, doc):
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s", path)


def _true_value(kernel, point):
    return complex(kernel(*[float(v) for v in point]))


def _rel_err(est, true):
    return abs(est - true) / abs(true) if true != 0 else None


def run_estimate(cfg, out_dir, strict=False):
    point = cfg.point
    est = refine_region(cfg.kernel, point, cfg.detector, cfg.probe, cfg.epsilon, cfg.refinement)
    noiseless = est.value
    if cfg.shots is not None:
        sc = cfg.shots.config
        A = normalization(cfg.detector, cfg.probe)
        R = gates_from_region(est.region, cfg.detector, cfg.probe).R
        M = sc.m_runs or chernoff_shots(sc.epsilon_est, sc.p_fail, A, R)
        shot = simulate_shots(cfg.kernel, est.region, cfg.detector, cfg.probe, M, sc.seed, est.depth)
        est = replace(shot, spread=est.spread)
    true = _true_value(cfg.kernel, point)
    g = gates_from_region(est.region, cfg.detector, cfg.probe)
    doc = {
        "command": "estimate",
        "parameters": _params(cfg),
        "point": list(point),
        "value": _cplx(est.value),
        "noiseless_value": _cplx(noiseless),
        "true": _cplx(true),
        "relative_error": _rel_err(est.value, true),
        "depth": est.depth,
        "spread": est.spread,
        "quad_err": est.quad_err,
        "region": _region(est.region),
        "gates": _gates(g),
        "shots": _shots(est.shots),
    }
    _write_json(out_dir / f"{cfg.prefix}_estimate.json", doc)
    return doc


def _scan_row(i, point, res, kernel):
    true = _true_value(kernel, point)
    row = {"index": i, "a": point[0], "b": point[1], "c": point[2], "d": point[3],
           "re_true": true.real, "im_true": true.imag}
    if isinstance(res, ElementEstimate):
        w = res.region.widths
        row.update(re_est=res.value.real, im_est=res.value.imag, depth=res.depth,
                   width_a=w[0], width_b=w[1], width_c=w[2], width_d=w[3],
                   quad_err=res.quad_err, spread=res.spread,
                   m_runs=res.shots[0].m_runs if res.shots else "", error="")
    else:
        row.update(re_est="", im_est="", depth="", width_a="", width_b="", width_c="",
                   width_d="", quad_err="", spread="", m_runs="",
                   error=f"{res.kind}: {res.message}")
    return row


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def run_scan(cfg, out_dir, threads=1, strict=False):
    results = scan_mesh(cfg.kernel, cfg.mesh, cfg.detector, cfg.probe, cfg.epsilon,
                        cfg.refinement, cfg.shots.config if cfg.shots else None, threads=threads)
    csv_path = out_dir / f"{cfg.prefix}_scan.csv"
    errors = []
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SCAN_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for i, (p, r) in enumerate(zip(cfg.mesh, results)):
            row = _scan_row(i, p, r, cfg.kernel)
            writer.writerow({k: _fmt(v) for k, v in row.items()})
            if isinstance(r, PointFailure):
                errors.append(r)
    log.info("wrote %s", csv_path)
    ok = [r for r in results if isinstance(r, ElementEstimate)]
    rel = [_rel_err(r.value, _true_value(cfg.kernel, p)) for p, r in zip(cfg.mesh, results)
           if isinstance(r, ElementEstimate)]
    rel = [e for e in rel if e is not None]
    doc = {
        "command": "scan",
        "parameters": _params(cfg),
        "n_points": len(cfg.mesh),
        "n_failed": len(errors),
        "e_max": max(rel) if rel else None,
        "max_depth_reached": max((r.depth for r in ok), default=None),
        "min_volume": min((r.region.volume for r in ok), default=None),
        "csv": csv_path.name,
        "failures": [{"index": f.index, "point": list(f.point), "kind": f.kind} for f in errors],
    }
    _write_json(out_dir / f"{cfg.prefix}_scan.json", doc)
    if strict and errors:
        kinds = {f.kind for f in errors}
        return doc, EXIT_NONCONVERGENCE if "nonconvergence" in kinds else EXIT_NUMERICAL
    return doc, EXIT_OK


def read_scan_csv(path):
    """Rebuild estimates from a scan CSV; failed rows become :class:`PointFailure`."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            point = tuple(float(row[k]) for k in "abcd")
            if row["error"]:
                out.append(PointFailure(int(row["index"]), point, "csv", row["error"]))
                continue
            widths = tuple(float(row[f"width_{k}"]) for k in "abcd")
            out.append(ElementEstimate(
                complex(float(row["re_est"]), float(row["im_est"])), Region4(point, widths),
                int(row["depth"]), float(row["quad_err"]),
            ))
    return out


def run_choi_compare(cfg, out_dir, threads=1, strict=False):
    spec = cfg.choi
    if spec.scan_csv:
        estimates = read_scan_csv(cfg.base_dir / spec.scan_csv)
    else:
        if cfg.mesh is None:
            raise ValidationError("mesh: required unless choi.scan_csv is given")
        estimates = scan_mesh(cfg.kernel, cfg.mesh, cfg.detector, cfg.probe, cfg.epsilon,
                              cfg.refinement, None, threads=threads)
    report = compare_reconstruction(cfg.kernel, estimates, spec.lam, spec.extent, spec.n_points,
                                    spec.threshold, spec.surrogate, strict=strict)
    doc = {
        "command": "choi-compare",
        "parameters": _params(cfg),
        "choi": {"lambda": spec.lam, "extent": spec.extent, "n_points": spec.n_points,
                 "threshold": spec.threshold, "surrogate": spec.surrogate},
        "n_estimates": len(estimates),
        "report": report.to_dict(),
    }
    _write_json(out_dir / f"{cfg.prefix}_choi.json", doc)
    return doc


def run_shot_study(cfg, out_dir, threads=1, strict=False):
    sc = cfg.shots.config
    point = cfg.point
    est = refine_region(cfg.kernel, point, cfg.detector, cfg.probe, cfg.epsilon, cfg.refinement)
    A = normalization(cfg.detector, cfg.probe)
    R = gates_from_region(est.region, cfg.detector, cfg.probe).R
    M = sc.m_runs or chernoff_shots(sc.epsilon_est, sc.p_fail, A, R)
    rows = []
    for rep in range(cfg.shots.repetitions):
        seed = point_seed(sc.seed, rep)
        shot = simulate_shots(cfg.kernel, est.region, cfg.detector, cfg.probe, M, seed, est.depth)
        err = shot.value - est.value
        rows.append({
            "rep": rep, "seed": seed, "re_est": shot.value.real, "im_est": shot.value.imag,
            "re_err": err.real, "im_err": err.imag,
            # |E_shot - E| >= eps  <=>  |X_hat - X| >= eps * A * e^{-R/2}
            "failed_x": int(abs(err.real) >= sc.epsilon_est),
            "failed_y": int(abs(err.imag) >= sc.epsilon_est),
        })
    csv_path = out_dir / f"{cfg.prefix}_shots.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _fmt(v) for k, v in r.items()})
    re = np.array([r["re_est"] for r in rows])
    im = np.array([r["im_est"] for r in rows])
    doc = {
        "command": "shot-study",
        "parameters": _params(cfg),
        "point": list(point),
        "m_runs": M,
        "epsilon_est": sc.epsilon_est,
        "p_fail": sc.p_fail,
        "R": R,
        "repetitions": len(rows),
        "noiseless_value": _cplx(est.value),
        "failure_rate_x": float(np.mean([r["failed_x"] for r in rows])),
        "failure_rate_y": float(np.mean([r["failed_y"] for r in rows])),
        "std_re": float(np.std(re, ddof=1)) if len(rows) > 1 else 0.0,
        "std_im": float(np.std(im, ddof=1)) if len(rows) > 1 else 0.0,
        "csv": csv_path.name,
    }
    _write_json(out_dir / f"{cfg.prefix}_shots.json", doc)
    return doc


def list_kernels():
    lines = [f"{name:20s} {desc}" for name, (desc, _) in BUILTINS.items()]
    lines.append(f"{'expression':20s} user formula over x, y, w, z (operators + - * / ^, exp sin cos, pi, i)")
    return "\n".join(lines)


COMMANDS = {
    "estimate": (run_estimate, ("point",)),
    "scan": (run_scan, ("mesh",)),
    "choi-compare": (run_choi_compare, ("choi",)),
    "shot-study": (run_shot_study, ("shots", "point")),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="cvqpt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML or JSON job file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="threads for mesh scans")
        p.add_argument("--strict", action="store_true",
                       help="treat per-point failures and Hermiticity defects as errors")
        p.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("kernels", help="list built-in kernels")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "kernels":
        print(list_kernels())
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    fn, need = COMMANDS[args.command]
    try:
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        cfg = load_config(args.config, need=need)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if fn is run_estimate:
            fn(cfg, out_dir, strict=args.strict)
            return EXIT_OK
        result = fn(cfg, out_dir, threads=args.threads, strict=args.strict)
        if isinstance(result, tuple):
            return result[1]
        return EXIT_OK
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NonConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
