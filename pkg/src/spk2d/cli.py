"""Command-line front end.

Exit codes: 0 pass, 1 numeric check failed, 2 parse error, 3 domain/path
error, 4 I/O error.  Reports go to stdout as JSON with floats printed to 17
significant digits; the wall time goes to stderr so that stdout is
byte-identical across identical invocations.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path as FsPath

import numpy as np

from . import analysis
from .connection import (
    connection_form,
    curvature_residual,
    lc_deviation,
    pde_residual_scaled_xy,
    pde_terms_xy,
)
from .fields import DomainError, PointPolar, SchemaError
from .models import KINDS, ModelSpec
from .transport import ConvergenceError, Path, holonomy_circle, parallel_transport

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_DOMAIN, EXIT_IO = 0, 1, 2, 3, 4

QUANTITIES = ("metric", "u", "connection_norm", "lc_deviation", "holonomy_trace_vs_r")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# --------------------------------------------------------------------------
# formatting
# --------------------------------------------------------------------------


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def dumps17(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written as ``%.17g``; non-finite floats become null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps17(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps17(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps17(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# --------------------------------------------------------------------------
# argument helpers
# --------------------------------------------------------------------------


def _load_json_arg(text: str):
    """Inline JSON, or a path to a JSON file."""
    stripped = text.strip()
    if stripped.startswith("{") or stripped.startswith("["):
        return json.loads(stripped)
    try:
        return json.loads(FsPath(text).read_text())
    except OSError as exc:
        raise CliError(f"cannot read {text}: {exc}", EXIT_IO) from exc


def parse_model(text: str) -> ModelSpec:
    return ModelSpec.from_json(_load_json_arg(text))


def parse_grid(text: str):
    try:
        nr, nt, rmin, rmax = text.split(",")
        nr, nt, rmin, rmax = int(nr), int(nt), float(rmin), float(rmax)
    except ValueError as exc:
        raise CliError(f"--grid expects nr,ntheta,rmin,rmax, got {text!r}", EXIT_PARSE) from exc
    if nr < 1 or nt < 1:
        raise CliError("grid sizes must be positive", EXIT_PARSE)
    if not 0.0 < rmin <= rmax < 1.0:
        raise DomainError("grid radii must satisfy 0 < rmin <= rmax < 1")
    return nr, nt, rmin, rmax


def grid_points(nr, nt, rmin, rmax):
    """Radii descending from ``rmax`` to ``rmin`` (geometric), angles ``2 pi j / nt``."""
    radii = np.geomspace(rmax, rmin, nr) if nr > 1 else np.array([rmax])
    thetas = 2.0 * np.pi * np.arange(nt) / nt
    return radii, thetas


def _report(command: str, model: ModelSpec | None, results: dict, residuals: dict, tol, passed) -> dict:
    out = {"command": command}
    if model is not None:
        out["model"] = model.to_json()
    out["results"] = results
    out["max_residuals"] = residuals
    out["tolerance"] = tol
    out["pass"] = passed
    return out


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_verify(model: ModelSpec, grid, tol: float):
    d = model.build()
    radii, thetas = grid_points(*grid)
    R, T = np.meshgrid(radii, thetas, indexing="ij")
    x, y = R * np.cos(T), R * np.sin(T)
    lap_h, lap_u, rhs = pde_terms_xy(d, x, y)
    _, scaled = pde_residual_scaled_xy(d, x, y)
    conn = connection_form(d)
    curv = 0.0
    for r in radii:
        side = min(0.01, 0.5 * r)
        for th in thetas:
            curv = max(curv, curvature_residual(conn, PointPolar(r, th), side))
    residuals = {
        "laplacian_h": float(np.max(np.abs(lap_h))),
        "pde": float(np.max(np.abs(lap_u - rhs))),
        "pde_scaled": float(np.max(scaled)),
        "curvature": curv,
    }
    passed = residuals["laplacian_h"] <= tol and residuals["pde"] <= tol and curv <= tol
    results = {"grid": {"n_r": grid[0], "n_theta": grid[1], "r_min": grid[2], "r_max": grid[3]}}
    return _report("verify", model, results, residuals, tol, passed), passed


def cmd_holonomy(model: ModelSpec, r: float, tol: float, frame: str, theta0: float = 0.0, check_tol: float = 1e-7):
    conn = connection_form(model.build())
    res = holonomy_circle(conn, r, tol, frame, theta0)
    m = res.matrix
    cls = analysis.classify_holonomy(m)
    trace = float(np.trace(m))
    results = {
        "r": r,
        "theta0": theta0,
        "frame": frame,
        "matrix": m,
        "trace": trace,
        "class": cls.to_json(),
        "integral": analysis.is_integral(trace, "trace", 1e-7),
        "error_estimate": res.error_estimate,
        "steps_used": res.steps_used,
    }
    residuals = {}
    passed = True
    ref = analysis.reference_holonomy(model, r, theta0)
    if ref is not None:
        if frame == "vector":
            ref = np.linalg.inv(ref).T
        dev = float(np.max(np.abs(m - ref)))
        results["reference"] = ref
        residuals["reference_deviation"] = dev
        passed = dev <= check_tol
    return _report("holonomy", model, results, residuals, check_tol, passed), passed


def cmd_transport(model: ModelSpec, path: Path, tol: float, frame: str):
    res = parallel_transport(connection_form(model.build()), path, tol, frame)
    results = {
        "frame": frame,
        "path": path.to_json(),
        "matrix": res.matrix,
        "error_estimate": res.error_estimate,
        "steps_used": res.steps_used,
    }
    return _report("transport", model, results, {"error_estimate": res.error_estimate}, tol, True), True


def cmd_classify(beta=None, matrix=None, kind=None, kodaira=False, n=None, tol=1e-7):
    results = {}
    if beta is not None:
        classes = analysis.classify_from_beta(beta, conical=(kind == analysis.CONICAL))
        results["beta"] = beta
        results["admissible"] = [c.to_json() for c in classes]
        results["integral"] = analysis.is_integral(beta, "beta")
        order2 = beta
    else:
        cls = analysis.classify_holonomy(matrix, tol)
        results["matrix"] = np.asarray(matrix, dtype=float)
        results["class"] = cls.to_json()
        results["integral"] = analysis.is_integral(cls.trace, "trace", tol)
        # table rows depend on beta mod 2 only, and are symmetric under beta -> 2 - beta
        order2 = math.acos(max(-1.0, min(1.0, 0.5 * cls.trace))) / math.pi
    if kodaira:
        k = kind or analysis.CONICAL
        rows = analysis.kodaira_compatible(k, order2, n)
        results["kodaira_kind"] = k
        results["kodaira"] = analysis.kodaira_json(rows, k)
    return _report("classify", None, results, {}, tol, True), True


def read_fit_csv(path: str):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    if not rows:
        raise SchemaError("empty CSV")
    header = [h.strip() for h in rows[0]]
    if header not in (["r", "u"], ["r", "theta", "u"]):
        raise SchemaError(f"CSV header must be 'r,u' (or 'r,theta,u'), got {','.join(header)!r}")
    ir, iu = header.index("r"), header.index("u")
    samples = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise SchemaError(f"line {line_no}: expected {len(header)} fields")
        try:
            samples.append((float(row[ir]), float(row[iu])))
        except ValueError as exc:
            raise SchemaError(f"line {line_no}: non-numeric field") from exc
    for (r0, _), (r1, _) in zip(samples, samples[1:]):
        if not r1 < r0:
            raise SchemaError("radii must be strictly decreasing")
    return samples


def cmd_fit(csv_path: str, n_hint=None):
    samples = read_fit_csv(csv_path)
    fit = analysis.asymptotic_fit(samples, n_hint)
    results = {"n_samples": len(samples), "fit": fit.to_json()}
    return _report("fit", None, results, {"residual": fit.residual}, None, True), True


def sample_rows(model: ModelSpec, quantity: str, grid):
    d = model.build()
    radii, thetas = grid_points(*grid)
    if quantity == "holonomy_trace_vs_r":
        conn = connection_form(d)
        header = ["r", "trace"]
        rows = [[r, float(np.trace(holonomy_circle(conn, float(r)).matrix))] for r in radii]
        return header, rows
    header = ["r", "theta", quantity]
    rows = []
    conn = connection_form(d) if quantity == "connection_norm" else None
    for r in radii:
        for th in thetas:
            p = PointPolar(float(r), float(th))
            if quantity == "metric":
                v = float(d.metric_xy(p.x, p.y))
            elif quantity == "u":
                v = float(d.u.value_xy(p.x, p.y))
            elif quantity == "connection_norm":
                ax, ay = conn.at(p)
                v = max(float(np.linalg.norm(ax)), float(np.linalg.norm(ay)))
            else:
                v = lc_deviation(d, p)
            rows.append([float(r), float(th), v])
    return header, rows


def cmd_sample(model: ModelSpec, quantity: str, grid, out: str):
    header, rows = sample_rows(model, quantity, grid)
    text = ",".join(header) + "\n" + "".join(",".join(fmt_float(v) for v in row) + "\n" for row in rows)
    try:
        FsPath(out).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc}", EXIT_IO) from exc
    results = {"quantity": quantity, "out": out, "rows": len(rows), "header": header}
    return _report("sample", model, results, {}, None, True), True


def cmd_models():
    catalog = [
        ModelSpec("flat_cone", beta=1.0).to_json(),
        ModelSpec("log_model", k=1).to_json(),
        ModelSpec("fundamental").to_json(),
        {"kind": "custom", "data": {"h": {"log_coeff": 0.0, "laurent": []}, "u": {"terms": []}, "a": 0.0}},
    ]
    return {"command": "models", "kinds": list(KINDS), "examples": catalog}, True


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spk2d", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model(p):
        p.add_argument("--model", required=True, help="model spec as inline JSON or a path to a JSON file")

    def add_frame(p):
        p.add_argument("--frame", choices=("vector", "covector"), default="covector")

    p = sub.add_parser("verify", help="check the PDE system and flatness on a polar grid")
    add_model(p)
    p.add_argument("--grid", default="20,20,0.01,0.9")
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("holonomy", help="holonomy around a centred circle")
    add_model(p)
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--theta0", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--check-tol", type=float, default=1e-7)
    add_frame(p)

    p = sub.add_parser("transport", help="parallel transport along a path file")
    add_model(p)
    p.add_argument("--path", required=True, help="path JSON (inline or file)")
    p.add_argument("--tol", type=float, default=1e-10)
    add_frame(p)

    p = sub.add_parser("classify", help="holonomy class from beta or a matrix")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--beta", type=float)
    src.add_argument("--matrix", help="2x2 matrix as inline JSON or a JSON file")
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--conical", dest="kind", action="store_const", const=analysis.CONICAL)
    kind.add_argument("--logarithmic", dest="kind", action="store_const", const=analysis.LOGARITHMIC)
    p.add_argument("--kodaira", nargs="?", const="auto", choices=("auto", analysis.CONICAL, analysis.LOGARITHMIC))
    p.add_argument("--n", type=int, help="order of the cubic form, bounds the conical order")
    p.add_argument("--tol", type=float, default=1e-7)

    p = sub.add_parser("fit", help="fit a conical/logarithmic singularity to r,u samples")
    p.add_argument("csv")
    p.add_argument("--n-hint", type=int)

    p = sub.add_parser("sample", help="write a CSV of a quantity on a polar grid")
    add_model(p)
    p.add_argument("--quantity", choices=QUANTITIES, required=True)
    p.add_argument("--grid", default="10,1,0.0001,0.1")
    p.add_argument("--out", required=True)

    sub.add_parser("models", help="list model kinds with example specs")
    return parser


def _dispatch(args):
    if args.command == "verify":
        return cmd_verify(parse_model(args.model), parse_grid(args.grid), args.tol)
    if args.command == "holonomy":
        return cmd_holonomy(parse_model(args.model), args.r, args.tol, args.frame, args.theta0, args.check_tol)
    if args.command == "transport":
        path = Path.from_json(_load_json_arg(args.path))
        return cmd_transport(parse_model(args.model), path, args.tol, args.frame)
    if args.command == "classify":
        matrix = None
        if args.matrix is not None:
            matrix = np.asarray(_load_json_arg(args.matrix), dtype=float)
            if matrix.shape != (2, 2):
                raise SchemaError("matrix must be 2x2")
        kind = args.kind
        if args.kodaira not in (None, "auto"):
            kind = args.kodaira
        return cmd_classify(args.beta, matrix, kind, args.kodaira is not None, args.n, args.tol)
    if args.command == "fit":
        return cmd_fit(args.csv, args.n_hint)
    if args.command == "sample":
        return cmd_sample(parse_model(args.model), args.quantity, parse_grid(args.grid), args.out)
    return cmd_models()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    t0 = time.perf_counter()
    try:
        report, passed = _dispatch(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ConvergenceError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (SchemaError, json.JSONDecodeError, ValueError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    sys.stdout.write(dumps17(report) + "\n")
    print(f"wall_time_s={time.perf_counter() - t0:.3f}", file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
