"""Command-line entry point: ``sklab <command> ...``.

Exit codes::

    0  success, all requested checks passed
    2  usage error, unknown catalog entry, malformed input file or config
    3  Newton iteration did not converge (partial results written)
    4  precondition violated (beta >= n+1, negative rho)
    5  model-only metric passed to a PDE check
    6  a requested check failed (convergence order, inconclusive classification)

Relative output paths are resolved against ``$SKLAB_OUTPUT_DIR`` when set.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import catalog, io, kw_solver, singularity, sk_verify
from .errors import (ExponentConstraintError, GridError, InconclusiveClassification,
                     ModelOnlyError, NegativeDensityError, OrderMismatchError)
from .field_core import AnnulusGrid, ScalarField

EXIT_OK, EXIT_USAGE, EXIT_NONCONV, EXIT_PRECOND, EXIT_MODEL_ONLY, EXIT_CHECK = 0, 2, 3, 4, 5, 6
MIN_ORDER = 1.8

log = logging.getLogger("sklab")

_GRID_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["r_in", "r_out", "n_radial", "n_angular"],
    "properties": {
        "r_in": {"type": "number", "exclusiveMinimum": 0},
        "r_out": {"type": "number", "exclusiveMinimum": 0},
        "n_radial": {"type": "integer", "minimum": 8, "maximum": 4096},
        "n_angular": {"type": "integer", "minimum": 8, "maximum": 4096},
        "center": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    },
}

_H_SPEC_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(catalog.HARMONIC_KINDS)},
        "n": {"type": "integer"},
        "c": {"type": "number"},
        "a": {"type": "number"},
        "terms": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["weight", "spec"],
                "properties": {"weight": {"type": "number"}, "spec": {"$ref": "#/$defs/h_spec"}},
            },
        },
    },
}

_BC_VALUE = {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}}]}

SOLVE_SCHEMA = {
    "$defs": {"h_spec": _H_SPEC_SCHEMA},
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "grid"],
    "properties": {
        "schema_version": {"const": io.SCHEMA_VERSION},
        "grid": _GRID_SCHEMA,
        "h_spec": {"$ref": "#/$defs/h_spec"},
        "a": {"type": "number"},
        "beta": {"type": "number", "minimum": -50, "maximum": 50},
        "bc": {
            "type": "object",
            "additionalProperties": False,
            "required": ["inner", "outer"],
            "properties": {"inner": _BC_VALUE, "outer": _BC_VALUE},
        },
        "exact": {"type": "string"},
        "rho": {"type": "number"},
        "tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "max_iter": {"type": "integer", "minimum": 1, "maximum": 500},
    },
    "oneOf": [{"required": ["beta"]}, {"required": ["bc"]}, {"required": ["exact"]}],
}


class UsageError(Exception):
    pass


def _out(path):
    p = Path(path)
    base = os.environ.get("SKLAB_OUTPUT_DIR")
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _emit(obj, out=None):
    text = io.dumps(obj)
    if out:
        _out(out).write_text(text)
    sys.stdout.write(text)


def _parse_grid(text):
    try:
        parts = [p.strip() for p in text.split(",")]
        r_in, r_out, nr, na = float(parts[0]), float(parts[1]), int(parts[2]), int(parts[3])
    except (ValueError, IndexError):
        raise UsageError("--grid must be r_in,r_out,n_radial,n_angular") from None
    return AnnulusGrid(r_in, r_out, nr, na)


def _metric(ident):
    try:
        return catalog.get_metric(ident)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None


# -- catalog -------------------------------------------------------------------

def cmd_catalog(args):
    if args.action == "list":
        _emit({"schema_version": io.SCHEMA_VERSION,
               "entries": [m.summary() for m in catalog.list_metrics()]})
        return EXIT_OK
    m = _metric(args.name)
    grid = _parse_grid(args.grid) if args.grid else m.grid(args.n)
    if grid.center == 0 and m.domain.center != 0:
        grid = AnnulusGrid(grid.r_in, grid.r_out, grid.n_radial, grid.n_angular, m.domain.center)
    w = m.sample_w(grid)
    if np.any(~np.isfinite(w.values)) or np.any(w.values <= 0):
        raise UsageError(f"{m.name} is not positive on the requested grid")
    cfg = {"command": "catalog sample", "name": m.name, "grid": grid.to_dict()}
    meta = {"config_hash": io.config_hash(cfg), "metric": m.name, "quantity": "w"}
    out = _out(args.out)
    io.write_field(out, w, meta)
    if m.h_spec is not None:
        io.write_field(out.with_name(out.stem + "_u.csv"), m.sample_u(grid), {**meta, "quantity": "u"})
        io.write_field(out.with_name(out.stem + "_h.csv"), catalog.sample_h(m.h_spec, grid),
                       {**meta, "quantity": "h"})
    return EXIT_OK


# -- solve ---------------------------------------------------------------------

def load_solve_config(path):
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    try:
        jsonschema.validate(cfg, SOLVE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise UsageError(f"invalid config: {exc.message}") from None
    return cfg


def cmd_solve(args):
    cfg = load_solve_config(args.config)
    chash = io.config_hash(cfg)
    try:
        grid = AnnulusGrid.from_dict(cfg["grid"])
    except GridError as exc:
        raise UsageError(str(exc)) from None
    exact = _metric(cfg["exact"]) if "exact" in cfg else None
    if exact is not None and (exact.model_only or exact.h_spec is None):
        raise ModelOnlyError(f"{exact.name} is model-only; it has no exact solution to solve for")
    if "h_spec" in cfg:
        spec = catalog.HarmonicSpec.from_dict(cfg["h_spec"])
    elif exact is not None:
        spec = exact.h_spec
    else:
        raise UsageError("config needs h_spec unless 'exact' names a catalog metric")
    if "a" in cfg:
        spec = catalog.HarmonicSpec.combination([(1.0, spec)], a=cfg["a"])
    tol = cfg.get("tol", 1e-9)
    max_iter = cfg.get("max_iter", 30)

    rho = catalog.rho(spec, grid)
    if "rho" in cfg:
        rho = ScalarField(grid, cfg["rho"])
    summary = {"schema_version": io.SCHEMA_VERSION, "config_hash": chash,
               "h_spec": spec.to_dict(), "order": spec.order}
    if "beta" in cfg:
        beta = cfg["beta"]
        n = spec.order
        if n is not None and not beta < n + 1:
            raise ExponentConstraintError(
                f"beta = {beta:g} violates the constraint β < n+1 = {n + 1} (order n = {n} of the cubic form)")
        bc = -beta * np.log(np.abs(grid.z))
        problem = kw_solver.KwProblem(grid, rho, bc[0], bc[-1])
        summary["beta"] = beta
    elif "bc" in cfg:
        problem = kw_solver.KwProblem(grid, rho, cfg["bc"]["inner"], cfg["bc"]["outer"])
    else:
        problem = kw_solver.dirichlet_problem(grid, rho, exact.u)
        summary["exact"] = exact.name

    sol = kw_solver.solve(problem, tol=tol, max_iter=max_iter)
    summary.update(sol.summary())
    out_dir = _out(Path(args.out_dir) / "summary.json").parent
    meta = {"config_hash": chash}
    io.write_field(out_dir / "u.csv", sol.u, {**meta, "quantity": "u"})
    w = ScalarField(grid, np.exp(-sol.u.values))
    io.write_field(out_dir / "w.csv", w, {**meta, "quantity": "w"})
    if exact is not None:
        summary["max_error"] = float(np.max(np.abs(sol.u.values - exact.sample_u(grid).values)))
    kt = sk_verify.curvature(sol.u).values
    summary["max_curvature_tilde"] = float(np.nanmax(kt))
    if grid.center == 0:
        prof = singularity.extract_profile(w)
        prof.to_csv(out_dir / "profile.csv")
        if sol.converged and "beta" in cfg:
            try:
                summary["classification"] = singularity.classify(prof, n=spec.order).as_dict()
            except InconclusiveClassification as exc:
                summary["classification"] = {"branch": "inconclusive", **(exc.report or {})}
    io.write_json(out_dir / "summary.json", summary)
    sys.stdout.write(io.dumps(summary))
    return EXIT_OK if sol.converged else EXIT_NONCONV


# -- verify / convergence ------------------------------------------------------

def _orders_pass(orders, rounding):
    return all(k in rounding or (v is not None and v >= MIN_ORDER) for k, v in orders.items())


def cmd_verify(args):
    if args.metric:
        m = _metric(args.metric)
        cfg = {"command": "verify", "metric": m.name, "refinements": args.refinements,
               "base_n": args.base_n}
        study = sk_verify.refinement_study(m, levels=args.refinements, base_n=args.base_n)
        passed = args.refinements < 2 or _orders_pass(study["orders"], study["rounding_level"])
        if m.name == "flat":
            passed = passed and all(v <= 1e-12 for lv in study["levels"] for v in lv["residuals"].values())
        report = {"schema_version": io.SCHEMA_VERSION, "config_hash": io.config_hash(cfg),
                  "min_order": MIN_ORDER, "passed": passed, **study}
    else:
        if not (args.h_spec and args.u_field):
            raise UsageError("verify needs --metric, or both --h-spec and --u-field")
        try:
            spec = catalog.HarmonicSpec.from_dict(json.loads(Path(args.h_spec).read_text()))
            u = io.read_field(args.u_field)
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot read inputs: {exc}") from None
        cfg = {"command": "verify", "h_spec": spec.to_dict(), "u_field": str(args.u_field)}
        report = {"schema_version": io.SCHEMA_VERSION, "config_hash": io.config_hash(cfg),
                  "residuals": sk_verify.residual_report(spec, u), "passed": True}
        passed = True
    _emit(report, args.out)
    return EXIT_OK if passed else EXIT_CHECK


def cmd_convergence(args):
    """Solver accuracy against a closed form under dyadic refinement."""
    m = _metric(args.metric)
    if m.model_only:
        raise ModelOnlyError(f"{m.name} is model-only")
    r_in = args.r_in if args.r_in is not None else m.domain.r_in
    r_out = args.r_out if args.r_out is not None else m.domain.r_out
    cfg = {"command": "convergence", "metric": m.name, "levels": args.levels, "base_n": args.base_n,
           "r_in": r_in, "r_out": r_out, "tol": args.tol}
    rows = []
    grid = AnnulusGrid(r_in, r_out, args.base_n, args.base_n, m.domain.center)
    all_conv = True
    for _ in range(args.levels):
        sol = kw_solver.solve(kw_solver.dirichlet_problem(grid, catalog.rho(m.h_spec, grid), m.u),
                              tol=args.tol)
        err = float(np.max(np.abs(sol.u.values - m.sample_u(grid).values)))
        rows.append({"n_radial": grid.n_radial, "n_angular": grid.n_angular, "h_t": grid.ht,
                     "max_error": err, "newton_iterations": sol.newton_iterations,
                     "converged": sol.converged, "residual_norm": sol.residual_norm})
        all_conv &= sol.converged
        grid = grid.refine()
    order = sk_verify.fit_order([r["h_t"] for r in rows], [r["max_error"] for r in rows]) \
        if args.levels >= 2 else None
    passed = all_conv and (order is None or MIN_ORDER <= order <= 2.2)
    _emit({"schema_version": io.SCHEMA_VERSION, "config_hash": io.config_hash(cfg),
           "metric": m.name, "levels": rows, "order": order, "passed": passed}, args.out)
    if not all_conv:
        return EXIT_NONCONV
    return EXIT_OK if passed else EXIT_CHECK


# -- classify / plot -------------------------------------------------------------

def _load_profile(path):
    try:
        return singularity.RadialProfile.from_csv(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"malformed profile CSV: {exc}") from None


def _classify_json(prof, args):
    try:
        c = singularity.classify(prof, n=args.order, tol_beta=args.tol_beta)
        return c.as_dict(), EXIT_OK
    except InconclusiveClassification as exc:
        return {"branch": "inconclusive", **(exc.report or {})}, EXIT_CHECK


def cmd_classify(args):
    prof = _load_profile(args.profile)
    res, code = _classify_json(prof, args)
    cfg = {"command": "classify", "profile": Path(args.profile).read_text(), "order": args.order,
           "tol_beta": args.tol_beta}
    _emit({"schema_version": io.SCHEMA_VERSION, "config_hash": io.config_hash(cfg), **res}, args.out)
    return code


PLOT_SCRIPT = '''\
"""Log-log radial profile with the fitted asymptotic model (matplotlib)."""
import csv

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(name):
    with open(name) as fh:
        rows = list(csv.reader(fh))
    return [[float(c) for c in row] for row in rows[1:]]


data = load("profile_data.csv")
model = load("profile_model.csv")
fig, ax = plt.subplots(figsize=(5, 4))
ax.loglog([d[0] for d in data], [d[1] for d in data], "o", ms=4, label="w (angular geometric mean)")
ax.loglog([m[0] for m in model], [m[1] for m in model], "-", label={label!r})
ax.set_xlabel("|z|")
ax.set_ylabel("w")
ax.legend()
fig.tight_layout()
fig.savefig("profile.png", dpi=150)
'''


def cmd_plot(args):
    prof = _load_profile(args.profile)
    res, code = _classify_json(prof, args)
    out_dir = _out(Path(args.out_dir) / "x").parent
    prof.to_csv(out_dir / "profile_data.csv")
    x = np.log(prof.radii)
    if res["branch"] == "power":
        model = np.log(res["C"]) + res["beta"] * x
        label = f"power fit: beta = {res['beta']:.4f}"
    elif res["branch"] == "logarithmic":
        m = res["n_plus_1"]
        y = np.log(prof.w_values) - m * x - np.log(-x)
        idx = singularity.fitting_window(prof.radii)
        model = m * x + np.log(-x) + 0.5 * (y[idx].max() + y[idx].min())
        label = f"logarithmic fit: n+1 = {m}"
    else:
        model = np.log(prof.w_values)
        label = "inconclusive (data repeated)"
    singularity.RadialProfile(prof.radii, np.exp(model), np.ones_like(model)).to_csv(
        out_dir / "profile_model.csv")
    (out_dir / "plot_profile.py").write_text(PLOT_SCRIPT.format(label=label))
    io.write_json(out_dir / "classification.json", {"schema_version": io.SCHEMA_VERSION, **res})
    sys.stdout.write(io.dumps({"script": str(out_dir / "plot_profile.py"), **res}))
    return code


# -- entry point -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="sklab", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("catalog", help="list or sample closed-form metrics")
    csub = c.add_subparsers(dest="action", required=True)
    csub.add_parser("list")
    s = csub.add_parser("sample")
    s.add_argument("--name", required=True, help="entry id, e.g. punctured_disc or conical(0.5)")
    s.add_argument("--grid", help="r_in,r_out,n_radial,n_angular (default: entry domain)")
    s.add_argument("--n", type=int, default=64, help="nodes per direction on the entry domain")
    s.add_argument("--out", required=True)
    c.set_defaults(func=cmd_catalog)

    s = sub.add_parser("solve", help="solve Laplace(u) = rho e^{2u} from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="residuals of the structure equations under refinement")
    v.add_argument("--metric")
    v.add_argument("--refinements", type=int, default=3)
    v.add_argument("--base-n", type=int, default=64)
    v.add_argument("--h-spec", help="JSON harmonic spec (with --u-field)")
    v.add_argument("--u-field", help="u as field CSV with sidecar")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    k = sub.add_parser("convergence", help="solver error against a closed form under refinement")
    k.add_argument("--metric", required=True)
    k.add_argument("--levels", type=int, default=3)
    k.add_argument("--base-n", type=int, default=64)
    k.add_argument("--r-in", type=float)
    k.add_argument("--r-out", type=float)
    k.add_argument("--tol", type=float, default=1e-9)
    k.add_argument("--out")
    k.set_defaults(func=cmd_convergence)

    for name, func, helptext in (("classify", cmd_classify, "classify a radial profile"),
                                 ("plot", cmd_plot, "emit a plotting script for a profile")):
        q = sub.add_parser(name, help=helptext)
        q.add_argument("--profile", required=True, help="CSV with columns r,w_mean,w_spread")
        q.add_argument("--order", type=int, help="order n of the cubic form at 0")
        q.add_argument("--tol-beta", type=float, default=singularity.TOL_BETA)
        if name == "classify":
            q.add_argument("--out")
        else:
            q.add_argument("--out-dir", required=True)
        q.set_defaults(func=func)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ExponentConstraintError, NegativeDensityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECOND
    except ModelOnlyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL_ONLY
    except (GridError, OrderMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
