"""Command-line front end.

Subcommands::

    report-invariant   classify a coframe model and evaluate its functionals
    solve-gauduchon    Gauduchon factor of a torus conformal class
    solve-distinguished distinguished factor over a background drift
    check-el           finite-difference vs weak-form gradient reports
    sweep              invariant-family sweep table
    verify             run the acceptance suite

Exit codes: 0 success, 2 invalid input (with machine-readable error JSON on
stderr), 3 solver failure, 4 acceptance failure.  Reports are JSON with a
stable schema; the ``generated_at`` stamp is the only field excused from
byte-for-byte determinism.  ``LEELAB_THREADS`` caps row/direction
parallelism in sweep and check-el.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import acceptance, elliptic, fieldspec, invariant, modelio, variation
from .torus import (
    ScalarField,
    TorusGrid,
    conformal_metric,
    export_field_csv,
)

SCHEMA_VERSION = "1"


class InputError(ValueError):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("LEELAB_THREADS", "1")))
    except ValueError:
        return 1


def _base_report(command: str, inputs: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "command": command,
        "input": inputs,
    }


def _write_json(doc: dict, path: str | None):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_csv(field: ScalarField, path: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    os.close(fd)
    try:
        export_field_csv(field, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_complex_pair(text: str) -> complex:
    parts = text.split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise InputError("bad_input", f"expected RE or RE,IM, got {text!r}")


def _load_model(args) -> tuple:
    if args.algebra is not None:
        model = modelio.load(args.algebra)
        if not isinstance(model, invariant.InvariantModel):
            raise InputError("bad_input",
                             "file describes a bare algebra; add a metric")
        echo = {"algebra_file": os.path.basename(args.algebra)}
        return model, echo
    if args.model is None:
        raise InputError("bad_input", "need --algebra FILE or --model NAME")
    if args.model != "inoue_sm":
        raise InputError("bad_input", f"unknown model {args.model!r}")
    if args.r is None or args.s is None:
        raise InputError("bad_input", "--model inoue_sm needs --r and --s")
    u = _parse_complex_pair(args.u)
    try:
        model = invariant.inoue_sm(args.r, args.s, u, args.c)
    except ValueError as exc:
        raise InputError("metric_not_positive", str(exc)) from exc
    echo = {"model": "inoue_sm", "r": args.r, "s": args.s,
            "u_re": u.real, "u_im": u.imag, "c": args.c}
    return model, echo


def cmd_report_invariant(args) -> int:
    model, echo = _load_model(args)
    rep = invariant.classify(model, tol=args.tol)
    densities = invariant.functional_densities(model)
    values = invariant.functional_values(model)
    el = invariant.el_residuals(model)
    doc = _base_report("report-invariant", echo)
    doc.update({
        "tolerances": {"classification": args.tol},
        "volume": invariant.total_volume(model),
        "classification": {"flags": rep.flags(), "residuals": rep.residuals},
        "lee_norm_sq": rep.lee_norm_sq,
        "f_omega": rep.f_omega,
        "densities": {"g": densities.g, "f": densities.f, "a": densities.a,
                      "r": densities.r, "v": densities.v},
        "functional_values": {"G": values.g, "F": values.f, "A": values.a,
                              "R": values.r, "V": values.v},
        "el_residuals": {
            "g": {"constant": el.g[0], "deviation": el.g[1]},
            "f": {"constant": el.f[0], "deviation": el.f[1]},
            "a": {"constant": el.a[0], "deviation": el.a[1]},
            "r": {"constant": el.r[0], "deviation": el.r[1]},
        },
    })
    _write_json(doc, args.output)
    return 0


def cmd_solve_gauduchon(args) -> int:
    grid = TorusGrid(args.n, args.grid)
    logfactor = fieldspec.scalar_field_from_spec(args.logfactor, grid)
    cls = conformal_metric(grid, logfactor, normalized=True)
    result = elliptic.gauduchon_factor(cls,
                                       with_spectrum=not args.no_spectrum)
    _atomic_csv(result.factor, args.csv)
    doc = _base_report("solve-gauduchon", {
        "n": args.n, "grid": args.grid, "logfactor": args.logfactor,
    })
    def finite_or_none(x):
        return float(x) if np.isfinite(x) else None

    doc.update({
        "solver": {
            "residual": result.residual,
            "lam1": result.lam1,
            "lam2": finite_or_none(result.lam2),
            "gap": finite_or_none(result.gap),
            "iterations": result.iterations,
            "strictly_positive": result.strictly_positive,
            "near_degenerate": result.near_degenerate,
        },
        "outputs": {"factor_csv": args.csv},
    })
    _write_json(doc, args.report)
    return 0


def cmd_solve_distinguished(args) -> int:
    grid = TorusGrid(args.n, args.grid)
    drift = fieldspec.parse_drift(args.drift, grid)
    flat = conformal_metric(grid, ScalarField.constant(grid, 0.0),
                            normalized=True)
    op = elliptic.DriftOperator(grid, drift)
    defect = float(np.max(np.abs(op.codiff_drift.values)))
    if defect > 1e-8 and not args.synthetic:
        raise InputError(
            "drift_not_coclosed",
            f"drift has codifferential defect {defect:.3e}; "
            "pass --synthetic to accept it",
        )
    result = elliptic.distinguished_factor(
        flat, drift, k_override=args.k, allow_non_coclosed=args.synthetic)
    _atomic_csv(result.phi, args.csv)
    doc = _base_report("solve-distinguished", {
        "n": args.n, "grid": args.grid, "drift": args.drift,
        "synthetic": bool(args.synthetic),
    })
    doc.update({
        "solver": {
            "k0": result.k0,
            "residual": result.residual,
            "f_consistency": result.f_consistency,
            "iterations": result.info.iterations,
            "coclosed_defect": defect,
        },
        "outputs": {"phi_csv": args.csv},
    })
    _write_json(doc, args.report)
    return 0


def cmd_check_el(args) -> int:
    grid = TorusGrid(args.n, args.grid)
    base_field = fieldspec.scalar_field_from_spec(args.base, grid)
    base = conformal_metric(grid, base_field, normalized=True)
    which = args.which.upper()
    rng = np.random.default_rng(args.seed)
    directions = [variation.random_mean_zero_direction(base, rng)
                  for _ in range(args.directions)]

    def one(index):
        rep = variation.variation_report(which, base, directions[index])
        return {
            "direction_index": index,
            "fd_derivative": rep.fd_derivative,
            "el_pairing": rep.el_pairing,
            "relative_gap": rep.relative_gap,
            "steps": list(rep.steps),
        }

    cap = _thread_cap()
    if cap > 1:
        with ThreadPoolExecutor(max_workers=cap) as pool:
            reports = list(pool.map(one, range(args.directions)))
    else:
        reports = [one(i) for i in range(args.directions)]
    doc = _base_report("check-el", {
        "which": args.which, "n": args.n, "grid": args.grid,
        "base": args.base, "directions": args.directions, "seed": args.seed,
    })
    doc.update({
        "reports": reports,
        "max_relative_gap": max((r["relative_gap"] for r in reports),
                                default=0.0),
    })
    _write_json(doc, args.output)
    return 0


def cmd_sweep(args) -> int:
    u = _parse_complex_pair(args.u)
    try:
        s_values = [float(s) for s in args.s.split(",") if s]
    except ValueError:
        raise InputError("bad_input", f"bad --s list {args.s!r}")
    cap = _thread_cap()
    if cap > 1:
        # rows are independent; compute in a pool, keep input order
        def one(s):
            rows, _ = variation.sweep_invariant([s], u=u, c=args.c,
                                                family=args.family)
            return rows[0]

        with ThreadPoolExecutor(max_workers=cap) as pool:
            rows = list(pool.map(one, s_values))
        _, summary = variation.sweep_invariant(s_values, u=u, c=args.c,
                                               family=args.family)
    else:
        rows, summary = variation.sweep_invariant(s_values, u=u, c=args.c,
                                                  family=args.family)
    doc = _base_report("sweep", {
        "family": args.family, "s": s_values, "u_re": u.real, "u_im": u.imag,
        "c": args.c,
    })
    doc.update({"rows": rows, "summary": summary})
    _write_json(doc, args.output)
    return 0


def cmd_verify(args) -> int:
    report = acceptance.run_acceptance(grid_points=args.grid)
    doc = json.loads(acceptance.report_to_json(report,
                                               include_timings=args.timings))
    doc["schema_version"] = SCHEMA_VERSION
    doc["generated_at"] = datetime.datetime.now(
        datetime.timezone.utc).isoformat()
    if args.output:
        _write_json(doc, args.output)
    return 0 if report.passed else 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leelab",
        description="Lee-form functionals of almost Hermitian metrics: "
                    "classification, solvers, and variational checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("report-invariant",
                       help="classify an invariant model and evaluate "
                            "functionals")
    p.add_argument("--algebra", help="model JSON file")
    p.add_argument("--model", default=None, help="builtin family (inoue_sm)")
    p.add_argument("--r", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--u", default="0", help="RE or RE,IM")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--output", default="-")
    p.set_defaults(fn=cmd_report_invariant)

    p = sub.add_parser("solve-gauduchon",
                       help="Gauduchon factor of a conformal class")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--grid", type=int, default=16)
    p.add_argument("--logfactor", required=True,
                   help="trig expression or CSV path")
    p.add_argument("--report", default="-")
    p.add_argument("--csv", default="gauduchon_factor.csv")
    p.add_argument("--no-spectrum", action="store_true",
                   help="skip the second-eigenvalue pass (faster)")
    p.set_defaults(fn=cmd_solve_gauduchon)

    p = sub.add_parser("solve-distinguished",
                       help="distinguished factor over a background drift")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--grid", type=int, default=16)
    p.add_argument("--drift", required=True, help="drift 1-form expression")
    p.add_argument("--synthetic", action="store_true",
                   help="accept non-co-closed drifts")
    p.add_argument("--k", type=float, default=None,
                   help="override the compatibility constant")
    p.add_argument("--report", default="-")
    p.add_argument("--csv", default="distinguished_phi.csv")
    p.set_defaults(fn=cmd_solve_distinguished)

    p = sub.add_parser("check-el",
                       help="finite-difference vs weak-form gradient checks")
    p.add_argument("--which", required=True, choices=["g", "f", "a", "r"])
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--grid", type=int, default=16)
    p.add_argument("--base", required=True, help="log-factor expression")
    p.add_argument("--directions", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default="-")
    p.set_defaults(fn=cmd_check_el)

    p = sub.add_parser("sweep", help="invariant-family sweep")
    p.add_argument("--family", default="inoue_sm")
    p.add_argument("--s", required=True, help="comma-separated s values")
    p.add_argument("--u", default="0", help="RE or RE,IM")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--output", default="-")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--grid", type=int, default=16)
    p.add_argument("--output", default=None,
                   help="write the JSON report here as well")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock timings in the report")
    p.set_defaults(fn=cmd_verify)
    return parser


def _error_json(code: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": code, "message": message},
                                sort_keys=True) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        _error_json(exc.code, str(exc))
        return 2
    except modelio.ModelFileError as exc:
        _error_json(exc.code, str(exc))
        return 2
    except fieldspec.FieldSpecError as exc:
        _error_json("fieldspec_error", str(exc))
        return 2
    except (elliptic.NonSolvableError, elliptic.NoConvergenceError) as exc:
        code = ("non_solvable" if isinstance(exc, elliptic.NonSolvableError)
                else "no_convergence")
        _error_json(code, str(exc))
        return 3
    except (ValueError, OSError) as exc:
        _error_json("bad_input", str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
