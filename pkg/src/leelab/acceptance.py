"""One-shot verification suite: every shipped guarantee as a checked run.

Each criterion function returns a :class:`CriterionResult` with the
measured numbers; :func:`run_acceptance` executes them in order, prints
one pass/fail line per criterion and assembles a deterministic report
(the wall-clock timings are carried separately so reports stay
byte-comparable).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import elliptic, invariant, variation
from . import torus as tor
from .exterior import (
    apply_J,
    form_norm,
    hodge_star,
    inner_product,
    lambda_adjoint,
    norm_sq,
    phi,
    phi_bar,
    pq_components,
    volume_form,
    wedge,
    zero_form,
)
from .invariant import (
    classify,
    codiff_lee,
    codifferential,
    d_c,
    exterior_derivative,
    functional_values,
    inoue_sm,
    lee_form,
)
from .torus import (
    ConformalMetric,
    FieldForm,
    ScalarField,
    TorusGrid,
    conformal_metric,
    functional_value,
)

__all__ = ["CriterionResult", "AcceptanceReport", "run_acceptance",
           "CRITERIA", "report_to_json"]

SEED = 20240817


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict
    elapsed: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.number}: {self.name} ({self.elapsed:.1f}s)"


@dataclass
class AcceptanceReport:
    results: list
    total_elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)


def _check(details, key, value, bound, mode="le"):
    """Record a measured value against its bound; returns the verdict."""
    ok = value <= bound if mode == "le" else value >= bound
    details[key] = {"value": float(value), "bound": float(bound), "ok": bool(ok)}
    return ok


# -- criterion 1: closed-form surface-model targets --------------------------


def criterion_1_surface_model() -> CriterionResult:
    details: dict = {}
    ok = True
    tol = 1e-10
    start = time.perf_counter()
    n = 2
    for r, s, c in [(1.0, 1.0, 1.0), (1.3, 0.8, 2.0)]:
        m = inoue_sm(r, s, 0.0, c)
        tag = f"r={r},s={s}"
        theta = lee_form(m)
        ok &= _check(details, f"lee[{tag}]",
                     form_norm(theta - (1j * phi(n, 2) - 1j * phi_bar(n, 2))), tol)
        djt = exterior_derivative(apply_J(theta), m.algebra)
        # the J convention i^(q-p) fixes the sign: -2i phi^2 ^ phibar^2
        expected_djt = -2j * wedge(phi(n, 2), phi_bar(n, 2))
        ok &= _check(details, f"dJtheta[{tag}]",
                     form_norm(djt - expected_djt), tol)
        ok &= _check(details, f"dJtheta_norm[{tag}]",
                     abs(norm_sq(djt, m.metric) - 4.0 / s ** 4), tol)
        ok &= _check(details, f"codiff_lee[{tag}]", abs(codiff_lee(m)), tol)
        ddc = exterior_derivative(d_c(m.omega(), m.algebra), m.algebra)
        ok &= _check(details, f"ddc_omega[{tag}]", form_norm(ddc), tol)
        d_omega = exterior_derivative(m.omega(), m.algebra)
        a_top = norm_sq(d_omega, m.metric) * volume_form(m.metric)
        expected_top = 2.0 * r ** 2 * wedge(phi(n, 1), phi(n, 2),
                                            phi_bar(n, 1), phi_bar(n, 2))
        ok &= _check(details, f"a_density[{tag}]",
                     form_norm(a_top - expected_top), tol)
    # general (r, s, u): Lee form coefficients match the closed form
    for r, s, u in [(1.3, 0.9, 0.4 + 0.25j), (0.9, 1.1, -0.3j), (1.0, 1.0, 0.5)]:
        m = inoue_sm(r, s, u, 1.0)
        theta = lee_form(m)
        den = 2.0 * (r ** 2 * s ** 2 - abs(u) ** 2)
        c1 = 3.0 * r ** 2 * u / den
        c2 = 1j * (2.0 * r ** 2 * s ** 2 + abs(u) ** 2) / den
        expected = (c1 * phi(n, 1) + c2 * phi(n, 2)
                    + np.conj(c1) * phi_bar(n, 1) + np.conj(c2) * phi_bar(n, 2))
        ok &= _check(details, f"lee_general[u={u}]",
                     form_norm(theta - expected), tol)
    elapsed = time.perf_counter() - start
    ok &= _check(details, "runtime_seconds", elapsed, 1.0)
    return CriterionResult(1, "surface model closed forms", bool(ok), details,
                           elapsed)


# -- criterion 2: infimum sweep ----------------------------------------------


def criterion_2_sweep() -> CriterionResult:
    details: dict = {}
    ok = True
    start = time.perf_counter()
    rows, summary = variation.sweep_invariant([1, 2, 4, 8])
    for row in rows:
        ok &= _check(details, f"f_value[s={row['s']}]",
                     abs(row["values"]["F"] - 4.0 / row["s"] ** 4), 1e-10)
        if row["flags"]["kaehler"]:
            ok = False
            details[f"kaehler[s={row['s']}]"] = {"value": True, "ok": False}
    details["f_monotone_decreasing"] = {"value": summary["f_monotone_decreasing"],
                                        "ok": summary["f_monotone_decreasing"]}
    ok &= summary["f_monotone_decreasing"]
    details["never_kaehler"] = {"value": summary["never_kaehler"],
                                "ok": summary["never_kaehler"]}
    ok &= summary["never_kaehler"]
    return CriterionResult(2, "torsion-energy infimum sweep", bool(ok), details,
                           time.perf_counter() - start)


# -- criterion 3: identity suite ---------------------------------------------


def _random_models(seed, count):
    rng = np.random.default_rng(seed)
    models = []
    for i in range(count):
        kind = i % 3
        if kind == 0:
            r = rng.uniform(0.8, 1.6)
            s = rng.uniform(0.8, 1.6)
            cap = 0.85 * r * s
            u = (rng.uniform(-cap, cap) + 1j * rng.uniform(-cap, cap)) / np.sqrt(2)
            models.append(inoue_sm(r, s, u, c=rng.uniform(0.5, 2.0)))
        elif kind == 1:
            base = invariant.iwasawa()
            q = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
            qq, _ = np.linalg.qr(q)
            h = qq @ np.diag(rng.uniform(0.6, 1.8, 3)) @ qq.conj().T
            from .exterior import InvariantMetric

            models.append(invariant.InvariantModel(
                base.algebra, InvariantMetric(3, h)))
        else:
            nn = 2 + i % 2
            q = rng.normal(size=(nn, nn)) + 1j * rng.normal(size=(nn, nn))
            qq, _ = np.linalg.qr(q)
            h = qq @ np.diag(rng.uniform(0.6, 1.8, nn)) @ qq.conj().T
            models.append(invariant.flat_torus(nn, h))
    return models


def criterion_3_identities() -> CriterionResult:
    details: dict = {}
    tol = 1e-10
    start = time.perf_counter()
    worst = {"lee_wedge": 0.0, "lee_cross": 0.0, "contraction": 0.0,
             "surface_norms": 0.0, "surface_ddc": 0.0, "surface_star": 0.0}
    for m in _random_models(SEED, 50):
        n, alg, g = m.n, m.algebra, m.metric
        omega = m.omega()
        theta = lee_form(m)
        omega_nm1 = omega
        for _ in range(n - 2):
            omega_nm1 = wedge(omega_nm1, omega)
        worst["lee_wedge"] = max(
            worst["lee_wedge"],
            form_norm(exterior_derivative(omega_nm1, alg)
                      - wedge(theta, omega_nm1)))
        worst["lee_cross"] = max(
            worst["lee_cross"],
            form_norm(theta - apply_J(codifferential(omega, m))))
        djt = exterior_derivative(apply_J(theta), alg)
        lam = lambda_adjoint(djt, g).scalar().real
        worst["contraction"] = max(
            worst["contraction"],
            abs(lam + norm_sq(theta, g) + codiff_lee(m)))
        if n == 2:
            d_omega = exterior_derivative(omega, alg)
            worst["surface_norms"] = max(
                worst["surface_norms"],
                abs(norm_sq(d_omega, g) - norm_sq(theta, g)))
            ddc = exterior_derivative(d_c(omega, alg), alg)
            half_sq = 0.5 * wedge(omega, omega)
            worst["surface_ddc"] = max(
                worst["surface_ddc"],
                form_norm(ddc + codiff_lee(m) * half_sq))
            comp = pq_components(djt)
            p11 = comp.get((1, 1), zero_form(2, 2))
            rhs = lam * omega - p11 + (djt - p11)
            worst["surface_star"] = max(
                worst["surface_star"],
                form_norm(hodge_star(djt, g) - rhs))
    ok = True
    for key, value in worst.items():
        ok &= _check(details, key, value, tol)
    return CriterionResult(3, "invariant identity suite (50 models)", bool(ok),
                           details, time.perf_counter() - start)


# -- criterion 4: gauduchon solver -------------------------------------------


def criterion_4_gauduchon(grid_points: int = 16):
    details: dict = {}
    ok = True
    start = time.perf_counter()
    grid = TorusGrid(2, grid_points)
    psi_vals = 0.3 * np.cos(grid.coordinate("x1"))
    psi = ScalarField(grid, psi_vals)
    cls = conformal_metric(grid, psi, normalized=True)
    res = elliptic.gauduchon_factor(cls)
    ratio = res.factor.values / np.exp(-(grid.n - 1) * psi_vals)
    rel = float(np.max(np.abs(ratio - ratio.mean())) / abs(ratio.mean()))
    ok &= _check(details, "factor_relative_error", rel, 1e-6)
    details["strictly_positive"] = {"value": res.strictly_positive,
                                    "ok": res.strictly_positive}
    ok &= res.strictly_positive
    ok &= _check(details, "kernel_gap", res.gap, 0.5, mode="ge")
    elapsed = time.perf_counter() - start
    ok &= _check(details, "runtime_seconds", elapsed, 60.0)
    result = CriterionResult(4, "gauduchon factor solver", bool(ok), details,
                             elapsed)
    return result, res


# -- criterion 5: distinguished solver ---------------------------------------


def criterion_5_distinguished(grid_points: int = 16) -> CriterionResult:
    details: dict = {}
    ok = True
    start = time.perf_counter()
    grid = TorusGrid(2, grid_points)
    flat = conformal_metric(grid, ScalarField.constant(grid, 0.0),
                            normalized=True)
    x2 = grid.coordinate("x2")
    coeff = 0.5 + 0.3 * np.cos(x2)
    theta0 = FieldForm(grid, 1, {(0,): coeff / 2.0, (2,): coeff / 2.0})
    res = elliptic.distinguished_factor(flat, theta0)
    ok &= _check(details, "solve_residual",
                 res.residual / max(1.0, res.info.rhs_norm), 1e-9)
    ok &= _check(details, "f_consistency", res.f_consistency, 1e-8)
    details["k0"] = {"value": res.k0, "ok": True}
    try:
        elliptic.distinguished_factor(flat, theta0, k_override=res.k0 + 0.05)
        details["fredholm_dichotomy"] = {"value": "accepted shifted rhs",
                                         "ok": False}
        ok = False
    except elliptic.NonSolvableError:
        details["fredholm_dichotomy"] = {"value": "shifted rhs rejected",
                                         "ok": True}
    return CriterionResult(5, "distinguished factor solver", bool(ok), details,
                           time.perf_counter() - start)


# -- criterion 6: gradient consistency ---------------------------------------


def criterion_6_gradients(grid_points: int = 16) -> CriterionResult:
    details: dict = {}
    ok = True
    start = time.perf_counter()
    grid = TorusGrid(2, grid_points)
    rng = np.random.default_rng(SEED)
    bases = [
        conformal_metric(grid, ScalarField(
            grid, 0.2 * np.cos(grid.coordinate("x1"))), normalized=True),
        conformal_metric(grid, ScalarField(
            grid, 0.15 * np.sin(grid.coordinate("y1"))
            + 0.1 * np.cos(grid.coordinate("x2"))), normalized=True),
        conformal_metric(grid, ScalarField(
            grid, 0.1 * np.cos(2 * grid.coordinate("x1"))
            + 0.2 * np.sin(grid.coordinate("y2"))), normalized=True),
    ]
    for which in ("G", "F", "A", "R"):
        worst = 0.0
        for b_idx, base in enumerate(bases):
            for _ in range(5):
                direction = variation.random_mean_zero_direction(base, rng)
                rep = variation.variation_report(which, base, direction)
                worst = max(worst, rep.relative_gap)
        ok &= _check(details, f"max_gap[{which}]", worst, 1e-3)
    return CriterionResult(6, "finite-difference vs weak-form gradients",
                           bool(ok), details, time.perf_counter() - start)


# -- criterion 7: criticality certification ----------------------------------


def criterion_7_criticality(gauduchon_result=None,
                            grid_points: int = 16) -> CriterionResult:
    details: dict = {}
    ok = True
    start = time.perf_counter()
    grid = TorusGrid(2, grid_points)
    if gauduchon_result is None:
        psi = ScalarField(grid, 0.3 * np.cos(grid.coordinate("x1")))
        cls = conformal_metric(grid, psi, normalized=True)
        gauduchon_result = elliptic.gauduchon_factor(cls, with_spectrum=False)
    point = gauduchon_result.metric
    rng = np.random.default_rng(SEED + 1)
    worst = 0.0
    for _ in range(20):
        direction = variation.random_mean_zero_direction(point, rng)
        worst = max(worst, abs(variation.el_pairing("G", point, direction)))
    ok &= _check(details, "g_pairing_at_gauduchon", worst, 1e-6)

    flat = conformal_metric(grid, ScalarField.constant(grid, 0.0),
                            normalized=True)
    p1 = ScalarField(grid, np.cos(grid.coordinate("x1")))
    sv = variation.second_variation_F(flat, p1)
    ok &= _check(details, "second_variation_match", sv.relative_deviation, 0.01)
    details["second_variation_positive"] = {"value": sv.coefficient,
                                            "ok": sv.coefficient > 0}
    ok &= sv.coefficient > 0
    return CriterionResult(7, "criticality certification", bool(ok), details,
                           time.perf_counter() - start)


# -- criterion 8: conformal invariance of the exact-Lee energy ----------------


def criterion_8_conformal_invariance(grid_points: int = 16) -> CriterionResult:
    details: dict = {}
    start = time.perf_counter()
    grid = TorusGrid(2, grid_points)
    rng = np.random.default_rng(SEED + 2)
    values = []
    for i in range(10):
        spec = (rng.uniform(-0.3, 0.3) * np.cos(grid.coordinate("x1"))
                + rng.uniform(-0.3, 0.3) * np.sin(grid.coordinate("y2"))
                + rng.uniform(-0.2, 0.2) * np.cos(grid.coordinate("x2")))
        m = conformal_metric(grid, ScalarField(grid, spec), normalized=True)
        values.append(functional_value("V", m))
    spread = max(values) - min(values)
    ok = _check(details, "value_spread", spread, 1e-12)
    details["values_max"] = {"value": max(np.abs(values)), "ok": True}
    return CriterionResult(8, "exact-Lee energy conformal invariance",
                           bool(ok), details, time.perf_counter() - start)


# -- criterion 9: determinism ------------------------------------------------


def _deterministic_digest() -> str:
    """Canonical JSON of the deterministic sub-battery."""
    payload = {}
    m = inoue_sm(1.1, 0.9, 0.2 + 0.1j, 1.3)
    payload["lee"] = sorted(
        (str(k), v.real, v.imag) for k, v in lee_form(m).coeffs.items())
    vals = functional_values(m)
    payload["functionals"] = [vals.g, vals.f, vals.a, vals.r, vals.v]
    rows, summary = variation.sweep_invariant([1, 2, 4])
    payload["sweep"] = [[row["r"], row["values"]["F"], row["values"]["A"]]
                        for row in rows]
    grid = TorusGrid(2, 8)
    flat = conformal_metric(grid, ScalarField.constant(grid, 0.0),
                            normalized=True)
    x2 = grid.coordinate("x2")
    coeff = 0.5 + 0.3 * np.cos(x2)
    theta0 = FieldForm(grid, 1, {(0,): coeff / 2.0, (2,): coeff / 2.0})
    res = elliptic.distinguished_factor(flat, theta0)
    payload["distinguished"] = [res.k0, float(res.phi.values[0, 0, 0, 0]),
                                float(res.phi.values[1, 2, 3, 4])]
    return json.dumps(payload, sort_keys=True)


def criterion_9_determinism(total_budget: float = 600.0,
                            elapsed_so_far: float = 0.0) -> CriterionResult:
    details: dict = {}
    start = time.perf_counter()
    first = _deterministic_digest()
    second = _deterministic_digest()
    identical = first == second
    details["repeat_identical"] = {"value": identical, "ok": identical}
    elapsed = time.perf_counter() - start
    total = elapsed_so_far + elapsed
    ok = identical and _check(details, "total_runtime_seconds", total,
                              total_budget)
    return CriterionResult(9, "determinism and runtime budget", bool(ok),
                           details, elapsed)


CRITERIA = {
    1: criterion_1_surface_model,
    2: criterion_2_sweep,
    3: criterion_3_identities,
    5: criterion_5_distinguished,
    6: criterion_6_gradients,
    8: criterion_8_conformal_invariance,
}


def run_acceptance(grid_points: int = 16, echo=print) -> AcceptanceReport:
    """Run all acceptance criteria, printing one line per criterion."""
    results = []
    suite_start = time.perf_counter()

    def push(result):
        results.append(result)
        if echo is not None:
            echo(result.line())

    push(criterion_1_surface_model())
    push(criterion_2_sweep())
    push(criterion_3_identities())
    c4, gauduchon_result = criterion_4_gauduchon(grid_points)
    push(c4)
    push(criterion_5_distinguished(grid_points))
    push(criterion_6_gradients(grid_points))
    push(criterion_7_criticality(gauduchon_result, grid_points))
    push(criterion_8_conformal_invariance(grid_points))
    elapsed_so_far = time.perf_counter() - suite_start
    push(criterion_9_determinism(elapsed_so_far=elapsed_so_far))
    return AcceptanceReport(results, time.perf_counter() - suite_start)


def report_to_json(report: AcceptanceReport, include_timings: bool = False) -> str:
    doc = {
        "schema_version": "1",
        "passed": report.passed,
        "criteria": [
            {
                "number": r.number,
                "name": r.name,
                "passed": r.passed,
                "details": r.details,
                **({"elapsed_seconds": r.elapsed} if include_timings else {}),
            }
            for r in report.results
        ],
    }
    if include_timings:
        doc["total_elapsed_seconds"] = report.total_elapsed
    return json.dumps(doc, indent=2, sort_keys=True)
