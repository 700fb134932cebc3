"""Invariant Hermitian geometry on Lie coframes.

A :class:`CoframeAlgebra` stores the exterior derivative of each coframe
generator as a degree-2 form; d extends to all invariant forms by the
Leibniz rule.  Codifferentials and related adjoints are finite
Gram-matrix adjoints, which compute the L2 adjoints on a compact
quotient because exact invariant top forms vanish (the unimodularity
check enforced at construction).

The module evaluates the Lee form, the pointwise densities of the five
metric functionals, Euler-Lagrange residual constants, and a
classification report (Kaehler / balanced / lcK / SKT / Gauduchon /
distinguished), plus builders for the stock models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exterior import (
    Form,
    InvariantMetric,
    apply_J,
    apply_J_inverse,
    basis,
    basis_position,
    form_norm,
    inner_product,
    lambda_adjoint,
    norm_sq,
    phi,
    phi_bar,
    wedge,
    zero_form,
    _gram_adjoint,
)

__all__ = [
    "CoframeAlgebra",
    "InvariantModel",
    "ClassificationReport",
    "FunctionalDensities",
    "ELResiduals",
    "JacobiError",
    "UnimodularityError",
    "exterior_derivative",
    "d_c",
    "codifferential",
    "lee_form",
    "functional_densities",
    "functional_values",
    "f_omega",
    "el_residuals",
    "classify",
    "flat_torus",
    "inoue_sm",
    "iwasawa",
    "load_algebra",
]


class JacobiError(ValueError):
    """d^2 != 0 on some generator."""


class UnimodularityError(ValueError):
    """Some invariant (2n-1)-form has exact top component."""


class CoframeAlgebra:
    """Dimension n plus the exterior derivative of each generator.

    ``d_generator`` lists degree-2 forms for the 2n generators in global
    order.  Barred entries may be omitted (pass ``None``); they are filled
    by conjugating the unbarred ones.  Construction verifies conjugation
    closure, d o d = 0 and the unimodularity proxy.
    """

    def __init__(self, n: int, d_generator, tol: float = 1e-12):
        self.n = int(n)
        dg = list(d_generator)
        if len(dg) == self.n:
            dg = dg + [None] * self.n
        if len(dg) != 2 * self.n:
            raise ValueError(f"expected {self.n} or {2 * self.n} generator derivatives")
        for a in range(self.n):
            if dg[a] is None:
                raise ValueError("unbarred generator derivatives must all be given")
            if dg[a].degree != 2 or dg[a].n != self.n:
                raise ValueError("generator derivatives must be degree-2 forms")
            if dg[self.n + a] is None:
                dg[self.n + a] = dg[a].conjugate()
        for a in range(self.n):
            if form_norm(dg[self.n + a] - dg[a].conjugate()) > tol:
                raise ValueError("barred derivatives are not conjugates of unbarred ones")
        self.d_generator = tuple(dg)
        self._d_matrices: dict = {}
        self._validate(tol)

    def _validate(self, tol: float):
        for a, da in enumerate(self.d_generator):
            dda = exterior_derivative(da, self)
            if form_norm(dda) > tol:
                raise JacobiError(
                    f"d^2 of generator {a + 1} has norm {form_norm(dda):.3e}"
                )
        top = tuple(range(2 * self.n))
        for idx in basis(self.n, 2 * self.n - 1):
            db = exterior_derivative(Form(self.n, 2 * self.n - 1, {idx: 1.0}), self)
            if abs(db.coeffs.get(top, 0.0)) > tol:
                raise UnimodularityError(
                    f"d of the (2n-1)-form {idx} has a volume component"
                )

    def d_matrix(self, degree: int) -> np.ndarray:
        """Matrix of d from degree k to degree k+1 over the sorted bases."""
        if degree not in self._d_matrices:
            src = basis(self.n, degree)
            dst = basis_position(self.n, degree + 1)
            m = np.zeros((len(dst), len(src)), dtype=complex)
            for j, idx in enumerate(src):
                df = exterior_derivative(Form(self.n, degree, {idx: 1.0}), self)
                for key, val in df.coeffs.items():
                    m[dst[key], j] = val
            self._d_matrices[degree] = m
        return self._d_matrices[degree]


def exterior_derivative(a: Form, alg: CoframeAlgebra) -> Form:
    """Leibniz extension of the generator derivatives."""
    n = a.n
    if n != alg.n:
        raise ValueError("form and algebra dimensions differ")
    if a.degree >= 2 * n:
        return zero_form(n, min(a.degree + 1, 2 * n))
    out = zero_form(n, a.degree + 1)
    for idx, val in a.coeffs.items():
        for t, gen in enumerate(idx):
            sign = (-1) ** t
            term = alg.d_generator[gen]
            left = Form(n, t, {idx[:t]: 1.0})
            right = Form(n, len(idx) - t - 1, {idx[t + 1:]: 1.0})
            out = out + (sign * val) * wedge(left, term, right)
    return out


def d_c(a: Form, alg: CoframeAlgebra) -> Form:
    """Twisted differential  -J^(-1) d J."""
    return -1.0 * apply_J_inverse(exterior_derivative(apply_J(a), alg))


@dataclass
class InvariantModel:
    """A coframe algebra together with an invariant Hermitian metric."""

    algebra: CoframeAlgebra
    metric: InvariantMetric
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.algebra.n != self.metric.n:
            raise ValueError("metric dimension does not match algebra dimension")

    @property
    def n(self) -> int:
        return self.metric.n

    def omega(self) -> Form:
        return self.metric.fundamental_form()

    def cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]


def codifferential(a: Form, model: InvariantModel) -> Form:
    """Gram-matrix adjoint of d (the L2 codifferential on invariant forms)."""
    k = a.degree
    if k == 0:
        return zero_form(a.n, 0)
    g = model.metric
    w = _gram_adjoint(model.algebra.d_matrix(k - 1), g.gram(k - 1), g.gram(k),
                      a.to_vector())
    return Form.from_vector(a.n, k - 1, w)


def lee_form(model: InvariantModel) -> Form:
    """Lee form: contraction of d(Omega) with the fundamental form."""
    def compute():
        return lambda_adjoint(
            exterior_derivative(model.omega(), model.algebra), model.metric
        )
    return model.cached("lee", compute)


def codiff_lee(model: InvariantModel) -> float:
    """The constant d* theta of an invariant model."""
    theta = lee_form(model)
    val = codifferential(theta, model).scalar()
    return float(val.real)


@dataclass(frozen=True)
class FunctionalDensities:
    """Pointwise densities of the five functionals (constants here)."""

    g: float
    f: float
    a: float
    r: float
    v: float


def functional_densities(model: InvariantModel) -> FunctionalDensities:
    """Densities (d*theta)^2, |dJtheta|^2, |dOmega|^2, |dd^cOmega|^2, |dtheta|^2."""
    alg, g = model.algebra, model.metric
    omega = model.omega()
    theta = lee_form(model)
    d_omega = exterior_derivative(omega, alg)
    dj_theta = exterior_derivative(apply_J(theta), alg)
    ddc_omega = exterior_derivative(d_c(omega, alg), alg)
    d_theta = exterior_derivative(theta, alg)
    return FunctionalDensities(
        g=codiff_lee(model) ** 2,
        f=norm_sq(dj_theta, g),
        a=norm_sq(d_omega, g),
        r=norm_sq(ddc_omega, g),
        v=norm_sq(d_theta, g),
    )


def total_volume(model: InvariantModel) -> float:
    """Total volume: det(h) times the volume constant c."""
    return model.metric.det_h() * model.metric.c


def functional_values(model: InvariantModel) -> FunctionalDensities:
    """Functional values: density times total volume (densities are constant)."""
    d = functional_densities(model)
    vol = total_volume(model)
    return FunctionalDensities(*(x * vol for x in
                                 (d.g, d.f, d.a, d.r, d.v)))


def f_omega(model: InvariantModel, tol: float = 1e-10) -> float:
    """The function f = |theta|^2 + d*theta, computed along two routes.

    The contraction route Lambda(-dJtheta) must agree with the direct
    route; a mismatch signals an inner-product or J convention bug and
    raises immediately.
    """
    g = model.metric
    theta = lee_form(model)
    dj_theta = exterior_derivative(apply_J(theta), model.algebra)
    via_contraction = lambda_adjoint(-1.0 * dj_theta, g).scalar()
    direct = norm_sq(theta, g) + codiff_lee(model)
    if abs(via_contraction - direct) > tol * max(1.0, abs(direct)):
        raise RuntimeError(
            "f_omega cross-check failed: contraction route "
            f"{via_contraction} vs direct route {direct}"
        )
    return float(direct)


@dataclass(frozen=True)
class ELResiduals:
    """Euler-Lagrange left-hand sides evaluated on an invariant model.

    Each entry is (constant, deviation); invariant quantities are exact
    constants, so deviations vanish by construction and are reported for
    schema stability.
    """

    g: tuple
    f: tuple
    a: tuple
    r: tuple


def _ddc_matrix(model: InvariantModel, degree: int) -> np.ndarray:
    """Matrix of dd^c from degree k to k+2 over the invariant bases."""
    n = model.n
    src = basis(n, degree)
    dst = basis_position(n, degree + 2)
    m = np.zeros((len(dst), len(src)), dtype=complex)
    for j, idx in enumerate(src):
        w = exterior_derivative(d_c(Form(n, degree, {idx: 1.0}), model.algebra),
                                model.algebra)
        for key, val in w.coeffs.items():
            m[dst[key], j] = val
    return m


def _ddc_adjoint(a: Form, model: InvariantModel) -> Form:
    """Gram adjoint of dd^c applied to a form of degree >= 2."""
    k = a.degree
    g = model.metric
    w = _gram_adjoint(_ddc_matrix(model, k - 2), g.gram(k - 2), g.gram(k),
                      a.to_vector())
    return Form.from_vector(model.n, k - 2, w)


def el_residuals(model: InvariantModel) -> ELResiduals:
    """Left-hand-side constants of the four Euler-Lagrange equations."""
    n = model.n
    alg, g = model.algebra, model.metric
    dens = functional_densities(model)
    theta = lee_form(model)
    dst = codiff_lee(model)

    # d*theta is an invariant function; d of a constant vanishes, so the
    # Laplacian and gradient terms contribute nothing.
    g_const = -n / (2.0 * (n - 1.0)) * dst ** 2

    dj_theta = exterior_derivative(apply_J(theta), alg)
    f_adj = _ddc_adjoint(dj_theta, model).scalar().real
    f_const = (n - 2.0) * dens.f + 2.0 * (n - 1.0) * f_adj

    a_const = (n - 1.0) * dens.a + 2.0 * dst

    # (dd^c)* of the 4-form dd^cOmega is a 2-form; contract it afterwards.
    ddc_omega = exterior_derivative(d_c(model.omega(), alg), alg)
    r_adj = lambda_adjoint(_ddc_adjoint(ddc_omega, model), g).scalar().real
    r_const = (n - 4.0) * dens.r + 2.0 * r_adj

    return ELResiduals(
        g=(float(g_const), 0.0),
        f=(float(f_const), 0.0),
        a=(float(a_const), 0.0),
        r=(float(r_const), 0.0),
    )


@dataclass(frozen=True)
class ClassificationReport:
    """Metric class flags with the residual norms backing them."""

    kaehler: bool
    balanced: bool
    lck: bool
    locally_conformally_balanced: bool
    skt: bool
    gauduchon: bool
    distinguished: bool
    lee_norm_sq: float
    f_omega: float
    residuals: dict
    tol: float

    def flags(self) -> dict:
        return {
            "kaehler": self.kaehler,
            "balanced": self.balanced,
            "lck": self.lck,
            "locally_conformally_balanced": self.locally_conformally_balanced,
            "skt": self.skt,
            "gauduchon": self.gauduchon,
            "distinguished": self.distinguished,
        }


def classify(model: InvariantModel, tol: float = 1e-9) -> ClassificationReport:
    """Classify the metric; each flag holds iff its residual norm < tol."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    n = model.n
    alg, g = model.algebra, model.metric
    omega = model.omega()
    theta = lee_form(model)
    d_omega = exterior_derivative(omega, alg)
    d_theta = exterior_derivative(theta, alg)

    omega_nm1 = omega
    for _ in range(n - 2):
        omega_nm1 = wedge(omega_nm1, omega)
    lee_identity = exterior_derivative(omega_nm1, alg) - wedge(theta, omega_nm1)

    ddc_omega = exterior_derivative(d_c(omega, alg), alg)
    f_val = f_omega(model)
    dist_form = exterior_derivative(
        d_c(float(f_val) ** (n - 1) * omega_nm1, alg), alg
    )

    res = {
        "kaehler": np.sqrt(norm_sq(d_omega, g)),
        "balanced": np.sqrt(norm_sq(theta, g)),
        "lck": np.sqrt(norm_sq(d_omega - (1.0 / (n - 1)) * wedge(theta, omega), g))
               + np.sqrt(norm_sq(d_theta, g)),
        "locally_conformally_balanced": np.sqrt(norm_sq(d_theta, g))
               + np.sqrt(norm_sq(lee_identity, g)),
        "skt": np.sqrt(norm_sq(ddc_omega, g)),
        "gauduchon": abs(codiff_lee(model)),
        "distinguished": np.sqrt(norm_sq(dist_form, g)),
    }
    return ClassificationReport(
        kaehler=bool(res["kaehler"] < tol),
        balanced=bool(res["balanced"] < tol),
        lck=bool(res["lck"] < tol),
        locally_conformally_balanced=bool(
            res["locally_conformally_balanced"] < tol),
        skt=bool(res["skt"] < tol),
        gauduchon=bool(res["gauduchon"] < tol),
        distinguished=bool(res["distinguished"] < tol),
        lee_norm_sq=norm_sq(theta, g),
        f_omega=f_val,
        residuals={k: float(v) for k, v in res.items()},
        tol=tol,
    )


# -- builders -----------------------------------------------------------


def flat_torus(n: int, h=None, c: float = 1.0) -> InvariantModel:
    """Flat torus: all generator derivatives vanish; default metric h = I."""
    alg = CoframeAlgebra(n, [zero_form(n, 2) for _ in range(n)])
    metric = InvariantMetric(n, np.eye(n) if h is None else h, c)
    return InvariantModel(alg, metric)


def inoue_sm(r: float, s: float, u: complex = 0.0, c: float = 1.0) -> InvariantModel:
    """Inoue-Bombieri surface model with metric parameters (r, s, u).

    The metric matrix is ``[[r^2, -i u], [i conj(u), s^2]]``; validity
    requires ``r^2 s^2 - |u|^2 > 0``.
    """
    r2, s2, u = float(r) ** 2, float(s) ** 2, complex(u)
    if r2 * s2 - abs(u) ** 2 <= 0:
        raise ValueError("inoue_sm requires r^2 s^2 - |u|^2 > 0")
    n = 2
    half_i = 1.0 / (2.0 * 1j)
    d1 = half_i * wedge(phi(n, 1), phi(n, 2)) - half_i * wedge(phi(n, 1), phi_bar(n, 2))
    d2 = -1j * wedge(phi(n, 2), phi_bar(n, 2))
    alg = CoframeAlgebra(n, [d1, d2])
    h = np.array([[r2, -1j * u], [1j * np.conj(u), s2]], dtype=complex)
    return InvariantModel(alg, InvariantMetric(n, h, c))


def iwasawa(h=None, c: float = 1.0) -> InvariantModel:
    """Iwasawa-type nilmanifold fixture: d phi^3 = phi^1 wedge phi^2."""
    n = 3
    d3 = wedge(phi(n, 1), phi(n, 2))
    alg = CoframeAlgebra(n, [zero_form(n, 2), zero_form(n, 2), d3])
    metric = InvariantMetric(n, np.eye(n) if h is None else h, c)
    return InvariantModel(alg, metric)


def load_algebra(path):
    """Load a model (or bare algebra) from the JSON file format.

    The format is defined in :mod:`leelab.modelio`; parsing enforces the
    Jacobi and unimodularity invariants and metric positivity.
    """
    from . import modelio

    return modelio.load(path)
