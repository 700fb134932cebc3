import numpy as np
import pytest

from conftest import random_form, random_hermitian_pd
from leelab.exterior import (
    Form,
    InvariantMetric,
    apply_J,
    form_norm,
    inner_product,
    norm_sq,
    phi,
    phi_bar,
    wedge,
    zero_form,
)
from leelab.invariant import (
    CoframeAlgebra,
    JacobiError,
    classify,
    codiff_lee,
    codifferential,
    d_c,
    el_residuals,
    exterior_derivative,
    f_omega,
    flat_torus,
    functional_densities,
    functional_values,
    inoue_sm,
    iwasawa,
    lee_form,
    InvariantModel,
)


def random_valid_models(seed, count):
    """Random metrics over the stock algebras (n = 2 and n = 3)."""
    rng = np.random.default_rng(seed)
    models = []
    for i in range(count):
        kind = i % 3
        if kind == 0:
            # general Hermitian 2x2 metric on the Inoue algebra
            r = rng.uniform(0.8, 1.6)
            s = rng.uniform(0.8, 1.6)
            cap = 0.9 * r * s
            u = (rng.uniform(-cap, cap) + 1j * rng.uniform(-cap, cap)) / np.sqrt(2)
            models.append(inoue_sm(r, s, u, c=rng.uniform(0.5, 2.0)))
        elif kind == 1:
            base = iwasawa()
            h = random_hermitian_pd(rng, 3)
            models.append(InvariantModel(base.algebra, InvariantMetric(3, h)))
        else:
            n = 2 + (i // 3) % 2
            models.append(flat_torus(n, random_hermitian_pd(rng, n)))
    return models


# -- exterior derivative --------------------------------------------------


def test_inoue_structure_equations():
    m = inoue_sm(1.0, 1.0)
    n = 2
    d2 = exterior_derivative(phi(n, 2), m.algebra)
    assert form_norm(d2 - (-1j) * wedge(phi(n, 2), phi_bar(n, 2))) < 1e-14
    d1 = exterior_derivative(phi(n, 1), m.algebra)
    expected = (1 / 2j) * wedge(phi(n, 1), phi(n, 2)) \
        - (1 / 2j) * wedge(phi(n, 1), phi_bar(n, 2))
    assert form_norm(d1 - expected) < 1e-14


def test_d_squared_zero(rng):
    for m in random_valid_models(5, 6):
        for k in (1, 2):
            a = random_form(rng, m.n, k)
            dda = exterior_derivative(exterior_derivative(a, m.algebra), m.algebra)
            assert form_norm(dda) < 1e-12


def test_inoue_d_omega_u_zero():
    r = 1.3
    m = inoue_sm(r, 0.9, 0.0)
    n = 2
    d_omega = exterior_derivative(m.omega(), m.algebra)
    expected = r ** 2 * (wedge(phi(n, 1), phi(n, 2), phi_bar(n, 1))
                         + wedge(phi(n, 1), phi_bar(n, 1), phi_bar(n, 2)))
    assert form_norm(d_omega - expected) < 1e-12


def test_jacobi_violation_rejected():
    n = 2
    # d(phi^1) = phi^2 ^ phibar^1 has d^2 != 0 against d(phi^2) = phi^1 ^ phi^2
    bad = [wedge(phi(n, 2), phi_bar(n, 1)), wedge(phi(n, 1), phi(n, 2))]
    with pytest.raises(JacobiError):
        CoframeAlgebra(n, bad)


# -- d^c ------------------------------------------------------------------


def test_dc_constant_is_zero():
    m = inoue_sm(1.0, 1.0)
    const = Form(2, 0, {(): 2.3})
    assert d_c(const, m.algebra).is_zero()


def test_inoue_ddc_omega_vanishes():
    for u in (0.0, 0.3 + 0.2j):
        m = inoue_sm(1.2, 0.8, u)
        ddc = exterior_derivative(d_c(m.omega(), m.algebra), m.algebra)
        assert form_norm(ddc) < 1e-12


def test_iwasawa_is_balanced_not_skt():
    m = iwasawa()
    rep = classify(m)
    assert rep.balanced
    assert rep.distinguished
    assert not rep.skt  # dd^c Omega = 2 phi^{1 2 bar1 bar2} for the diagonal metric
    ddc = exterior_derivative(d_c(m.omega(), m.algebra), m.algebra)
    expected = 2.0 * wedge(phi(3, 1), phi(3, 2), phi_bar(3, 1), phi_bar(3, 2))
    assert form_norm(ddc - expected) < 1e-12


# -- codifferential -------------------------------------------------------


def test_codifferential_of_function_is_zero():
    m = inoue_sm(1.0, 1.0)
    f = Form(2, 0, {(): 1.5})
    assert codifferential(f, m).is_zero()


def test_codifferential_adjointness(rng):
    for m in random_valid_models(11, 6):
        for k in (1, 2):
            a = random_form(rng, m.n, k + 1)
            b = random_form(rng, m.n, k)
            lhs = inner_product(codifferential(a, m), b, m.metric)
            rhs = inner_product(a, exterior_derivative(b, m.algebra), m.metric)
            assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))


def test_inoue_codiff_lee_zero():
    m = inoue_sm(1.1, 0.7, 0.3 - 0.1j)
    assert abs(codiff_lee(m)) < 1e-12


# -- Lee form -------------------------------------------------------------


def test_flat_torus_lee_zero(rng):
    m = flat_torus(2, random_hermitian_pd(rng, 2))
    assert form_norm(lee_form(m)) < 1e-13


def test_inoue_lee_form_coefficients():
    r, s, u = 1.3, 0.9, 0.4 + 0.25j
    m = inoue_sm(r, s, u)
    theta = lee_form(m)
    den = 2.0 * (r ** 2 * s ** 2 - abs(u) ** 2)
    c1 = 3.0 * r ** 2 * u / den
    c2 = 1j * (2.0 * r ** 2 * s ** 2 + abs(u) ** 2) / den
    assert theta.coeffs.get((0,), 0) == pytest.approx(c1, abs=1e-12)
    assert theta.coeffs.get((1,), 0) == pytest.approx(c2, abs=1e-12)
    assert theta.coeffs.get((2,), 0) == pytest.approx(np.conj(c1), abs=1e-12)
    # reality: the phibar^2 coefficient is -i (2 r^2 s^2 + |u|^2) / (2 den)
    assert theta.coeffs.get((3,), 0) == pytest.approx(np.conj(c2), abs=1e-12)
    assert theta.is_real(1e-12)


def test_inoue_lee_form_u_zero():
    m = inoue_sm(1.4, 1.7, 0.0)
    theta = lee_form(m)
    expected = 1j * phi(2, 2) - 1j * phi_bar(2, 2)
    assert form_norm(theta - expected) < 1e-12


# -- identity battery (randomized models) ---------------------------------


@pytest.mark.parametrize("seed", [101, 202])
def test_lee_consistency_identities(seed):
    for m in random_valid_models(seed, 12):
        n, alg, g = m.n, m.algebra, m.metric
        omega = m.omega()
        theta = lee_form(m)
        omega_nm1 = omega
        for _ in range(n - 2):
            omega_nm1 = wedge(omega_nm1, omega)
        lhs = exterior_derivative(omega_nm1, alg)
        assert form_norm(lhs - wedge(theta, omega_nm1)) < 1e-10
        # cross definition Lambda(dOmega) = J d* Omega
        cross = apply_J(codifferential(omega, m))
        assert form_norm(theta - cross) < 1e-10


@pytest.mark.parametrize("seed", [303, 404])
def test_tddjtheta_identity(seed):
    from leelab.exterior import lambda_adjoint

    for m in random_valid_models(seed, 12):
        theta = lee_form(m)
        djt = exterior_derivative(apply_J(theta), m.algebra)
        lam = lambda_adjoint(djt, m.metric).scalar().real
        target = -norm_sq(theta, m.metric) - codiff_lee(m)
        assert abs(lam - target) < 1e-10


def test_surface_norm_identity():
    # n = 2: |dOmega|^2 = |theta|^2
    for m in random_valid_models(77, 9):
        if m.n != 2:
            continue
        d_omega = exterior_derivative(m.omega(), m.algebra)
        assert norm_sq(d_omega, m.metric) == pytest.approx(
            norm_sq(lee_form(m), m.metric), abs=1e-10)


def test_surface_ddc_identity():
    # n = 2: dd^c Omega = -(d* theta) Omega^2 / 2
    for m in random_valid_models(88, 9):
        if m.n != 2:
            continue
        ddc = exterior_derivative(d_c(m.omega(), m.algebra), m.algebra)
        half_sq = 0.5 * wedge(m.omega(), m.omega())
        assert form_norm(ddc + codiff_lee(m) * half_sq) < 1e-10


def test_surface_star_trace_identity():
    # n = 2: star(dJtheta) = Lambda(dJtheta) Omega - dJtheta^{1,1} + dJtheta^{(2,0)+(0,2)}
    from leelab.exterior import hodge_star, lambda_adjoint, pq_components

    for u in (0.0, 0.35 + 0.2j, -0.4j):
        m = inoue_sm(1.2, 0.9, u)
        djt = exterior_derivative(apply_J(lee_form(m)), m.algebra)
        comp = pq_components(djt)
        p11 = comp.get((1, 1), zero_form(2, 2))
        off = djt - p11
        rhs = lambda_adjoint(djt, m.metric).scalar() * m.omega() - p11 + off
        assert form_norm(hodge_star(djt, m.metric) - rhs) < 1e-10


def test_inoue_djtheta_all_bidegrees_present():
    m = inoue_sm(1.1, 0.9, 0.3 + 0.1j)
    from leelab.exterior import pq_components

    djt = exterior_derivative(apply_J(lee_form(m)), m.algebra)
    comp = pq_components(djt)
    for key in [(2, 0), (1, 1), (0, 2)]:
        assert key in comp and form_norm(comp[key]) > 1e-6


def test_lck_norm_identity():
    # where the lcK flag holds: (n-1)^2 |dOmega|^2 = (n-1)|theta|^2
    m = inoue_sm(1.0, 1.3, 0.0)
    rep = classify(m)
    assert rep.lck
    n = m.n
    d_omega = exterior_derivative(m.omega(), m.algebra)
    assert (n - 1) ** 2 * norm_sq(d_omega, m.metric) == pytest.approx(
        (n - 1) * norm_sq(lee_form(m), m.metric), abs=1e-10)


def test_skt_gauduchon_norm_identity_n3():
    # product of the Inoue surface with a flat curve: SKT and Gauduchon, n = 3
    n = 3
    half_i = 1.0 / (2.0 * 1j)
    d1 = half_i * wedge(phi(n, 1), phi(n, 2)) - half_i * wedge(phi(n, 1), phi_bar(n, 2))
    d2 = -1j * wedge(phi(n, 2), phi_bar(n, 2))
    alg = CoframeAlgebra(n, [d1, d2, zero_form(n, 2)])
    g = InvariantMetric(n, np.diag([1.0, 1.44, 1.0]))
    m = InvariantModel(alg, g)
    rep = classify(m)
    assert rep.skt and rep.gauduchon and not rep.balanced
    d_omega = exterior_derivative(m.omega(), m.algebra)
    theta = lee_form(m)
    a = norm_sq(d_omega, g)
    b = norm_sq(theta, g)
    c = norm_sq(wedge(theta, m.omega()), g) / (n - 1)
    assert a == pytest.approx(b, abs=1e-10)
    assert b == pytest.approx(c, abs=1e-10)


# -- densities, f_omega, residuals ----------------------------------------


def test_inoue_densities_u_zero():
    r, s = 0.9, 1.6
    m = inoue_sm(r, s, 0.0, c=1.0)
    d = functional_densities(m)
    assert d.g == pytest.approx(0.0, abs=1e-12)
    assert d.r == pytest.approx(0.0, abs=1e-12)
    assert d.f == pytest.approx(4.0 / s ** 4, rel=1e-12)
    assert d.a == pytest.approx(2.0 / s ** 2, rel=1e-12)
    # dJtheta = -2i phi^2 ^ phibar^2 under the J = i^(q-p) convention
    djt = exterior_derivative(apply_J(lee_form(m)), m.algebra)
    assert form_norm(djt - (-2j) * wedge(phi(2, 2), phi_bar(2, 2))) < 1e-12


def test_inoue_a_density_relative_to_top():
    # |dOmega|^2 vol = 2 r^2 phi^{1 2 bar1 bar2} when u = 0
    from leelab.exterior import volume_form

    r, s = 1.2, 0.8
    m = inoue_sm(r, s, 0.0)
    dens = functional_densities(m)
    vol = volume_form(m.metric)
    top = dens.a * vol
    expected = 2.0 * r ** 2 * wedge(phi(2, 1), phi(2, 2), phi_bar(2, 1), phi_bar(2, 2))
    assert form_norm(top - expected) < 1e-12


def test_flat_torus_densities_zero(rng):
    m = flat_torus(3, random_hermitian_pd(rng, 3))
    d = functional_densities(m)
    assert max(abs(x) for x in (d.g, d.f, d.a, d.r, d.v)) < 1e-13


def test_functional_values_scale_with_volume():
    m1 = inoue_sm(1.0, 1.2, 0.0, c=1.0)
    m2 = inoue_sm(1.0, 1.2, 0.0, c=2.0)
    v1, v2 = functional_values(m1), functional_values(m2)
    assert v2.f == pytest.approx(2.0 * v1.f, rel=1e-12)


def test_f_omega_routes_agree():
    for m in random_valid_models(55, 9):
        val = f_omega(m)
        assert np.isfinite(val)
    m = inoue_sm(1.0, 1.4, 0.0)
    assert f_omega(m) == pytest.approx(2.0 / 1.4 ** 2, rel=1e-12)
    assert f_omega(flat_torus(2)) == pytest.approx(0.0, abs=1e-13)
    assert f_omega(iwasawa()) == pytest.approx(0.0, abs=1e-12)


def test_el_residuals():
    m = inoue_sm(1.0, 1.3, 0.0)
    res = el_residuals(m)
    assert res.g[0] == pytest.approx(0.0, abs=1e-12)
    assert res.g[1] == 0.0
    # n = 2: a-equation constant is (n-1)|dOmega|^2 = 2/s^2
    assert res.a[0] == pytest.approx(2.0 / 1.3 ** 2, rel=1e-11)
    flat = flat_torus(2)
    fres = el_residuals(flat)
    for pair in (fres.g, fres.f, fres.a, fres.r):
        assert pair[0] == pytest.approx(0.0, abs=1e-12)


# -- classification -------------------------------------------------------


def test_classify_flat_torus_all_true(rng):
    rep = classify(flat_torus(2, random_hermitian_pd(rng, 2)))
    assert all(rep.flags().values())


def test_classify_inoue_u_zero():
    rep = classify(inoue_sm(1.0, 1.0, 0.0))
    assert rep.gauduchon and rep.skt and rep.lck and rep.distinguished
    assert not rep.balanced and not rep.kaehler
    assert rep.locally_conformally_balanced
    assert rep.lee_norm_sq == pytest.approx(2.0, rel=1e-12)
    assert rep.f_omega == pytest.approx(2.0, rel=1e-12)


def test_classify_tolerance_validation():
    with pytest.raises(ValueError):
        classify(flat_torus(2), tol=0.0)


def test_every_invariant_model_is_gauduchon_and_distinguished():
    for m in random_valid_models(66, 9):
        rep = classify(m)
        assert rep.gauduchon
        assert rep.distinguished


def test_builder_validation():
    with pytest.raises(ValueError):
        inoue_sm(1.0, 1.0, 1.5)  # r^2 s^2 - |u|^2 <= 0
