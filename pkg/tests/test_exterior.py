import itertools

import numpy as np
import pytest

from conftest import random_form, random_hermitian_pd
from leelab.exterior import (
    Form,
    InvariantMetric,
    apply_J,
    apply_J_inverse,
    basis,
    form_norm,
    hodge_star,
    inner_product,
    integrate_top,
    lambda_adjoint,
    norm_sq,
    phi,
    phi_bar,
    pq_components,
    volume_form,
    wedge,
    zero_form,
)


def inversion_sign(seq):
    """Independent parity oracle: count inverted pairs explicitly."""
    inv = sum(1 for i, j in itertools.combinations(range(len(seq)), 2)
              if seq[i] > seq[j])
    return -1 if inv % 2 else 1


def test_wedge_basis_product():
    n = 2
    w = wedge(phi(n, 1), phi(n, 2))
    assert w.coeffs == {(0, 1): 1.0 + 0j}


def test_wedge_antisymmetry_of_one_forms(rng):
    for n in (2, 3):
        a = random_form(rng, n, 1)
        assert form_norm(wedge(a, a)) < 1e-14


def test_wedge_transposition_sign_oracle():
    n = 2
    lhs = wedge(phi(n, 1), phi(n, 2), phi_bar(n, 1), phi_bar(n, 2))
    rhs = wedge(phi(n, 1), phi_bar(n, 1), phi(n, 2), phi_bar(n, 2))
    # orders (0,1,2,3) and (0,2,1,3): signs from the inversion-count oracle
    sign = inversion_sign((0, 1, 2, 3)) * inversion_sign((0, 2, 1, 3))
    assert form_norm(lhs - sign * rhs) == 0
    assert sign == -1


def test_wedge_bilinear_associative(rng):
    n = 2
    a, b, c = (random_form(rng, n, 1) for _ in range(3))
    left = wedge(wedge(a, b), c)
    right = wedge(a, wedge(b, c))
    assert form_norm(left - right) < 1e-13
    s = 0.7 - 0.2j
    assert form_norm(wedge(s * a + b, c) - (s * wedge(a, c) + wedge(b, c))) < 1e-13


def test_wedge_graded_anticommutative(rng):
    n = 3
    for p, q in [(1, 1), (1, 2), (2, 2), (2, 3)]:
        a = random_form(rng, n, p)
        b = random_form(rng, n, q)
        assert form_norm(wedge(a, b) - (-1.0) ** (p * q) * wedge(b, a)) < 1e-12


def test_wedge_universe_mismatch():
    with pytest.raises(ValueError):
        wedge(phi(2, 1), phi(3, 1))


def test_conjugation_involution_and_reality(rng):
    n = 2
    a = random_form(rng, n, 2)
    assert form_norm(a.conjugate().conjugate() - a) < 1e-14
    real = a + a.conjugate()
    assert real.is_real()


def test_pq_components():
    n = 2
    a = wedge(phi(n, 1), phi_bar(n, 2))
    comp = pq_components(a)
    assert set(comp) == {(1, 1)}
    b = wedge(phi(n, 1), phi(n, 2)) + a
    comp = pq_components(b)
    assert set(comp) == {(2, 0), (1, 1)}
    total = zero_form(n, 2)
    for part in comp.values():
        total = total + part
    assert form_norm(total - b) == 0


def test_apply_J_factors():
    n = 2
    assert form_norm(apply_J(phi(n, 1)) - (-1j) * phi(n, 1)) == 0
    w = wedge(phi(n, 1), phi_bar(n, 1))
    assert form_norm(apply_J(w) - w) == 0
    assert form_norm(apply_J(apply_J(phi(n, 1))) - (-1.0) * phi(n, 1)) == 0


def test_apply_J_inverse(rng):
    for n in (2, 3):
        for k in (1, 2, 3):
            a = random_form(rng, n, k)
            assert form_norm(apply_J_inverse(apply_J(a)) - a) < 1e-14
            # J^{-1} = (-1)^k J on k-forms
            assert form_norm(apply_J_inverse(a) - (-1.0) ** k * apply_J(a)) < 1e-14


def test_inner_product_calibration():
    n = 2
    g = InvariantMetric(n, np.diag([1.0, 1.0]))
    one = Form(n, 0, {(): 1.0})
    assert inner_product(one, one, g) == pytest.approx(1.0)
    s = 1.7
    gs = InvariantMetric(n, np.diag([1.3, s ** 2]))
    w = wedge(phi(n, 2), phi_bar(n, 2))
    assert inner_product(w, w, gs) == pytest.approx(1.0 / s ** 4)
    assert norm_sq(2j * w, gs) == pytest.approx(4.0 / s ** 4)


def test_inner_product_omega_norm_is_n(rng):
    for n in (2, 3):
        g = InvariantMetric(n, random_hermitian_pd(rng, n))
        omega = g.fundamental_form()
        assert inner_product(omega, omega, g) == pytest.approx(n, abs=1e-12)


def test_inner_product_degree_mismatch():
    g = InvariantMetric(2, np.eye(2))
    with pytest.raises(ValueError):
        inner_product(phi(2, 1), wedge(phi(2, 1), phi(2, 2)), g)


def test_metric_validation():
    with pytest.raises(ValueError):
        InvariantMetric(2, np.array([[1.0, 0.5], [0.2, 1.0]]))  # not Hermitian
    with pytest.raises(ValueError):
        InvariantMetric(2, np.array([[1.0, 2.0], [2.0, 1.0]]))  # not PD


def test_hodge_star_of_one_is_volume(rng):
    for n in (2, 3):
        g = InvariantMetric(n, random_hermitian_pd(rng, n))
        one = Form(n, 0, {(): 1.0})
        assert form_norm(hodge_star(one, g) - volume_form(g)) < 1e-12


def test_hodge_star_surface_self_dual_omega(rng):
    for _ in range(5):
        g = InvariantMetric(2, random_hermitian_pd(rng, 2))
        omega = g.fundamental_form()
        assert form_norm(hodge_star(omega, g) - omega) < 1e-12


def test_hodge_star_double_star_sign(rng):
    # brute-force oracle: star(star(a)) = (-1)^(k(2n-k)) a; for n=2, k=1 this is -a
    g = InvariantMetric(2, random_hermitian_pd(rng, 2))
    a = phi(2, 1)
    assert form_norm(hodge_star(hodge_star(a, g), g) + a) < 1e-12
    for k in (1, 2, 3):
        b = random_form(rng, 2, k)
        sign = (-1.0) ** (k * (4 - k))
        assert form_norm(hodge_star(hodge_star(b, g), g) - sign * b) < 1e-11


def test_hodge_star_defining_equation(rng):
    # wedge(b, star(conj(a))) = <b, a> vol for every basis b
    n = 2
    g = InvariantMetric(n, random_hermitian_pd(rng, n))
    vol = volume_form(g)
    for k in (1, 2, 3):
        a = random_form(rng, n, k)
        sa = hodge_star(a.conjugate(), g)
        for idx in basis(n, k):
            b = Form(n, k, {idx: 1.0})
            lhs = wedge(b, sa)
            rhs = inner_product(b, a, g) * vol
            assert form_norm(lhs - rhs) < 1e-11


def test_hodge_star_maps_real_to_real(rng):
    g = InvariantMetric(2, random_hermitian_pd(rng, 2))
    a = random_form(rng, 2, 2)
    real = a + a.conjugate()
    assert hodge_star(real, g).is_real(1e-11)


def test_star_isometry(rng):
    for n in (2, 3):
        g = InvariantMetric(n, random_hermitian_pd(rng, n))
        for k in (1, 2):
            a = random_form(rng, n, k)
            b = random_form(rng, n, k)
            lhs = inner_product(a, b, g)
            rhs = inner_product(hodge_star(b, g), hodge_star(a, g), g)
            assert lhs == pytest.approx(np.conj(rhs), abs=1e-12 * max(1, abs(lhs)))


def test_J_is_isometry(rng):
    for n in (2, 3):
        g = InvariantMetric(n, random_hermitian_pd(rng, n))
        for k in (1, 2, 3):
            a = random_form(rng, n, k)
            assert norm_sq(apply_J(a), g) == pytest.approx(norm_sq(a, g), rel=1e-12)


def test_lambda_adjointness_oracle(rng):
    # <Lambda a, b> = <a, Omega ^ b> over random forms
    for n in (2, 3):
        g = InvariantMetric(n, random_hermitian_pd(rng, n))
        omega = g.fundamental_form()
        for k in (2, 3):
            a = random_form(rng, n, k)
            b = random_form(rng, n, k - 2)
            lhs = inner_product(lambda_adjoint(a, g), b, g)
            rhs = inner_product(a, wedge(omega, b), g)
            assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))


def test_lambda_of_omega_is_n(rng):
    for n in (2, 3):
        g = InvariantMetric(n, random_hermitian_pd(rng, n))
        val = lambda_adjoint(g.fundamental_form(), g).scalar()
        assert val == pytest.approx(n, abs=1e-12)


def test_lambda_of_wedge_with_omega(rng):
    # Lambda(theta ^ Omega) = (n-1) theta for any 1-form
    for n in (2, 3):
        g = InvariantMetric(n, random_hermitian_pd(rng, n))
        theta = random_form(rng, n, 1)
        out = lambda_adjoint(wedge(theta, g.fundamental_form()), g)
        assert form_norm(out - (n - 1.0) * theta) < 1e-11


def test_lambda_low_degree_is_zero(rng):
    g = InvariantMetric(2, np.eye(2))
    assert lambda_adjoint(phi(2, 1), g).is_zero()
    assert lambda_adjoint(Form(2, 0, {(): 3.0}), g).is_zero()


def test_volume_form_mass_and_scaling(rng):
    # determinant oracle: scaling h by lam multiplies the volume by lam^n
    for n in (2, 3):
        h = random_hermitian_pd(rng, n)
        g1 = InvariantMetric(n, h, total_volume_constant=2.5)
        lam = 1.7
        g2 = InvariantMetric(n, lam * h, total_volume_constant=2.5)
        m1 = integrate_top(volume_form(g1), g1)
        m2 = integrate_top(volume_form(g2), g2)
        assert m2 == pytest.approx(lam ** n * m1, rel=1e-12)
        assert m1 == pytest.approx(np.linalg.det(h).real * 2.5, rel=1e-12)


def test_volume_form_is_real_positive(rng):
    for n in (2, 3):
        g = InvariantMetric(n, random_hermitian_pd(rng, n))
        vol = volume_form(g)
        assert vol.is_real(1e-13)
        assert integrate_top(vol, g).real > 0
        assert abs(integrate_top(vol, g).imag) < 1e-13


def test_flat_torus_unit_top_norm():
    g = InvariantMetric(2, np.eye(2))
    vol = volume_form(g)
    assert inner_product(vol, vol, g) == pytest.approx(1.0, abs=1e-13)
