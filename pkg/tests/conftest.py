import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_hermitian_pd(rng, n, lo=0.5, hi=2.0):
    """Random well-conditioned Hermitian positive definite matrix."""
    q = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    qq, _ = np.linalg.qr(q)
    return qq @ np.diag(rng.uniform(lo, hi, n)) @ qq.conj().T


def random_form(rng, n, degree):
    from leelab.exterior import Form, basis

    dim = len(basis(n, degree))
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return Form.from_vector(n, degree, vec)
