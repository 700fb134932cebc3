"""Complex exterior algebra over a fixed 2n-generator coframe.

Forms are finite linear combinations of wedge products of the generators
``phi^1 .. phi^n, phibar^1 .. phibar^n`` with constant complex
coefficients.  The generator order is global (``phi^1 < ... < phi^n <
phibar^1 < ... < phibar^n``, stored as indices ``0 .. 2n-1``) and every
sign in the algebra derives from it.

A Hermitian metric enters through :class:`InvariantMetric`, which carries
the coefficient matrix ``h`` of the fundamental form

    Omega = sqrt(-1) * sum_{j,k} h[j,k] phi^j wedge phibar^k

and induces inner products, the Hodge star and the contraction adjoint to
wedging with Omega on every degree.  The normalization is calibrated so
that for a diagonal metric ``<phi^j, phi^j> = 1 / h[j,j]``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

__all__ = [
    "Form",
    "InvariantMetric",
    "phi",
    "phi_bar",
    "wedge",
    "pq_components",
    "apply_J",
    "apply_J_inverse",
    "inner_product",
    "norm_sq",
    "hodge_star",
    "lambda_adjoint",
    "volume_form",
    "form_norm",
]


@lru_cache(maxsize=None)
def basis(n: int, degree: int):
    """All strictly increasing multi-indices of a degree over 2n generators."""
    return tuple(itertools.combinations(range(2 * n), degree))


@lru_cache(maxsize=None)
def basis_position(n: int, degree: int):
    return {idx: pos for pos, idx in enumerate(basis(n, degree))}


def sort_indices(indices):
    """Sort a generator tuple into increasing order.

    Returns ``(sorted_tuple, sign)`` where the sign counts the
    transpositions used; a repeated generator yields sign 0.
    """
    idx = list(indices)
    sign = 1
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    for a, b in zip(idx, idx[1:]):
        if a == b:
            return tuple(idx), 0
    return tuple(idx), sign


@lru_cache(maxsize=None)
def complement_sign(n: int, index: tuple) -> tuple:
    """Complementary multi-index K and the sign of phi^I wedge phi^K."""
    comp = tuple(sorted(set(range(2 * n)) - set(index)))
    _, sign = sort_indices(index + comp)
    return comp, sign


class Form:
    """A constant-coefficient complex form of fixed degree.

    Coefficients are stored sparsely as a map from sorted multi-indices to
    complex numbers.  Instances are immutable in use: all operations
    return new forms.
    """

    __slots__ = ("n", "degree", "coeffs")

    def __init__(self, n: int, degree: int, coeffs=None):
        if not 0 <= degree <= 2 * n:
            raise ValueError(f"degree {degree} out of range for n={n}")
        self.n = n
        self.degree = degree
        acc: dict = {}
        for idx, val in (coeffs or {}).items():
            idx = tuple(idx)
            if len(idx) != degree:
                raise ValueError(f"index {idx} has wrong length for degree {degree}")
            if any(not 0 <= g < 2 * n for g in idx):
                raise ValueError(f"index {idx} outside generator range")
            key, sign = sort_indices(idx)
            if sign == 0:
                continue
            acc[key] = acc.get(key, 0.0) + sign * complex(val)
        self.coeffs = {k: v for k, v in acc.items() if v != 0}

    # -- ring structure -------------------------------------------------

    def __add__(self, other: "Form") -> "Form":
        self._check_compatible(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0.0) + v
        return Form(self.n, self.degree, out)

    def __sub__(self, other: "Form") -> "Form":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "Form":
        s = complex(scalar)
        return Form(self.n, self.degree, {k: s * v for k, v in self.coeffs.items()})

    __rmul__ = __mul__

    def __neg__(self) -> "Form":
        return (-1.0) * self

    def _check_compatible(self, other: "Form"):
        if not isinstance(other, Form):
            raise TypeError("expected a Form")
        if other.n != self.n:
            raise ValueError("forms live over different generator universes")
        if other.degree != self.degree:
            raise ValueError("degree mismatch")

    # -- structure ------------------------------------------------------

    def conjugate(self) -> "Form":
        """Complex conjugate; swaps barred and unbarred generators."""
        n = self.n
        out: dict = {}
        for idx, val in self.coeffs.items():
            swapped = tuple(g + n if g < n else g - n for g in idx)
            key, sign = sort_indices(swapped)
            out[key] = out.get(key, 0.0) + sign * np.conj(val)
        return Form(n, self.degree, out)

    def is_real(self, tol: float = 1e-12) -> bool:
        return form_norm(self - self.conjugate()) <= tol

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(v) <= tol for v in self.coeffs.values())

    def scalar(self) -> complex:
        """Value of a degree-0 form."""
        if self.degree != 0:
            raise ValueError("scalar() requires a degree-0 form")
        return self.coeffs.get((), 0.0)

    def to_vector(self) -> np.ndarray:
        pos = basis_position(self.n, self.degree)
        v = np.zeros(len(pos), dtype=complex)
        for idx, val in self.coeffs.items():
            v[pos[idx]] = val
        return v

    @classmethod
    def from_vector(cls, n: int, degree: int, vector) -> "Form":
        b = basis(n, degree)
        return cls(n, degree, {b[i]: val for i, val in enumerate(vector)})

    def __repr__(self):
        if not self.coeffs:
            return f"Form(n={self.n}, degree={self.degree}, 0)"
        parts = []
        for idx in sorted(self.coeffs):
            names = "^".join(_generator_name(self.n, g) for g in idx) or "1"
            parts.append(f"({self.coeffs[idx]:.6g})*{names}")
        return " + ".join(parts)


def _generator_name(n: int, g: int) -> str:
    return f"p{g + 1}" if g < n else f"q{g - n + 1}"


def zero_form(n: int, degree: int) -> Form:
    return Form(n, degree, {})


def phi(n: int, j: int) -> Form:
    """Unbarred generator phi^j (1-based)."""
    if not 1 <= j <= n:
        raise ValueError(f"generator index {j} out of range 1..{n}")
    return Form(n, 1, {(j - 1,): 1.0})


def phi_bar(n: int, j: int) -> Form:
    """Barred generator phibar^j (1-based)."""
    if not 1 <= j <= n:
        raise ValueError(f"generator index {j} out of range 1..{n}")
    return Form(n, 1, {(n + j - 1,): 1.0})


def form_norm(a: Form) -> float:
    """Coefficient 2-norm (metric independent); used for exact-zero tests."""
    if not a.coeffs:
        return 0.0
    return float(np.sqrt(sum(abs(v) ** 2 for v in a.coeffs.values())))


def wedge(a: Form, b: Form, *more: Form) -> Form:
    """Wedge product with shuffle signs; associative and graded-anticommutative."""
    if a.n != b.n:
        raise ValueError("forms live over different generator universes")
    out: dict = {}
    for ia, va in a.coeffs.items():
        for ib, vb in b.coeffs.items():
            key, sign = sort_indices(ia + ib)
            if sign == 0:
                continue
            out[key] = out.get(key, 0.0) + sign * va * vb
    res = Form(a.n, a.degree + b.degree, out)
    for m in more:
        res = wedge(res, m)
    return res


def pq_components(a: Form) -> dict:
    """Split a form by bidegree: key (p, q) counts unbarred/barred generators."""
    n = a.n
    parts: dict = {}
    for idx, val in a.coeffs.items():
        p = sum(1 for g in idx if g < n)
        q = len(idx) - p
        parts.setdefault((p, q), {})[idx] = val
    return {pq: Form(n, a.degree, cs) for pq, cs in parts.items()}


def apply_J(a: Form) -> Form:
    """Complex-structure action: multiply each (p,q) part by sqrt(-1)^(q-p)."""
    n = a.n
    out = {}
    for idx, val in a.coeffs.items():
        p = sum(1 for g in idx if g < n)
        q = len(idx) - p
        out[idx] = (1j) ** ((q - p) % 4) * val
    return Form(n, a.degree, out)


def apply_J_inverse(a: Form) -> Form:
    """Inverse action: multiply each (p,q) part by sqrt(-1)^(p-q)."""
    n = a.n
    out = {}
    for idx, val in a.coeffs.items():
        p = sum(1 for g in idx if g < n)
        q = len(idx) - p
        out[idx] = (1j) ** ((p - q) % 4) * val
    return Form(n, a.degree, out)


class InvariantMetric:
    """Hermitian metric on the coframe, plus a total-volume constant.

    Parameters
    ----------
    n : complex dimension (>= 2 for the geometric operations).
    h : n x n Hermitian positive definite matrix; the fundamental form is
        ``sqrt(-1) * sum h[j,k] phi^j wedge phibar^k``.
    total_volume_constant : integral of the unit top form over the
        underlying compact quotient (the constant ``c``).
    """

    def __init__(self, n: int, h, total_volume_constant: float = 1.0):
        h = np.asarray(h, dtype=complex)
        if h.shape != (n, n):
            raise ValueError(f"metric matrix must be {n}x{n}, got {h.shape}")
        if np.linalg.norm(h - h.conj().T) > 1e-12 * max(1.0, np.linalg.norm(h)):
            raise ValueError("metric matrix is not Hermitian")
        eig = np.linalg.eigvalsh(h)
        if eig.min() <= 0:
            raise ValueError(f"metric matrix is not positive definite (eigenvalues {eig})")
        if total_volume_constant <= 0:
            raise ValueError("total_volume_constant must be positive")
        self.n = int(n)
        self.h = h
        self.c = float(total_volume_constant)
        self._gram: dict = {}
        self._wedge_matrices: dict = {}

    def fundamental_form(self) -> Form:
        n = self.n
        coeffs = {}
        for j in range(n):
            for k in range(n):
                coeffs[(j, n + k)] = coeffs.get((j, n + k), 0.0) + 1j * self.h[j, k]
        return Form(n, 2, coeffs)

    def det_h(self) -> float:
        return float(np.linalg.det(self.h).real)

    def gram_generators(self) -> np.ndarray:
        """Inner products of the 2n generators (block diagonal, Hermitian PD).

        ``<phi^j, phi^k> = conj(inv(h))[j, k]``; the orientation (versus the
        un-conjugated inverse) is pinned by the Lee form of the Inoue family,
        whose phi^1 coefficient must carry u rather than conj(u).
        """
        n = self.n
        a = np.linalg.inv(self.h).conj()
        g = np.zeros((2 * n, 2 * n), dtype=complex)
        g[:n, :n] = a
        g[n:, n:] = a.conj()
        return g

    def gram(self, degree: int) -> np.ndarray:
        """Gram matrix of the degree-k basis (k-th compound of the generator Gram)."""
        if degree not in self._gram:
            b = basis(self.n, degree)
            gg = self.gram_generators()
            m = np.empty((len(b), len(b)), dtype=complex)
            for i, bi in enumerate(b):
                rows = np.ix_(bi, ())
                for j, bj in enumerate(b):
                    if degree == 0:
                        m[i, j] = 1.0
                    else:
                        m[i, j] = np.linalg.det(gg[np.ix_(bi, bj)])
            self._gram[degree] = m
        return self._gram[degree]

    def wedge_matrix(self, degree: int) -> np.ndarray:
        """Matrix of (Omega wedge .) from degree k to degree k+2."""
        if degree not in self._wedge_matrices:
            omega = self.fundamental_form()
            src = basis(self.n, degree)
            dst_pos = basis_position(self.n, degree + 2)
            m = np.zeros((len(dst_pos), len(src)), dtype=complex)
            for j, idx in enumerate(src):
                w = wedge(omega, Form(self.n, degree, {idx: 1.0}))
                for key, val in w.coeffs.items():
                    m[dst_pos[key], j] = val
            self._wedge_matrices[degree] = m
        return self._wedge_matrices[degree]

    def __repr__(self):
        return f"InvariantMetric(n={self.n}, c={self.c})"


def inner_product(a: Form, b: Form, g: InvariantMetric) -> complex:
    """Hermitian inner product; linear in the first slot.

    Decomposable forms multiply generator inner products through the Gram
    determinant; for a diagonal metric ``<phi^j, phi^j> = 1/h[j,j]``.
    """
    a._check_compatible(b)
    if a.n != g.n:
        raise ValueError("form and metric dimensions differ")
    va = a.to_vector()
    vb = b.to_vector()
    return complex(va @ g.gram(a.degree) @ vb.conj())


def norm_sq(a: Form, g: InvariantMetric) -> float:
    """Pointwise squared norm |a|^2 (real and nonnegative)."""
    val = inner_product(a, a, g)
    return float(val.real)


def volume_form(g: InvariantMetric) -> Form:
    """The top form Omega^n / n! expressed on the coframe basis."""
    n = g.n
    coeff = (1j) ** (n % 4) * (-1) ** (n * (n - 1) // 2) * g.det_h()
    return Form(n, 2 * n, {tuple(range(2 * n)): coeff})


def integrate_top(a: Form, g: InvariantMetric) -> complex:
    """Integral of a top-degree form over the quotient.

    Fixed by ``integral(unit top form) = c`` with the unit top form
    oriented so that volume_form integrates to ``det(h) * c``.
    """
    n = g.n
    if a.degree != 2 * n:
        raise ValueError("integrate_top requires a top-degree form")
    unit = (1j) ** (n % 4) * (-1) ** (n * (n - 1) // 2)
    return a.coeffs.get(tuple(range(2 * n)), 0.0) / unit * g.c


def hodge_star(a: Form, g: InvariantMetric) -> Form:
    """Hodge star: the unique form with  b ^ star(x) = <b, conj(x)> vol  for all b.

    Real forms map to real forms; on a surface (n=2) the fundamental form
    is self-dual.
    """
    n, k = a.n, a.degree
    if n != g.n:
        raise ValueError("form and metric dimensions differ")
    vol_coeff = (1j) ** (n % 4) * (-1) ** (n * (n - 1) // 2) * g.det_h()
    xc = a.conjugate().to_vector()
    try:
        pairings = g.gram(k) @ xc.conj()  # pairings[i] = <phi^I_i, conj(a)>
    except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded by ctor
        raise ValueError("singular Gram matrix: metric is not positive") from exc
    out = {}
    for i, idx in enumerate(basis(n, k)):
        comp, sign = complement_sign(n, idx)
        if pairings[i] != 0:
            out[comp] = vol_coeff * pairings[i] / sign
    return Form(n, 2 * n - k, out)


def _gram_adjoint(matrix: np.ndarray, g_src: np.ndarray, g_dst: np.ndarray,
                  v: np.ndarray) -> np.ndarray:
    """Apply the Gram adjoint of a linear map to the vector v.

    ``matrix`` maps the source basis to the destination basis; the result w
    satisfies <w, b>_src = <v, matrix b>_dst for every source basis vector b.
    """
    rhs = matrix.conj().T @ (g_dst.T @ v)
    return np.linalg.solve(g_src.T, rhs)


def lambda_adjoint(a: Form, g: InvariantMetric) -> Form:
    """Contraction with the fundamental form: adjoint of (Omega wedge .).

    Degrees below 2 contract to zero.
    """
    n, k = a.n, a.degree
    if k < 2:
        return zero_form(n, 0)
    w = _gram_adjoint(g.wedge_matrix(k - 2), g.gram(k - 2), g.gram(k), a.to_vector())
    return Form.from_vector(n, k - 2, w)
