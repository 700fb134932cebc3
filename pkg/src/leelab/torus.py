"""Conformal-class laboratory on flat 2n-tori.

Fields live on a uniform periodic grid over the coordinates
``x_1..x_n, y_1..y_n`` (period 2*pi each); the constant complex coframe
is ``phi^j = dx_j + i dy_j``.  The flat background metric is calibrated
so that dx and dy are orthonormal (``h0 = I/2`` in the coframe
normalization), its fundamental form is ``sum dx_j ^ dy_j`` and the
geometer's Laplacian is ``-sum of second coordinate derivatives``.

Differentiation is spectral (FFT); conformal metrics are stored through
a log factor, ``Omega = exp(phi) * Omega0``, and the five Lee-form
functionals restricted to a conformal class are evaluated by quadrature
of pointwise densities.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import exterior
from .exterior import Form, InvariantMetric, basis, basis_position, sort_indices

__all__ = [
    "TorusGrid",
    "ScalarField",
    "FieldForm",
    "ConformalMetric",
    "NotNormalizedError",
    "background_metric",
    "spectral_d",
    "spectral_dc",
    "spectral_laplacian",
    "field_d",
    "field_dc",
    "star_background",
    "star_conformal",
    "conformal_lee",
    "conformal_codiff_1form",
    "quadrature",
    "integral_background",
    "functional_value",
    "fundamental_field_form",
    "export_field_csv",
]

FUNCTIONALS = ("G", "F", "A", "R", "V")


class NotNormalizedError(ValueError):
    """Operation requires a volume-normalized conformal metric."""


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on the 2n-torus, coordinates of period 2*pi."""

    n: int
    points_per_axis: int
    memory_budget_mb: int = 512

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need complex dimension n >= 2")
        p = self.points_per_axis
        if p < 8 or p % 2 != 0:
            raise ValueError("points_per_axis must be an even integer >= 8")
        bytes_per_field = 16 * self.point_count
        if bytes_per_field > self.memory_budget_mb * 2 ** 20:
            raise ValueError(
                f"grid needs {bytes_per_field / 2**20:.0f} MiB per field, "
                f"over the {self.memory_budget_mb} MiB budget"
            )

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    @property
    def point_count(self) -> int:
        return self.points_per_axis ** self.dim

    def axis_name(self, axis: int) -> str:
        return (f"x{axis + 1}" if axis < self.n else f"y{axis - self.n + 1}")

    def axis_of(self, name: str) -> int:
        base = int(name[1:]) - 1
        if name[0] == "x":
            axis = base
        elif name[0] == "y":
            axis = self.n + base
        else:
            raise ValueError(f"unknown coordinate {name!r}")
        if not 0 <= base < self.n:
            raise ValueError(f"coordinate {name!r} out of range for n={self.n}")
        return axis

    def coordinate(self, name: str) -> np.ndarray:
        """Full-grid array of the named coordinate (e.g. 'x1', 'y2')."""
        axis = self.axis_of(name)
        p = self.points_per_axis
        vals = 2.0 * np.pi * np.arange(p) / p
        shape = [1] * self.dim
        shape[axis] = p
        return np.broadcast_to(vals.reshape(shape), self.shape).copy()

    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers along one axis in FFT order."""
        p = self.points_per_axis
        return np.fft.fftfreq(p, d=1.0 / p)


class ScalarField:
    """Real periodic data on a torus grid; immutable value semantics."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: TorusGrid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        values = values.copy()
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    @classmethod
    def constant(cls, grid: TorusGrid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def mean(self) -> float:
        """Grid mean, summed in fixed index order (deterministic)."""
        return float(np.mean(self.values))

    def _lift(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return float(other)

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._lift(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._lift(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._lift(other))

    __rmul__ = __mul__

    def __pow__(self, k):
        return ScalarField(self.grid, self.values ** k)

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def exp(self) -> "ScalarField":
        return ScalarField(self.grid, np.exp(self.values))


# -- spectral derivatives -------------------------------------------------


def _partial(values: np.ndarray, grid: TorusGrid, axis: int) -> np.ndarray:
    """Spectral coordinate derivative; Nyquist mode zeroed (odd derivative)."""
    k = grid.wavenumbers()
    k = k.copy()
    k[grid.points_per_axis // 2] = 0.0
    shape = [1] * grid.dim
    shape[axis] = grid.points_per_axis
    fhat = np.fft.fft(values, axis=axis)
    return np.fft.ifft(fhat * (1j * k).reshape(shape), axis=axis)


def _wirtinger(values: np.ndarray, grid: TorusGrid, j: int):
    """(d/dz_j, d/dzbar_j) of a (possibly complex) array."""
    dx = _partial(values, grid, j)
    dy = _partial(values, grid, grid.n + j)
    return 0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)


def spectral_laplacian(f: ScalarField) -> ScalarField:
    """Geometer's Laplacian (= minus the sum of second derivatives)."""
    grid = f.grid
    k2 = grid.wavenumbers() ** 2
    fhat = np.fft.fftn(f.values)
    total = np.zeros(grid.shape)
    for axis in range(grid.dim):
        shape = [1] * grid.dim
        shape[axis] = grid.points_per_axis
        total = total + k2.reshape(shape)
    return ScalarField(grid, np.fft.ifftn(fhat * total).real)


# -- forms with field coefficients -----------------------------------------


class FieldForm:
    """Graded form whose coefficients are complex fields over the grid.

    Multi-index conventions match :mod:`leelab.exterior`; the coframe is
    the constant flat one, so the exterior derivative only differentiates
    the coefficients.
    """

    __slots__ = ("grid", "degree", "coeffs")

    def __init__(self, grid: TorusGrid, degree: int, coeffs=None):
        self.grid = grid
        self.degree = degree
        acc: dict = {}
        for idx, arr in (coeffs or {}).items():
            key, sign = sort_indices(tuple(idx))
            if sign == 0:
                continue
            arr = np.asarray(arr, dtype=complex)
            arr = np.broadcast_to(arr, grid.shape)
            if key in acc:
                acc[key] = acc[key] + sign * arr
            else:
                acc[key] = sign * arr
        self.coeffs = acc

    @classmethod
    def zero(cls, grid: TorusGrid, degree: int) -> "FieldForm":
        return cls(grid, degree, {})

    def coefficient(self, idx) -> np.ndarray:
        return np.asarray(self.coeffs.get(tuple(idx),
                                          np.zeros(self.grid.shape, dtype=complex)))

    def __add__(self, other: "FieldForm") -> "FieldForm":
        if other.degree != self.degree or other.grid != self.grid:
            raise ValueError("field-form mismatch")
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return FieldForm(self.grid, self.degree, out)

    def __sub__(self, other: "FieldForm") -> "FieldForm":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "FieldForm":
        return FieldForm(self.grid, self.degree,
                         {k: complex(scalar) * v for k, v in self.coeffs.items()})

    __rmul__ = __mul__

    def scale_field(self, field) -> "FieldForm":
        """Multiply every coefficient pointwise by a field or array."""
        arr = field.values if isinstance(field, ScalarField) else np.asarray(field)
        return FieldForm(self.grid, self.degree,
                         {k: v * arr for k, v in self.coeffs.items()})

    def conjugate(self) -> "FieldForm":
        n = self.grid.n
        out: dict = {}
        for idx, arr in self.coeffs.items():
            swapped = tuple(g + n if g < n else g - n for g in idx)
            key, sign = sort_indices(swapped)
            add = sign * arr.conj()
            out[key] = out[key] + add if key in out else add
        return FieldForm(self.grid, self.degree, out)

    def is_real(self, tol: float = 1e-10) -> bool:
        diff = self - self.conjugate()
        return max((np.max(np.abs(v)) for v in diff.coeffs.values()), default=0.0) <= tol

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(v))) for v in self.coeffs.values()),
                   default=0.0)


def wedge_fields(a: FieldForm, b: FieldForm) -> FieldForm:
    if a.grid != b.grid:
        raise ValueError("field forms live on different grids")
    out: dict = {}
    for ia, va in a.coeffs.items():
        for ib, vb in b.coeffs.items():
            key, sign = sort_indices(ia + ib)
            if sign == 0:
                continue
            add = sign * va * vb
            out[key] = out[key] + add if key in out else add
    return FieldForm(a.grid, a.degree + b.degree, out)


def apply_J_field(a: FieldForm) -> FieldForm:
    n = a.grid.n
    out = {}
    for idx, arr in a.coeffs.items():
        p = sum(1 for g in idx if g < n)
        q = len(idx) - p
        out[idx] = (1j) ** ((q - p) % 4) * arr
    return FieldForm(a.grid, a.degree, out)


def apply_J_inverse_field(a: FieldForm) -> FieldForm:
    n = a.grid.n
    out = {}
    for idx, arr in a.coeffs.items():
        p = sum(1 for g in idx if g < n)
        q = len(idx) - p
        out[idx] = (1j) ** ((p - q) % 4) * arr
    return FieldForm(a.grid, a.degree, out)


def spectral_d(f: ScalarField) -> FieldForm:
    """Exterior derivative of a function as a degree-1 field form."""
    grid = f.grid
    coeffs = {}
    for j in range(grid.n):
        dz, dzbar = _wirtinger(f.values, grid, j)
        coeffs[(j,)] = dz
        coeffs[(grid.n + j,)] = dzbar
    return FieldForm(grid, 1, coeffs)


def spectral_dc(f: ScalarField) -> FieldForm:
    """Twisted derivative of a function: J applied to the differential."""
    return apply_J_field(spectral_d(f))


def field_d(a: FieldForm) -> FieldForm:
    """Exterior derivative: differentiate coefficients into the closed coframe."""
    grid = a.grid
    out: dict = {}
    for idx, arr in a.coeffs.items():
        for j in range(grid.n):
            dz, dzbar = _wirtinger(arr, grid, j)
            for gen, der in ((j, dz), (grid.n + j, dzbar)):
                key, sign = sort_indices((gen,) + idx)
                if sign == 0:
                    continue
                add = sign * der
                out[key] = out[key] + add if key in out else add
    return FieldForm(grid, a.degree + 1, out)


def field_dc(a: FieldForm) -> FieldForm:
    """Twisted differential -J^(-1) d J on field forms."""
    return -1.0 * apply_J_inverse_field(field_d(apply_J_field(a)))


# -- background metric machinery -------------------------------------------


@lru_cache(maxsize=None)
def background_metric(n: int) -> InvariantMetric:
    """Flat coframe metric with dx, dy orthonormal (h = I/2).

    The volume constant makes the unit top form integrate like Lebesgue
    measure: total background volume (2*pi)^(2n).
    """
    return InvariantMetric(n, 0.5 * np.eye(n),
                           total_volume_constant=(2.0 * np.pi) ** (2 * n) * 2.0 ** n)


@lru_cache(maxsize=None)
def _background_gram_diagonal(n: int, degree: int) -> np.ndarray:
    g = background_metric(n).gram(degree)
    diag = np.diag(g).real
    if np.max(np.abs(g - np.diag(diag))) > 1e-13 * max(1.0, diag.max()):
        raise AssertionError("flat background Gram matrix is not diagonal")
    return diag


@lru_cache(maxsize=None)
def _background_star_matrix(n: int, degree: int) -> np.ndarray:
    """Columns: the background Hodge star of each degree-k basis form."""
    g = background_metric(n)
    src = basis(n, degree)
    dst = basis_position(n, 2 * n - degree)
    m = np.zeros((len(dst), len(src)), dtype=complex)
    for j, idx in enumerate(src):
        star = exterior.hodge_star(Form(n, degree, {idx: 1.0}), g)
        for key, val in star.coeffs.items():
            m[dst[key], j] = val
    return m


def inner_background(a: FieldForm, b: FieldForm) -> np.ndarray:
    """Pointwise background inner product (complex array)."""
    if a.degree != b.degree:
        raise ValueError("degree mismatch")
    n = a.grid.n
    diag = _background_gram_diagonal(n, a.degree)
    pos = basis_position(n, a.degree)
    out = np.zeros(a.grid.shape, dtype=complex)
    for idx, arr in a.coeffs.items():
        if idx in b.coeffs:
            out = out + diag[pos[idx]] * arr * b.coeffs[idx].conj()
    return out


def norm_sq_background(a: FieldForm) -> np.ndarray:
    """Pointwise |a|^2 in the flat background (real array)."""
    return inner_background(a, a).real


def star_background(a: FieldForm) -> FieldForm:
    """Background Hodge star applied pointwise to the coefficients."""
    n = a.grid.n
    m = _background_star_matrix(n, a.degree)
    src_pos = basis_position(n, a.degree)
    dst = basis(n, 2 * n - a.degree)
    out: dict = {}
    for idx, arr in a.coeffs.items():
        col = m[:, src_pos[idx]]
        for i in np.nonzero(col)[0]:
            key = dst[i]
            add = col[i] * arr
            out[key] = out[key] + add if key in out else add
    return FieldForm(a.grid, 2 * n - a.degree, out)


def codiff_background_1form(a: FieldForm) -> ScalarField:
    """Flat codifferential of a real 1-form (adjoint of d on functions)."""
    grid = a.grid
    n = grid.n
    total = np.zeros(grid.shape, dtype=complex)
    for j in range(n):
        c = a.coeffs.get((j,))
        d = a.coeffs.get((n + j,))
        if c is not None:
            _, dzbar = _wirtinger(c, grid, j)
            total = total + dzbar
        if d is not None:
            dz, _ = _wirtinger(d, grid, j)
            total = total + dz
    return ScalarField(grid, (-2.0 * total).real)


def inner_background_1form(a: FieldForm, b: FieldForm) -> ScalarField:
    """Pointwise inner product of two real 1-forms as a real field."""
    return ScalarField(a.grid, inner_background(a, b).real)


# -- conformal metrics ------------------------------------------------------


@dataclass(frozen=True)
class ConformalMetric:
    """Flat-torus background with log conformal factor: Omega = e^phi Omega0."""

    grid: TorusGrid
    log_factor: ScalarField
    normalized: bool = False

    def __post_init__(self):
        if self.log_factor.grid != self.grid:
            raise ValueError("log factor lives on a different grid")
        if self.normalized:
            total = quadrature_raw(np.ones(self.grid.shape), self)
            if abs(total - 1.0) > 1e-10:
                raise NotNormalizedError(
                    f"normalized metric has total volume {total!r}"
                )

    @property
    def n(self) -> int:
        return self.grid.n

    def normalize(self) -> "ConformalMetric":
        """Shift the log factor by a constant to reach total volume one."""
        total = quadrature_raw(np.ones(self.grid.shape), self)
        shift = np.log(total) / self.n
        return ConformalMetric(self.grid, self.log_factor - shift, normalized=True)


def conformal_metric(grid: TorusGrid, log_factor: ScalarField,
                     normalized: bool = False) -> ConformalMetric:
    m = ConformalMetric(grid, log_factor, False)
    return m.normalize() if normalized else m


def quadrature_raw(f_values: np.ndarray, m: ConformalMetric) -> float:
    weight = np.exp(m.n * m.log_factor.values)
    return float(np.mean(f_values * weight)) * (2.0 * np.pi) ** (2 * m.n)


def quadrature(f: ScalarField, m: ConformalMetric) -> float:
    """Integral of f against the conformal volume (fixed summation order)."""
    if isinstance(f, ScalarField):
        if f.grid != m.grid:
            raise ValueError("field and metric grids differ")
        return quadrature_raw(f.values, m)
    return quadrature_raw(np.asarray(f, dtype=float), m)


def integral_background(f: ScalarField) -> float:
    """Integral against the flat background volume (Lebesgue on the torus)."""
    return f.mean() * (2.0 * np.pi) ** (2 * f.grid.n)


def conformal_lee(m: ConformalMetric) -> FieldForm:
    """Lee form of e^phi Omega0: (n-1) d(phi); the flat background has none."""
    return (m.n - 1.0) * spectral_d(m.log_factor)


def conformal_codiff_1form(alpha: FieldForm, m: ConformalMetric) -> ScalarField:
    """Codifferential of a 1-form in the conformal metric.

    Evaluates ``e^-phi (d*_0 alpha - (n-1) <d phi, alpha>_0)``.
    """
    if alpha.degree != 1 or alpha.grid != m.grid:
        raise ValueError("expected a 1-form on the metric's grid")
    flat = codiff_background_1form(alpha)
    dphi = spectral_d(m.log_factor)
    cross = inner_background(dphi, alpha).real
    vals = np.exp(-m.log_factor.values) * (flat.values - (m.n - 1.0) * cross)
    return ScalarField(m.grid, vals)


def fundamental_field_form(m: ConformalMetric) -> FieldForm:
    """The fundamental form e^phi Omega0 with field coefficients."""
    n = m.n
    ef = np.exp(m.log_factor.values)
    coeffs = {(j, n + j): 0.5j * ef for j in range(n)}
    return FieldForm(m.grid, 2, coeffs)


def norm_sq_conformal(a: FieldForm, m: ConformalMetric) -> ScalarField:
    """Pointwise |a|^2 in the conformal metric: e^(-k phi) times background."""
    scale = np.exp(-a.degree * m.log_factor.values)
    return ScalarField(m.grid, scale * norm_sq_background(a))


def star_conformal(a: FieldForm, m: ConformalMetric) -> FieldForm:
    """Conformal Hodge star: e^((n-k) phi) times the background star."""
    return star_background(a).scale_field(np.exp((m.n - a.degree)
                                                 * m.log_factor.values))


def functional_value(which: str, m: ConformalMetric) -> float:
    """Value of one of the five functionals at a normalized metric.

    ``which`` is one of G, F, A, R, V.  Densities are assembled from the
    generic field-form calculus; the V functional vanishes on every flat
    conformal class because the Lee form is exact.
    """
    if which not in FUNCTIONALS:
        raise ValueError(f"unknown functional {which!r}")
    if not m.normalized:
        raise NotNormalizedError("functional_value requires a normalized metric")
    n = m.n
    phi_vals = m.log_factor.values
    if which == "G":
        dst = conformal_codiff_1form(conformal_lee(m), m)
        return quadrature(dst * dst, m)
    if which == "F":
        djt = field_d(apply_J_field(conformal_lee(m)))
        dens = np.exp(-2.0 * phi_vals) * norm_sq_background(djt)
        return quadrature_raw(dens, m)
    if which == "A":
        d_omega = field_d(fundamental_field_form(m))
        dens = np.exp(-3.0 * phi_vals) * norm_sq_background(d_omega)
        return quadrature_raw(dens, m)
    if which == "R":
        ddc = field_d(field_dc(fundamental_field_form(m)))
        dens = np.exp(-4.0 * phi_vals) * norm_sq_background(ddc)
        return quadrature_raw(dens, m)
    d_theta = field_d(conformal_lee(m))
    dens = np.exp(-2.0 * phi_vals) * norm_sq_background(d_theta)
    return quadrature_raw(dens, m)


def export_field_csv(field: ScalarField, path) -> None:
    """Write a field snapshot as CSV rows of index coordinates plus value."""
    grid = field.grid
    header = ",".join(f"i_{grid.axis_name(a)}" for a in range(grid.dim)) + ",value"
    idx = np.indices(grid.shape).reshape(grid.dim, -1).T
    vals = field.values.reshape(-1, 1)
    data = np.hstack([idx, vals])
    fmt = ["%d"] * grid.dim + ["%.17g"]
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=fmt)
