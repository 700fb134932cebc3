"""Linear elliptic machinery for the canonical-representative solves.

Everything here lives on a flat torus grid.  The central object is the
drift Laplacian

    L0 f = Delta f + <df, theta0>

together with its formal adjoint and the potential variant

    U q = Delta q - <dq, theta> + q d* theta

whose kernel detects the Gauduchon rescaling of a conformal class.  The
Fredholm alternative for L0 (solvable iff the right side integrates to
zero) drives the distinguished-representative equation; the kernel of U
is extracted by inverse-power iteration with inner preconditioned
Krylov solves.

Solves are deterministic: fixed starting vectors, fixed summation
orders, no randomized restarts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, lgmres

from .torus import (
    ConformalMetric,
    FieldForm,
    ScalarField,
    TorusGrid,
    codiff_background_1form,
    conformal_metric,
    inner_background,
    norm_sq_background,
    spectral_d,
    spectral_laplacian,
)

__all__ = [
    "DriftOperator",
    "NonSolvableError",
    "NoConvergenceError",
    "SolveInfo",
    "GauduchonResult",
    "DistinguishedResult",
    "KernelSpectrum",
    "solve_drift",
    "gauduchon_factor",
    "distinguished_factor",
    "kernel_spectrum",
    "conformal_u_operator",
]


class NonSolvableError(RuntimeError):
    """Right-hand side violates the Fredholm condition (nonzero mean)."""


class NoConvergenceError(RuntimeError):
    """Iteration cap reached without meeting the residual tolerance."""


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    rhs_norm: float
    preconditioned: bool = True


class DriftOperator:
    """Drift Laplacian on a flat torus grid with a fixed real drift 1-form.

    ``l0`` applies ``Delta f + <df, theta0>``; ``l0_star`` applies
    ``Delta f - <df, theta0>`` (the formal adjoint when the drift is
    co-closed); ``u`` applies the potential variant
    ``Delta f - <df, theta0> + f d* theta0``, which is the exact adjoint
    of ``l0`` for any drift.
    """

    def __init__(self, grid: TorusGrid, drift: FieldForm | None = None):
        self.grid = grid
        if drift is None:
            drift = FieldForm.zero(grid, 1)
        if drift.degree != 1 or drift.grid != grid:
            raise ValueError("drift must be a degree-1 field form on the grid")
        if not drift.is_real(1e-10):
            raise ValueError("drift must be a real 1-form")
        self.drift = drift
        self.codiff_drift = codiff_background_1form(drift)

    def drift_term(self, f: ScalarField) -> np.ndarray:
        return inner_background(spectral_d(f), self.drift).real

    def l0(self, f: ScalarField) -> ScalarField:
        return ScalarField(self.grid,
                           spectral_laplacian(f).values + self.drift_term(f))

    def l0_star(self, f: ScalarField) -> ScalarField:
        return ScalarField(self.grid,
                           spectral_laplacian(f).values - self.drift_term(f))

    def u(self, f: ScalarField) -> ScalarField:
        return ScalarField(
            self.grid,
            spectral_laplacian(f).values - self.drift_term(f)
            + f.values * self.codiff_drift.values,
        )

    def mean_drift_vector(self) -> np.ndarray:
        """Constant coordinate part of the drift (length 2n)."""
        n = self.grid.n
        out = np.zeros(2 * n)
        for j in range(n):
            c = self.drift.coeffs.get((j,))
            if c is not None:
                out[j] = 2.0 * float(np.mean(c.real))
                out[n + j] = -2.0 * float(np.mean(c.imag))
        return out


def _wavenumber_grids(grid: TorusGrid):
    k = grid.wavenumbers()
    axes = []
    for a in range(grid.dim):
        shape = [1] * grid.dim
        shape[a] = grid.points_per_axis
        axes.append(k.reshape(shape))
    return axes


def _drift_preconditioner(grid: TorusGrid, drift_vector, shift: float = 0.0,
                          coeff: float = 1.0):
    """Fourier-diagonal inverse of (coeff * Delta + mean drift + shift)."""
    axes = _wavenumber_grids(grid)
    k_sq = sum(a ** 2 for a in axes)
    sym = coeff * k_sq + shift + 1j * sum(v * a for v, a in zip(drift_vector, axes))
    sym = np.where(np.abs(sym) < 1e-12, 1.0, sym)

    def apply(v):
        arr = v.reshape(grid.shape)
        out = np.fft.ifftn(np.fft.fftn(arr) / sym)
        return out.real.reshape(-1)

    return apply


def solve_drift(op: DriftOperator, rhs: ScalarField, *, tol: float = 1e-10,
                maxiter: int = 1000, fredholm_tol: float = 1e-8,
                cokernel_weight=None):
    """Solve L0 phi = rhs for a mean-zero phi.

    The equation is solvable only when the right side pairs to zero with
    the cokernel; for a co-closed drift the cokernel is the constants,
    so the condition is a vanishing mean.  A violation raises
    :class:`NonSolvableError`.  For non-co-closed (synthetic) drifts
    pass the positive kernel density of the adjoint as
    ``cokernel_weight``.  The non-symmetric system is solved by
    preconditioned LGMRES in the mean-zero gauge; failure to reach
    ``tol * |rhs|`` raises :class:`NoConvergenceError`.

    Returns ``(phi, info)``.
    """
    grid = op.grid
    nn = grid.point_count
    rhs_vals = rhs.values
    rhs_norm = float(np.linalg.norm(rhs_vals))
    if rhs_norm == 0.0:
        return ScalarField.constant(grid, 0.0), SolveInfo(0, 0.0, 0.0)
    if cokernel_weight is None:
        w = np.full(nn, nn ** -0.5)
    else:
        w = np.asarray(cokernel_weight, dtype=float).reshape(-1)
        w = w / np.linalg.norm(w)
    rms = rhs_norm / np.sqrt(nn)
    pairing = float(w @ rhs_vals.reshape(-1)) / np.sqrt(nn)
    if abs(pairing) > fredholm_tol * max(rms, 1e-300):
        raise NonSolvableError(
            f"rhs pairs with the cokernel at {pairing:.3e}, over the "
            f"Fredholm tolerance ({fredholm_tol:.1e} relative)"
        )

    def gauge(v):
        return v - v.mean()

    def project_range(v):
        return v - w * (w @ v)

    def matvec(v):
        f = ScalarField(grid, gauge(v).reshape(grid.shape))
        return project_range(op.l0(f).values.reshape(-1))

    a_op = LinearOperator((nn, nn), matvec=matvec, dtype=float)
    precond = _drift_preconditioner(grid, op.mean_drift_vector())
    m_op = LinearOperator((nn, nn), matvec=lambda v: gauge(precond(gauge(v))),
                          dtype=float)
    b = project_range(rhs_vals.reshape(-1))
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    x, status = lgmres(a_op, b, M=m_op, rtol=tol, atol=0.0,
                       maxiter=maxiter, callback=count)
    phi = ScalarField(grid, gauge(x).reshape(grid.shape))
    residual = float(np.linalg.norm(op.l0(phi).values - rhs_vals))
    info = SolveInfo(iterations, residual, rhs_norm)
    if status != 0 or residual > 10.0 * tol * rhs_norm:
        raise NoConvergenceError(
            f"drift solve stalled: residual {residual:.3e} after "
            f"{iterations} iterations (target {tol * rhs_norm:.3e})"
        )
    return phi, info


# -- kernel extraction ------------------------------------------------------


@dataclass
class KernelSpectrum:
    lam1: float
    lam2: float
    v1: ScalarField
    gap: float
    lam2_imag: float = 0.0
    iterations: int = 0


def _coordinate_partials(values: np.ndarray, grid: TorusGrid):
    """All 2n coordinate derivatives of a real array (spectral)."""
    k = grid.wavenumbers()
    k = k.copy()
    k[grid.points_per_axis // 2] = 0.0
    out = []
    for axis in range(grid.dim):
        shape = [1] * grid.dim
        shape[axis] = grid.points_per_axis
        fhat = np.fft.fft(values, axis=axis)
        out.append(np.fft.ifft(fhat * (1j * k).reshape(shape), axis=axis).real)
    return out


def _laplacian_raw(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    k2 = grid.wavenumbers() ** 2
    total = np.zeros(grid.shape)
    for axis in range(grid.dim):
        shape = [1] * grid.dim
        shape[axis] = grid.points_per_axis
        total = total + k2.reshape(shape)
    return np.fft.ifftn(np.fft.fftn(values) * total).real


def conformal_u_operator(m: ConformalMetric):
    """The Gauduchon-kernel operator of a conformal metric, plus weights.

    For Omega = e^phi Omega0 the operator reads

        U q = e^-phi (Delta q - 2(n-1) <dphi, dq> +
                      q ((n-1) Delta phi - (n-1)^2 |dphi|^2))

    Returns ``(apply, left_weight)`` where ``left_weight = e^(n phi)``
    spans the cokernel in the plain grid pairing.
    """
    grid = m.grid
    n = m.n
    phi = m.log_factor
    dphi_coords = _coordinate_partials(phi.values, grid)
    lap_phi = _laplacian_raw(phi.values, grid)
    grad_sq = sum(p ** 2 for p in dphi_coords)
    potential = (n - 1.0) * lap_phi - (n - 1.0) ** 2 * grad_sq
    front = np.exp(-phi.values)

    def apply(vals: np.ndarray) -> np.ndarray:
        parts = _coordinate_partials(vals, grid)
        cross = sum(a * b for a, b in zip(dphi_coords, parts))
        return front * (_laplacian_raw(vals, grid)
                        - 2.0 * (n - 1.0) * cross + vals * potential)

    left_weight = np.exp(n * phi.values)
    return apply, left_weight


def _inverse_power_kernel(apply_op, grid: TorusGrid, *, scale: float = 1.0,
                          start=None, outer_cap: int = 10_000,
                          inner_cap: int = 1_000, tol: float = 1e-9,
                          precond=None, deflate=None):
    """Shifted inverse-power iteration for the smallest eigenpair.

    Solving against the exactly singular operator stalls once the
    projected system becomes consistent, so a small negative shift
    (relative to the operator scale) keeps the inner solves well posed;
    the iteration converges to the eigenvalue nearest the shift, which
    for these operators is the kernel.  An optional oblique
    ``deflate = (right_vec, left_vec)`` removes a known eigenpair so the
    iteration lands on the next one.
    """
    nn = grid.point_count
    sigma = -0.1 * scale

    def deflate_vec(v):
        if deflate is None:
            return v
        rv, lv = deflate
        return v - rv * (lv @ v) / (lv @ rv)

    def matvec(v):
        v = deflate_vec(v)
        out = apply_op(v.reshape(grid.shape)).reshape(-1) - sigma * v
        return deflate_vec(out)

    a_op = LinearOperator((nn, nn), matvec=matvec, dtype=float)
    if precond is None:
        precond = _drift_preconditioner(grid, np.zeros(grid.dim),
                                        shift=max(abs(sigma), 0.1 * scale),
                                        coeff=scale)
    m_op = LinearOperator((nn, nn), matvec=precond, dtype=float)

    x = np.ones(nn) if start is None else start.reshape(-1).astype(float)
    x = deflate_vec(x)
    norm_x = np.linalg.norm(x)
    if norm_x == 0.0:
        raise NoConvergenceError("start vector lies in the deflated subspace")
    x /= norm_x
    lam = 0.0
    residual = np.inf
    floor = tol * max(1.0, scale)
    # the inner solve only needs to beat the eigenresidual by a margin;
    # demanding much more stalls once deflation inexactness floors it
    inner_rtol = max(1e-11, 0.02 * tol)
    inner_steps = max(2, inner_cap // 30)
    outer = 0
    for outer in range(1, outer_cap + 1):
        ux = apply_op(x.reshape(grid.shape)).reshape(-1)
        lam = float(x @ ux)
        residual = float(np.linalg.norm(deflate_vec(ux) - lam * x))
        if residual <= floor:
            break
        y, _status = lgmres(a_op, x, x0=x.copy(), M=m_op, rtol=inner_rtol,
                            atol=0.0, inner_m=30, maxiter=inner_steps)
        y = deflate_vec(y)
        norm_y = np.linalg.norm(y)
        if not np.isfinite(norm_y) or norm_y == 0.0:
            raise NoConvergenceError("inverse iteration produced a null vector")
        x = y / norm_y
    else:
        raise NoConvergenceError(
            f"inverse power iteration: residual {residual:.3e} after "
            f"{outer_cap} outer steps"
        )
    return lam, x, residual, outer


def _second_eigenvalue(op_apply, grid: TorusGrid, v1, left_weight, *,
                       scale: float, outer_cap: int, inner_cap: int,
                       tol: float = 1e-4):
    """Deflated pass for the next eigenpair above a known ground pair.

    The oblique deflation carries the ground pair's numerical error, so
    the reachable floor is looser than the ground pass; the gap only
    needs percent-level accuracy.
    """
    lw = left_weight.reshape(-1) / np.linalg.norm(left_weight)
    start = np.random.default_rng(0).standard_normal(grid.point_count)
    return _inverse_power_kernel(
        op_apply, grid, deflate=(v1, lw), start=start, scale=scale,
        outer_cap=outer_cap, inner_cap=inner_cap, tol=tol,
    )


def kernel_spectrum(op_apply, grid: TorusGrid, left_weight=None, *,
                    scale: float = 1.0, outer_cap: int = 10_000,
                    inner_cap: int = 1_000) -> KernelSpectrum:
    """Two smallest-magnitude eigenvalues of a drift-potential operator.

    ``op_apply`` maps a grid array to a grid array (or pass a
    :class:`DriftOperator` for its potential variant); ``left_weight``
    spans the cokernel (defaults to constants) and provides the oblique
    deflation of the ground pair for the second eigenvalue.
    """
    if isinstance(op_apply, DriftOperator):
        drift_op = op_apply
        op_apply = lambda vals: drift_op.u(ScalarField(grid, vals)).values  # noqa: E731
    if left_weight is None:
        left_weight = np.ones(grid.shape)
    lam1, v1, res1, it1 = _inverse_power_kernel(
        op_apply, grid, scale=scale, outer_cap=outer_cap,
        inner_cap=inner_cap, tol=1e-10)
    lam2, v2, res2, it2 = _second_eigenvalue(
        op_apply, grid, v1, left_weight, scale=scale,
        outer_cap=outer_cap, inner_cap=inner_cap)
    # non-gradient drifts may carry complex pairs; the residual of the
    # deflated Rayleigh quotient is reported as the imaginary defect
    return KernelSpectrum(
        lam1=lam1, lam2=lam2,
        v1=ScalarField(grid, v1.reshape(grid.shape)),
        gap=lam2 - lam1, lam2_imag=res2, iterations=it1 + it2,
    )


@dataclass
class GauduchonResult:
    factor: ScalarField
    residual: float
    lam1: float
    lam2: float
    gap: float
    iterations: int
    metric: ConformalMetric
    strictly_positive: bool
    near_degenerate: bool = False


def gauduchon_factor(cls: ConformalMetric, *, outer_cap: int = 10_000,
                     inner_cap: int = 1_000, with_spectrum: bool = True) -> GauduchonResult:
    """Gauduchon rescaling density of a conformal class.

    Finds a positive q with U q ~ 0 by inverse-power iteration; the
    metric ``q^(1/(n-1)) Omega`` is the Gauduchon representative,
    returned volume-normalized.  The kernel vector's strict positivity
    (the discrete Hopf consequence) is asserted; a near-degenerate
    second eigenvalue is reported, not fatal.
    """
    m = cls if cls.normalized else cls.normalize()
    grid, n = m.grid, m.n
    apply_u, left_weight = conformal_u_operator(m)
    scale = float(np.exp(-m.log_factor.values).mean())
    lam1, v1, residual, iters = _inverse_power_kernel(
        apply_u, grid, scale=scale, outer_cap=outer_cap,
        inner_cap=inner_cap, tol=1e-10)
    if float(np.sum(v1)) < 0:
        v1 = -v1
    strictly_positive = bool(np.min(v1) > 0.0)
    if not strictly_positive:
        raise NoConvergenceError(
            "discrete kernel vector is not strictly positive; "
            f"min value {np.min(v1):.3e}"
        )
    q = v1.reshape(grid.shape)

    # rescale q so the metric q^(1/(n-1)) Omega has unit volume
    log_new = m.log_factor + ScalarField(grid, np.log(q) / (n - 1.0))
    rep = conformal_metric(grid, log_new, normalized=True)
    shift = rep.log_factor.values - (m.log_factor.values + np.log(q) / (n - 1.0))
    q_scaled = q * np.exp((n - 1.0) * float(np.mean(shift)))

    lam2 = np.nan
    gap = np.nan
    near_degenerate = False
    if with_spectrum:
        lam2, _v2, _res2, _it2 = _second_eigenvalue(
            apply_u, grid, v1, left_weight, scale=scale,
            outer_cap=outer_cap, inner_cap=inner_cap)
        gap = lam2 - lam1
        near_degenerate = bool(abs(lam2) < 1e-6 * max(1.0, scale))
    return GauduchonResult(
        factor=ScalarField(grid, q_scaled),
        residual=residual, lam1=lam1, lam2=lam2, gap=gap,
        iterations=iters, metric=rep,
        strictly_positive=strictly_positive,
        near_degenerate=near_degenerate,
    )


@dataclass
class DistinguishedResult:
    phi: ScalarField
    k0: float
    residual: float
    f_consistency: float
    info: SolveInfo
    metric: ConformalMetric


def distinguished_factor(background: ConformalMetric, theta0: FieldForm, *,
                         k_override: float | None = None,
                         allow_non_coclosed: bool = False,
                         tol: float = 1e-10) -> DistinguishedResult:
    """Distinguished representative over a Gauduchon background drift.

    Solves ``L0 phi = (k0 - |theta0|^2 - d* theta0) / (n-1)`` with ``k0``
    the cokernel-weighted mean of the source (the plain volume-one mean
    of ``|theta0|^2`` when the drift is co-closed), then checks the
    closed-form consistency ``f_Omega = k0 e^(-phi)``.  The background
    drift must be co-closed unless ``allow_non_coclosed`` (synthetic
    drifts) is set, in which case the cokernel density is extracted from
    the adjoint operator first.
    """
    grid = background.grid
    n = background.n
    op = DriftOperator(grid, theta0)
    coclosed_defect = float(np.max(np.abs(op.codiff_drift.values)))
    scale = max(1.0, float(np.max(np.abs(norm_sq_background(theta0)))))
    theta_sq = norm_sq_background(theta0)
    source = theta_sq + op.codiff_drift.values
    weight = None
    if coclosed_defect > 1e-8 * scale:
        if not allow_non_coclosed:
            raise NonSolvableError(
                f"drift is not co-closed (defect {coclosed_defect:.3e}); "
                "pass allow_non_coclosed for synthetic drifts"
            )
        # cokernel of L0 is the kernel of the adjoint U; empirically
        # positive (its sign structure is not covered by the theory)
        _lam, wvec, _res, _it = _inverse_power_kernel(
            lambda vals: op.u(ScalarField(grid, vals)).values, grid,
            scale=1.0, tol=1e-10)
        if float(np.sum(wvec)) < 0:
            wvec = -wvec
        weight = wvec
        k0_default = float(wvec @ source.reshape(-1)) / float(np.sum(wvec))
    else:
        k0_default = float(np.mean(source))
    k0 = k0_default if k_override is None else float(k_override)
    rhs = ScalarField(grid, (k0 - source) / (n - 1.0))
    phi, info = solve_drift(op, rhs, tol=tol, cokernel_weight=weight)

    # f at e^phi Omega0 from the conformal transformation law, against k0 e^-phi
    lap_phi = spectral_laplacian(phi).values
    cross = inner_background(spectral_d(phi), theta0).real
    f_direct = np.exp(-phi.values) * ((n - 1.0) * lap_phi + (n - 1.0) * cross
                                      + source)
    f_target = k0 * np.exp(-phi.values)
    # scale by the source when k0 is near zero, else the relative defect
    # of an exact solve is amplified without bound
    denom = max(float(np.max(np.abs(f_target))),
                float(np.max(np.abs(source))), 1e-30)
    f_consistency = float(np.max(np.abs(f_direct - f_target))) / denom
    metric = conformal_metric(grid, background.log_factor + phi, normalized=True)
    return DistinguishedResult(
        phi=phi, k0=k0, residual=info.residual,
        f_consistency=f_consistency, info=info, metric=metric,
    )
