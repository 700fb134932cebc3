"""Lee-form functionals of almost Hermitian metrics.

Exterior algebra over Lie coframes, invariant-model classification,
conformal classes on flat tori, the linear elliptic solvers for the
Gauduchon and distinguished representatives, and variational
cross-checks of the functionals' first and second variations.
"""

from .exterior import (
    Form,
    InvariantMetric,
    apply_J,
    apply_J_inverse,
    hodge_star,
    inner_product,
    lambda_adjoint,
    norm_sq,
    phi,
    phi_bar,
    pq_components,
    volume_form,
    wedge,
)
from .invariant import (
    ClassificationReport,
    CoframeAlgebra,
    InvariantModel,
    classify,
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
    load_algebra,
)
from .torus import (
    ConformalMetric,
    FieldForm,
    ScalarField,
    TorusGrid,
    conformal_codiff_1form,
    conformal_lee,
    conformal_metric,
    functional_value,
    quadrature,
    spectral_d,
    spectral_dc,
    spectral_laplacian,
)
from .elliptic import (
    DriftOperator,
    NoConvergenceError,
    NonSolvableError,
    distinguished_factor,
    gauduchon_factor,
    kernel_spectrum,
    solve_drift,
)
from .variation import (
    el_pairing,
    fd_derivative,
    second_variation_F,
    sweep_invariant,
    variation_report,
)

__version__ = "0.1.0"
