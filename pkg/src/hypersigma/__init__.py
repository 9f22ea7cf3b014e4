"""Horospherical sigma-model toolkit: exterior algebra, graph measures,
scaling symmetries, and statistical verification checks."""

from .core import (
    CartesianPoint,
    FieldConfig,
    InversionError,
    build_A,
    compute_beta,
    compute_theta,
    h_beta,
    log_rho_density,
    rho_density,
    s_cart,
    s_from_beta_theta,
    spinor_det_sides,
    to_cartesian,
    u_from_beta,
)
from .grassmann import (
    AlgebraMismatchError,
    DomainError,
    GeneratorSet,
    GrassmannElement,
    GroupElement,
    ParityError,
    SuperMatrix,
    berezin,
    berezin_pairs,
    even_det,
    even_matrix_inverse,
    sdet,
)
from .graphs import Graph, GraphError, GraphTower, extend_alpha, line_tower, single_edge, triangle, wired_subgraph
from .quadrature import (
    cartesian_expect_quadrature_1v,
    expect_quadrature_1v,
    super_expect_quadrature_1v,
    zeta_integral_1v,
)
from .sampler import (
    ChainConfig,
    Estimate,
    EstimationError,
    expect,
    expect_importance,
    expect_ratio,
    fermion_weight,
    gelman_rubin,
    grassmann_reduce,
    psi_algebra,
    psi_vectors,
    sample_s_given_u,
    sample_u,
    super_expect,
)
from .scaling import (
    ScaleParams,
    laplace_closed_form,
    radon_nikodym,
    rescale_weights,
    scale_fields,
    theta_conditional_covariance,
)
from .supersym import (
    SuperObservable,
    bold_rho,
    compute_phi,
    consistency_check,
    grassmann_laplace_check,
    martingale_derivative_check,
    martingale_generating_check,
    super_image_measure_check,
    super_jacobian,
    super_scale_pullback,
    susy_martingale_check,
    ward_check,
)
from .verify import CheckSpec, Report, UnknownCheckError, default_specs, list_check_ids, run_check, run_suite

__version__ = "0.1.0"
