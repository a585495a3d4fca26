"""Sparsity-promoting l^q_w Tikhonov regularization for linear ill-posed problems."""

from .basis import (
    Grid,
    GridFunction,
    OrthonormalBasis,
    analyze,
    frame_bounds,
    gram_schmidt,
    make_basis,
    make_canonical_basis,
    make_cosine_basis,
    make_fourier_basis,
    synthesize,
)
from .core import (
    DimensionError,
    ErrorMeasures,
    PenaltyConfig,
    error_measures,
    penalty_eval,
    quasi_norm,
    support_of,
)
from .operators import (
    ForwardOperator,
    HilbertScaleNorm,
    apply,
    apply_adjoint,
    hilbert_scale_norm,
    isomorphism_band,
    load_operator,
    make_abel,
    make_diagonal,
    make_hegland,
    make_nth_integral,
    make_symm,
    operator_norm,
    save_operator,
    to_coefficients,
)
from .rates import (
    DecayProfile,
    IndexFunctionTable,
    RangeCertificate,
    fit_empirical_rate,
    phi_table,
    predict_exponent,
    range_certificate,
    variational_inequality_check,
)
from .regparam import SDPConfig, SDPTrace, sdp_choose, sdp_lower_bound, strong_dp_check
from .solver import SolverOptions, SolverResult, TikhonovProblem, objective_eval, prox, prox_scalar, solve

__version__ = "0.1.0"
