"""Model selection toolkit for normal linear regression.

Criteria of the AIC family, exact Kullback-Leibler discrepancy
decompositions under mis-specification, a significance test for criterion
differences with known error variance, and a seeded Monte-Carlo harness
that validates the distribution theory empirically.
"""

from .regression import (
    Dataset,
    FitResult,
    LinearModel,
    apply_Q,
    diff_projection_traces,
    fit_ols,
    quadratic_form_Q,
    quadratic_form_diffQ,
    standardize_errors,
)
from .chi2 import NoncentralChi2, mean, neg_first_moment, quadratic_form_law, sample, variance
from .criteria import (
    CriterionValue,
    aic_gamma,
    aic_known_sigma,
    aic_unknown_sigma,
    aicc,
    aicu,
    akaike_weights,
)
from .discrepancy import (
    DiscrepancyDecomposition,
    MisspecRegime,
    TrueModel,
    aicc_shift,
    dkl_self,
    lambda_misspec,
    msc_known_sigma,
    msc_unknown_sigma,
    realized_discrepancies,
    realized_od_unknown_sigma,
    unbiasing_term_unknown_sigma,
)
from .selection import (
    DeltaComparison,
    DeltaMoments,
    SeparationReport,
    delta12,
    delta_moments,
    nested_delta_law,
    separation_diagnostic,
    var_delta_estimate,
    z_test,
)
from .simulate import (
    CheckRecord,
    SimConfig,
    SimReport,
    build_h0_pair,
    generate_data,
    run,
    substream,
)

__version__ = "0.1.0"
