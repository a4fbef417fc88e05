"""Significance testing for the criterion difference between two candidates
fitted with a known common error variance.

The difference statistic, its exact moments under the true model, the
unbiased variance estimator, and the asymptotic z-test of the hypothesis
that both candidates are equally discrepant from the truth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .chi2 import NoncentralChi2
from .discrepancy import TrueModel, lambda_misspec
from .regression import (
    LinearModel,
    _as_vector,
    diff_projection_traces,
    fit_ols,
    quadratic_form_diffQ,
)

Alternative = Literal["two-sided", "m1-closer", "m2-closer"]

# Finite-n cutoffs standing in for the asymptotic separation conditions.
SEPARATION_Y0_TERM_MIN = 0.01     # y0' (Q2-Q1)^2 y0 / (sigma0^2 n) bounded below
SEPARATION_LAMBDA_MAX = 100.0     # lambda / n bounded above
SEPARATION_TRACE_FACTOR = 10.0    # trace_t2 <= factor * (k1 + k2) counts as O(1)
NESTED_PROJECTION_TOL = 1e-8


@dataclass(frozen=True)
class DeltaComparison:
    """Outcome of the z-test on the criterion difference of two candidates.

    ``z`` and the p-values are set only when the variance estimate is
    positive; a non-positive estimate yields ``valid=False`` rather than an
    exception, so pipelines can continue.
    """

    delta12: float
    trace_t2: float
    var_estimate: float
    valid: bool
    z: float | None = None
    p_two_sided: float | None = None
    p_one_sided: float | None = None
    alternative: Alternative = "two-sided"


@dataclass(frozen=True)
class DeltaMoments:
    e_delta: float
    var_delta: float
    lambda1: float
    lambda2: float


@dataclass(frozen=True)
class SeparationReport:
    """Finite-n check of the asymptotic conditions behind the z-test.

    Raw quantities are reported in noise units alongside the pass flags so
    the cutoffs stay transparent.
    """

    y0_term_per_n: float
    lambda1_per_n: float
    lambda2_per_n: float
    trace_t2: float
    y0_term_ok: bool
    lambdas_ok: bool
    trace_ok: bool
    separated: bool


def _require_common_known_sigma(model1: LinearModel, model2: LinearModel) -> float:
    if model1.n != model2.n:
        raise ValueError(f"models disagree on n: {model1.n} vs {model2.n}")
    if not (model1.variance_known and model2.variance_known):
        raise ValueError("both models need a known error variance")
    if model1.sigma2 != model2.sigma2:
        raise ValueError(
            f"models must share one known variance ({model1.sigma2} vs {model2.sigma2})"
        )
    return model1.sigma2


def delta12(model1: LinearModel, model2: LinearModel, y) -> float:
    """Criterion difference (RSS2/sigma2 + 2 k2) - (RSS1/sigma2 + 2 k1).

    Positive values favor the first model.
    """
    sigma2 = _require_common_known_sigma(model1, model2)
    y = _as_vector(y, model1.n, name="y")
    rss1 = fit_ols(model1, y).rss
    rss2 = fit_ols(model2, y).rss
    return (rss2 - rss1) / sigma2 + 2.0 * (model2.k - model1.k)


def delta_moments(true: TrueModel, model1: LinearModel, model2: LinearModel) -> DeltaMoments:
    """Exact mean and variance of the criterion difference under the true model."""
    sigma2 = _require_common_known_sigma(model1, model2)
    if sigma2 != true.sigma0_2:
        raise ValueError("models must carry the true error variance")
    lam1 = lambda_misspec(true, model1)
    lam2 = lambda_misspec(true, model2)
    t2, _ = diff_projection_traces(model1, model2)
    quad = quadratic_form_diffQ(model1, model2, true.y0) / true.sigma0_2
    return DeltaMoments(
        e_delta=(model2.k - model1.k) + (lam2 - lam1),
        var_delta=2.0 * t2 + 4.0 * quad,
        lambda1=lam1,
        lambda2=lam2,
    )


def var_delta_estimate(model1: LinearModel, model2: LinearModel, y, sigma0_2: float) -> float:
    """Unbiased estimate of Var(delta) from the data alone.

    -2 tr[(Q2-Q1)^2] + 4 y'(Q2-Q1)^2 y / sigma0_2.  Not guaranteed positive;
    callers must handle the non-positive case.
    """
    if not (sigma0_2 > 0.0):
        raise ValueError("sigma0_2 must be positive")
    t2, _ = diff_projection_traces(model1, model2)
    quad = quadratic_form_diffQ(model1, model2, _as_vector(y, model1.n, name="y"))
    return -2.0 * t2 + 4.0 * quad / sigma0_2


def _phi_tail(x: float) -> float:
    """P(Z > x) for standard normal Z, via the complementary error function."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def z_test(
    model1: LinearModel,
    model2: LinearModel,
    y,
    sigma0_2: float,
    alternative: Alternative = "two-sided",
) -> DeltaComparison:
    """Asymptotic z-test of equal discrepancy from the truth.

    The one-sided alternative "m1-closer" puts its weight on large positive
    z (the second model's criterion exceeding the first's); "m2-closer" is
    the mirror image.  A non-positive variance estimate flags the result
    invalid instead of raising.
    """
    if alternative not in ("two-sided", "m1-closer", "m2-closer"):
        raise ValueError(f"unknown alternative {alternative!r}")
    y = _as_vector(y, model1.n, name="y")
    d = delta12(model1, model2, y)
    t2, _ = diff_projection_traces(model1, model2)
    est = var_delta_estimate(model1, model2, y, sigma0_2)
    if est <= 0.0:
        return DeltaComparison(
            delta12=d, trace_t2=t2, var_estimate=est, valid=False, alternative=alternative
        )
    z = d / math.sqrt(est)
    p_two = 2.0 * _phi_tail(abs(z))
    if alternative == "m1-closer":
        p_one = _phi_tail(z)
    elif alternative == "m2-closer":
        p_one = _phi_tail(-z)
    else:
        p_one = None
    return DeltaComparison(
        delta12=d,
        trace_t2=t2,
        var_estimate=est,
        valid=True,
        z=z,
        p_two_sided=p_two,
        p_one_sided=p_one,
        alternative=alternative,
    )


def separation_diagnostic(
    true: TrueModel, model1: LinearModel, model2: LinearModel
) -> SeparationReport:
    """Check whether the normality conditions behind the z-test plausibly hold.

    Needs the true model, so this is a simulation / diagnostic tool, not
    something computable from observed data.
    """
    if model1.n != model2.n or true.n != model1.n:
        raise ValueError("dimension mismatch between true model and candidates")
    n = true.n
    t2, _ = diff_projection_traces(model1, model2)
    y0_term = quadratic_form_diffQ(model1, model2, true.y0) / true.sigma0_2 / n
    lam1 = lambda_misspec(true, model1) / n
    lam2 = lambda_misspec(true, model2) / n
    y0_ok = y0_term >= SEPARATION_Y0_TERM_MIN
    lam_ok = lam1 <= SEPARATION_LAMBDA_MAX and lam2 <= SEPARATION_LAMBDA_MAX
    trace_ok = t2 <= SEPARATION_TRACE_FACTOR * (model1.k + model2.k)
    return SeparationReport(
        y0_term_per_n=y0_term,
        lambda1_per_n=lam1,
        lambda2_per_n=lam2,
        trace_t2=t2,
        y0_term_ok=y0_ok,
        lambdas_ok=lam_ok,
        trace_ok=trace_ok,
        separated=y0_ok and lam_ok and trace_ok,
    )


def nested_delta_law(
    model1: LinearModel, model2: LinearModel, true: TrueModel
) -> NoncentralChi2:
    """Law of delta12 + 2(k1 - k2) when model2 is nested in model1 and the
    fuller model is correctly specified: chi2(k1 - k2, lambda2).

    Nestedness is verified numerically (the fuller projection must fix the
    reduced model's basis), as is the requirement that the true mean lie in
    the fuller estimation space.
    """
    if model1.n != model2.n or true.n != model1.n:
        raise ValueError("dimension mismatch between true model and candidates")
    if model2.k > model1.k:
        raise ValueError("the first model must be the fuller one")
    t2, _ = diff_projection_traces(model1, model2)
    if abs(t2 - (model1.k - model2.k)) > 1e-6:
        raise ValueError("models are not nested: trace of squared projection difference "
                         f"is {t2:.6g}, expected {model1.k - model2.k}")
    u1, u2 = model1.basis, model2.basis
    # For each basis vector v of the reduced space, P2 v = v must survive P1.
    drift = u2 - u1 @ (u1.T @ u2)
    if np.linalg.norm(drift, axis=0).max() > NESTED_PROJECTION_TOL:
        raise ValueError("models are not nested: reduced basis leaves the fuller space")
    lam1 = lambda_misspec(true, model1)
    lam_tol = 1e-8 * (1.0 + float(true.y0 @ true.y0) / true.sigma0_2)
    if lam1 > lam_tol:
        raise ValueError(
            f"fuller model is mis-specified (lambda1={lam1:.3g}); the nested law needs "
            "the true mean inside its estimation space"
        )
    lam2 = lambda_misspec(true, model2)
    if model1.k == model2.k:
        lam2 = 0.0  # identical spans: degenerate point mass
    return NoncentralChi2(r=model1.k - model2.k, lam=lam2)
