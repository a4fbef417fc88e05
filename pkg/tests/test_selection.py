import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from regselect import (
    LinearModel,
    TrueModel,
    delta12,
    delta_moments,
    lambda_misspec,
    nested_delta_law,
    separation_diagnostic,
    var_delta_estimate,
    z_test,
)
from regselect.simulate import substream
from conftest import random_model, span_model


def worked_pair():
    """Spans of the first and second axis in R^3, shared unit variance."""
    return span_model([0], 3, sigma2=1.0), span_model([1], 3, sigma2=1.0)


class TestDelta12:
    def test_identical_models(self, rng):
        x = rng.standard_normal((9, 2))
        m = LinearModel(x, sigma2=1.0)
        assert delta12(m, m, rng.standard_normal(9)) == pytest.approx(0.0, abs=1e-10)

    def test_nested_algebra(self, rng):
        x1 = rng.standard_normal((10, 3))
        x2 = x1[:, :1]
        m1 = LinearModel(x1, sigma2=2.0)
        m2 = LinearModel(x2, sigma2=2.0)
        y = rng.standard_normal(10)
        from regselect import fit_ols

        rss1, rss2 = fit_ols(m1, y).rss, fit_ols(m2, y).rss
        assert delta12(m1, m2, y) == pytest.approx((rss2 - rss1) / 2.0 + 2 * (1 - 3))

    def test_worked_three_point_example(self):
        m1, m2 = worked_pair()
        assert delta12(m1, m2, [1.0, 2.0, 0.0]) == pytest.approx(-3.0)

    def test_requires_shared_sigma(self, rng):
        m1 = random_model(rng, 8, 2, sigma2=1.0)
        m2 = random_model(rng, 8, 2, sigma2=2.0)
        with pytest.raises(ValueError):
            delta12(m1, m2, rng.standard_normal(8))

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_antisymmetry(self, seed):
        gen = np.random.default_rng(seed)
        n = int(gen.integers(4, 12))
        m1 = random_model(gen, n, int(gen.integers(1, n - 1)), sigma2=1.5)
        m2 = random_model(gen, n, int(gen.integers(1, n - 1)), sigma2=1.5)
        y = gen.standard_normal(n)
        assert delta12(m1, m2, y) == pytest.approx(-delta12(m2, m1, y), rel=1e-10, abs=1e-10)


class TestDeltaMoments:
    def test_identical_models(self, rng):
        x = rng.standard_normal((7, 2))
        m = LinearModel(x, sigma2=1.0)
        mom = delta_moments(TrueModel(rng.standard_normal(7), 1.0), m, m)
        assert mom.e_delta == pytest.approx(0.0, abs=1e-10)
        assert mom.var_delta == pytest.approx(0.0, abs=1e-10)

    def test_worked_example(self):
        m1, m2 = worked_pair()
        mom = delta_moments(TrueModel([1.0, 2.0, 0.0], 1.0), m1, m2)
        # lambda1 = |(0,2,0)|^2 = 4, lambda2 = |(1,0,0)|^2 = 1
        assert mom.lambda1 == pytest.approx(4.0)
        assert mom.lambda2 == pytest.approx(1.0)
        assert mom.e_delta == pytest.approx((1 - 1) + (1 - 4))
        assert mom.var_delta == pytest.approx(2 * 2 + 4 * 5)

    def test_zero_true_mean(self, rng):
        m1 = random_model(rng, 10, 2, sigma2=1.0)
        m2 = random_model(rng, 10, 4, sigma2=1.0)
        mom = delta_moments(TrueModel(np.zeros(10), 1.0), m1, m2)
        from regselect import diff_projection_traces

        t2, _ = diff_projection_traces(m1, m2)
        assert mom.e_delta == pytest.approx(2.0)
        assert mom.var_delta == pytest.approx(2.0 * t2)

    def test_moment_match_small_mc(self):
        m1, m2 = worked_pair()
        true = TrueModel([1.0, 2.0, 0.0], 1.0)
        mom = delta_moments(true, m1, m2)
        gen = substream(77, 0)
        reps = 200_000
        vals = np.empty(reps)
        u1, u2 = m1.basis, m2.basis
        y = true.y0[None, :] + gen.standard_normal((reps, 3))
        r1 = y - (y @ u1) @ u1.T
        r2 = y - (y @ u2) @ u2.T
        vals = (np.einsum("ij,ij->i", r2, r2) - np.einsum("ij,ij->i", r1, r1))
        se_m = vals.std(ddof=1) / math.sqrt(reps)
        assert abs(vals.mean() - mom.e_delta) <= 5 * se_m
        m4 = np.mean((vals - vals.mean()) ** 4)
        se_v = math.sqrt((m4 - np.var(vals, ddof=1) ** 2) / reps)
        assert abs(np.var(vals, ddof=1) - mom.var_delta) <= 5 * se_v


class TestVarDeltaEstimate:
    def test_identical_models(self, rng):
        x = rng.standard_normal((6, 2))
        m = LinearModel(x, sigma2=1.0)
        assert var_delta_estimate(m, m, rng.standard_normal(6), 1.0) == pytest.approx(0.0, abs=1e-9)

    def test_worked_example(self):
        m1, m2 = worked_pair()
        assert var_delta_estimate(m1, m2, [1.0, 2.0, 0.0], 1.0) == pytest.approx(16.0)

    def test_unbiasedness_small_mc(self):
        m1, m2 = worked_pair()
        true = TrueModel([1.0, 2.0, 0.0], 1.0)
        mom = delta_moments(true, m1, m2)
        gen = substream(78, 0)
        reps = 100_000
        u1, u2 = m1.basis, m2.basis
        y = true.y0[None, :] + gen.standard_normal((reps, 3))
        p1 = (y @ u1) @ u1.T
        p2 = (y @ u2) @ u2.T
        dq = np.einsum("ij,ij->i", p1 - p2, p1 - p2)
        est = -2.0 * 2.0 + 4.0 * dq
        se = est.std(ddof=1) / math.sqrt(reps)
        assert abs(est.mean() - mom.var_delta) <= 5 * se


class TestZTest:
    def test_identical_models_flagged(self, rng):
        x = rng.standard_normal((8, 3))
        m = LinearModel(x, sigma2=1.0)
        result = z_test(m, m, rng.standard_normal(8), 1.0)
        assert not result.valid
        assert result.z is None and result.p_two_sided is None

    def test_two_sided_p_against_scipy(self):
        m1, m2 = worked_pair()
        result = z_test(m1, m2, [1.0, 2.0, 0.0], 1.0)
        assert result.valid
        assert result.z == pytest.approx(-0.75)
        assert result.p_two_sided == pytest.approx(2 * stats.norm.sf(0.75), abs=1e-12)
        assert result.p_two_sided == pytest.approx(0.4533, abs=1e-4)

    def test_critical_value(self):
        # the 5% two-sided point of the reference normal
        from regselect.selection import _phi_tail

        assert 2 * _phi_tail(1.959964) == pytest.approx(0.05, abs=1e-6)
        for x in (0.1, 0.5, 1.0, 2.5, 4.0, 6.0):
            assert _phi_tail(x) == pytest.approx(stats.norm.sf(x), rel=1e-12)

    def test_one_sided_halves_when_sign_favors(self):
        m1, m2 = worked_pair()
        y = [0.0, 2.0, 1.0]  # rss1 = 5, rss2 = 1 -> delta < 0 favors model 2
        two = z_test(m1, m2, y, 1.0)
        one = z_test(m1, m2, y, 1.0, alternative="m2-closer")
        assert one.z < 0
        assert one.p_one_sided == pytest.approx(two.p_two_sided / 2.0)
        other = z_test(m1, m2, y, 1.0, alternative="m1-closer")
        assert other.p_one_sided == pytest.approx(1.0 - two.p_two_sided / 2.0)

    def test_swap_antisymmetry(self, rng):
        m1 = random_model(rng, 30, 2, sigma2=1.0)
        m2 = random_model(rng, 30, 3, sigma2=1.0)
        y = rng.standard_normal(30) * 2.0
        a = z_test(m1, m2, y, 1.0)
        b = z_test(m2, m1, y, 1.0)
        assert a.z == pytest.approx(-b.z, rel=1e-10)
        assert a.p_two_sided == pytest.approx(b.p_two_sided, rel=1e-10)


class TestSeparationDiagnostic:
    def test_zero_true_mean_not_separated(self, rng):
        m1 = random_model(rng, 40, 2, sigma2=1.0)
        m2 = random_model(rng, 40, 3, sigma2=1.0)
        report = separation_diagnostic(TrueModel(np.zeros(40), 1.0), m1, m2)
        assert not report.y0_term_ok
        assert not report.separated

    def test_growing_nested_misspec_separated(self, rng):
        n = 200
        x1 = rng.standard_normal((n, 2))
        x2 = x1[:, :1]
        m1 = LinearModel(x1, sigma2=1.0)
        m2 = LinearModel(x2, sigma2=1.0)
        # true mean: strong component along the second regressor (outside the
        # reduced span) plus an error-space part shared by both models
        w = rng.standard_normal(n)
        q1w = w - m1.basis @ (m1.basis.T @ w)
        y0 = 2.0 * math.sqrt(n) * x1[:, 1] / np.linalg.norm(x1[:, 1]) + q1w
        report = separation_diagnostic(TrueModel(y0, 1.0), m1, m2)
        assert report.y0_term_ok and report.lambdas_ok and report.trace_ok
        assert report.separated

    def test_orthogonal_error_spaces_trace_value(self):
        # maximally dissimilar pair in R^4: error spaces are orthogonal and
        # the trace hits (n-k1) + (n-k2); the O(1) cutoff 10(k1+k2) can never
        # fire since the trace is bounded by k1+k2 for fixed-dimension models
        m1 = span_model([0, 1], 4, sigma2=1.0)
        m2 = span_model([2, 3], 4, sigma2=1.0)
        report = separation_diagnostic(TrueModel([1.0, 0.0, 0.0, 1.0], 1.0), m1, m2)
        assert report.trace_t2 == pytest.approx((4 - 2) + (4 - 2))
        assert report.trace_ok


class TestNestedDeltaLaw:
    def _nested_models(self, rng, n=20, k1=3, k2=1):
        x1 = rng.standard_normal((n, k1))
        x2 = x1 @ rng.standard_normal((k1, k2))
        return LinearModel(x1, sigma2=1.0), LinearModel(x2, sigma2=1.0)

    def test_central_when_true_mean_in_reduced_space(self, rng):
        m1, m2 = self._nested_models(rng)
        y0 = m2.X @ rng.standard_normal(1)
        law = nested_delta_law(m1, m2, TrueModel(y0, 1.0))
        assert law.r == 2
        assert law.lam == pytest.approx(0.0, abs=1e-8)

    def test_identical_models_degenerate(self, rng):
        x = rng.standard_normal((12, 2))
        m = LinearModel(x, sigma2=1.0)
        y0 = x @ rng.standard_normal(2)
        law = nested_delta_law(m, m, TrueModel(y0, 1.0))
        assert law.r == 0 and law.lam == 0.0

    def test_law_and_monte_carlo_mean(self, rng):
        m1, m2 = self._nested_models(rng)
        w = rng.standard_normal(20)
        part = (m1.basis @ (m1.basis.T @ w)) - (m2.basis @ (m2.basis.T @ w))
        y0 = part * 2.0 / np.linalg.norm(part)
        true = TrueModel(y0, 1.0)
        law = nested_delta_law(m1, m2, true)
        assert law.r == 2 and law.lam == pytest.approx(4.0, rel=1e-10)
        gen = substream(79, 0)
        reps = 100_000
        u1, u2 = m1.basis, m2.basis
        y = y0[None, :] + gen.standard_normal((reps, 20))
        r1 = y - (y @ u1) @ u1.T
        r2 = y - (y @ u2) @ u2.T
        shifted = np.einsum("ij,ij->i", r2, r2) - np.einsum("ij,ij->i", r1, r1)
        se = shifted.std(ddof=1) / math.sqrt(reps)
        assert abs(shifted.mean() - 6.0) <= 5 * se

    def test_rejects_non_nested(self, rng):
        m1 = random_model(rng, 15, 3, sigma2=1.0)
        m2 = random_model(rng, 15, 1, sigma2=1.0)
        with pytest.raises(ValueError, match="not nested"):
            nested_delta_law(m1, m2, TrueModel(np.zeros(15), 1.0))

    def test_rejects_misspecified_fuller_model(self, rng):
        m1, m2 = self._nested_models(rng)
        w = rng.standard_normal(20)
        y0 = w - m1.basis @ (m1.basis.T @ w)  # outside the fuller span
        with pytest.raises(ValueError, match="mis-specified"):
            nested_delta_law(m1, m2, TrueModel(3.0 * y0, 1.0))

    def test_lambda2_invariant_under_basis_change(self, rng):
        m1, m2 = self._nested_models(rng)
        w = rng.standard_normal(20)
        part = (m1.basis @ (m1.basis.T @ w)) - (m2.basis @ (m2.basis.T @ w))
        y0 = part * 3.0 / np.linalg.norm(part)
        true = TrueModel(y0, 1.0)
        law = nested_delta_law(m1, m2, true)
        assert law.lam == pytest.approx(lambda_misspec(true, m2), rel=1e-12)
