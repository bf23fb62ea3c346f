"""OLS against an independent SVD/pseudo-inverse + quadrature oracle."""

import math

import numpy as np
import pytest

from tidysim import TidysimError, add_intercept, fit_ols

from test_numerics import t_tail_by_quadrature


def ols_oracle(x, y):
    """Normal equations via pseudo-inverse (SVD) with quadrature p-values."""
    n, k = x.shape
    coef = np.linalg.pinv(x) @ y
    resid = y - x @ coef
    sigma2 = float(resid @ resid) / (n - k)
    cov = sigma2 * np.linalg.pinv(x.T @ x)
    se = np.sqrt(np.diag(cov))
    t = coef / se
    p = np.array([t_tail_by_quadrature(tj, n - k) for tj in t])
    return coef, se, t, p


def random_instance(rs, n=None, k=None):
    n = n if n is not None else rs.randint(5, 13)
    k = k if k is not None else rs.randint(1, min(4, n - 1) + 1)
    x = add_intercept(rs.standard_normal((n, k - 1))) if k > 1 \
        else np.ones((n, 1))
    y = rs.standard_normal(n) + x @ rs.standard_normal(k)
    return x, y


class TestAddIntercept:
    def test_zero_column_input(self):
        out = add_intercept(np.empty((3, 0)))
        assert out.shape == (3, 1) and np.all(out == 1.0)

    def test_simple_case(self):
        out = add_intercept(np.array([[5.0], [7.0]]))
        assert out.tolist() == [[1.0, 5.0], [1.0, 7.0]]

    def test_existing_ones_column_still_prepended(self):
        x = np.ones((4, 1))
        fit = fit_ols(add_intercept(x), np.arange(4.0))
        assert fit.singular

    def test_empty_rejected(self):
        with pytest.raises(TidysimError):
            add_intercept(np.empty((0, 2)))


class TestFitOls:
    def test_exact_interpolation(self):
        # collinear points: zero residual, coef recovered exactly
        x = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])
        y = np.array([0.0, 1.0, 2.0])
        fit = fit_ols(x, y)
        assert fit.coef == pytest.approx([0.0, 1.0], abs=1e-12)
        assert not fit.singular
        resid = y - x @ fit.coef
        assert float(resid @ resid) == pytest.approx(0.0, abs=1e-20)

    def test_n_equals_k_rejected(self):
        with pytest.raises(TidysimError, match="degrees of freedom"):
            fit_ols(np.array([[1.0, 0.0], [1.0, 1.0]]), np.array([0.0, 1.0]))

    def test_duplicated_column_is_singular(self):
        rs = np.random.RandomState(0)
        base = rs.standard_normal((8, 1))
        x = np.hstack([np.ones((8, 1)), base, base])
        fit = fit_ols(x, rs.standard_normal(8))
        assert fit.singular
        assert fit.min_eigenvalue < 1e-10
        assert np.all(np.isfinite(fit.coef))

    def test_insufficient_df_rejected(self):
        with pytest.raises(TidysimError, match="degrees of freedom"):
            fit_ols(np.ones((2, 2)), np.zeros(2))

    def test_nonfinite_rejected(self):
        with pytest.raises(TidysimError):
            fit_ols(np.array([[1.0], [np.nan]]), np.zeros(2))
        with pytest.raises(TidysimError):
            fit_ols(np.ones((3, 1)), np.array([0.0, np.inf, 1.0]))

    def test_against_pinv_oracle_50_instances(self):
        rs = np.random.RandomState(1234)
        for _ in range(50):
            x, y = random_instance(rs)
            fit = fit_ols(x, y)
            coef, se, t, p = ols_oracle(x, y)
            assert fit.coef == pytest.approx(coef, abs=1e-8)
            assert fit.stderr == pytest.approx(se, abs=1e-8)
            assert fit.p_value == pytest.approx(p, abs=1e-6)
            assert fit.df_resid == x.shape[0] - x.shape[1]
            assert not fit.singular

    def test_pvalue_matches_t_tail_invariant(self):
        from tidysim import student_t_two_sided_p

        rs = np.random.RandomState(5)
        x, y = random_instance(rs, n=10, k=3)
        fit = fit_ols(x, y)
        for tj, pj in zip(fit.t_stat, fit.p_value):
            assert pj == pytest.approx(
                student_t_two_sided_p(float(tj), fit.df_resid), abs=1e-14)

    def test_noiseless_recovery(self):
        rs = np.random.RandomState(7)
        for _ in range(10):
            x = add_intercept(rs.standard_normal((9, 2)))
            beta = rs.standard_normal(3) + np.array([0.0, 2.0, -2.0])
            fit = fit_ols(x, x @ beta)
            assert fit.coef == pytest.approx(beta, abs=1e-8)
            for j in range(3):
                if abs(beta[j]) > 1e-6:
                    assert fit.p_value[j] < 1e-12

    def test_scale_equivariance(self):
        rs = np.random.RandomState(11)
        x, y = random_instance(rs, n=12, k=3)
        a, b = fit_ols(x, y), fit_ols(x, 10.0 * y)
        assert b.coef == pytest.approx(10.0 * a.coef, rel=1e-12)
        assert b.stderr == pytest.approx(10.0 * a.stderr, rel=1e-12)
        assert b.t_stat == pytest.approx(a.t_stat, abs=1e-10)
        assert b.p_value == pytest.approx(a.p_value, abs=1e-10)

    def test_null_pvalues_are_uniform(self):
        # y independent of the regressor: p ~ U(0,1); KS over 1e4 fits
        rs = np.random.RandomState(99)
        n_fits = 10_000
        pvals = np.empty(n_fits)
        for i in range(n_fits):
            x = add_intercept(rs.standard_normal((12, 1)))
            y = rs.standard_normal(12)
            pvals[i] = fit_ols(x, y).p_value[1]
        pvals.sort()
        grid_hi = np.arange(1, n_fits + 1) / n_fits
        grid_lo = np.arange(0, n_fits) / n_fits
        d = max(np.max(np.abs(pvals - grid_hi)), np.max(np.abs(pvals - grid_lo)))
        critical_1pct = 1.628 / math.sqrt(n_fits)
        assert d < critical_1pct
