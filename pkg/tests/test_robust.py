"""Tests for the M-scale and the MM-estimator."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from sssr.exceptions import RankDeficientError
from sssr.robust import C_MM, C_S, bisquare_rho, bisquare_weights, m_scale, mm_fit, mm_objective


def problem(seed, N=120, P=5, noise=0.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((N, P))
    beta = rng.standard_normal(P)
    y = X @ beta + noise * rng.standard_normal(N)
    return X, y, beta, rng


def contaminate(y, rng, frac=0.3, magnitude=10.0):
    y = y.copy()
    idx = rng.choice(y.size, size=int(round(frac * y.size)), replace=False)
    spread = np.std(y)
    y[idx] = magnitude * spread * (1.0 + 0.2 * rng.standard_normal(idx.size))
    return y


class TestBisquare:
    def test_rho_saturates_at_one(self):
        assert bisquare_rho(10.0, C_S) == 1.0
        assert bisquare_rho(0.0, C_S) == 0.0

    def test_weights(self):
        np.testing.assert_allclose(bisquare_weights([0.0, C_MM, 2 * C_MM], C_MM), [1.0, 0.0, 0.0])


class TestMScale:
    def test_constant_magnitude_matches_scalar_root(self):
        oracle = brentq(lambda s: bisquare_rho(1.0 / s, C_S) - 0.5, 0.1, 10.0, xtol=1e-14)
        assert m_scale([1.0, -1.0, 1.0, -1.0, 1.0], C_S, 0.5) == pytest.approx(oracle, rel=1e-9)

    def test_solves_defining_equation(self):
        r = np.random.default_rng(0).standard_normal(301)
        s = m_scale(r)
        assert np.mean(bisquare_rho(r / s, C_S)) == pytest.approx(0.5, abs=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), factor=st.floats(1e-3, 1e3))
    def test_scale_equivariance(self, seed, factor):
        r = np.random.default_rng(seed).standard_normal(50)
        assert m_scale(factor * r) == pytest.approx(factor * m_scale(r), rel=1e-8)

    def test_mostly_zero_residuals_are_degenerate(self):
        # with at most half the residuals nonzero the scale equation has no positive root
        assert m_scale(np.r_[3.0, np.zeros(20)]) == 0.0
        assert m_scale(np.zeros(5)) == 0.0

    def test_just_over_half_nonzero_is_finite(self):
        s = m_scale(np.r_[np.ones(11), np.zeros(10)])
        assert 0 < s < np.inf

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            m_scale([])


class TestMMFit:
    def test_clean_data(self):
        X, y, beta, _ = problem(1)
        fit = mm_fit(X, y, seed=1)
        np.testing.assert_allclose(fit.coefficients, beta, atol=1e-8)
        assert np.all(fit.weights > 0.8)
        assert fit.converged

    def test_clean_noisy_data_weights_near_one(self):
        X, y, beta, _ = problem(2, noise=0.01)
        fit = mm_fit(X, y, seed=2)
        assert fit.scale > 0
        assert np.median(fit.weights) > 0.9
        assert np.all((fit.weights >= 0) & (fit.weights <= 1))
        assert fit.weights.size == X.shape[0]

    def test_contamination_monte_carlo(self):
        passed = 0
        for seed in range(100):
            X, y, beta, rng = problem(seed, N=200, P=6, noise=0.001)
            yc = contaminate(y, rng)
            fit = mm_fit(X, yc, seed=seed)
            ls = np.linalg.lstsq(X, yc, rcond=None)[0]
            err = np.linalg.norm(fit.coefficients - beta) / np.linalg.norm(beta)
            err_ls = np.linalg.norm(ls - beta) / np.linalg.norm(beta)
            passed += err <= 1e-2 and err_ls > 10 * 1e-2
        assert passed >= 95

    def test_bounded_error_under_gross_outliers(self):
        passed = 0
        for seed in range(100):
            X, y, beta, rng = problem(seed, N=200, P=6, noise=0.01)
            clean = np.linalg.norm(mm_fit(X, y, seed=seed).coefficients - beta)
            yc = contaminate(y, rng, magnitude=1e4)
            dirty = np.linalg.norm(mm_fit(X, yc, seed=seed).coefficients - beta)
            passed += dirty <= 5 * clean
        assert passed >= 95

    def test_nonnegative_inactive(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((80, 4))
        beta = rng.uniform(0.5, 1.0, 4)
        y = X @ beta + 0.01 * rng.standard_normal(80)
        a = mm_fit(X, y, seed=3)
        b = mm_fit(X, y, nonnegative=True, seed=3)
        np.testing.assert_allclose(b.coefficients, a.coefficients, atol=1e-8)

    def test_nonnegative_active(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((80, 3))
        y = X @ np.array([1.0, -0.5, 0.8]) + 0.01 * rng.standard_normal(80)
        fit = mm_fit(X, y, nonnegative=True, seed=4)
        assert np.all(fit.coefficients >= 0)
        assert fit.coefficients[1] == 0.0

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_regression_equivariance(self, seed):
        X, y, _, rng = problem(seed, N=60, P=3)
        gamma = rng.standard_normal(3)
        a = mm_fit(X, y, seed=seed).coefficients
        b = mm_fit(X, y + X @ gamma, seed=seed).coefficients
        np.testing.assert_allclose(b, a + gamma, atol=1e-8)

    @pytest.mark.parametrize("nonnegative", [False, True])
    def test_objective_monotone(self, nonnegative):
        for seed in range(30):
            X, y, _, rng = problem(seed, N=150, P=4, noise=0.05)
            yc = contaminate(y, rng, frac=0.25, magnitude=3.0)
            fit = mm_fit(X, yc, nonnegative=nonnegative, seed=seed)
            trace = np.array(fit.objective_trace)
            assert np.all(np.diff(trace) <= 1e-12 * trace[:-1])
            assert fit.objective_trace[-1] == pytest.approx(
                mm_objective(yc - X @ fit.coefficients, fit.scale, C_MM)
            )

    def test_iteration_cap_reported(self):
        X, y, _, rng = problem(5, noise=0.1)
        fit = mm_fit(X, contaminate(y, rng), max_iters=1, tol=0.0, seed=5)
        assert not fit.converged
        assert fit.iterations == 1

    def test_deterministic_given_seed(self):
        X, y, _, rng = problem(6, noise=0.1)
        yc = contaminate(y, rng)
        a, b = mm_fit(X, yc, seed=7), mm_fit(X, yc, seed=7)
        assert a.coefficients.tobytes() == b.coefficients.tobytes()

    def test_rank_deficient(self):
        X = np.ones((10, 2))
        with pytest.raises(RankDeficientError):
            mm_fit(X, np.ones(10))

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            mm_fit(np.ones((3, 3)), np.ones(3))
        with pytest.raises(ValueError):
            mm_fit(np.ones((5, 2)), np.ones(4))

    def test_exact_fit_on_half_is_flagged(self):
        X, y, beta, _ = problem(8, N=40, P=2)
        y = y.copy()
        y[:25] = X[:25] @ beta
        y[25:] += 5.0
        fit = mm_fit(X, y, seed=8)
        np.testing.assert_allclose(fit.coefficients, beta, atol=1e-8)
