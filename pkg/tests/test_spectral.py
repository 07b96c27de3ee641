"""Tests for Toeplitz denoising, Prony's method and decay compensation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sssr.exceptions import ConvergenceWarning, SingularModelError
from sssr.signal_model import (
    DecayingExponential,
    Dirac,
    DiracStream,
    build_sensing_matrix,
    spectrum,
    symmetric_bins,
    synthesize,
)
from sssr.spectral import (
    SpectrumEstimate,
    amplitude_lsq,
    cadzow_denoise,
    decay_attenuate,
    decay_compensate,
    estimate_alpha,
    estimate_support,
    polish_locations,
    prony,
    rank_ratio,
    sample_spectrum,
    toeplitz_embed,
)


def exp_mixture(t, a, L):
    ell = symmetric_bins(L)
    return np.exp(-2j * np.pi * np.outer(ell, t)) @ np.asarray(a, dtype=complex)


def separated(rng, K, dt=0.02):
    while True:
        t = rng.uniform(0, 1, K)
        s = np.sort(t)
        if K == 1 or np.diff(np.append(s, s[0] + 1)).min() >= dt:
            return np.sort(t)


class TestToeplitz:
    def test_layout(self):
        c = np.arange(7.0)
        T = toeplitz_embed(c, 2)
        assert T.shape == (5, 3)
        for i in range(5):
            for j in range(3):
                assert T[i, j] == c[i + 2 - j]

    def test_rank_one(self):
        assert rank_ratio(exp_mixture([0.3], [1.0], 11), 1) <= 1e-10

    def test_rank_two(self):
        s = np.linalg.svd(toeplitz_embed(exp_mixture([0.2, 0.7], [1.0, 0.4], 15), 2), compute_uv=False)
        assert s[2] / s[0] <= 1e-9

    def test_noise_full_rank(self):
        rng = np.random.default_rng(0)
        c = rng.standard_normal(15) + 1j * rng.standard_normal(15)
        s = np.linalg.svd(toeplitz_embed(c, 3), compute_uv=False)
        assert s[-1] / s[0] > 1e-3

    def test_too_short(self):
        with pytest.raises(ValueError):
            toeplitz_embed(np.ones(4), 2)


@pytest.mark.filterwarnings("ignore::sssr.exceptions.ConvergenceWarning")
class TestCadzow:
    def test_converged_output_is_rank_K(self):
        import warnings

        rng = np.random.default_rng(9)
        c = exp_mixture([0.2, 0.6], [1.0, 0.7], 25) + 0.05 * (rng.standard_normal(25) + 1j * rng.standard_normal(25))
        with warnings.catch_warnings():
            warnings.simplefilter("error", ConvergenceWarning)
            out = cadzow_denoise(c, 2, max_iters=20000, tol=1e-12)
        assert rank_ratio(out, 2) <= 1e-6

    def test_noiseless_fixed_point(self):
        c = exp_mixture([0.1, 0.45, 0.8], [1.0, 0.7, 0.5], 31)
        np.testing.assert_allclose(cadzow_denoise(c, 3), c, atol=1e-10)

    def test_zero_input(self):
        np.testing.assert_array_equal(cadzow_denoise(np.zeros(9, dtype=complex), 1), np.zeros(9))

    def test_improves_noisy_single_exponential(self):
        L = 21
        better = 0
        for seed in range(200):
            rng = np.random.default_rng(seed)
            c = exp_mixture([rng.uniform()], [1.0], L)
            sigma = np.sqrt(10 ** (-20 / 10) / 2)
            noisy = c + sigma * (rng.standard_normal(L) + 1j * rng.standard_normal(L))
            out = cadzow_denoise(noisy, 1)
            better += np.linalg.norm(out - c) < np.linalg.norm(noisy - c)
        assert better >= 190

    def test_never_increases_rank_ratio(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            c = exp_mixture(rng.uniform(0, 1, 2), [1.0, 0.5], 25) + 0.3 * rng.standard_normal(25)
            assert rank_ratio(cadzow_denoise(c, 2), 2) <= rank_ratio(c, 2) + 1e-15

    def test_preserves_conjugate_symmetry(self):
        x = synthesize(DiracStream([0.2, 0.6], [1.0, 0.8]), Dirac(), 41)
        x = x + 0.05 * np.random.default_rng(2).standard_normal(41)
        out = cadzow_denoise(sample_spectrum(x, 2).coefficients, 2)
        assert SpectrumEstimate(out, 2).is_conjugate_symmetric()

    @pytest.mark.filterwarnings("default::sssr.exceptions.ConvergenceWarning")
    def test_warns_at_cap(self):
        c = exp_mixture([0.2, 0.5], [1.0, 1.0], 25) + 0.5 * np.random.default_rng(3).standard_normal(25)
        with pytest.warns(ConvergenceWarning):
            cadzow_denoise(c, 2, max_iters=1, tol=0.0)


class TestProny:
    def test_single_spike(self):
        assert prony(exp_mixture([0.3], [1.0], 11), 1)[0] == pytest.approx(0.3, abs=1e-10)

    def test_spike_at_origin(self):
        assert prony(exp_mixture([0.0], [1.0], 11), 1)[0] == 0.0

    def test_two_spikes(self):
        np.testing.assert_allclose(prony(exp_mixture([0.2, 0.9], [1.0, 0.5], 21), 2), [0.2, 0.9], atol=1e-9)

    def test_rejects_bad_order(self):
        with pytest.raises(ValueError):
            prony(np.ones(5), 0)

    def test_degenerate_filter(self):
        with pytest.raises(SingularModelError):
            prony(np.array([0.0, 0.0, 1.0]), 1)

    @settings(max_examples=50, deadline=None)
    @given(K=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
    def test_forward_inverse(self, K, seed):
        rng = np.random.default_rng(seed)
        t = separated(rng, K)
        a = rng.uniform(0.5, 1.0, K)
        x = synthesize(DiracStream(t, a), Dirac(), 121)
        t_hat = estimate_support(x, K, denoise=False)
        diff = np.abs(t_hat - t)
        assert np.max(np.minimum(diff, 1 - diff)) <= 1e-9
        np.testing.assert_allclose(amplitude_lsq(x, t_hat, Dirac()), a, atol=1e-9)


class TestAmplitudes:
    def test_exact(self):
        t, a = [0.1, 0.5, 0.77], [1.0, -0.3, 0.8]
        x = synthesize(DiracStream(t, a), Dirac(), 31)
        np.testing.assert_allclose(amplitude_lsq(x, t, Dirac()), a, atol=1e-9)

    def test_nonnegative_inactive(self):
        t, a = [0.1, 0.5], [0.6, 0.9]
        kind = DecayingExponential(11.18)
        x = synthesize(DiracStream(t, a), kind, 31)
        np.testing.assert_allclose(
            amplitude_lsq(x, t, kind, nonnegative=True), amplitude_lsq(x, t, kind), atol=1e-9
        )

    def test_noisy_matches_normal_equations(self):
        from sssr.signal_model import build_sensing_matrix

        rng = np.random.default_rng(4)
        t = [0.15, 0.4, 0.85]
        x = synthesize(DiracStream(t, [1, 1, 1]), Dirac(), 41) + 0.1 * rng.standard_normal(41)
        E = build_sensing_matrix(t, Dirac(), 41).matrix
        oracle = np.linalg.solve(E.T @ E, E.T @ x)
        np.testing.assert_allclose(amplitude_lsq(x, t, Dirac()), oracle, atol=1e-10)


class TestDecay:
    def test_exact_inverse(self):
        c = np.random.default_rng(5).standard_normal(21) + 0j
        np.testing.assert_allclose(decay_compensate(decay_attenuate(c, 3.3), 3.3), c, atol=1e-12)

    def test_recovers_dirac_spectrum(self):
        s = DiracStream([0.2, 0.55], [0.7, 1.0])
        x = synthesize(s, DecayingExponential(11.18), 121)
        comp = decay_compensate(sample_spectrum(x, 2), 11.18)
        assert isinstance(comp, SpectrumEstimate)
        np.testing.assert_allclose(comp.coefficients, spectrum(s, Dirac(), 121), atol=1e-10)

    def test_zero_bin_scaled_by_alpha(self):
        c = np.ones(5, dtype=complex)
        assert decay_compensate(c, 2.5)[2] == 2.5

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValueError):
            decay_compensate(np.ones(3), 0.0)


class TestAlphaSearch:
    def trace(self):
        return synthesize(DiracStream([0.1, 0.35, 0.6, 0.82], [0.6, 1.0, 0.8, 0.7]), DecayingExponential(11.18), 121)

    def test_recovers_alpha(self):
        assert estimate_alpha(self.trace(), 4, (1.0, 50.0)) == pytest.approx(11.18, rel=0.01)

    def test_objective_minimal_at_truth(self):
        c = sample_spectrum(self.trace(), 4).coefficients
        assert rank_ratio(decay_compensate(c, 11.18), 4) <= rank_ratio(decay_compensate(c, 22.36), 4)

    def test_invalid_range(self):
        with pytest.raises(ValueError):
            estimate_alpha(self.trace(), 4, (5.0, 5.0))
        with pytest.raises(ValueError):
            estimate_alpha(self.trace(), 4, (-1.0, 5.0))


class TestSupport:
    def test_decaying_noiseless(self):
        t = [0.05, 0.3, 0.62, 0.9]
        x = synthesize(DiracStream(t, [1, 0.6, 0.9, 0.7]), DecayingExponential(11.18), 121)
        np.testing.assert_allclose(estimate_support(x, 4, DecayingExponential(11.18)), t, atol=1e-9)

    def test_even_length_rejected(self):
        with pytest.raises(ValueError):
            sample_spectrum(np.ones(10), 1)


class TestPolish:
    def noisy(self, seed, kind=Dirac()):
        rng = np.random.default_rng(seed)
        t = separated(rng, 4, 0.05)
        x = synthesize(DiracStream(t, rng.uniform(0.5, 1, 4)), kind, 121)
        return t, x, x + 0.02 * np.sqrt(np.mean(x**2)) * rng.standard_normal(121)

    def residual(self, y, t, kind=Dirac()):
        A = build_sensing_matrix(t, kind, y.size).matrix
        return np.sum((y - A @ np.linalg.lstsq(A, y, rcond=None)[0]) ** 2)

    def test_exact_start_unchanged(self):
        t, x, _ = self.noisy(0)
        np.testing.assert_array_equal(polish_locations(x, t), t)

    def test_lowers_residual(self):
        for seed in range(10):
            _, _, y = self.noisy(seed)
            raw = estimate_support(y, 4, polish=False)
            assert self.residual(y, polish_locations(y, raw)) <= self.residual(y, raw)

    def test_closer_to_truth_on_average(self):
        raw_err, pol_err = [], []
        for seed in range(30):
            t, _, y = self.noisy(seed)
            raw_err.append(np.sum((estimate_support(y, 4, polish=False) - t) ** 2))
            pol_err.append(np.sum((estimate_support(y, 4) - t) ** 2))
        assert np.median(pol_err) < np.median(raw_err)

    def test_decaying_model(self):
        kind = DecayingExponential(11.18)
        t, _, y = self.noisy(3, kind)
        est = estimate_support(y, 4, kind)
        assert self.residual(y, est, kind) <= self.residual(y, estimate_support(y, 4, kind, polish=False), kind)
        np.testing.assert_allclose(est, t, atol=5e-3)

    def test_wraps_into_unit_interval(self):
        t = np.array([0.001, 0.5])
        x = synthesize(DiracStream(t, [1.0, 1.0]), Dirac(), 61)
        y = x + 1e-3 * np.random.default_rng(1).standard_normal(61)
        out = polish_locations(y, [0.999, 0.5])
        assert np.all((out >= 0) & (out < 1))

