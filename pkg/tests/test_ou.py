import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from longrun import (
    DataError,
    Dimensionless,
    OUFit,
    OUParams,
    autocorrelation,
    classify_regime,
    dimensionless,
    discount_rate_curve,
    discount_rate_envelope,
    log_discount,
    long_run_rate,
    neg_prob,
    neg_prob_expansion,
    parse_grid,
    stationary_moments,
)

USA = OUParams(m=0.0319, alpha=0.0603, k2=10.03e-5)
GERMANY = OUParams(m=-0.0945, alpha=0.0071, k2=41.72e-4)


def gaussian_log_discount(p, r0, t):
    """Independent oracle: the rate integral is Gaussian, so
    ln D = -mean + var/2 with the standard OU integral moments."""
    a, m, k2 = p.alpha, p.m, p.k2
    mean = m * t + (r0 - m) * (1 - math.exp(-a * t)) / a
    var = (k2 / a**2) * (
        t - 2 * (1 - math.exp(-a * t)) / a + (1 - math.exp(-2 * a * t)) / (2 * a)
    )
    return -mean + var / 2


class TestStationary:
    def test_zero_noise(self):
        assert stationary_moments(OUParams(m=0.03, alpha=0.1, k2=0.0)) == (0.03, 0.0)

    def test_usa_variance(self):
        _, var = stationary_moments(USA)
        assert abs(var - 8.317e-4) < 1e-6

    def test_doubling_alpha_halves_variance(self):
        _, v1 = stationary_moments(OUParams(m=0.0, alpha=0.1, k2=1e-4))
        _, v2 = stationary_moments(OUParams(m=0.0, alpha=0.2, k2=1e-4))
        assert abs(v1 - 2 * v2) < 1e-18

    def test_invalid_alpha(self):
        with pytest.raises(DataError):
            OUParams(m=0.0, alpha=0.0, k2=1e-4)


class TestAutocorrelation:
    def test_lag_zero_is_variance(self):
        assert autocorrelation(USA, 0.0) == stationary_moments(USA)[1]

    def test_efolding(self):
        var = stationary_moments(USA)[1]
        assert abs(autocorrelation(USA, 1 / USA.alpha) - var / math.e) < 1e-15

    def test_correlation_time_integral(self):
        var = stationary_moments(USA)[1]
        taus = np.linspace(0, 50 / USA.alpha, 200_001)
        values = np.array([autocorrelation(USA, t) for t in taus[:: 1000]])
        fine = var * np.exp(-USA.alpha * taus)
        assert np.allclose(values, fine[::1000])
        integral = np.trapezoid(fine / var, taus)
        assert abs(integral - 1 / USA.alpha) < 1e-3 / USA.alpha

    def test_negative_lag(self):
        with pytest.raises(DataError):
            autocorrelation(USA, -1.0)


class TestNegProb:
    def test_mu_equals_kappa(self):
        assert abs(neg_prob(Dimensionless(1.0, 1.0)) - 0.079) < 5e-4

    def test_symmetry(self):
        assert neg_prob(Dimensionless(0.0, 0.5)) == 0.5

    def test_ratio_three_vs_mpmath(self):
        expected = float(0.5 * mpmath.erfc(3))
        assert abs(neg_prob(Dimensionless(3.0, 1.0)) - expected) < 1e-15
        assert abs(expected - 1.10e-5) < 1e-7

    def test_degenerate_kappa(self):
        assert neg_prob(Dimensionless(0.1, 0.0)) == 0.0
        assert neg_prob(Dimensionless(-0.1, 0.0)) == 1.0
        assert neg_prob(Dimensionless(0.0, 0.0)) == 0.5

    @given(st.floats(-5, 5), st.floats(0.01, 5))
    def test_complement(self, mu, kappa):
        p = neg_prob(Dimensionless(mu, kappa))
        q = neg_prob(Dimensionless(-mu, kappa))
        assert abs(p + q - 1.0) < 1e-12

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 5))
    def test_decreasing_in_ratio(self, mu1, mu2, kappa):
        lo, hi = sorted((mu1, mu2))
        assert neg_prob(Dimensionless(hi, kappa)) <= neg_prob(Dimensionless(lo, kappa))


class TestNegProbExpansion:
    def test_small_ratio(self):
        d = Dimensionless(0.05, 1.0)
        approx, tag = neg_prob_expansion(d)
        assert tag == "small-ratio"
        assert abs(approx - neg_prob(d)) < 1e-3

    def test_small_ratio_zero(self):
        approx, _ = neg_prob_expansion(Dimensionless(0.0, 1.0))
        assert approx == 0.5

    def test_large_ratio(self):
        d = Dimensionless(4.0, 1.0)
        approx, tag = neg_prob_expansion(d)
        assert tag == "large-ratio"
        exact = neg_prob(d)
        assert abs(approx - exact) / exact < 0.20

    def test_boundary_rejected(self):
        with pytest.raises(DataError):
            neg_prob_expansion(Dimensionless(1.0, 1.0))


class TestLogDiscount:
    def test_zero_horizon(self):
        assert log_discount(USA, 0.01, 0.0) == 0.0

    def test_short_time_limit(self):
        r0 = 0.01
        t = 1e-6
        assert abs(-log_discount(USA, r0, t) / t - r0) < 1e-6

    @pytest.mark.parametrize("p", [USA, GERMANY, OUParams(0.02, 1.0, 4e-4)])
    @pytest.mark.parametrize("t", [0.5, 1.0, 10.0, 50.0, 200.0])
    def test_matches_gaussian_integral_oracle(self, p, t):
        r0 = 0.01
        expected = gaussian_log_discount(p, r0, t)
        got = log_discount(p, r0, t)
        assert abs(got - expected) <= 1e-12 * (1 + abs(expected))

    def test_asymptotic_slope(self):
        T = 50 / USA.alpha
        slope = (log_discount(USA, 0.01, 2 * T) - log_discount(USA, 0.01, T)) / T
        assert abs(-slope - long_run_rate(USA)) < 1e-10

    def test_zero_noise_two_rate_formula(self):
        p = OUParams(m=0.03, alpha=0.2, k2=0.0)
        r0, t = 0.01, 7.0
        expected = -p.m * t + (p.m - r0) * (1 - math.exp(-p.alpha * t)) / p.alpha
        assert log_discount(p, r0, t) == pytest.approx(expected, abs=1e-16)

    def test_vectorized(self):
        ts = np.array([1.0, 10.0])
        out = log_discount(USA, 0.01, ts)
        assert out.shape == (2,)
        assert out[0] == log_discount(USA, 0.01, 1.0)

    def test_negative_t_rejected(self):
        with pytest.raises(DataError):
            log_discount(USA, 0.01, -1.0)


class TestLongRunRate:
    def test_usa(self):
        assert abs(long_run_rate(USA) - 0.0181) < 5e-4

    def test_netherlands(self):
        ned = OUParams(m=0.0599, alpha=0.1648, k2=17.97e-5)
        assert abs(long_run_rate(ned) - 0.0566) < 5e-4

    def test_zero_noise(self):
        assert long_run_rate(OUParams(m=0.03, alpha=0.1, k2=0.0)) == 0.03

    @given(st.floats(-0.1, 0.1), st.floats(0.01, 2.0), st.floats(0, 1e-2))
    def test_dimensionless_form_agrees(self, m, alpha, k2):
        p = OUParams(m=m, alpha=alpha, k2=k2)
        d = dimensionless(p)
        assert long_run_rate(p) == pytest.approx(
            alpha * (d.mu - d.kappa**2 / 2), rel=1e-12, abs=1e-15
        )


class TestDimensionless:
    def test_usa(self):
        d = dimensionless(USA)
        assert abs(d.mu - 0.53) < 0.01
        assert abs(d.kappa - 0.68) < 0.01

    def test_uk(self):
        d = dimensionless(OUParams(m=0.0342, alpha=0.1635, k2=31.37e-5))
        assert abs(d.mu - 0.21) < 0.01
        assert abs(d.kappa - 0.27) < 0.01

    def test_zero_mean(self):
        assert dimensionless(OUParams(m=0.0, alpha=0.37, k2=1e-4)).mu == 0.0


class TestClassifyRegime:
    def test_r1(self):
        assert classify_regime(Dimensionless(2.0, 1.0)).label == "R1"

    def test_usa_is_r2(self):
        regime = classify_regime(Dimensionless(0.53, 0.68))
        assert regime.label == "R2"
        assert regime.r_inf_sign == "positive"

    def test_spain_negative_region(self):
        regime = classify_regime(Dimensionless(4.02, 7.13))
        assert regime.r_inf_sign == "negative"
        assert regime.label == "R3"

    def test_r4(self):
        # mu < kappa^2/2 but mu >= kappa requires kappa > 2
        regime = classify_regime(Dimensionless(3.0, 3.0))
        assert regime.label == "R4"
        assert regime.r_inf_sign == "negative"

    def test_boundary(self):
        regime = classify_regime(Dimensionless(0.5, 1.0))
        assert regime.label == "boundary_zero_rate"
        assert regime.r_inf_sign == "zero"

    @given(st.floats(-3, 3), st.floats(0.01, 3), st.floats(0.01, 2.0))
    def test_sign_matches_long_run_rate(self, mu, kappa, alpha):
        regime = classify_regime(Dimensionless(mu, kappa))
        p = OUParams(m=mu * alpha, alpha=alpha, k2=kappa**2 * alpha**3)
        r_inf = long_run_rate(p)
        if regime.r_inf_sign == "positive":
            assert r_inf > -1e-12
        elif regime.r_inf_sign == "negative":
            assert r_inf < 1e-12


class TestParseGrid:
    def test_default(self):
        grid = parse_grid(None)
        assert len(grid) == 200
        assert grid[0] == pytest.approx(0.25)
        assert grid[-1] == pytest.approx(500.0)

    def test_geometric_and_linear(self):
        g = parse_grid("geometric:1:100:3")
        assert list(g) == pytest.approx([1.0, 10.0, 100.0])
        lin = parse_grid("linear:1:3:3")
        assert list(lin) == pytest.approx([1.0, 2.0, 3.0])

    @pytest.mark.parametrize(
        "bad", ["geometric:1:100", "log:1:100:3", "geometric:0:1:5", "geometric:1:100:x"]
    )
    def test_bad_specs(self, bad):
        with pytest.raises(DataError):
            parse_grid(bad)

    def test_iterable(self):
        assert list(parse_grid([1.0, 2.0])) == [1.0, 2.0]
        with pytest.raises(DataError):
            parse_grid([2.0, 1.0])


class TestDiscountRateCurve:
    def test_flat_degenerate(self):
        p = OUParams(m=0.01, alpha=0.5, k2=0.0)
        curve = discount_rate_curve(p, r0=0.01)
        assert np.allclose(curve.rate_central, 0.01, atol=1e-14)

    def test_usa_converges_to_r_inf(self):
        curve = discount_rate_curve(USA, r0=0.01)
        assert curve.rate_central[-1] == pytest.approx(long_run_rate(USA), abs=2e-3)
        assert curve.rate_central[-1] > curve.rate_central[0]

    def test_germany_dives_negative(self):
        curve = discount_rate_curve(GERMANY, r0=0.01)
        assert curve.rate_central[-1] < 0


class TestDiscountRateEnvelope:
    def _fit(self, p, se_m, se_a, se_k2):
        return OUFit(
            params=p, se_m=se_m, se_alpha=se_a, se_k2=se_k2, n_obs=100, loglik=0.0
        )

    def test_zero_sigma_collapses(self):
        fit = self._fit(USA, 0.0, 0.0, 0.0)
        curve = discount_rate_envelope(fit, 0.01)
        assert np.array_equal(curve.rate_lo, curve.rate_central)
        assert np.array_equal(curve.rate_hi, curve.rate_central)

    def test_central_within_bounds(self):
        fit = self._fit(USA, 0.0123, 0.0257, 1.05e-5)
        curve = discount_rate_envelope(fit, 0.01)
        assert np.all(curve.rate_lo <= curve.rate_central)
        assert np.all(curve.rate_central <= curve.rate_hi)

    def test_zero_noise_central_preserved(self):
        p = OUParams(m=0.01, alpha=0.5, k2=0.0)
        fit = self._fit(p, 0.0, 0.0, 0.0)
        curve = discount_rate_envelope(fit, 0.01)
        assert np.allclose(curve.rate_central, 0.01, atol=1e-14)
        assert np.array_equal(curve.rate_lo, curve.rate_hi)

    def test_alpha_corner_clamped(self):
        # se_alpha > alpha: the minus-sigma corner must be clamped, not crash
        fit = self._fit(OUParams(m=0.05, alpha=0.0071, k2=41.72e-4), 0.6695, 0.0089, 2.19e-4)
        curve = discount_rate_envelope(fit, 0.01)
        assert np.all(np.isfinite(curve.rate_lo))
        assert np.all(np.isfinite(curve.rate_hi))

    def test_non_finite_se_rejected(self):
        fit = self._fit(USA, float("nan"), 0.0, 0.0)
        with pytest.raises(DataError):
            discount_rate_envelope(fit, 0.01)
