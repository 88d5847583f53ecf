"""Tests for OLS, ADF, integration order and the Engle-Granger bubble rule."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from bubblescope.errors import NumericalError, SeriesValidationError
from bubblescope.regression import (
    Design,
    adf_test,
    engle_granger,
    fundamental_bubble_test,
    integration_order,
    ols,
    schwert_max_lag,
    significance_stars,
)
from bubblescope.series import MonthStamp, PriceSeries


def random_walk(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.cumsum(rng.standard_normal(n))


def ar1(rng: np.random.Generator, n: int, rho: float) -> np.ndarray:
    e = rng.standard_normal(n)
    out = np.empty(n)
    out[0] = e[0]
    for t in range(1, n):
        out[t] = rho * out[t - 1] + e[t]
    return out


class TestOLS:
    def test_recovers_line(self) -> None:
        rng = np.random.default_rng(1)
        x = rng.standard_normal(200)
        y = 1.5 + 2.0 * x + 0.01 * rng.standard_normal(200)
        fit = ols(y, Design(constant=True, exog=x, exog_names=("x",)))
        assert fit.coef("const") == pytest.approx(1.5, abs=0.01)
        assert fit.coef("x") == pytest.approx(2.0, abs=0.01)
        assert fit.df_resid == 198

    def test_exact_line_has_zero_residuals(self) -> None:
        x = np.linspace(-3.0, 5.0, 40)
        fit = ols(2.0 + 3.0 * x, Design(constant=True, exog=x, exog_names=("x",)))
        assert fit.coef("const") == pytest.approx(2.0, abs=1e-12)
        assert fit.coef("x") == pytest.approx(3.0, abs=1e-12)
        assert np.max(np.abs(fit.residuals)) < 1e-12

    def test_intercept_only_is_the_mean(self) -> None:
        fit = ols(np.full(25, 4.25), Design(constant=True))
        assert fit.coef("const") == pytest.approx(4.25)
        assert fit.sse == pytest.approx(0.0, abs=1e-20)

    def test_matches_exact_normal_equations(self) -> None:
        y = ar1(np.random.default_rng(2), 120, 0.7)
        fit = ols(y, Design(constant=True, trend=True))
        n = len(y)
        ys = [Fraction(float(v)) for v in y]
        ts = [Fraction(k) for k in range(1, n + 1)]
        st, sy = sum(ts), sum(ys)
        stt = sum(t * t for t in ts)
        sty = sum(t * v for t, v in zip(ts, ys))
        slope = (n * sty - st * sy) / (n * stt - st * st)
        intercept = (sy - slope * st) / n
        assert fit.coef("trend") == pytest.approx(float(slope), rel=1e-10, abs=1e-14)
        assert fit.coef("const") == pytest.approx(float(intercept), rel=1e-10, abs=1e-14)

    def test_residuals_orthogonal_to_design(self) -> None:
        rng = np.random.default_rng(6)
        x = random_walk(rng, 200)
        design = Design(constant=True, trend=True, exog=x, exog_names=("x",))
        fit = ols(0.5 + 0.1 * x + rng.standard_normal(200), design)
        X, _ = design.build(200)
        scale = np.linalg.norm(X, axis=0) * np.linalg.norm(fit.residuals)
        assert np.all(np.abs(X.T @ fit.residuals) <= 1e-10 * scale)

    def test_trend_column_is_one_based(self) -> None:
        X, names = Design(constant=True, trend=True).build(4)
        assert names == ("const", "trend")
        assert list(X[:, 1]) == [1.0, 2.0, 3.0, 4.0]

    def test_rank_deficient(self) -> None:
        x = np.arange(30, dtype=float)
        with pytest.raises(NumericalError, match="rank-deficient"):
            ols(x, Design(constant=True, trend=True, exog=np.column_stack([x, 2 * x]), exog_names=("a", "b")))

    def test_too_few_observations(self) -> None:
        with pytest.raises(SeriesValidationError):
            ols([1.0, 2.0, 3.0], Design(constant=True, trend=True))


class TestSignificance:
    def test_stars(self) -> None:
        assert significance_stars(0.001) == "★★★"
        assert significance_stars(0.03) == "★★"
        assert significance_stars(0.07) == "★"
        assert significance_stars(0.2) == ""
        assert significance_stars(None) == ""


class TestADF:
    def test_schwert_rule(self) -> None:
        assert schwert_max_lag(100) == 12
        assert schwert_max_lag(250) == 15

    def test_constant_series(self) -> None:
        with pytest.raises(NumericalError, match="constant"):
            adf_test(np.full(100, 3.0))

    def test_too_short(self) -> None:
        with pytest.raises(SeriesValidationError, match="observations"):
            adf_test(np.arange(10, dtype=float), lags=0)

    def test_fixed_lag_is_used(self) -> None:
        rng = np.random.default_rng(3)
        result = adf_test(random_walk(rng, 200), regression="c", lags=4)
        assert result.lags_used == 4
        assert result.nobs == 199 - 4

    def test_aic_lag_within_bound(self) -> None:
        rng = np.random.default_rng(4)
        result = adf_test(ar1(rng, 300, 0.5), regression="ct", lags="aic")
        assert 0 <= result.lags_used <= result.max_lag == schwert_max_lag(300)

    @pytest.mark.parametrize("regression", ["c", "ct"])
    def test_invariant_under_affine_rescaling(self, regression: str) -> None:
        y = random_walk(np.random.default_rng(9), 200)
        base = adf_test(y, regression=regression, lags="aic")
        scaled = adf_test(2.5 * y - 40.0, regression=regression, lags="aic")
        assert scaled.lags_used == base.lags_used
        assert scaled.statistic == pytest.approx(base.statistic, abs=1e-10)

    def test_accepts_price_series(self) -> None:
        rng = np.random.default_rng(5)
        prices = PriceSeries(start=MonthStamp(2005, 1), values=tuple(np.exp(0.01 * random_walk(rng, 120))))
        assert 0.0 <= adf_test(prices).p_value <= 1.0

    @pytest.mark.slow
    def test_size_under_the_null(self) -> None:
        rng = np.random.default_rng(20170501)
        reps = 2000
        rejections = sum(adf_test(random_walk(rng, 250), regression="c", lags=0).rejects_at(0.05) for _ in range(reps))
        assert 0.035 <= rejections / reps <= 0.065

    @pytest.mark.slow
    def test_random_walk_rarely_rejects(self) -> None:
        rng = np.random.default_rng(7)
        reps = 200
        rejections = sum(adf_test(random_walk(rng, 500)).rejects_at(0.05) for _ in range(reps))
        assert rejections / reps <= 0.10

    @pytest.mark.slow
    def test_stationary_ar1_rejects(self) -> None:
        rng = np.random.default_rng(8)
        reps = 200
        rejections = sum(adf_test(ar1(rng, 500, 0.5)).rejects_at(0.05) for _ in range(reps))
        assert rejections / reps >= 0.99


class TestIntegrationOrder:
    def test_white_noise_is_i0(self) -> None:
        rng = np.random.default_rng(10)
        assert integration_order(rng.standard_normal(300)) == 0

    def test_random_walk_is_i1(self) -> None:
        rng = np.random.default_rng(11)
        orders = [integration_order(random_walk(rng, 300)) for _ in range(20)]
        assert orders.count(1) >= 15

    def test_double_integration_raises(self) -> None:
        rng = np.random.default_rng(12)
        raised = 0
        for _ in range(20):
            try:
                integration_order(np.cumsum(random_walk(rng, 300)))
            except NumericalError:
                raised += 1
        assert raised >= 15


class TestEngleGranger:
    def test_exact_fit_is_degenerate(self) -> None:
        rng = np.random.default_rng(13)
        x = random_walk(rng, 150)
        result = engle_granger(2.0 + 3.0 * x, x)
        assert result.degenerate
        assert not result.bubble_flag
        assert result.eg_p_value == 0.0

    def test_span_mismatch(self) -> None:
        a = PriceSeries(start=MonthStamp(2005, 1), values=tuple(range(1, 101)))
        b = PriceSeries(start=MonthStamp(2005, 2), values=tuple(range(1, 101)))
        with pytest.raises(SeriesValidationError, match="span mismatch"):
            engle_granger(a, b)

    def test_step_one_coefficients(self) -> None:
        rng = np.random.default_rng(14)
        x = random_walk(rng, 300)
        y = 1.0 + 0.5 * x + 0.5 * ar1(rng, 300, 0.5)
        result = engle_granger(y, x)
        assert result.step1_coefficients["x"] == pytest.approx(0.5, abs=0.05)
        assert set(result.step1_coefficients) == {"const", "trend", "x"}

    def test_step_one_residuals_sum_to_zero(self) -> None:
        rng = np.random.default_rng(19)
        x = random_walk(rng, 240)
        y = 4.0 + 0.02 * np.arange(240) + 0.8 * x + 0.3 * ar1(rng, 240, 0.6)
        coefs = engle_granger(y, x).step1_coefficients
        trend = np.arange(1, 241, dtype=float)
        residuals = y - coefs["const"] - coefs["trend"] * trend - coefs["x"] * x
        assert abs(residuals.sum()) <= 1e-8 * np.abs(y).sum()

    @pytest.mark.slow
    def test_detects_cointegration(self) -> None:
        rng = np.random.default_rng(15)
        reps = 1000
        hits = 0
        for _ in range(reps):
            x = random_walk(rng, 300)
            y = 1.0 + 0.5 * x + 0.1 * rng.standard_normal(300)
            hits += 0.05 in engle_granger(y, x).cointegrated_at
        assert hits / reps >= 0.95

    @pytest.mark.slow
    def test_independent_walks_rarely_cointegrate(self) -> None:
        rng = np.random.default_rng(16)
        reps = 1000
        false_alarms = sum(
            0.05 in engle_granger(random_walk(rng, 300), random_walk(rng, 300)).cointegrated_at for _ in range(reps)
        )
        assert false_alarms / reps <= 0.10


class TestFundamentalBubbleRule:
    def test_stationary_price_has_no_bubble(self) -> None:
        rng = np.random.default_rng(17)
        result = fundamental_bubble_test(rng.standard_normal(250), random_walk(rng, 250))
        assert result.branch == "price_stationary"
        assert not result.bubble_flag
        assert not result.tested

    def test_stationary_fundamental_flags_bubble(self) -> None:
        rng = np.random.default_rng(18)
        branches = []
        for _ in range(20):
            result = fundamental_bubble_test(random_walk(rng, 250), rng.standard_normal(250))
            branches.append(result.branch)
            if result.branch == "fundamental_stationary":
                assert result.bubble_flag
                assert result.eg_statistic is None
        assert branches.count("fundamental_stationary") >= 15

    def test_cointegrated_pair_has_no_bubble(self) -> None:
        rng = np.random.default_rng(19)
        outcomes = []
        for _ in range(20):
            x = random_walk(rng, 250)
            y = 1.0 + 0.5 * x + ar1(rng, 250, 0.5)
            result = fundamental_bubble_test(y, x)
            outcomes.append((result.branch, result.bubble_flag))
        assert outcomes.count(("engle_granger", False)) >= 14

    def test_independent_walks_flag_bubble(self) -> None:
        rng = np.random.default_rng(20)
        outcomes = [
            fundamental_bubble_test(random_walk(rng, 250), random_walk(rng, 250)).bubble_flag for _ in range(20)
        ]
        assert sum(outcomes) >= 14
