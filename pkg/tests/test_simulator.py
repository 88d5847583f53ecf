"""Tests for the JLS path simulator."""

from __future__ import annotations

import math

import numpy as np
import pytest

from bubblescope.calibrate import FitConfig, fit_window
from bubblescope.errors import ConfigError, NumericalError
from bubblescope.lppls import HazardParams, coefficient_identities, hazard_to_lppls
from bubblescope.series import MonthStamp, Window
from bubblescope.simulator import SimConfig, crash_probability, simulate, simulate_batch, survival_log_price


def hazard(**overrides: float) -> HazardParams:
    values = {"alpha": 0.02, "beta_osc": 0.5, "m": 0.5, "omega": 8.0, "t_c": 130.0, "phi_prime": 0.3, "kappa": 0.4}
    values.update(overrides)
    return HazardParams(**values)


class TestSimConfig:
    @pytest.mark.parametrize(
        "overrides",
        [
            {"sigma": -0.1},
            {"p0": 0.0},
            {"horizon": 0},
            {"step": 0.3},
            {"step": 1.5},
        ],
    )
    def test_rejects_bad_values(self, overrides: dict) -> None:
        with pytest.raises(ConfigError):
            SimConfig(hp=hazard(), **overrides)

    def test_full_crash_rejected(self) -> None:
        with pytest.raises(ConfigError, match="kappa"):
            SimConfig(hp=hazard(kappa=1.0))

    def test_step_counts(self) -> None:
        config = SimConfig(hp=hazard(), horizon=12, step=0.25)
        assert config.steps_per_month == 4
        assert config.n_steps == 48


class TestSimulate:
    def test_zero_crash_size_keeps_price_flat(self) -> None:
        path = simulate(SimConfig(hp=hazard(kappa=0.0), p0=3.0, horizon=60))
        assert len(path.prices) == 61
        assert np.allclose(path.prices.to_numpy(), 3.0, rtol=1e-12)
        assert not path.crashed

    def test_no_crash_path_follows_closed_form(self) -> None:
        config = SimConfig(hp=hazard(), p0=2.0, horizon=120, step=1.0 / 64, allow_crash=False)
        path = simulate(config)
        expected = hazard_to_lppls(config.hp, 2.0).log_price(np.arange(121, dtype=float))
        assert np.max(np.abs(path.prices.log_prices() - expected)) < 1e-3
        assert survival_log_price(60.0, config) == pytest.approx(expected[60])

    def test_step_refinement(self) -> None:
        coarse = simulate(SimConfig(hp=hazard(), horizon=120, step=1.0 / 32, allow_crash=False))
        fine = simulate(SimConfig(hp=hazard(), horizon=120, step=1.0 / 64, allow_crash=False))
        assert np.max(np.abs(coarse.prices.log_prices() - fine.prices.log_prices())) < 1e-3

    def test_deterministic(self) -> None:
        config = SimConfig(hp=hazard(alpha=0.1), sigma=0.02, horizon=100, rng_seed=11)
        a, b = simulate(config), simulate(config)
        assert a.prices == b.prices
        assert a.crash_time == b.crash_time
        assert np.array_equal(a.drift_trace, b.drift_trace)

    def test_batch_matches_single_paths(self) -> None:
        config = SimConfig(hp=hazard(alpha=0.1), sigma=0.02, horizon=60)
        batch = simulate_batch(config, range(5), workers=3)
        for seed, path in zip(range(5), batch):
            single = simulate(SimConfig(hp=config.hp, sigma=0.02, horizon=60, rng_seed=seed))
            assert path.prices == single.prices

    def test_crash_drops_price_and_stops_drift(self) -> None:
        hp = hazard(alpha=0.2)
        path = next(p for p in simulate_batch(SimConfig(hp=hp, horizon=120), range(50)) if p.crashed)
        k = path.crash_month - path.prices.start
        prices = path.prices.to_numpy()
        assert prices[k] / prices[k - 1] < 1 - hp.kappa / 2
        assert np.all(prices[k:] == prices[k])
        crash_step = round(path.crash_time / (1.0 / 16)) - 1
        assert np.all(path.drift_trace[crash_step + 1 :] == 0.0)

    def test_hazard_vanishes_after_critical_time(self) -> None:
        path = simulate(SimConfig(hp=hazard(t_c=100.0), horizon=120, allow_crash=False))
        prices = path.prices.to_numpy()
        assert np.all(prices[100:] == prices[100])
        assert path.prices.start == MonthStamp(2000, 1)

    def test_coarse_step_rejected(self) -> None:
        with pytest.raises(NumericalError, match="too coarse"):
            simulate(SimConfig(hp=hazard(alpha=50.0), horizon=120, step=1.0))

    def test_survival_price_after_critical_time(self) -> None:
        with pytest.raises(ValueError):
            survival_log_price(130.0, SimConfig(hp=hazard()))


class TestCrashProbability:
    def test_matches_closed_form_drift(self) -> None:
        hp = hazard()
        p = hazard_to_lppls(hp)
        for t in (10.0, 60.0, 120.0):
            integral = (p.log_price(t) - p.log_price(0.0)) / hp.kappa
            assert crash_probability(t, hp) == pytest.approx(1.0 - math.exp(-integral), abs=1e-6)

    def test_zero_at_origin(self) -> None:
        assert crash_probability(0.0, hazard()) == 0.0

    @pytest.mark.slow
    def test_empirical_crash_frequency(self) -> None:
        hp = hazard()
        paths = simulate_batch(SimConfig(hp=hp, horizon=120), range(10_000))
        crash_times = np.array([p.crash_time if p.crashed else math.inf for p in paths])
        for t in (30.0, 60.0, 90.0, 120.0):
            empirical = float(np.mean(crash_times <= t))
            assert empirical == pytest.approx(crash_probability(t, hp), abs=0.02)


class TestCalibrationOnSimulatedPaths:
    @pytest.mark.slow
    def test_fit_recovers_generating_hazard(self) -> None:
        hp = hazard(alpha=0.05, beta_osc=0.99, omega=6.0)
        path = simulate(SimConfig(hp=hp, horizon=120, step=1.0 / 64, allow_crash=False))
        window = Window(MonthStamp(2001, 1), MonthStamp(2010, 1))
        fit = fit_window(path.prices, window, FitConfig(n_starts=30))
        assert fit.params.t_c == pytest.approx(hp.t_c, abs=1.0)
        assert fit.params.m == pytest.approx(hp.m, abs=0.02)
        assert fit.params.omega == pytest.approx(hp.omega, abs=0.2)
        B, C = coefficient_identities(hp)
        assert fit.params.B == pytest.approx(B, rel=1e-3)
        # the fit keeps C >= 0 and folds the sign into phi
        assert abs(fit.params.C) == pytest.approx(abs(C), rel=1e-2)
