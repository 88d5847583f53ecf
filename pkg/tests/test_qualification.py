"""Tests for the LPPLS filter, appendix replay, and rolling-window scans."""

from __future__ import annotations

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubblescope.calibrate import FitConfig, LPPLSFit
from bubblescope.errors import ConfigError, SeriesValidationError
from bubblescope.lppls import LPPLSParams
from bubblescope.qualification import (
    APPENDIX_T2,
    FilterThresholds,
    load_appendix_csv,
    load_appendix_tables,
    oscillation_count,
    qualify,
    qualify_fit,
    replay_appendix,
    scan,
    scan_windows,
    strength,
)
from bubblescope.series import MonthStamp, PriceSeries, Window, parse_month

PUBLISHED = FilterThresholds.preset("paper-consistent")
STRICT = FilterThresholds.preset("strict")


def row_for(city: str, t1: str):
    return next(r for r in load_appendix_tables((city,))[city] if str(r.t1) == t1)


class TestThresholds:
    def test_defaults(self) -> None:
        t = FilterThresholds()
        assert (t.m_lo, t.m_hi, t.omega_lo, t.omega_hi) == (0.01, 0.99, 2.0, 25.0)
        assert (t.tc_lo_fraction, t.tc_hi_fraction) == (-0.05, 0.1)
        assert (t.oscillation_min, t.damping_min) == (2.5, 1.0)

    def test_presets(self) -> None:
        assert "oscillation" not in PUBLISHED.enabled
        assert STRICT.enabled == ("m", "omega", "tc", "oscillation", "damping")

    def test_unknown_preset(self) -> None:
        with pytest.raises(ConfigError, match="unknown preset"):
            FilterThresholds.preset("lenient")

    def test_empty_interval(self) -> None:
        with pytest.raises(ConfigError):
            FilterThresholds(m_lo=0.5, m_hi=0.4)


class TestOscillationCount:
    def test_unit_count(self) -> None:
        t2 = 100.0
        t_c = 110.0
        t1 = t_c - math.e * (t_c - t2)
        assert oscillation_count(t1, t2, t_c, 2 * math.pi) == pytest.approx(1.0)

    def test_critical_time_at_window_end(self) -> None:
        assert oscillation_count(96.0, 208.0, 208.0, 4.0) == math.inf

    def test_critical_time_inside_window(self) -> None:
        assert math.isnan(oscillation_count(96.0, 208.0, 200.0, 4.0))

    def test_shenzhen_first_row(self) -> None:
        count = oscillation_count(parse_month("200801"), parse_month("201705"), parse_month("201709"), 3.172)
        assert count == pytest.approx(3.172 / (2 * math.pi) * math.log(116 / 4))
        assert count == pytest.approx(1.70, abs=0.005)

    def test_critical_time_before_start(self) -> None:
        with pytest.raises(ValueError):
            oscillation_count(100.0, 150.0, 90.0, 5.0)

    @given(st.floats(min_value=0.01, max_value=100.0))
    def test_time_unit_invariance(self, scale: float) -> None:
        base = oscillation_count(96.0, 208.0, 212.0, 3.0)
        assert oscillation_count(96.0 * scale, 208.0 * scale, 212.0 * scale, 3.0) == pytest.approx(base, rel=1e-9)


class TestQualify:
    def test_shenzhen_m_at_one_fails(self) -> None:
        row = row_for("shenzhen", "200803")
        report = replay_appendix([row], PUBLISHED)[0]
        assert not report.c_m
        assert report.indicator == 0

    def test_tianjin_low_omega_fails(self) -> None:
        report = replay_appendix([row_for("tianjin", "200803")], PUBLISHED)[0]
        assert not report.c_omega
        assert report.indicator == 0

    def test_chengdu_low_damping_fails(self) -> None:
        report = replay_appendix([row_for("chengdu", "200801")], PUBLISHED)[0]
        assert not report.c_damp
        assert report.failed == ["damping"]

    def test_reported_damping_overrides_rounded_coefficients(self) -> None:
        row = row_for("shanghai", "200801")
        window = Window(row.t1, APPENDIX_T2)
        recomputed = qualify(row.m, row.w, row.tc, window, PUBLISHED, B=row.B, C=row.C)
        reported = qualify(row.m, row.w, row.tc, window, PUBLISHED, B=row.B, C=row.C, damping=row.BmCw)
        assert reported.damping == pytest.approx(1.438)
        assert recomputed.damping != pytest.approx(1.438, abs=0.01)
        assert reported.indicator == 1

    def test_degenerate_values_never_raise(self) -> None:
        window = Window(parse_month("200801"), parse_month("201705"))
        report = qualify(math.nan, math.nan, math.nan, window, STRICT)
        assert report.indicator == 0
        early = qualify(0.5, 8.0, 50.0, window, STRICT, B=-1.0, C=0.1)
        assert early.indicator == 0
        assert math.isnan(early.oscillation_count)

    def test_disabled_condition_is_ignored(self) -> None:
        window = Window(parse_month("200801"), parse_month("201705"))
        only_m = FilterThresholds(check_omega=False, check_tc=False, check_oscillation=False, check_damping=False)
        assert qualify(0.5, 100.0, 0.0, window, only_m).indicator == 1

    @settings(max_examples=60, deadline=None)
    @given(
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=0.5, max_value=30.0),
        st.floats(min_value=-8.0, max_value=15.0),
        st.floats(min_value=0.1, max_value=3.0),
        st.floats(min_value=0.0, max_value=0.05),
    )
    def test_relaxing_never_removes_a_signal(
        self, m: float, omega: float, offset: float, damping: float, slack: float
    ) -> None:
        window = Window(parse_month("200801"), parse_month("201705"))
        t_c = window.t2.index + offset
        tight = qualify(m, omega, t_c, window, STRICT, damping=damping)
        relaxed_thresholds = replace(
            STRICT,
            m_lo=STRICT.m_lo - slack,
            m_hi=STRICT.m_hi + slack,
            omega_lo=STRICT.omega_lo - slack,
            omega_hi=STRICT.omega_hi + slack,
            tc_lo_fraction=STRICT.tc_lo_fraction - slack,
            tc_hi_fraction=STRICT.tc_hi_fraction + slack,
            oscillation_min=STRICT.oscillation_min - slack,
            damping_min=STRICT.damping_min - slack,
        )
        relaxed = qualify(m, omega, t_c, window, relaxed_thresholds, damping=damping)
        assert relaxed.indicator >= tight.indicator
        assert qualify(m, omega, t_c, window, PUBLISHED, damping=damping).indicator >= tight.indicator


class TestQualifyFit:
    WINDOW = Window(parse_month("200801"), parse_month("201705"))
    PARAMS = LPPLSParams(t_c=parse_month("201705").index + 3.0, m=0.5, omega=7.0, phi=1.0, A=9.0, B=-0.3, C=0.02)

    def fit(self, converged: bool, note: str = "") -> LPPLSFit:
        return LPPLSFit(
            params=self.PARAMS,
            sse=1e-3,
            window=self.WINDOW,
            converged=converged,
            n_observations=self.WINDOW.n_observations,
            condition_flag=False,
            note=note,
        )

    def test_converged_fit_qualifies(self) -> None:
        report = qualify_fit(self.fit(True), PUBLISHED)
        assert report.indicator == 1
        assert report.damping == pytest.approx(0.15 / 0.14)

    def test_iteration_limit_is_a_failure(self) -> None:
        report = qualify_fit(self.fit(False, "iteration limit reached"), PUBLISHED)
        assert report.indicator == 0
        assert report.note == "iteration limit reached"
        assert report.failed == list(PUBLISHED.enabled)

    def test_missing_note_is_filled(self) -> None:
        assert qualify_fit(self.fit(False), PUBLISHED).note == "not converged"


class TestAppendixReplay:
    def test_tables_ship_with_package(self) -> None:
        tables = load_appendix_tables()
        assert sorted(tables) == ["chengdu", "shanghai", "shenzhen", "tianjin"]
        assert all(len(rows) == 34 for rows in tables.values())

    def test_reproduces_published_indicator(self) -> None:
        start = time.perf_counter()
        tables = load_appendix_tables()
        mismatches = []
        for city, rows in tables.items():
            for row, report in zip(rows, replay_appendix(rows, PUBLISHED)):
                if report.indicator != row.Ind:
                    mismatches.append((city, str(row.t1)))
        assert mismatches == []
        assert time.perf_counter() - start < 1.0

    def test_strength_counts(self) -> None:
        tables = load_appendix_tables()
        counts = {city: sum(r.indicator for r in replay_appendix(rows, PUBLISHED)) for city, rows in tables.items()}
        assert counts == {"shanghai": 34, "shenzhen": 2, "tianjin": 2, "chengdu": 7}

    def test_strict_preset_flips_finite_oscillation_rows(self) -> None:
        tables = load_appendix_tables()
        flipped = set()
        for city, rows in tables.items():
            for row, loose, strict in zip(rows, replay_appendix(rows, PUBLISHED), replay_appendix(rows, STRICT)):
                assert strict.indicator <= loose.indicator
                if loose.indicator == 1 and strict.indicator == 0:
                    flipped.add((city, str(row.t1)))
                    assert strict.oscillation_count < 2.5
        assert {
            ("shenzhen", "200801"),
            ("shenzhen", "200802"),
            ("tianjin", "200801"),
            ("tianjin", "200802"),
            ("chengdu", "200803"),
            ("chengdu", "200912"),
            ("chengdu", "201001"),
            ("chengdu", "201002"),
        } <= flipped

    def test_rows_at_window_end_keep_their_signal(self) -> None:
        rows = [row_for("chengdu", t1) for t1 in ("200804", "200805", "200911")]
        assert [r.indicator for r in replay_appendix(rows, STRICT)] == [1, 1, 1]
        assert all(r.oscillation_count == math.inf for r in replay_appendix(rows, STRICT))

    def test_user_fixture_file(self, tmp_path) -> None:
        path = tmp_path / "fixture.csv"
        path.write_text("t1,tc,m,w,A,B,C,BmCw,Ind\n200801,201705,0.5,6.0,10,-0.1,0.01,1.5,1\n")
        rows = load_appendix_csv(path)
        assert replay_appendix(rows, PUBLISHED)[0].indicator == 1

    def test_fixture_missing_column(self, tmp_path) -> None:
        path = tmp_path / "bad.csv"
        path.write_text("t1,tc,m\n200801,201705,0.5\n")
        with pytest.raises(SeriesValidationError, match="missing columns"):
            load_appendix_csv(path)


class TestStrength:
    def test_all_ones(self) -> None:
        assert strength([1] * 34) == 1.0

    def test_six_of_34(self) -> None:
        assert strength([1] * 6 + [0] * 28) == pytest.approx(0.1765, abs=1e-4)

    def test_all_zero(self) -> None:
        assert strength([0] * 34) == 0.0


class TestScan:
    def test_window_protocol(self) -> None:
        windows = scan_windows(parse_month("201705"), parse_month("200801"), parse_month("201010"))
        assert len(windows) == 34
        assert windows[0].t1 == parse_month("200801")
        assert windows[-1].t1 == parse_month("201010")
        assert all(w.t2 == parse_month("201705") for w in windows)

    def test_bad_range(self) -> None:
        with pytest.raises(ConfigError):
            scan_windows(parse_month("201705"), parse_month("201010"), parse_month("200801"))

    def test_series_too_short(self) -> None:
        series = PriceSeries(start=MonthStamp(2009, 1), values=tuple(range(1, 120)))
        with pytest.raises(SeriesValidationError, match="outside"):
            scan(series, parse_month("201705"), parse_month("200801"), parse_month("200803"))

    def test_scan_lppls_bubble(self) -> None:
        t2 = parse_month("201705")
        truth = LPPLSParams(t_c=t2.index + 3.0, m=0.5, omega=7.0, phi=1.0, A=9.0, B=-0.3, C=0.02)
        start = parse_month("200701")
        t = np.arange(start.index, t2.index + 1, dtype=float)
        series = PriceSeries(start=start, values=tuple(np.exp(truth.log_price(t))), label="bubble")
        result = scan(
            series, t2, parse_month("200801"), parse_month("200803"), FitConfig(n_starts=15), PUBLISHED, preset="p"
        )
        assert [str(e.t1) for e in result.entries] == ["200801", "200802", "200803"]
        assert result.strength == pytest.approx(sum(result.indicators) / 3)
        assert result.n_positive >= 1

    def test_failures_count_as_zero(self) -> None:
        t2 = parse_month("201705")
        start = parse_month("200801")
        series = PriceSeries(start=start, values=(3.0,) * (t2 - start + 1), label="flat")
        result = scan(series, t2, start, start.shift(1), FitConfig(n_starts=4), PUBLISHED)
        assert result.indicators == [0, 0]
        assert all(e.report.note for e in result.entries)
        assert result.strength == 0.0

    def test_unconverged_fits_add_no_strength(self) -> None:
        t2 = parse_month("201705")
        truth = LPPLSParams(t_c=t2.index + 3.0, m=0.5, omega=7.0, phi=1.0, A=9.0, B=-0.3, C=0.02)
        start = parse_month("200701")
        t = np.arange(start.index, t2.index + 1, dtype=float)
        series = PriceSeries(start=start, values=tuple(np.exp(truth.log_price(t))), label="bubble")
        config = FitConfig(n_starts=15, max_iterations=2)
        result = scan(series, t2, parse_month("200801"), parse_month("200803"), config, PUBLISHED)
        for entry in result.entries:
            assert entry.fit is not None
            if not entry.fit.converged:
                assert entry.report.indicator == 0
                assert entry.note == entry.fit.note
        assert result.n_positive == sum(1 for e in result.entries if e.fit.converged and e.report.indicator)
        assert any(not e.fit.converged for e in result.entries)
