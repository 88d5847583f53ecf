"""LPPLS filter conditions, the rolling-window scan and LPPLS strength.

A fit is a bubble signature when every enabled condition holds:

- m in [m_lo, m_hi]
- omega in [omega_lo, omega_hi]
- t_c in [t2 + tc_lo_fraction * dt, t2 + tc_hi_fraction * dt]
- oscillation count >= oscillation_min
- damping |mB / (omega C)| >= damping_min

The published appendix tables are only consistent with the last condition set when
the oscillation condition is switched off; the ``paper-consistent`` preset does that
and ``strict`` keeps all five.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import pandas as pd

from bubblescope.calibrate import FitConfig, LPPLSFit, fit_window
from bubblescope.errors import BubblescopeError, ConfigError, SeriesValidationError
from bubblescope.lppls import TWO_PI, damping_ratio
from bubblescope.series import MonthStamp, PriceSeries, Window, parse_month

logger = logging.getLogger("bubblescope.qualification")

CONDITIONS = ("m", "omega", "tc", "oscillation", "damping")
APPENDIX_COLUMNS = ("t1", "tc", "m", "w", "A", "B", "C", "BmCw", "Ind")
APPENDIX_CITIES = ("shanghai", "shenzhen", "tianjin", "chengdu")
APPENDIX_T2 = MonthStamp(2017, 5)


@dataclass(frozen=True)
class FilterThresholds:
    m_lo: float = 0.01
    m_hi: float = 0.99
    omega_lo: float = 2.0
    omega_hi: float = 25.0
    tc_lo_fraction: float = -0.05
    tc_hi_fraction: float = 0.1
    oscillation_min: float = 2.5
    damping_min: float = 1.0
    check_m: bool = True
    check_omega: bool = True
    check_tc: bool = True
    check_oscillation: bool = True
    check_damping: bool = True

    def __post_init__(self) -> None:
        if not self.m_lo < self.m_hi:
            raise ConfigError(f"m interval is empty: [{self.m_lo}, {self.m_hi}]")
        if not self.omega_lo < self.omega_hi:
            raise ConfigError(f"omega interval is empty: [{self.omega_lo}, {self.omega_hi}]")
        if not self.tc_lo_fraction < self.tc_hi_fraction:
            raise ConfigError(f"critical-time fractions out of order: {self.tc_lo_fraction}, {self.tc_hi_fraction}")

    @classmethod
    def preset(cls, name: str) -> FilterThresholds:
        try:
            return PRESETS[name]
        except KeyError:
            raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None

    @property
    def enabled(self) -> tuple[str, ...]:
        flags = (self.check_m, self.check_omega, self.check_tc, self.check_oscillation, self.check_damping)
        return tuple(name for name, on in zip(CONDITIONS, flags) if on)


PRESETS: dict[str, FilterThresholds] = {
    "paper-consistent": FilterThresholds(check_oscillation=False),
    "strict": FilterThresholds(),
}


@dataclass(frozen=True)
class QualificationReport:
    """Per-condition verdicts; ``indicator`` is 1 iff every enabled condition holds."""

    c_m: bool
    c_omega: bool
    c_tc: bool
    c_osc: bool
    c_damp: bool
    oscillation_count: float
    damping: float
    indicator: int
    enabled: tuple[str, ...] = CONDITIONS
    note: str = field(default="", compare=False)

    @property
    def verdicts(self) -> dict[str, bool]:
        return dict(zip(CONDITIONS, (self.c_m, self.c_omega, self.c_tc, self.c_osc, self.c_damp)))

    @property
    def failed(self) -> list[str]:
        return [name for name, ok in self.verdicts.items() if name in self.enabled and not ok]


def _time(value: float | MonthStamp) -> float:
    return float(value.index) if isinstance(value, MonthStamp) else float(value)


def oscillation_count(t1: float | MonthStamp, t2: float | MonthStamp, t_c: float | MonthStamp, omega: float) -> float:
    """(omega / 2pi) ln[(t_c - t1) / (t_c - t2)]; inf at t_c = t2 and NaN for t_c < t2."""
    t1, t2, t_c = _time(t1), _time(t2), _time(t_c)
    if not t_c > t1:
        raise ValueError(f"oscillation count needs t_c > t1, got t_c={t_c} t1={t1}")
    if t_c == t2:
        return math.inf
    if t_c < t2:
        return math.nan
    return omega / TWO_PI * math.log((t_c - t1) / (t_c - t2))


def _failed_report(thresholds: FilterThresholds, note: str) -> QualificationReport:
    nan = math.nan
    return QualificationReport(False, False, False, False, False, nan, nan, 0, thresholds.enabled, note)


def qualify(
    m: float,
    omega: float,
    t_c: float | MonthStamp,
    window: Window,
    thresholds: FilterThresholds | None = None,
    *,
    B: float | None = None,
    C: float | None = None,
    damping: float | None = None,
) -> QualificationReport:
    """Evaluate the filter on one set of fit values.

    ``damping`` takes precedence over ``B``/``C`` (published tables round B and C too
    coarsely to recompute the ratio). Degenerate input fails conditions; nothing raises.
    """
    thresholds = thresholds or FilterThresholds()
    t1 = float(window.t1.index)
    t2 = float(window.t2.index)
    dt = float(window.dt)
    tc = _time(t_c)

    try:
        count = oscillation_count(t1, t2, tc, omega)
    except (ValueError, TypeError):
        count = math.nan

    if damping is None:
        if B is None or C is None:
            damping = math.nan
        else:
            damping = damping_ratio(m, B, omega, C)

    c_m = thresholds.m_lo <= m <= thresholds.m_hi
    c_omega = thresholds.omega_lo <= omega <= thresholds.omega_hi
    c_tc = t2 + thresholds.tc_lo_fraction * dt <= tc <= t2 + thresholds.tc_hi_fraction * dt
    c_osc = count >= thresholds.oscillation_min
    c_damp = damping >= thresholds.damping_min
    verdicts = dict(zip(CONDITIONS, (c_m, c_omega, c_tc, c_osc, c_damp)))
    indicator = int(all(verdicts[name] for name in thresholds.enabled))
    return QualificationReport(
        c_m=bool(c_m),
        c_omega=bool(c_omega),
        c_tc=bool(c_tc),
        c_osc=bool(c_osc),
        c_damp=bool(c_damp),
        oscillation_count=count,
        damping=float(damping),
        indicator=indicator,
        enabled=thresholds.enabled,
    )


def qualify_fit(fit: LPPLSFit, thresholds: FilterThresholds | None = None) -> QualificationReport:
    thresholds = thresholds or FilterThresholds()
    p = fit.params
    if not all(math.isfinite(v) for v in (p.t_c, p.m, p.omega, p.B, p.C)):
        return _failed_report(thresholds, fit.note or "fit produced no finite parameters")
    if not fit.converged:
        return _failed_report(thresholds, fit.note or "not converged")
    return qualify(p.m, p.omega, p.t_c, fit.window, thresholds, B=p.B, C=p.C)


@dataclass(frozen=True)
class ScanEntry:
    t1: MonthStamp
    window: Window
    fit: LPPLSFit | None
    report: QualificationReport

    @property
    def note(self) -> str:
        return self.report.note


@dataclass(frozen=True)
class ScanResult:
    """Rolling-window scan of one series, ordered by t1."""

    t2: MonthStamp
    entries: tuple[ScanEntry, ...]
    label: str = ""
    preset: str = ""

    @property
    def indicators(self) -> list[int]:
        return [e.report.indicator for e in self.entries]

    @property
    def n_windows(self) -> int:
        return len(self.entries)

    @property
    def n_positive(self) -> int:
        return sum(self.indicators)

    @property
    def strength(self) -> float:
        """Share of windows whose fit passes every enabled condition."""
        if not self.entries:
            return 0.0
        return self.n_positive / self.n_windows


def strength(indicators: list[int]) -> float:
    return sum(indicators) / len(indicators) if indicators else 0.0


def scan_windows(t2: MonthStamp, t1_start: MonthStamp, t1_end: MonthStamp) -> list[Window]:
    """One window per monthly t1 from ``t1_start`` through ``t1_end``, all ending at ``t2``."""
    if not t1_start <= t1_end:
        raise ConfigError(f"t1_start {t1_start} is after t1_end {t1_end}")
    if not t1_end < t2:
        raise ConfigError(f"t1_end {t1_end} must precede t2 {t2}")
    return [Window(t1_start.shift(k), t2) for k in range(t1_end - t1_start + 1)]


def scan(
    series: PriceSeries,
    t2: MonthStamp,
    t1_start: MonthStamp,
    t1_end: MonthStamp,
    fit_config: FitConfig | None = None,
    thresholds: FilterThresholds | None = None,
    workers: int = 1,
    preset: str = "",
) -> ScanResult:
    """Fit and qualify every window; failed fits count as indicator 0 and the scan continues."""
    fit_config = fit_config or FitConfig()
    thresholds = thresholds or FilterThresholds()
    windows = scan_windows(t2, t1_start, t1_end)
    for window in (windows[0], windows[-1]):
        if not series.covers(window):
            raise SeriesValidationError(
                f"series {series.label!r} spans {series.start}-{series.end}; window {window} is outside it"
            )

    def run(window: Window) -> ScanEntry:
        try:
            fit = fit_window(series, window, fit_config)
        except (BubblescopeError, ValueError, ArithmeticError) as exc:
            logger.warning("Fit failed for %s window %s: %s", series.label or "series", window, exc)
            return ScanEntry(window.t1, window, None, _failed_report(thresholds, f"fit failed: {exc}"))
        if not fit.converged:
            logger.warning("Fit for %s window %s did not converge: %s", series.label or "series", window, fit.note)
        return ScanEntry(window.t1, window, fit, qualify_fit(fit, thresholds))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            entries = list(executor.map(run, windows))
    else:
        entries = [run(w) for w in windows]

    result = ScanResult(t2=t2, entries=tuple(entries), label=series.label, preset=preset)
    logger.info(
        "Scanned %s: %d/%d windows qualify (strength %.4f)",
        series.label or "series",
        result.n_positive,
        result.n_windows,
        result.strength,
    )
    return result


@dataclass(frozen=True)
class AppendixRow:
    """One published window fit: t1, tc, m, w, A, B, C, BmCw, Ind."""

    t1: MonthStamp
    tc: MonthStamp
    m: float
    w: float
    A: float
    B: float
    C: float
    BmCw: float
    Ind: int


def load_appendix_csv(path: str | Path) -> list[AppendixRow]:
    """Read a CSV in the appendix layout."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"fixture file not found: {path}")
    df = pd.read_csv(path, dtype=str, skipinitialspace=True)
    return _rows_from_frame(df, str(path))


def _rows_from_frame(df: pd.DataFrame, source: str) -> list[AppendixRow]:
    missing = [c for c in APPENDIX_COLUMNS if c not in df.columns]
    if missing:
        raise SeriesValidationError(f"{source}: missing columns {', '.join(missing)}")
    rows = []
    for i, record in enumerate(df.to_dict("records")):
        try:
            rows.append(
                AppendixRow(
                    t1=parse_month(record["t1"]),
                    tc=parse_month(record["tc"]),
                    m=float(record["m"]),
                    w=float(record["w"]),
                    A=float(record["A"]),
                    B=float(record["B"]),
                    C=float(record["C"]),
                    BmCw=float(record["BmCw"]),
                    Ind=int(record["Ind"]),
                )
            )
        except (TypeError, ValueError) as exc:
            raise SeriesValidationError(f"{source}: row {i + 1}: {exc}") from exc
    return rows


def load_appendix_tables(cities: tuple[str, ...] = APPENDIX_CITIES) -> dict[str, list[AppendixRow]]:
    """Published window fits shipped with the package, keyed by city."""
    tables: dict[str, list[AppendixRow]] = {}
    for city in cities:
        resource = resources.files("bubblescope") / "data" / f"appendix_{city}.csv"
        if not resource.is_file():
            raise ConfigError(f"no appendix table for {city!r}; available: {', '.join(APPENDIX_CITIES)}")
        with resource.open("r", encoding="utf-8") as handle:
            tables[city] = _rows_from_frame(pd.read_csv(handle, dtype=str), f"appendix_{city}.csv")
    return tables


def replay_row(row: AppendixRow, thresholds: FilterThresholds, t2: MonthStamp = APPENDIX_T2) -> QualificationReport:
    """Qualify a published row, taking damping from its BmCw column."""
    window = Window(row.t1, t2)
    return qualify(row.m, row.w, row.tc, window, thresholds, B=row.B, C=row.C, damping=row.BmCw)


def replay_appendix(
    rows: list[AppendixRow], thresholds: FilterThresholds | None = None, t2: MonthStamp = APPENDIX_T2
) -> list[QualificationReport]:
    thresholds = thresholds or FilterThresholds.preset("paper-consistent")
    return [replay_row(row, thresholds, t2) for row in rows]
