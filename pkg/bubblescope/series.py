"""Monthly time-series model: month stamps, price series, windows and CSV ingestion."""

from __future__ import annotations

import logging
import math
import re
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from bubblescope.errors import SeriesValidationError

logger = logging.getLogger("bubblescope.series")

EPOCH_YEAR = 2000
MIN_WINDOW_LENGTH = 24  # observations

_MONTH_RE = re.compile(r"^(\d{4})-?(\d{2})$")


@dataclass(frozen=True, order=True)
class MonthStamp:
    """A calendar month. Subtracting two stamps gives a signed month count."""

    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise SeriesValidationError(f"month out of range: {self.month}")

    @property
    def index(self) -> int:
        """Months since the 2000-01 epoch (2000-01 is 0)."""
        return (self.year - EPOCH_YEAR) * 12 + (self.month - 1)

    @classmethod
    def from_index(cls, index: int) -> MonthStamp:
        year, month0 = divmod(int(index), 12)
        return cls(EPOCH_YEAR + year, month0 + 1)

    def shift(self, months: int) -> MonthStamp:
        return MonthStamp.from_index(self.index + months)

    def __sub__(self, other: MonthStamp) -> int:
        if not isinstance(other, MonthStamp):
            return NotImplemented
        return self.index - other.index

    def __str__(self) -> str:
        return format_month(self)


def parse_month(text: str) -> MonthStamp:
    """Parse ``YYYYMM`` (or ``YYYY-MM``) into a MonthStamp."""
    match = _MONTH_RE.match(str(text).strip())
    if match is None:
        raise SeriesValidationError(f"malformed month: {text!r} (expected YYYYMM)")
    return MonthStamp(int(match.group(1)), int(match.group(2)))


def format_month(stamp: MonthStamp) -> str:
    return f"{stamp.year:04d}{stamp.month:02d}"


def month_diff(a: MonthStamp, b: MonthStamp) -> int:
    """Signed number of months from ``b`` to ``a``."""
    return a.index - b.index


def month_from_real(t: float) -> MonthStamp:
    """Nearest calendar month to a real-valued epoch time (used for reporting t_c)."""
    return MonthStamp.from_index(int(math.floor(t + 0.5)))


@dataclass(frozen=True)
class Window:
    """Inclusive month range [t1, t2] used for one LPPLS fit."""

    t1: MonthStamp
    t2: MonthStamp

    def __post_init__(self) -> None:
        if not self.t1 < self.t2:
            raise SeriesValidationError(f"window start {self.t1} must precede end {self.t2}")
        if self.n_observations < MIN_WINDOW_LENGTH:
            raise SeriesValidationError(
                f"window {self.t1}-{self.t2} has {self.n_observations} observations; "
                f"minimum is {MIN_WINDOW_LENGTH}"
            )

    @property
    def dt(self) -> int:
        return month_diff(self.t2, self.t1)

    @property
    def n_observations(self) -> int:
        return self.dt + 1

    def __str__(self) -> str:
        return f"{self.t1}-{self.t2}"


@dataclass(frozen=True)
class PriceSeries:
    """Strictly positive prices on a gap-free monthly grid starting at ``start``."""

    start: MonthStamp
    values: tuple[float, ...]
    label: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        if len(values) < 2:
            raise SeriesValidationError(f"series {self.label!r} needs at least 2 observations, got {len(values)}")
        for offset, value in enumerate(values):
            if not math.isfinite(value) or value <= 0:
                stamp = self.start.shift(offset)
                raise SeriesValidationError(
                    f"non-positive or non-finite value {value!r} at {stamp} in {self.label!r} (log undefined)"
                )
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> MonthStamp:
        return self.start.shift(len(self.values) - 1)

    def stamps(self) -> list[MonthStamp]:
        return [self.start.shift(i) for i in range(len(self.values))]

    def times(self) -> np.ndarray:
        """Epoch-month time axis of the observations."""
        return np.arange(self.start.index, self.start.index + len(self.values), dtype=float)

    def to_numpy(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def log_prices(self) -> np.ndarray:
        return np.log(self.to_numpy())

    def covers(self, window: Window) -> bool:
        return self.start <= window.t1 and window.t2 <= self.end

    def slice(self, window: Window) -> PriceSeries:
        """Contiguous sub-series covering [t1, t2] inclusive."""
        if not self.covers(window):
            raise SeriesValidationError(f"window {window} outside series span {self.start}-{self.end}")
        lo = month_diff(window.t1, self.start)
        hi = month_diff(window.t2, self.start) + 1
        return PriceSeries(start=window.t1, values=self.values[lo:hi], label=self.label)

    def full_window(self) -> Window:
        return Window(self.start, self.end)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"date": [format_month(s) for s in self.stamps()], self.label or "value": self.values})


def slice_series(series: PriceSeries, window: Window) -> PriceSeries:
    return series.slice(window)


@dataclass(frozen=True)
class CsvConfig:
    """How to read a price CSV. ``date_column`` defaults to the first column."""

    date_column: str | None = None
    columns: tuple[str, ...] | None = None
    encoding: str = "utf-8"


def _check_month_grid(stamps: list[MonthStamp]) -> None:
    for previous, current in zip(stamps, stamps[1:]):
        step = month_diff(current, previous)
        if step == 0:
            raise SeriesValidationError(f"duplicate month {current}")
        if step < 0:
            raise SeriesValidationError(f"months out of order at {current}")
        if step > 1:
            raise SeriesValidationError(f"gap at {previous.shift(1)}")


def load_csv(path: str | Path, config: CsvConfig | None = None) -> dict[str, PriceSeries]:
    """Read one PriceSeries per value column of a monthly CSV file."""
    config = config or CsvConfig()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")

    df = pd.read_csv(path, dtype=str, encoding=config.encoding, keep_default_na=False, skipinitialspace=True)
    if df.shape[1] < 2:
        raise SeriesValidationError(f"{path}: need a date column and at least one value column")
    if df.empty:
        raise SeriesValidationError(f"{path}: no data rows")

    date_column = config.date_column or str(df.columns[0])
    if date_column not in df.columns:
        raise SeriesValidationError(f"{path}: date column {date_column!r} not found")
    value_columns = list(config.columns) if config.columns else [c for c in df.columns if c != date_column]
    missing = [c for c in value_columns if c not in df.columns]
    if missing:
        raise SeriesValidationError(f"{path}: columns not found: {', '.join(missing)}")

    stamps = [parse_month(text) for text in df[date_column]]
    _check_month_grid(stamps)

    result: dict[str, PriceSeries] = {}
    for column in value_columns:
        raw = df[column].str.strip()
        numeric = pd.to_numeric(raw, errors="coerce")
        bad = numeric.isna()
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise SeriesValidationError(
                f"{path}: unparseable value {raw.iloc[row]!r} in column {column!r} at {stamps[row]}"
            )
        result[str(column)] = PriceSeries(start=stamps[0], values=tuple(numeric.to_numpy()), label=str(column))

    logger.info("Loaded %d series of length %d from %s", len(result), len(stamps), path)
    return result


def write_csv(series: Iterable[PriceSeries], path: str | Path) -> Path:
    """Write aligned series in the same layout ``load_csv`` reads."""
    series = list(series)
    if not series:
        raise SeriesValidationError("nothing to write")
    first = series[0]
    for s in series[1:]:
        if s.start != first.start or len(s) != len(first):
            raise SeriesValidationError("series written together must share the same month grid")
    frame = pd.DataFrame({"date": [format_month(s) for s in first.stamps()]})
    for i, s in enumerate(series):
        frame[s.label or f"series{i + 1}"] = s.values
    path = Path(path)
    frame.to_csv(path, index=False, float_format="%.10g")
    return path
