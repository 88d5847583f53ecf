"""Report tables: scan rows in the appendix layout, the cointegration grid and the diagnosis summary."""

from __future__ import annotations

import json
import math
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import pandas as pd

from bubblescope.qualification import APPENDIX_COLUMNS, AppendixRow, QualificationReport, ScanResult
from bubblescope.regression import CointegrationResult
from bubblescope.series import month_from_real

CSV_DECIMALS = 3
NOT_TESTED = "N/A"


def clean_number(value: Any) -> Any:
    """JSON-safe scalar: non-finite floats become the strings 'inf', '-inf', 'nan'."""
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return clean_number(obj)


def to_json_text(obj: Any) -> str:
    """Deterministic JSON text (no timestamps, stable key order, full float precision)."""
    return json.dumps(_clean(obj), indent=2, ensure_ascii=False) + "\n"


def yes_no(flag: bool) -> str:
    return "Y" if flag else "N"


def _month_or_blank(t: float) -> str:
    return str(month_from_real(t)) if math.isfinite(t) else ""


def scan_rows(result: ScanResult) -> list[dict[str, Any]]:
    """One row per window: t1, tc, m, w, A, B, C, BmCw, Ind at full precision."""
    rows = []
    for entry in result.entries:
        report = entry.report
        if entry.fit is None:
            nan = math.nan
            rows.append(dict(zip(APPENDIX_COLUMNS, (str(entry.t1), "", nan, nan, nan, nan, nan, nan, 0))))
            continue
        p = entry.fit.params
        rows.append(
            {
                "t1": str(entry.t1),
                "tc": _month_or_blank(p.t_c),
                "m": p.m,
                "w": p.omega,
                "A": p.A,
                "B": p.B,
                "C": p.C,
                "BmCw": report.damping,
                "Ind": report.indicator,
            }
        )
    return rows


def scan_record(result: ScanResult) -> dict[str, Any]:
    """Full scan output for JSON: appendix columns plus the fitted critical time and diagnostics."""
    windows = []
    for row, entry in zip(scan_rows(result), result.entries):
        report = entry.report
        record = dict(row)
        fit = entry.fit
        record.update(
            {
                "t_c": fit.params.t_c if fit else math.nan,
                "phi": fit.params.phi if fit else math.nan,
                "sse": fit.sse if fit else math.nan,
                "converged": bool(fit.converged) if fit else False,
                "condition_flag": bool(fit.condition_flag) if fit else True,
                "bubble_regime": bool(fit.params.is_bubble_regime) if fit else False,
                "oscillation_count": report.oscillation_count,
                "conditions": report.verdicts,
                "note": report.note,
            }
        )
        windows.append(record)
    return {
        "series": result.label,
        "t2": str(result.t2),
        "preset": result.preset,
        "n_windows": result.n_windows,
        "n_positive": result.n_positive,
        "strength": result.strength,
        "windows": windows,
    }


def rounded_frame(rows: list[dict[str, Any]], decimals: int = CSV_DECIMALS) -> pd.DataFrame:
    frame = pd.DataFrame(rows)
    numeric = frame.select_dtypes(include="number").columns.drop("Ind", errors="ignore")
    frame[numeric] = frame[numeric].round(decimals)
    return frame


def strength_rows(results: Iterable[ScanResult]) -> list[dict[str, Any]]:
    return [
        {
            "series": r.label,
            "windows": r.n_windows,
            "positive": r.n_positive,
            "strength": r.strength,
            "lppls": yes_no(r.n_positive > 0),
        }
        for r in results
    ]


def coint_row(series: str, fundamental: str, factor: str, result: CointegrationResult) -> dict[str, Any]:
    return {
        "series": series,
        "fundamental": fundamental,
        "factor": factor,
        "branch": result.branch,
        "statistic": result.eg_statistic,
        "p_value": result.eg_p_value,
        "stars": result.stars,
        "lags": result.lags_used,
        "price_order": result.y_order,
        "fundamental_order": result.x_order,
        "degenerate": result.degenerate,
        "bubble": yes_no(result.bubble_flag),
    }


def format_cell(row: dict[str, Any]) -> str:
    statistic = row.get("statistic")
    if statistic is None or (isinstance(statistic, str) and statistic == "") or row.get("branch") != "engle_granger":
        return NOT_TESTED
    statistic = float(statistic)
    p_value = float(row["p_value"])
    return f"{statistic:.3f}{row.get('stars') or ''} ({p_value:.3f})"


def format_coint_grid(rows: list[dict[str, Any]]) -> str:
    """Plain-text grid: one line per price series, one column per factor, 'stat stars (p)' or N/A."""
    series_order = list(dict.fromkeys(r["series"] for r in rows))
    factor_order = list(dict.fromkeys(r["factor"] for r in rows))
    cells = {(r["series"], r["factor"]): format_cell(r) for r in rows}
    notes = {}
    for r in rows:
        if r["branch"] == "price_stationary":
            notes[r["series"]] = "price is I(0); excluded from the test"
        elif r["branch"] == "fundamental_stationary":
            notes.setdefault(r["series"], f"{r['factor']} is I(0); bubble flagged without a test")

    header = ["series", *factor_order]
    body = [[s, *(cells.get((s, f), "") for f in factor_order)] for s in series_order]
    widths = [max(len(line[i]) for line in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(col.ljust(w) for col, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for line in body:
        lines.append("  ".join(col.ljust(w) for col, w in zip(line, widths)).rstrip())
    if notes:
        lines.append("")
        lines.extend(f"{series}: {note}" for series, note in notes.items())
    lines.append("")
    lines.append("*** p < 0.01, ** p < 0.05, * p < 0.10 (stars shown as ★)")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DiagnosisSummary:
    series: str
    eg: str
    lppls: str
    strength: float | None = None

    @property
    def overall(self) -> str:
        return yes_no("Y" in (self.eg, self.lppls))

    def as_dict(self) -> dict[str, Any]:
        return {
            "series": self.series,
            "eg": self.eg,
            "lppls": self.lppls,
            "overall": self.overall,
            "strength": self.strength,
        }


def summarize(strengths: list[dict[str, Any]], coint: list[dict[str, Any]]) -> list[DiagnosisSummary]:
    """EG verdict is Y when any pair for the series flags a bubble; LPPLS is Y when strength > 0."""
    series_order = list(dict.fromkeys([*(r["series"] for r in coint), *(r["series"] for r in strengths)]))
    by_strength = {r["series"]: r for r in strengths}
    summaries = []
    for series in series_order:
        pairs = [r for r in coint if r["series"] == series]
        eg = yes_no(any(r["bubble"] == "Y" for r in pairs)) if pairs else NOT_TESTED
        srow = by_strength.get(series)
        if srow is None:
            lppls, value = NOT_TESTED, None
        else:
            value = float(srow["strength"])
            lppls = yes_no(int(srow["positive"]) > 0)
        summaries.append(DiagnosisSummary(series=series, eg=eg, lppls=lppls, strength=value))
    return summaries


def format_summary(summaries: list[DiagnosisSummary]) -> str:
    lines = [f"{'series':<16}{'EG':<6}{'LPPLS':<8}{'strength':>10}  overall"]
    for s in summaries:
        strength = "" if s.strength is None else f"{100 * s.strength:.2f}%"
        lines.append(f"{s.series:<16}{s.eg:<6}{s.lppls:<8}{strength:>10}  {s.overall}")
    return "\n".join(lines) + "\n"


def replay_rows(
    city: str, rows: list[AppendixRow], reports: list[QualificationReport]
) -> list[dict[str, Any]]:
    return [
        {
            "table": city,
            "t1": str(row.t1),
            "tc": str(row.tc),
            "m": row.m,
            "w": row.w,
            "BmCw": row.BmCw,
            "oscillation_count": report.oscillation_count,
            "published": row.Ind,
            "replayed": report.indicator,
            "match": row.Ind == report.indicator,
            "failed": ",".join(report.failed),
        }
        for row, report in zip(rows, reports)
    ]


def write_table(rows: list[dict[str, Any]], path: Path, fmt: str) -> Path:
    """``json`` keeps full precision; ``csv`` rounds to three decimals."""
    if fmt == "json":
        path.write_text(to_json_text(rows), encoding="utf-8")
    else:
        rounded_frame(rows).to_csv(path, index=False)
    return path


def read_table(path: Path) -> list[dict[str, Any]]:
    """Read rows written by ``write_table`` or a JSON object holding them."""
    if not path.is_file():
        raise FileNotFoundError(f"missing pipeline output: {path}")
    if path.suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(data, dict):
            data = data.get("rows", [])
        return list(data)
    frame = pd.read_csv(path, keep_default_na=False)
    return frame.to_dict("records")
