"""Staged diagnostic runs with timing, failure capture and output rollback."""

from __future__ import annotations

import logging
import re
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from bubblescope import report
from bubblescope.config import RunConfig
from bubblescope.errors import ConfigError, SeriesValidationError
from bubblescope.qualification import (
    APPENDIX_CITIES,
    FilterThresholds,
    load_appendix_csv,
    load_appendix_tables,
    replay_appendix,
    scan,
)
from bubblescope.regression import fundamental_bubble_test
from bubblescope.series import PriceSeries, load_csv, write_csv
from bubblescope.simulator import SimConfig, simulate

logger = logging.getLogger("bubblescope.pipeline")

Context = dict[str, Any]


@dataclass
class PipelineStage:
    """A single stage in a diagnostic pipeline."""

    name: str
    run_fn: Callable[[Context], None]


@dataclass
class PipelineResult:
    """Outcome of a pipeline run; ``error`` holds the exception that stopped it."""

    context: Context
    stages_completed: int
    stage_timings: dict[str, float] = field(default_factory=dict)
    failed_stage: str | None = None
    error: Exception | None = None

    @property
    def succeeded(self) -> bool:
        return self.error is None


class DiagnosticPipeline:
    """Ordered stages sharing one context dict; the first failing stage stops the run."""

    def __init__(self, name: str = "pipeline") -> None:
        self.name = name
        self._stages: list[PipelineStage] = []

    def add_stage(self, name: str, run_fn: Callable[[Context], None]) -> None:
        self._stages.append(PipelineStage(name=name, run_fn=run_fn))

    def get_stage_names(self) -> list[str]:
        return [s.name for s in self._stages]

    def remove_stage(self, name: str) -> bool:
        """Remove a stage by name. Returns True if found and removed."""
        for i, stage in enumerate(self._stages):
            if stage.name == name:
                self._stages.pop(i)
                return True
        return False

    def run(self, context: Context | None = None) -> PipelineResult:
        context = {} if context is None else context
        timings: dict[str, float] = {}
        completed = 0
        for stage in self._stages:
            start = time.monotonic()
            try:
                stage.run_fn(context)
            except Exception as exc:
                logger.debug("%s: stage %s failed", self.name, stage.name, exc_info=True)
                return PipelineResult(context, completed, timings, failed_stage=stage.name, error=exc)
            timings[stage.name] = round((time.monotonic() - start) * 1000, 2)
            logger.info("%s: %s done in %.2f ms", self.name, stage.name, timings[stage.name])
            completed += 1
        return PipelineResult(context, completed, timings)


class OutputSet:
    """Files written by one command; removed together if the command fails."""

    def __init__(self, directory: Path) -> None:
        self.directory = Path(directory)
        self.written: list[Path] = []
        self._created = False

    def _ensure_dir(self) -> None:
        if not self.directory.exists():
            self.directory.mkdir(parents=True)
            self._created = True

    def path(self, name: str) -> Path:
        self._ensure_dir()
        target = self.directory / name
        self.written.append(target)
        return target

    def write_text(self, name: str, text: str) -> Path:
        target = self.path(name)
        target.write_text(text, encoding="utf-8")
        return target

    def write_table(self, stem: str, rows: list[dict[str, Any]], fmt: str) -> Path:
        return report.write_table(rows, self.path(f"{stem}.{fmt}"), fmt)

    def rollback(self) -> None:
        for target in self.written:
            target.unlink(missing_ok=True)
        if self._created and self.directory.is_dir() and not any(self.directory.iterdir()):
            self.directory.rmdir()
        self.written.clear()


def safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label).strip("_") or "series"


def _execute(pipeline: DiagnosticPipeline, outputs: OutputSet, context: Context) -> list[Path]:
    result = pipeline.run(context)
    if not result.succeeded:
        logger.error("%s failed in stage %s: %s", pipeline.name, result.failed_stage, result.error)
        outputs.rollback()
        raise result.error  # type: ignore[misc]
    return list(outputs.written)


def _truncate(series: PriceSeries, config: RunConfig) -> PriceSeries:
    """Observations after t2 are ignored."""
    if not series.start < config.t2 < series.end:
        return series
    keep = config.t2 - series.start + 1
    return PriceSeries(start=series.start, values=series.values[:keep], label=series.label)


def _require(path: Path | None, what: str) -> Path:
    if path is None:
        raise ConfigError(f"no {what} given (use --{what} or the config file)")
    return path


def run_lppls_scan(config: RunConfig) -> list[Path]:
    """Rolling-window LPPLS scan of every price column; writes one table per series plus strengths."""
    outputs = OutputSet(config.out)
    pipeline = DiagnosticPipeline("scan")

    def load(ctx: Context) -> None:
        ctx["series"] = load_csv(_require(config.input, "input"))

    def run_scans(ctx: Context) -> None:
        ctx["results"] = [
            scan(
                s,
                config.t2,
                config.t1_start,
                config.t1_end,
                config.fit,
                config.thresholds,
                workers=config.workers,
                preset=config.preset,
            )
            for s in ctx["series"].values()
        ]

    def write(ctx: Context) -> None:
        for result in ctx["results"]:
            stem = f"scan_{safe_name(result.label)}"
            if config.format == "json":
                outputs.write_text(f"{stem}.json", report.to_json_text(report.scan_record(result)))
            else:
                outputs.write_table(stem, report.scan_rows(result), "csv")
        outputs.write_table("strength", report.strength_rows(ctx["results"]), config.format)

    pipeline.add_stage("load", load)
    pipeline.add_stage("scan", run_scans)
    pipeline.add_stage("write", write)
    return _execute(pipeline, outputs, {})


def pair_fundamentals(
    prices: dict[str, PriceSeries], fundamentals: dict[str, PriceSeries]
) -> list[tuple[str, str, str]]:
    """(price label, fundamental column, factor) triples.

    ``<FACTOR>_<label>`` pairs with price column ``<label>``; a column without an
    underscore is a national factor paired with every price column.
    """
    pairs: list[tuple[str, str, str]] = []
    for column in fundamentals:
        if "_" in column:
            factor, label = column.split("_", 1)
            if label not in prices:
                raise SeriesValidationError(f"fundamental column {column!r} names unknown price column {label!r}")
            pairs.append((label, column, factor))
        else:
            pairs.extend((label, column, column) for label in prices)
    order = {label: i for i, label in enumerate(prices)}
    return sorted(pairs, key=lambda p: order[p[0]])


def run_fundamental_test(config: RunConfig) -> list[Path]:
    """Integration-order pre-checks and Engle-Granger tests for every price/fundamental pair."""
    outputs = OutputSet(config.out)
    pipeline = DiagnosticPipeline("coint")

    def load(ctx: Context) -> None:
        prices = load_csv(_require(config.input, "input"))
        fundamentals = load_csv(_require(config.fundamentals, "fundamentals"))
        ctx["prices"] = {k: _truncate(v, config) for k, v in prices.items()}
        ctx["fundamentals"] = {k: _truncate(v, config) for k, v in fundamentals.items()}

    def test(ctx: Context) -> None:
        rows = []
        for label, column, factor in pair_fundamentals(ctx["prices"], ctx["fundamentals"]):
            result = fundamental_bubble_test(
                ctx["prices"][label],
                ctx["fundamentals"][column],
                regression=config.adf_regression,
                lags=config.adf_lags,
                level=config.significance,
            )
            rows.append(report.coint_row(label, column, factor, result))
        ctx["rows"] = rows

    def write(ctx: Context) -> None:
        outputs.write_table("coint", ctx["rows"], config.format)
        outputs.write_text("coint_table.txt", report.format_coint_grid(ctx["rows"]))

    pipeline.add_stage("load", load)
    pipeline.add_stage("test", test)
    pipeline.add_stage("write", write)
    return _execute(pipeline, outputs, {})


def _find_output(directory: Path, stem: str, preferred: str) -> Path:
    for fmt in (preferred, *(f for f in ("json", "csv") if f != preferred)):
        candidate = directory / f"{stem}.{fmt}"
        if candidate.is_file():
            return candidate
    raise FileNotFoundError(f"missing pipeline output {stem}.json or {stem}.csv in {directory}")


def run_summary(config: RunConfig) -> list[Path]:
    """Combine the scan and cointegration outputs into the per-series diagnosis."""
    outputs = OutputSet(config.out)
    pipeline = DiagnosticPipeline("summary")

    def load(ctx: Context) -> None:
        ctx["strength"] = report.read_table(_find_output(config.out, "strength", config.format))
        ctx["coint"] = report.read_table(_find_output(config.out, "coint", config.format))

    def combine(ctx: Context) -> None:
        ctx["summaries"] = report.summarize(ctx["strength"], ctx["coint"])

    def write(ctx: Context) -> None:
        outputs.write_table("summary", [s.as_dict() for s in ctx["summaries"]], config.format)
        outputs.write_text("summary.txt", report.format_summary(ctx["summaries"]))

    pipeline.add_stage("load", load)
    pipeline.add_stage("combine", combine)
    pipeline.add_stage("write", write)
    return _execute(pipeline, outputs, {})


def run_simulation(sim_config: SimConfig, path: Path) -> tuple[Path, float | None]:
    """Simulate one path and write it in the price CSV layout."""
    sim_path = simulate(sim_config)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_csv([sim_path.prices], path)
    logger.info("Wrote %d months to %s (crash at %s)", len(sim_path.prices), path, sim_path.crash_time)
    return path, sim_path.crash_time


@dataclass
class ReplaySummary:
    table: str
    rows: int
    matches: int
    published_positive: int
    replayed_positive: int

    @property
    def all_match(self) -> bool:
        return self.matches == self.rows


def run_qualify_fixtures(
    preset: str, out: Path, fmt: str = "json", paths: list[Path] | None = None
) -> tuple[list[Path], list[ReplaySummary]]:
    """Replay published window fits (packaged tables or CSVs in the same layout) under a preset."""
    thresholds = FilterThresholds.preset(preset)
    outputs = OutputSet(out)
    pipeline = DiagnosticPipeline("qualify-fixtures")

    def load(ctx: Context) -> None:
        if paths:
            ctx["tables"] = {Path(p).stem: load_appendix_csv(p) for p in paths}
        else:
            ctx["tables"] = load_appendix_tables(APPENDIX_CITIES)

    def replay(ctx: Context) -> None:
        rows: list[dict[str, Any]] = []
        summaries = []
        for name, table in ctx["tables"].items():
            table_rows = report.replay_rows(name, table, replay_appendix(table, thresholds))
            rows.extend(table_rows)
            summaries.append(
                ReplaySummary(
                    table=name,
                    rows=len(table_rows),
                    matches=sum(r["match"] for r in table_rows),
                    published_positive=sum(r["published"] for r in table_rows),
                    replayed_positive=sum(r["replayed"] for r in table_rows),
                )
            )
        ctx["rows"], ctx["summaries"] = rows, summaries

    def write(ctx: Context) -> None:
        outputs.write_table(f"replay_{safe_name(preset)}", ctx["rows"], fmt)

    pipeline.add_stage("load", load)
    pipeline.add_stage("replay", replay)
    pipeline.add_stage("write", write)
    context: Context = {}
    written = _execute(pipeline, outputs, context)
    return written, context["summaries"]
