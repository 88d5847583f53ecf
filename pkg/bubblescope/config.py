"""Run configuration: defaults, YAML file, environment and CLI overrides."""

from __future__ import annotations

import logging
import math
import os
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from bubblescope.calibrate import FitConfig
from bubblescope.errors import ConfigError, SeriesValidationError
from bubblescope.mackinnon import REGRESSIONS
from bubblescope.qualification import PRESETS, FilterThresholds
from bubblescope.series import MonthStamp, parse_month

logger = logging.getLogger("bubblescope.config")

SEED_ENV = "BUBBLESCOPE_SEED"
FORMATS = ("json", "csv")
MONTH_KEYS = ("t2", "t1_start", "t1_end")
FIT_FLOAT_KEYS = (
    "m_lo",
    "m_hi",
    "omega_lo",
    "omega_hi",
    "tc_min_offset",
    "tc_max_fraction",
    "gradient_tolerance",
    "step_tolerance",
    "initial_damping",
)

_FIT = FitConfig()

DEFAULTS: dict[str, Any] = {
    "input": None,
    "fundamentals": None,
    "out": "bubblescope-out",
    "t2": "201705",
    "t1_start": "200801",
    "t1_end": "201010",
    "n_starts": 50,
    "seed": 0,
    "preset": "paper-consistent",
    "significance": 0.05,
    "format": "json",
    "workers": 1,
    "adf_regression": "ct",
    "adf_lags": "aic",
    "m_lo": _FIT.m_bounds[0],
    "m_hi": _FIT.m_bounds[1],
    "omega_lo": _FIT.omega_bounds[0],
    "omega_hi": _FIT.omega_bounds[1],
    "tc_min_offset": _FIT.tc_min_offset,
    "tc_max_fraction": _FIT.tc_max_fraction,
    "max_iterations": _FIT.max_iterations,
    "gradient_tolerance": _FIT.gradient_tolerance,
    "step_tolerance": _FIT.step_tolerance,
    "initial_damping": _FIT.initial_damping,
}


@dataclass
class ValidationResult:
    """Result of a validation check."""

    valid: bool
    issues: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _check_fit_box(config: Mapping[str, Any], issues: list[str]) -> None:
    bad = [key for key in FIT_FLOAT_KEYS if key in config and not _is_number(config[key])]
    issues.extend(f"{key} must be a finite number" for key in bad)
    if bad:
        return
    value = {key: config.get(key, DEFAULTS[key]) for key in FIT_FLOAT_KEYS}
    if not 0.0 <= value["m_lo"] < value["m_hi"] <= 1.0:
        issues.append("m_lo and m_hi must satisfy 0 <= m_lo < m_hi <= 1")
    if not 0.0 < value["omega_lo"] < value["omega_hi"]:
        issues.append("omega_lo and omega_hi must satisfy 0 < omega_lo < omega_hi")
    if value["tc_min_offset"] < 0:
        issues.append("tc_min_offset must be >= 0")
    if value["tc_max_fraction"] <= 0:
        issues.append("tc_max_fraction must be > 0")
    for key in ("gradient_tolerance", "step_tolerance"):
        if value[key] < 0:
            issues.append(f"{key} must be >= 0")
    if value["initial_damping"] <= 0:
        issues.append("initial_damping must be > 0")


def validate_config(config: Mapping[str, Any]) -> ValidationResult:
    """Check a flat run-config mapping. Unknown keys are issues, not warnings."""
    issues: list[str] = []
    warnings: list[str] = []

    if not isinstance(config, Mapping):
        return ValidationResult(valid=False, issues=["Config must be a mapping of key: value"])

    for key in config:
        if key not in DEFAULTS:
            issues.append(f"Unknown key: {key}")

    for key in MONTH_KEYS:
        if key in config:
            try:
                parse_month(str(config[key]))
            except SeriesValidationError as exc:
                issues.append(f"{key}: {exc}")

    for key, minimum in (("n_starts", 1), ("workers", 1), ("seed", 0), ("max_iterations", 1)):
        value = config.get(key)
        if value is not None and (not _is_int(value) or value < minimum):
            issues.append(f"{key} must be an integer >= {minimum}")

    _check_fit_box(config, issues)

    significance = config.get("significance")
    if significance is not None:
        if isinstance(significance, bool) or not isinstance(significance, (int, float)) or not 0 < significance < 1:
            issues.append("significance must be a number in (0, 1)")
        elif significance > 0.1:
            warnings.append("significance above 10% is unusually loose")

    if "preset" in config and config["preset"] not in PRESETS:
        issues.append(f"preset must be one of {', '.join(PRESETS)}")
    if "format" in config and config["format"] not in FORMATS:
        issues.append(f"format must be one of {', '.join(FORMATS)}")
    if "adf_regression" in config and config["adf_regression"] not in REGRESSIONS:
        issues.append(f"adf_regression must be one of {', '.join(REGRESSIONS)}")

    lags = config.get("adf_lags")
    if lags is not None and lags != "aic" and not (_is_int(lags) and lags >= 0):
        issues.append("adf_lags must be 'aic' or a non-negative integer")

    for key in ("input", "fundamentals", "out"):
        value = config.get(key)
        if value is not None and (not isinstance(value, str) or not value.strip()):
            issues.append(f"{key} must be a non-empty path string")

    if config.get("n_starts") is not None and _is_int(config["n_starts"]) and config["n_starts"] < 10:
        warnings.append("fewer than 10 starts may miss the global minimum")

    return ValidationResult(valid=len(issues) == 0, issues=issues, warnings=warnings)


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a flat YAML mapping; an empty file is an empty mapping."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a key: value mapping at top level")
    for key, value in data.items():
        if isinstance(value, (dict, list)):
            raise ConfigError(f"{path}: {key} must be a scalar")
    return {str(k): _coerce(str(k), v) for k, v in data.items()}


def _coerce(key: str, value: Any) -> Any:
    # YAML 1.1 reads 201705 as an int and 1e-10 as a string
    if key in MONTH_KEYS and value is not None:
        return str(value)
    if key in FIT_FLOAT_KEYS and isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


@dataclass(frozen=True)
class RunConfig:
    input: Path | None
    fundamentals: Path | None
    out: Path
    t2: MonthStamp
    t1_start: MonthStamp
    t1_end: MonthStamp
    fit: FitConfig
    preset: str
    significance: float
    format: str
    workers: int
    adf_regression: str
    adf_lags: str | int

    def __post_init__(self) -> None:
        if not self.t1_start <= self.t1_end:
            raise ConfigError(f"t1_start {self.t1_start} is after t1_end {self.t1_end}")
        if not self.t1_end < self.t2:
            raise ConfigError(f"t1_end {self.t1_end} must precede t2 {self.t2}")

    @property
    def seed(self) -> int:
        return self.fit.rng_seed

    @property
    def thresholds(self) -> FilterThresholds:
        return FilterThresholds.preset(self.preset)

    def as_dict(self) -> dict[str, Any]:
        return {
            "input": str(self.input) if self.input else None,
            "fundamentals": str(self.fundamentals) if self.fundamentals else None,
            "t2": str(self.t2),
            "t1_start": str(self.t1_start),
            "t1_end": str(self.t1_end),
            "n_starts": self.fit.n_starts,
            "m_lo": self.fit.m_bounds[0],
            "m_hi": self.fit.m_bounds[1],
            "omega_lo": self.fit.omega_bounds[0],
            "omega_hi": self.fit.omega_bounds[1],
            "tc_min_offset": self.fit.tc_min_offset,
            "tc_max_fraction": self.fit.tc_max_fraction,
            "max_iterations": self.fit.max_iterations,
            "seed": self.seed,
            "preset": self.preset,
            "significance": self.significance,
            "adf_regression": self.adf_regression,
            "adf_lags": self.adf_lags,
        }


def merge_settings(
    file_values: Mapping[str, Any] | None = None,
    overrides: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> dict[str, Any]:
    """Defaults < config file < BUBBLESCOPE_SEED < explicit overrides (``None`` means unset)."""
    environ = os.environ if environ is None else environ
    merged = dict(DEFAULTS)
    merged.update(file_values or {})
    env_seed = environ.get(SEED_ENV)
    if env_seed is not None and env_seed.strip():
        try:
            merged["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env_seed!r}") from None
        logger.info("Seed %s taken from %s", merged["seed"], SEED_ENV)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    return merged


def build_run_config(
    file_values: Mapping[str, Any] | None = None,
    overrides: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> RunConfig:
    merged = merge_settings(file_values, overrides, environ)
    result = validate_config(merged)
    for warning in result.warnings:
        logger.warning("Config: %s", warning)
    if not result.valid:
        raise ConfigError("; ".join(result.issues))

    return RunConfig(
        input=Path(merged["input"]) if merged["input"] else None,
        fundamentals=Path(merged["fundamentals"]) if merged["fundamentals"] else None,
        out=Path(merged["out"]),
        t2=parse_month(str(merged["t2"])),
        t1_start=parse_month(str(merged["t1_start"])),
        t1_end=parse_month(str(merged["t1_end"])),
        fit=FitConfig(
            n_starts=merged["n_starts"],
            rng_seed=merged["seed"],
            m_bounds=(float(merged["m_lo"]), float(merged["m_hi"])),
            omega_bounds=(float(merged["omega_lo"]), float(merged["omega_hi"])),
            tc_min_offset=float(merged["tc_min_offset"]),
            tc_max_fraction=float(merged["tc_max_fraction"]),
            max_iterations=merged["max_iterations"],
            gradient_tolerance=float(merged["gradient_tolerance"]),
            step_tolerance=float(merged["step_tolerance"]),
            initial_damping=float(merged["initial_damping"]),
        ),
        preset=merged["preset"],
        significance=float(merged["significance"]),
        format=merged["format"],
        workers=merged["workers"],
        adf_regression=merged["adf_regression"],
        adf_lags=merged["adf_lags"],
    )
