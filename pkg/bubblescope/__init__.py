"""bubblescope: price-bubble diagnostics for monthly series (cointegration and LPPLS)."""

__version__ = "0.1.0"

from bubblescope.calibrate import FitConfig, LPPLSFit, fit_window, generate_starts, residuals_and_jacobian
from bubblescope.errors import BubblescopeError, ConfigError, NumericalError, SeriesValidationError
from bubblescope.lppls import (
    HazardParams,
    LinearProfile,
    LPPLSParams,
    coefficient_identities,
    damping_ratio,
    hazard_rate,
    hazard_to_lppls,
    lppls_log_price,
    profile_linear,
)
from bubblescope.qualification import (
    FilterThresholds,
    QualificationReport,
    ScanResult,
    load_appendix_tables,
    oscillation_count,
    qualify,
    replay_appendix,
    scan,
)
from bubblescope.regression import (
    ADFResult,
    CointegrationResult,
    OLSResult,
    adf_test,
    engle_granger,
    fundamental_bubble_test,
    integration_order,
    ols,
)
from bubblescope.series import MonthStamp, PriceSeries, Window, load_csv, parse_month, slice_series, write_csv
from bubblescope.simulator import SimConfig, SimPath, crash_probability, simulate, simulate_batch, survival_log_price

__all__ = [
    "ADFResult",
    "BubblescopeError",
    "CointegrationResult",
    "ConfigError",
    "FilterThresholds",
    "FitConfig",
    "HazardParams",
    "LPPLSFit",
    "LPPLSParams",
    "LinearProfile",
    "MonthStamp",
    "NumericalError",
    "OLSResult",
    "PriceSeries",
    "QualificationReport",
    "ScanResult",
    "SeriesValidationError",
    "SimConfig",
    "SimPath",
    "Window",
    "adf_test",
    "coefficient_identities",
    "crash_probability",
    "damping_ratio",
    "engle_granger",
    "fit_window",
    "fundamental_bubble_test",
    "generate_starts",
    "hazard_rate",
    "hazard_to_lppls",
    "integration_order",
    "load_appendix_tables",
    "load_csv",
    "lppls_log_price",
    "ols",
    "oscillation_count",
    "parse_month",
    "profile_linear",
    "qualify",
    "replay_appendix",
    "residuals_and_jacobian",
    "scan",
    "simulate",
    "simulate_batch",
    "slice_series",
    "survival_log_price",
    "write_csv",
]
