"""OLS, augmented Dickey-Fuller and two-step Engle-Granger tests.

The fundamental-bubble rule: a price series carries a bubble when it is not I(0) and
either its fundamental is I(0) or the two I(1) series are not cointegrated.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from bubblescope.errors import NumericalError, SeriesValidationError
from bubblescope.mackinnon import REGRESSIONS, mackinnonp
from bubblescope.series import PriceSeries

logger = logging.getLogger("bubblescope.regression")

SIGNIFICANCE_LEVELS = (0.01, 0.05, 0.10)


def _as_array(values: PriceSeries | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(values, PriceSeries):
        return values.to_numpy()
    return np.asarray(values, dtype=float).ravel()


def significance_stars(p_value: float | None) -> str:
    """Star markers for the 10/5/1% levels."""
    if p_value is None or math.isnan(p_value):
        return ""
    if p_value < 0.01:
        return "★★★"
    if p_value < 0.05:
        return "★★"
    if p_value < 0.10:
        return "★"
    return ""


@dataclass(frozen=True, eq=False)
class Design:
    """Regressors of an OLS fit: optional intercept and linear trend plus exogenous columns."""

    constant: bool = True
    trend: bool = False
    exog: np.ndarray | None = None
    exog_names: tuple[str, ...] = ()

    def build(self, nobs: int) -> tuple[np.ndarray, tuple[str, ...]]:
        columns: list[np.ndarray] = []
        names: list[str] = []
        if self.constant:
            columns.append(np.ones(nobs))
            names.append("const")
        if self.trend:
            columns.append(np.arange(1, nobs + 1, dtype=float))
            names.append("trend")
        if self.exog is not None:
            exog = np.asarray(self.exog, dtype=float)
            if exog.ndim == 1:
                exog = exog[:, None]
            if exog.shape[0] != nobs:
                raise SeriesValidationError(f"exogenous regressors have {exog.shape[0]} rows, expected {nobs}")
            extra = list(self.exog_names) or [f"x{i + 1}" for i in range(exog.shape[1])]
            if len(extra) != exog.shape[1]:
                raise ValueError("exog_names must match the number of exogenous columns")
            columns.extend(exog.T)
            names.extend(extra)
        if not columns:
            raise ValueError("design has no regressors")
        return np.column_stack(columns), tuple(names)


@dataclass(frozen=True, eq=False)
class OLSResult:
    """Least-squares fit with classical standard errors."""

    coefficients: np.ndarray
    names: tuple[str, ...]
    residuals: np.ndarray
    fitted: np.ndarray
    sse: float
    std_errors: np.ndarray
    nobs: int

    @property
    def df_resid(self) -> int:
        return self.nobs - len(self.coefficients)

    @property
    def tvalues(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coefficients / self.std_errors

    @property
    def llf(self) -> float:
        n = self.nobs
        return -0.5 * n * (math.log(2 * math.pi) + math.log(self.sse / n) + 1.0)

    @property
    def aic(self) -> float:
        return -2.0 * self.llf + 2.0 * len(self.coefficients)

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def tvalue(self, name: str) -> float:
        return float(self.tvalues[self.names.index(name)])


def ols(y: Sequence[float] | np.ndarray, design: Design) -> OLSResult:
    """Ordinary least squares via a QR factorisation of the design matrix."""
    y = _as_array(y)
    nobs = len(y)
    X, names = design.build(nobs)
    k = X.shape[1]
    if nobs < k + 2:
        raise SeriesValidationError(f"OLS needs at least {k + 2} observations for {k} regressors, got {nobs}")
    if np.linalg.matrix_rank(X) < k:
        raise NumericalError(f"rank-deficient design ({', '.join(names)})")

    q, r = np.linalg.qr(X)
    beta = solve_triangular(r, q.T @ y)
    fitted = X @ beta
    residuals = y - fitted
    sse = float(residuals @ residuals)
    sigma2 = sse / (nobs - k)
    r_inv = solve_triangular(r, np.eye(k))
    std_errors = np.sqrt(sigma2 * np.sum(r_inv**2, axis=1))
    return OLSResult(
        coefficients=beta,
        names=names,
        residuals=residuals,
        fitted=fitted,
        sse=sse,
        std_errors=std_errors,
        nobs=nobs,
    )


@dataclass(frozen=True)
class ADFResult:
    """Augmented Dickey-Fuller test outcome."""

    statistic: float
    p_value: float
    lags_used: int
    regression: str
    nobs: int
    max_lag: int

    def rejects_at(self, level: float) -> bool:
        return self.p_value < level

    @property
    def verdicts(self) -> dict[float, bool]:
        """Unit-root rejection at the 1/5/10% levels."""
        return {level: self.rejects_at(level) for level in SIGNIFICANCE_LEVELS}


def schwert_max_lag(nobs: int) -> int:
    return int(math.floor(12.0 * (nobs / 100.0) ** 0.25))


def _is_constant(y: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(y))))
    return float(np.ptp(y)) <= 1e-12 * scale


def _adf_fit(y: np.ndarray, dy: np.ndarray, lags: int, first_row: int, regression: str) -> OLSResult:
    rows = np.arange(first_row, len(dy))
    exog = [y[rows]]
    names = ["y.L1"]
    for i in range(1, lags + 1):
        exog.append(dy[rows - i])
        names.append(f"dy.L{i}")
    design = Design(
        constant=regression in ("c", "ct"),
        trend=regression == "ct",
        exog=np.column_stack(exog),
        exog_names=tuple(names),
    )
    return ols(dy[rows], design)


def adf_test(
    series: PriceSeries | Sequence[float] | np.ndarray,
    regression: str = "ct",
    lags: int | str = "aic",
    max_lag: int | None = None,
) -> ADFResult:
    """ADF regression dy_t = a + b t + g y_{t-1} + sum d_i dy_{t-i} + e_t; statistic is the t-ratio on g.

    ``lags="aic"`` searches 0..max_lag (Schwert rule by default) on a common sample and
    refits the chosen order on the full sample; an integer fixes the order.
    """
    if regression not in REGRESSIONS:
        raise ValueError(f"regression must be one of {REGRESSIONS}, got {regression!r}")
    y = _as_array(series)
    nobs = len(y)
    if isinstance(lags, str):
        if lags != "aic":
            raise ValueError(f"unknown lag policy {lags!r}")
        top = schwert_max_lag(nobs) if max_lag is None else int(max_lag)
    else:
        top = int(lags)
    if top < 0:
        raise ValueError("lag order must be non-negative")
    if nobs < 20 + top:
        raise SeriesValidationError(f"ADF needs at least {20 + top} observations, got {nobs}")
    if _is_constant(y):
        raise NumericalError("ADF undefined for a constant series (zero variance)")

    dy = np.diff(y)
    if isinstance(lags, str):
        best_lag, best_aic = 0, math.inf
        for p in range(top + 1):
            aic = _adf_fit(y, dy, p, top, regression).aic
            if aic < best_aic - 1e-12:
                best_lag, best_aic = p, aic
        chosen = best_lag
    else:
        chosen = top

    fit = _adf_fit(y, dy, chosen, chosen, regression)
    statistic = fit.tvalue("y.L1")
    p_value = mackinnonp(statistic, regression, 1)
    logger.debug("ADF(%s, lags=%d): stat=%.4f p=%.4f", regression, chosen, statistic, p_value)
    return ADFResult(
        statistic=statistic,
        p_value=p_value,
        lags_used=chosen,
        regression=regression,
        nobs=fit.nobs,
        max_lag=top,
    )


def integration_order(
    series: PriceSeries | Sequence[float] | np.ndarray,
    regression: str = "ct",
    lags: int | str = "aic",
    level: float = 0.05,
) -> int:
    """0 if the level rejects a unit root, 1 if the first difference does; order >= 2 is an error."""
    y = _as_array(series)
    if adf_test(y, regression, lags).rejects_at(level):
        return 0
    diff_regression = "c" if regression == "ct" else regression
    if adf_test(np.diff(y), diff_regression, lags).rejects_at(level):
        return 1
    raise NumericalError("series is integrated of order >= 2; pairwise test aborted")


@dataclass(frozen=True)
class CointegrationResult:
    """Engle-Granger outcome and the fundamental-bubble verdict.

    ``x_order``/``y_order`` are the integration orders of the fundamental and the price;
    ``None`` means the decision rule stopped before that order was needed.
    """

    eg_statistic: float | None
    eg_p_value: float | None
    x_order: int | None
    y_order: int | None
    cointegrated_at: tuple[float, ...]
    bubble_flag: bool
    degenerate: bool = False
    branch: str = "engle_granger"
    lags_used: int | None = None
    step1_coefficients: dict[str, float] = field(default_factory=dict, compare=False)

    @property
    def stars(self) -> str:
        return significance_stars(self.eg_p_value)

    @property
    def tested(self) -> bool:
        return self.eg_statistic is not None


def _check_spans(y: PriceSeries | np.ndarray, x: PriceSeries | np.ndarray) -> None:
    if isinstance(y, PriceSeries) and isinstance(x, PriceSeries):
        if y.start != x.start or len(y) != len(x):
            raise SeriesValidationError(
                f"span mismatch: {y.label or 'y'} {y.start}-{y.end} vs {x.label or 'x'} {x.start}-{x.end}"
            )
    elif len(_as_array(y)) != len(_as_array(x)):
        raise SeriesValidationError("span mismatch: series lengths differ")


def engle_granger(
    y: PriceSeries | Sequence[float] | np.ndarray,
    x: PriceSeries | Sequence[float] | np.ndarray,
    trend: bool = True,
    lags: int | str = "aic",
    level: float = 0.05,
) -> CointegrationResult:
    """Regress y on {1, t, x}, then ADF (no deterministic terms) on the residuals."""
    _check_spans(y, x)
    y_arr, x_arr = _as_array(y), _as_array(x)
    step1 = ols(y_arr, Design(constant=True, trend=trend, exog=x_arr, exog_names=("x",)))
    coefficients = dict(zip(step1.names, (float(c) for c in step1.coefficients)))

    centred = y_arr - y_arr.mean()
    total = float(centred @ centred)
    if step1.sse <= 1e-20 * max(total, 1e-300):
        logger.info("Engle-Granger step 1 fits exactly; reporting degenerate cointegration")
        return CointegrationResult(
            eg_statistic=-math.inf,
            eg_p_value=0.0,
            x_order=None,
            y_order=None,
            cointegrated_at=SIGNIFICANCE_LEVELS,
            bubble_flag=False,
            degenerate=True,
            lags_used=0,
            step1_coefficients=coefficients,
        )

    residual_adf = adf_test(step1.residuals, regression="n", lags=lags)
    p_value = mackinnonp(residual_adf.statistic, "ct" if trend else "c", 2)
    cointegrated_at = tuple(lv for lv in SIGNIFICANCE_LEVELS if p_value < lv)
    return CointegrationResult(
        eg_statistic=residual_adf.statistic,
        eg_p_value=p_value,
        x_order=None,
        y_order=None,
        cointegrated_at=cointegrated_at,
        bubble_flag=not p_value < level,
        lags_used=residual_adf.lags_used,
        step1_coefficients=coefficients,
    )


def fundamental_bubble_test(
    price: PriceSeries | Sequence[float] | np.ndarray,
    fundamental: PriceSeries | Sequence[float] | np.ndarray,
    regression: str = "ct",
    lags: int | str = "aic",
    level: float = 0.05,
) -> CointegrationResult:
    """Apply the fundamental-bubble decision tree to one price/fundamental pair."""
    _check_spans(price, fundamental)
    y_order = integration_order(price, regression, lags, 0.05)
    if y_order == 0:
        return CointegrationResult(
            eg_statistic=None,
            eg_p_value=None,
            x_order=None,
            y_order=0,
            cointegrated_at=(),
            bubble_flag=False,
            branch="price_stationary",
        )
    x_order = integration_order(fundamental, regression, lags, 0.05)
    if x_order == 0:
        return CointegrationResult(
            eg_statistic=None,
            eg_p_value=None,
            x_order=0,
            y_order=y_order,
            cointegrated_at=(),
            bubble_flag=True,
            branch="fundamental_stationary",
        )
    eg = engle_granger(price, fundamental, trend=True, lags=lags, level=level)
    return CointegrationResult(
        eg_statistic=eg.eg_statistic,
        eg_p_value=eg.eg_p_value,
        x_order=x_order,
        y_order=y_order,
        cointegrated_at=eg.cointegrated_at,
        bubble_flag=eg.bubble_flag,
        degenerate=eg.degenerate,
        branch="engle_granger",
        lags_used=eg.lags_used,
        step1_coefficients=eg.step1_coefficients,
    )
