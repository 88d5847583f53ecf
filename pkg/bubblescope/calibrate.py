"""Window calibration of the LPPLS model.

Only (t_c, m, omega) are searched; A, B, C1, C2 are profiled out at every evaluation.
A deterministic quasi-random multistart seeds a bounded Levenberg-Marquardt refinement
and the lowest-SSE candidate wins.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.stats import qmc

from bubblescope.errors import ConfigError, NumericalError
from bubblescope.lppls import MAX_CONDITION, LPPLSParams, profile_linear
from bubblescope.series import PriceSeries, Window

logger = logging.getLogger("bubblescope.calibrate")

TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class FitConfig:
    """Search box and optimiser settings for one window fit.

    The critical-time box is (t2 + tc_min_offset, t2 + tc_max_fraction * dt] in months.
    """

    n_starts: int = 50
    tc_min_offset: float = 0.1
    tc_max_fraction: float = 0.2
    m_bounds: tuple[float, float] = (0.005, 0.995)
    omega_bounds: tuple[float, float] = (1.0, 25.0)
    max_iterations: int = 500
    gradient_tolerance: float = 1e-10
    step_tolerance: float = 1e-12
    initial_damping: float = 1e-3
    rng_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.n_starts < 1:
            raise ConfigError(f"n_starts must be >= 1, got {self.n_starts}")
        m_lo, m_hi = self.m_bounds
        if not 0.0 <= m_lo < m_hi <= 1.0:
            raise ConfigError(f"m bounds must satisfy 0 <= lo < hi <= 1, got {self.m_bounds}")
        w_lo, w_hi = self.omega_bounds
        if not 0.0 < w_lo < w_hi:
            raise ConfigError(f"omega bounds must satisfy 0 < lo < hi, got {self.omega_bounds}")
        if self.tc_min_offset < 0 or self.tc_max_fraction <= 0:
            raise ConfigError("critical-time offsets must be non-negative with a positive upper fraction")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.initial_damping <= 0:
            raise ConfigError("initial_damping must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def offset_bounds(self, window: Window) -> tuple[np.ndarray, np.ndarray]:
        """Box on (t_c - t2, m, omega)."""
        tc_hi = self.tc_max_fraction * window.dt
        if tc_hi <= self.tc_min_offset:
            raise ConfigError(f"empty critical-time box for window {window}")
        lower = np.array([self.tc_min_offset, self.m_bounds[0], self.omega_bounds[0]])
        upper = np.array([tc_hi, self.m_bounds[1], self.omega_bounds[1]])
        return lower, upper


@dataclass(frozen=True)
class LPPLSFit:
    """Calibrated parameters and diagnostics for one window."""

    params: LPPLSParams
    sse: float
    window: Window
    converged: bool
    n_observations: int
    condition_flag: bool
    iterations: int = 0
    n_starts: int = 0
    note: str = field(default="", compare=False)

    @property
    def damping(self) -> float:
        return self.params.damping

    @property
    def ok(self) -> bool:
        return self.converged and math.isfinite(self.sse)


def _offset_starts(config: FitConfig, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    center = 0.5 * (lower + upper)
    if config.n_starts == 1:
        return center[None, :]
    sampler = qmc.Halton(d=3, scramble=True, seed=config.rng_seed)
    unit = sampler.random(config.n_starts - 1)
    return np.vstack([center, qmc.scale(unit, lower, upper)])


def generate_starts(config: FitConfig, window: Window) -> list[tuple[float, float, float]]:
    """Deterministic (t_c, m, omega) starting points.

    The first is the box centre; longer runs extend shorter ones.
    """
    lower, upper = config.offset_bounds(window)
    t2 = float(window.t2.index)
    return [(t2 + float(o), float(m), float(w)) for o, m, w in _offset_starts(config, lower, upper)]


@dataclass
class _State:
    residuals: np.ndarray
    jacobian: np.ndarray
    sse: float
    degenerate: bool


def _evaluate(tau_base: np.ndarray, y: np.ndarray, theta: np.ndarray, with_jacobian: bool = True) -> _State:
    """Profiled residuals y - X beta and their sensitivities to (t_c, m, omega)."""
    offset, m, omega = theta
    tau = tau_base + offset
    if np.any(tau < 0):
        raise ValueError("critical time precedes the last observation")
    singular = tau == 0
    if np.any(singular) and m <= 0:
        raise ValueError("m must be positive when the grid touches t_c")
    safe = np.where(singular, 1.0, tau)
    log_tau = np.log(safe)
    f = np.where(singular, 0.0, safe**m)
    cos_term = np.cos(omega * log_tau)
    sin_term = np.sin(omega * log_tau)
    g = f * cos_term
    h = f * sin_term
    X = np.column_stack([np.ones_like(tau), f, g, h])

    q, r = np.linalg.qr(X)
    singular_values = np.linalg.svd(r, compute_uv=False)
    degenerate = singular_values[-1] == 0 or singular_values[0] / singular_values[-1] > MAX_CONDITION
    if degenerate:
        beta = np.linalg.lstsq(X, y, rcond=None)[0]
    else:
        beta = solve_triangular(r, q.T @ y)
    residuals = y - X @ beta
    sse = float(residuals @ residuals)
    if not with_jacobian or degenerate:
        return _State(residuals, np.zeros((len(y), 3)), sse, bool(degenerate))

    inv_tau = np.where(singular, 0.0, 1.0 / safe)
    zero = np.zeros_like(tau)
    derivatives = (
        np.column_stack([zero, m * f * inv_tau, (m * g - omega * h) * inv_tau, (m * h + omega * g) * inv_tau]),
        np.column_stack([zero, log_tau * f, log_tau * g, log_tau * h]),
        np.column_stack([zero, zero, -log_tau * h, log_tau * g]),
    )
    jacobian = np.empty((len(y), 3))
    for k, dX in enumerate(derivatives):
        moved = dX @ beta
        projected = moved - q @ (q.T @ moved)
        back = q @ solve_triangular(r, dX.T @ residuals, trans="T")
        jacobian[:, k] = -(projected + back)
    return _State(residuals, jacobian, sse, False)


def residuals_and_jacobian(
    t: np.ndarray, log_prices: np.ndarray, t_c: float, m: float, omega: float
) -> tuple[np.ndarray, np.ndarray]:
    """Profiled residuals (data - model) and their n x 3 partial derivatives in (t_c, m, omega)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(log_prices, dtype=float)
    if t_c < np.max(t):
        raise ValueError("t_c must not precede the last observation")
    state = _evaluate(t_c - t, y, np.array([0.0, m, omega]))
    if state.degenerate:
        raise NumericalError(f"ill-conditioned linear subproblem at t_c={t_c} m={m} omega={omega}")
    return state.residuals, state.jacobian


@dataclass
class _Candidate:
    theta: np.ndarray
    sse: float
    converged: bool
    degenerate: bool
    iterations: int
    stalled: bool = False


def _levenberg_marquardt(
    tau_base: np.ndarray, y: np.ndarray, start: np.ndarray, lower: np.ndarray, upper: np.ndarray, config: FitConfig
) -> _Candidate:
    theta = np.clip(start, lower, upper)
    state = _evaluate(tau_base, y, theta)
    touched_degenerate = state.degenerate
    lam = config.initial_damping
    converged = False
    stalled = False
    iterations = 0

    while iterations < config.max_iterations:
        iterations += 1
        grad = state.jacobian.T @ state.residuals
        blocked = ((theta <= lower) & (grad > 0)) | ((theta >= upper) & (grad < 0))
        free_grad = np.where(blocked, 0.0, grad)
        if np.max(np.abs(free_grad)) < config.gradient_tolerance:
            converged = True
            break

        jtj = state.jacobian.T @ state.jacobian
        scale = np.diag(jtj).copy()
        scale = np.maximum(scale, 1e-12 * max(float(scale.max()), 1e-300))
        accepted = False
        while not accepted:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(scale), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                if lam > 1e20:
                    stalled = True
                    break
                continue
            candidate = np.clip(theta + step, lower, upper)
            moved = candidate - theta
            if np.linalg.norm(moved) <= config.step_tolerance * (np.linalg.norm(theta) + config.step_tolerance):
                converged = True
                break
            trial = _evaluate(tau_base, y, candidate)
            touched_degenerate = touched_degenerate or trial.degenerate
            if math.isfinite(trial.sse) and trial.sse < state.sse and not trial.degenerate:
                theta, state = candidate, trial
                lam = max(lam / 10.0, 1e-15)
                accepted = True
            else:
                lam *= 10.0
                if lam > 1e20:
                    stalled = True
                    break
        if converged or stalled:
            break

    return _Candidate(
        theta=theta,
        sse=state.sse,
        converged=converged,
        degenerate=touched_degenerate,
        iterations=iterations,
        stalled=stalled,
    )


def _select(candidates: list[_Candidate]) -> _Candidate:
    """Minimum SSE; near-ties go to the smallest t_c, then the smallest m."""
    best_sse = min(c.sse for c in candidates)
    ties = [c for c in candidates if c.sse <= best_sse + TIE_TOLERANCE * abs(best_sse)]
    return min(ties, key=lambda c: (float(c.theta[0]), float(c.theta[1])))


def _failed_fit(
    window: Window, n_obs: int, config: FitConfig, note: str, params: LPPLSParams | None = None
) -> LPPLSFit:
    nan = math.nan
    return LPPLSFit(
        params=params or LPPLSParams(nan, nan, nan, nan, nan, nan, nan),
        sse=nan if params is None else 0.0,
        window=window,
        converged=False,
        n_observations=n_obs,
        condition_flag=True,
        n_starts=config.n_starts,
        note=note,
    )


def fit_log_prices(t: np.ndarray, log_prices: np.ndarray, window: Window, config: FitConfig | None = None) -> LPPLSFit:
    """Calibrate on log-prices observed at epoch months ``t`` spanning ``window``."""
    config = config or FitConfig()
    t = np.asarray(t, dtype=float)
    y = np.asarray(log_prices, dtype=float)
    if len(t) != len(y) or len(y) != window.n_observations:
        raise ValueError(f"expected {window.n_observations} observations for window {window}, got {len(y)}")
    if not np.all(np.isfinite(y)):
        raise ValueError("log-prices must be finite")

    lower, upper = config.offset_bounds(window)
    t2 = float(window.t2.index)
    tau_base = t2 - t

    if float(np.ptp(y)) <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        center = 0.5 * (lower + upper)
        profile = profile_linear(t, y, t2 + center[0], center[1], center[2])
        logger.warning("Window %s has a constant log-price; B and C are unidentifiable", window)
        return _failed_fit(
            window,
            len(y),
            config,
            "constant log-price: B and C unidentifiable",
            profile.to_params(t2 + center[0], center[1], center[2]),
        )

    starts = _offset_starts(config, lower, upper)

    def run(start: np.ndarray) -> _Candidate | None:
        try:
            return _levenberg_marquardt(tau_base, y, start, lower, upper, config)
        except (ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
            logger.debug("Start %s failed: %s", start, exc)
            return None

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            results = list(executor.map(run, starts))
    else:
        results = [run(s) for s in starts]
    candidates = [c for c in results if c is not None and math.isfinite(c.sse) and not c.degenerate]
    if not candidates:
        candidates = [c for c in results if c is not None and math.isfinite(c.sse)]
    if not candidates:
        logger.warning("All %d starts failed for window %s", config.n_starts, window)
        return _failed_fit(window, len(y), config, "all starts diverged or hit degenerate linear systems")

    best = _select(candidates)
    offset, m, omega = (float(v) for v in best.theta)
    t_c = t2 + offset
    profile = profile_linear(t, y, t_c, m, omega)
    params = profile.to_params(t_c, m, omega)
    if best.converged:
        note = ""
    elif best.stalled:
        note = "stalled: no descent step at maximum damping"
    else:
        note = "iteration limit reached"
    logger.debug("Window %s: t_c=%.3f m=%.4f omega=%.4f sse=%.3g", window, t_c, m, omega, profile.sse)
    return LPPLSFit(
        params=params,
        sse=profile.sse,
        window=window,
        converged=best.converged,
        n_observations=len(y),
        condition_flag=best.degenerate or profile.degenerate,
        iterations=best.iterations,
        n_starts=config.n_starts,
        note=note,
    )


def fit_window(series: PriceSeries, window: Window, config: FitConfig | None = None) -> LPPLSFit:
    """Fit the LPPLS model to ``series`` restricted to ``window``."""
    sliced = series.slice(window)
    return fit_log_prices(sliced.times(), sliced.log_prices(), window, config)
