"""Synthetic JLS price paths.

dp/p = mu(t) dt + sigma dW - kappa dj, with mu(t) = kappa h(t) while no crash has happened.
The path origin is t = 0 (months); ``HazardParams.t_c`` is measured from it.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from bubblescope.errors import ConfigError, NumericalError
from bubblescope.lppls import HazardParams, hazard_rate, hazard_to_lppls
from bubblescope.series import MonthStamp, PriceSeries

logger = logging.getLogger("bubblescope.simulator")

MAX_CAPPED_SHARE = 0.01


@dataclass(frozen=True)
class SimConfig:
    hp: HazardParams
    sigma: float = 0.0
    p0: float = 1.0
    horizon: int = 120
    step: float = 1.0 / 16
    rng_seed: int = 0
    start: MonthStamp = MonthStamp(2000, 1)
    allow_crash: bool = True
    label: str = "simulated"

    def __post_init__(self) -> None:
        if self.sigma < 0 or not math.isfinite(self.sigma):
            raise ConfigError(f"sigma must be finite and >= 0, got {self.sigma}")
        if not self.p0 > 0:
            raise ConfigError(f"p0 must be positive, got {self.p0}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be at least one month, got {self.horizon}")
        if not 0 < self.step <= 1:
            raise ConfigError(f"step must lie in (0, 1] months, got {self.step}")
        per_month = round(1.0 / self.step)
        if abs(per_month * self.step - 1.0) > 1e-9:
            raise ConfigError(f"step {self.step} does not divide one month evenly")
        if self.hp.kappa >= 1:
            raise ConfigError("kappa must be < 1 for simulation (a full crash zeroes the price)")
        if self.hp.m <= 0:
            raise ConfigError("m must be positive")

    @property
    def steps_per_month(self) -> int:
        return round(1.0 / self.step)

    @property
    def n_steps(self) -> int:
        return self.horizon * self.steps_per_month


@dataclass(frozen=True, eq=False)
class SimPath:
    prices: PriceSeries
    crash_time: float | None
    drift_trace: np.ndarray = field(repr=False)

    @property
    def crashed(self) -> bool:
        return self.crash_time is not None

    @property
    def crash_month(self) -> MonthStamp | None:
        """First monthly observation that includes the crash."""
        if self.crash_time is None:
            return None
        return self.prices.start.shift(math.ceil(self.crash_time - 1e-9))


def _hazard_grid(config: SimConfig, times: np.ndarray) -> np.ndarray:
    hp = config.hp
    live = times < hp.t_c
    h = np.zeros_like(times)
    if np.any(live):
        h[live] = hazard_rate(times[live], hp)
    return h


def simulate(config: SimConfig) -> SimPath:
    """One Euler-Maruyama path with at most one crash; identical config gives an identical path."""
    hp = config.hp
    dt = config.step
    n = config.n_steps
    left = np.arange(n) * dt

    hazard = _hazard_grid(config, left)
    crash_prob = hazard * dt
    live_steps = int(np.count_nonzero(left < hp.t_c))
    capped = int(np.count_nonzero(crash_prob > 1.0))
    if live_steps and capped / live_steps > MAX_CAPPED_SHARE:
        logger.warning("Rejecting simulation: %d of %d hazard steps exceed probability 1", capped, live_steps)
        raise NumericalError(f"step {dt} too coarse: h*dt > 1 on {capped} of {live_steps} steps")
    crash_prob = np.minimum(crash_prob, 1.0)

    rng = np.random.default_rng(config.rng_seed)
    shocks = rng.standard_normal(n)
    uniforms = rng.random(n)

    crash_step: int | None = None
    if config.allow_crash and hp.kappa > 0:
        hits = np.flatnonzero(uniforms < crash_prob)
        if hits.size:
            crash_step = int(hits[0])

    drift = hp.kappa * hazard
    if crash_step is not None:
        drift[crash_step + 1 :] = 0.0

    increments = (drift - 0.5 * config.sigma**2) * dt + config.sigma * math.sqrt(dt) * shocks
    if crash_step is not None:
        increments[crash_step] += math.log1p(-hp.kappa)

    log_path = np.concatenate([[math.log(config.p0)], math.log(config.p0) + np.cumsum(increments)])
    monthly = np.exp(log_path[:: config.steps_per_month])
    crash_time = None if crash_step is None else (crash_step + 1) * dt
    if crash_time is not None:
        logger.debug("Seed %d crashed at t=%.4f", config.rng_seed, crash_time)

    prices = PriceSeries(start=config.start, values=tuple(monthly), label=config.label)
    return SimPath(prices=prices, crash_time=crash_time, drift_trace=drift)


def simulate_batch(config: SimConfig, seeds: list[int] | range, workers: int = 1) -> list[SimPath]:
    """Independent paths, one per seed, in seed order."""
    configs = [replace(config, rng_seed=int(seed)) for seed in seeds]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(simulate, configs))
    return [simulate(c) for c in configs]


def survival_log_price(t: float, config: SimConfig) -> float:
    """Expected log-price at ``t`` conditional on no crash, with sigma = 0."""
    hp = config.hp
    if t >= hp.t_c:
        raise ValueError(f"survival log-price undefined at or after t_c={hp.t_c}")
    return float(hazard_to_lppls(hp, config.p0).log_price(t))


def crash_probability(t: float, hp: HazardParams) -> float:
    """P(crash by t) = 1 - exp(-integral of h over [0, t])."""
    upper = min(float(t), hp.t_c)
    if upper <= 0:
        return 0.0
    integral, _ = integrate.quad(lambda s: hazard_rate(s, hp), 0.0, upper, limit=200)
    return 1.0 - math.exp(-integral)
