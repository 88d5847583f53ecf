"""LPPLS expected log-price, its linear-parameter profile, and the JLS hazard rate.

Time is measured in months on the epoch axis of ``bubblescope.series``; every
formula depends on time only through tau = t_c - t.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from bubblescope.errors import NumericalError

logger = logging.getLogger("bubblescope.lppls")

TWO_PI = 2.0 * math.pi
MAX_CONDITION = 1e12


def normalize_phase(C: float, phi: float) -> tuple[float, float]:
    """Canonical (C >= 0, phi in [0, 2pi)); (C, phi) and (-C, phi + pi) are the same curve."""
    if C < 0:
        C, phi = -C, phi + math.pi
    phi = math.fmod(phi, TWO_PI)
    if phi < 0:
        phi += TWO_PI
    if phi >= TWO_PI:
        phi = 0.0
    return C, phi


@dataclass(frozen=True)
class LPPLSParams:
    """E[ln p(t)] = A + B tau^m + C tau^m cos(omega ln tau - phi)."""

    t_c: float
    m: float
    omega: float
    phi: float
    A: float
    B: float
    C: float

    @classmethod
    def from_linear(cls, t_c: float, m: float, omega: float, A: float, B: float, C1: float, C2: float) -> LPPLSParams:
        C, phi = normalize_phase(math.hypot(C1, C2), math.atan2(C2, C1))
        return cls(t_c=t_c, m=m, omega=omega, phi=phi, A=A, B=B, C=C)

    def canonical(self) -> LPPLSParams:
        C, phi = normalize_phase(self.C, self.phi)
        return LPPLSParams(self.t_c, self.m, self.omega, phi, self.A, self.B, C)

    @property
    def C1(self) -> float:
        return self.C * math.cos(self.phi)

    @property
    def C2(self) -> float:
        return self.C * math.sin(self.phi)

    @property
    def is_bubble_regime(self) -> bool:
        return 0.0 < self.m < 1.0 and self.B < 0.0

    @property
    def damping(self) -> float:
        return damping_ratio(self.m, self.B, self.omega, self.C)

    def log_price(self, t: float | np.ndarray) -> float | np.ndarray:
        return lppls_log_price(t, self)


def damping_ratio(m: float, B: float, omega: float, C: float) -> float:
    """|m B / (omega C)|; inf for a pure power law, 0 when both sides vanish."""
    numerator = abs(m * B)
    denominator = abs(omega * C)
    if denominator == 0.0:
        return math.inf if numerator > 0.0 else 0.0
    return numerator / denominator


def _tau(t: float | np.ndarray, t_c: float) -> np.ndarray:
    tau = t_c - np.asarray(t, dtype=float)
    if np.any(tau < 0):
        raise ValueError(f"t beyond the critical time t_c={t_c}")
    return tau


def lppls_log_price(t: float | np.ndarray, p: LPPLSParams) -> float | np.ndarray:
    """Expected log-price at time(s) ``t``; at t = t_c the limit value A is returned."""
    tau = _tau(t, p.t_c)
    singular = tau == 0
    if np.any(singular) and p.m <= 0:
        raise ValueError("m must be positive to evaluate at t = t_c")
    safe = np.where(singular, 1.0, tau)
    power = np.where(singular, 0.0, safe**p.m)
    oscillation = np.where(singular, 0.0, np.cos(p.omega * np.log(safe) - p.phi))
    value = p.A + p.B * power + p.C * power * oscillation
    if np.ndim(value) == 0:
        return float(value)
    return value


@dataclass(frozen=True)
class LinearProfile:
    """Least-squares A, B, C1, C2 for fixed (t_c, m, omega)."""

    A: float
    B: float
    C1: float
    C2: float
    sse: float
    condition_number: float
    degenerate: bool = False

    @property
    def C(self) -> float:
        return math.hypot(self.C1, self.C2)

    @property
    def phi(self) -> float:
        return normalize_phase(self.C, math.atan2(self.C2, self.C1))[1]

    def to_params(self, t_c: float, m: float, omega: float) -> LPPLSParams:
        return LPPLSParams.from_linear(t_c, m, omega, self.A, self.B, self.C1, self.C2)


def lppls_basis(tau: np.ndarray, m: float, omega: float) -> np.ndarray:
    """Columns {1, tau^m, tau^m cos(omega ln tau), tau^m sin(omega ln tau)}; rows at tau=0 take the limit."""
    singular = tau == 0
    if np.any(singular) and m <= 0:
        raise ValueError("m must be positive when the grid touches t_c")
    safe = np.where(singular, 1.0, tau)
    log_tau = np.log(safe)
    f = np.where(singular, 0.0, safe**m)
    return np.column_stack(
        [np.ones_like(tau), f, f * np.cos(omega * log_tau), f * np.sin(omega * log_tau)]
    )


def _solve_profile(basis: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, float, float, bool]:
    """QR solve of the linear subproblem; returns (coef, residuals, sse, cond, degenerate)."""
    q, r = np.linalg.qr(basis)
    singular_values = np.linalg.svd(r, compute_uv=False)
    cond = math.inf if singular_values[-1] == 0 else float(singular_values[0] / singular_values[-1])
    degenerate = not cond <= MAX_CONDITION
    if degenerate:
        coef = np.linalg.lstsq(basis, y, rcond=None)[0]
    else:
        coef = solve_triangular(r, q.T @ y)
    residuals = y - basis @ coef
    return coef, residuals, float(residuals @ residuals), cond, degenerate


def profile_linear(t: np.ndarray, log_prices: np.ndarray, t_c: float, m: float, omega: float) -> LinearProfile:
    """Best A, B, C1, C2 given the three nonlinear parameters."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(log_prices, dtype=float)
    if len(t) != len(y):
        raise ValueError("time and log-price arrays differ in length")
    if len(y) < 5:
        raise ValueError("profile_linear needs at least 5 observations")
    basis = lppls_basis(_tau(t, t_c), m, omega)
    coef, _, sse, cond, degenerate = _solve_profile(basis, y)
    if degenerate:
        logger.debug("Ill-conditioned LPPLS basis (cond=%.3g) at t_c=%.4f m=%.4f omega=%.4f", cond, t_c, m, omega)
    A, B, C1, C2 = (float(c) for c in coef)
    return LinearProfile(A=A, B=B, C1=C1, C2=C2, sse=sse, condition_number=cond, degenerate=degenerate)


@dataclass(frozen=True)
class HazardParams:
    """JLS crash hazard h(t) = alpha tau^(m-1) (1 + beta cos(omega ln tau - phi_prime)); kappa is the crash size."""

    alpha: float
    beta_osc: float
    m: float
    omega: float
    t_c: float
    phi_prime: float = 0.0
    kappa: float = 0.5

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not abs(self.beta_osc) < 1:
            raise ValueError(f"|beta| must be below 1, got {self.beta_osc}")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in [0, 1], got {self.kappa}")


def hazard_rate(t: float | np.ndarray, hp: HazardParams) -> float | np.ndarray:
    tau = hp.t_c - np.asarray(t, dtype=float)
    if np.any(tau <= 0):
        raise ValueError(f"hazard rate undefined at or after t_c={hp.t_c}")
    value = hp.alpha * tau ** (hp.m - 1.0) * (1.0 + hp.beta_osc * np.cos(hp.omega * np.log(tau) - hp.phi_prime))
    if np.ndim(value) == 0:
        return float(value)
    return value


def coefficient_identities(hp: HazardParams) -> tuple[float, float]:
    """(B, C) = (-kappa alpha / m, -kappa alpha beta / sqrt(m^2 + omega^2))."""
    if hp.m == 0:
        raise ValueError("coefficient identities need m != 0")
    B = -hp.kappa * hp.alpha / hp.m
    C = -hp.kappa * hp.alpha * hp.beta_osc / math.hypot(hp.m, hp.omega)
    return B, C


def hazard_to_lppls(hp: HazardParams, p0: float = 1.0) -> LPPLSParams:
    """Closed-form no-crash expected log-price implied by the hazard, anchored at ln p(0) = ln p0.

    Integrating kappa h(s) gives phi = phi_prime + atan2(omega, m) and the identities of
    ``coefficient_identities``; the result is returned in canonical form.
    """
    if hp.m <= 0:
        raise ValueError("hazard_to_lppls needs m > 0")
    if hp.t_c <= 0:
        raise ValueError("t_c must lie after the path origin t = 0")
    if p0 <= 0:
        raise NumericalError("p0 must be positive")
    B, C = coefficient_identities(hp)
    phi = hp.phi_prime + math.atan2(hp.omega, hp.m)
    origin = hp.t_c**hp.m
    A = math.log(p0) - B * origin - C * origin * math.cos(hp.omega * math.log(hp.t_c) - phi)
    return LPPLSParams(t_c=hp.t_c, m=hp.m, omega=hp.omega, phi=phi, A=A, B=B, C=C).canonical()
