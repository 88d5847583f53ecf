"""Generate demo price and fundamental CSVs."""

from pathlib import Path

import numpy as np

from bubblescope.lppls import HazardParams
from bubblescope.series import MonthStamp, PriceSeries, write_csv
from bubblescope.simulator import SimConfig, simulate

DEMO_DIR = Path(__file__).parent
START = MonthStamp(2000, 1)
T2 = MonthStamp(2017, 5)


def generate_prices(seed: int = 7):
    """Simulated no-crash bubble path plus a random-walk control, 200001-201705."""
    n = T2 - START + 1
    hp = HazardParams(alpha=0.05, beta_osc=0.8, m=0.5, omega=7.0, t_c=T2.index + 6.0, phi_prime=0.5, kappa=0.4)
    path = simulate(SimConfig(hp=hp, sigma=0.004, p0=5000.0, horizon=n - 1, rng_seed=seed, allow_crash=False))
    bubble = PriceSeries(start=START, values=path.prices.values, label="bubble")

    rng = np.random.default_rng(seed)
    control = PriceSeries(
        start=START, values=tuple(8000.0 * np.exp(np.cumsum(0.01 * rng.standard_normal(n)))), label="control"
    )
    output_path = write_csv([bubble, control], DEMO_DIR / "prices.csv")
    print(f"Generated {output_path} with {n} months")
    return bubble, control


def generate_fundamentals(control: PriceSeries, seed: int = 8):
    """Rent tied to the control series and an unrelated national factor."""
    rng = np.random.default_rng(seed)
    n = len(control)
    noise = np.zeros(n)
    for t in range(1, n):
        noise[t] = 0.5 * noise[t - 1] + rng.standard_normal()
    rent = PriceSeries(start=START, values=tuple(0.004 * control.to_numpy() + 0.5 * noise + 10.0), label="RENT_control")
    cpi = PriceSeries(start=START, values=tuple(100.0 * np.exp(np.cumsum(0.003 * rng.standard_normal(n)))), label="CPI")
    output_path = write_csv([rent, cpi], DEMO_DIR / "fundamentals.csv")
    print(f"Generated {output_path} with {n} months")


if __name__ == "__main__":
    _, control = generate_prices()
    generate_fundamentals(control)
