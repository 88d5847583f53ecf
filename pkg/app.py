"""Bubblescope: housing-price bubble diagnostics dashboard."""

from __future__ import annotations

import math
import tempfile
from pathlib import Path

import pandas as pd
import streamlit as st

from bubblescope.calibrate import FitConfig
from bubblescope.lppls import HazardParams, hazard_to_lppls
from bubblescope.pipeline import pair_fundamentals
from bubblescope.qualification import PRESETS, FilterThresholds, load_appendix_tables, replay_appendix, scan
from bubblescope.regression import fundamental_bubble_test
from bubblescope.report import coint_row, format_coint_grid, replay_rows, rounded_frame, scan_rows
from bubblescope.series import PriceSeries, load_csv, parse_month
from bubblescope.simulator import SimConfig, simulate

DEMO_DIR = Path(__file__).parent / "demo_data"


def _load_upload(uploaded, demo_name: str) -> dict[str, PriceSeries] | None:
    if uploaded is None:
        demo_file = DEMO_DIR / demo_name
        if not demo_file.exists():
            st.warning("Demo file not found. Run `python demo_data/generate_demo_data.py` first.")
            return None
        return load_csv(demo_file)
    with tempfile.NamedTemporaryFile(delete=False, suffix=".csv") as tmp:
        tmp.write(uploaded.read())
    try:
        return load_csv(tmp.name)
    finally:
        Path(tmp.name).unlink(missing_ok=True)


def render_replay_tab() -> None:
    """Replay the published window fits through the filter."""
    st.subheader("Appendix Replay")
    preset = st.radio("Preset:", list(PRESETS), horizontal=True)
    thresholds = FilterThresholds.preset(preset)

    tables = load_appendix_tables()
    summary = []
    for city, rows in tables.items():
        reports = replay_appendix(rows, thresholds)
        replayed = replay_rows(city, rows, reports)
        summary.append(
            {
                "table": city,
                "rows": len(replayed),
                "matches": sum(r["match"] for r in replayed),
                "published positive": sum(r["published"] for r in replayed),
                "replayed positive": sum(r["replayed"] for r in replayed),
                "strength": sum(r["replayed"] for r in replayed) / len(replayed),
            }
        )
    st.dataframe(pd.DataFrame(summary), width="stretch")

    city = st.selectbox("Table:", list(tables))
    if city:
        rows = tables[city]
        st.dataframe(rounded_frame(replay_rows(city, rows, replay_appendix(rows, thresholds))), width="stretch")


def render_scan_tab() -> None:
    """Rolling-window LPPLS scan of one price column."""
    st.subheader("LPPLS Scan")
    uploaded = st.file_uploader("Monthly price CSV:", type=["csv"], key="scan_csv")
    series_map = _load_upload(uploaded, "prices.csv")
    if not series_map:
        return

    label = st.selectbox("Series:", list(series_map))
    col1, col2, col3 = st.columns(3)
    t2 = col1.text_input("t2:", value="201705")
    t1_start = col2.text_input("First t1:", value="200801")
    t1_end = col3.text_input("Last t1:", value="201010")
    col4, col5, col6 = st.columns(3)
    n_starts = col4.slider("Starts per window:", 5, 100, 20)
    seed = col5.number_input("Seed:", min_value=0, value=0, step=1)
    preset = col6.selectbox("Preset:", list(PRESETS))

    if st.button("Scan"):
        try:
            result = scan(
                series_map[label],
                parse_month(t2),
                parse_month(t1_start),
                parse_month(t1_end),
                FitConfig(n_starts=n_starts, rng_seed=int(seed)),
                FilterThresholds.preset(preset),
                preset=preset,
            )
        except ValueError as exc:
            st.error(str(exc))
            return
        st.metric("LPPLS strength", f"{100 * result.strength:.2f}%", f"{result.n_positive}/{result.n_windows} windows")
        st.dataframe(rounded_frame(scan_rows(result)), width="stretch")


def render_coint_tab() -> None:
    """Unit-root pre-checks and Engle-Granger tests."""
    st.subheader("Fundamental Test")
    prices = _load_upload(st.file_uploader("Price CSV:", type=["csv"], key="coint_prices"), "prices.csv")
    fundamentals = _load_upload(
        st.file_uploader("Fundamentals CSV:", type=["csv"], key="coint_fund"), "fundamentals.csv"
    )
    if not prices or not fundamentals:
        return

    level = st.select_slider("Significance:", options=[0.01, 0.05, 0.10], value=0.05)
    if st.button("Run tests"):
        rows = []
        try:
            for label, column, factor in pair_fundamentals(prices, fundamentals):
                result = fundamental_bubble_test(prices[label], fundamentals[column], level=level)
                rows.append(coint_row(label, column, factor, result))
        except ValueError as exc:
            st.error(str(exc))
            return
        except ArithmeticError as exc:
            st.error(f"Numerical failure: {exc}")
            return
        st.dataframe(rounded_frame(rows), width="stretch")
        st.code(format_coint_grid(rows), language="text")


def render_simulator_tab() -> None:
    """Synthetic JLS paths and their no-crash LPPLS curve."""
    st.subheader("JLS Simulator")
    col1, col2, col3, col4 = st.columns(4)
    alpha = col1.number_input("alpha:", min_value=0.001, value=0.02, format="%.3f")
    beta = col2.slider("beta:", -0.99, 0.99, 0.5)
    m = col3.slider("m:", 0.05, 0.95, 0.5)
    omega = col4.slider("omega:", 2.0, 20.0, 8.0)
    col5, col6, col7, col8 = st.columns(4)
    t_c = col5.number_input("t_c (months):", min_value=2.0, value=130.0)
    kappa = col6.slider("kappa:", 0.0, 0.95, 0.4)
    sigma = col7.number_input("sigma:", min_value=0.0, value=0.0, format="%.3f")
    seed = col8.number_input("Seed:", min_value=0, value=0, step=1, key="sim_seed")
    horizon = st.slider("Horizon (months):", 12, 240, 120)

    if st.button("Simulate"):
        try:
            hp = HazardParams(alpha=alpha, beta_osc=beta, m=m, omega=omega, t_c=t_c, kappa=kappa)
            path = simulate(SimConfig(hp=hp, sigma=sigma, p0=100.0, horizon=horizon, rng_seed=int(seed)))
        except (ValueError, ArithmeticError) as exc:
            st.error(str(exc))
            return
        if path.crashed:
            st.warning(f"Crash at t = {path.crash_time:.3f} months ({path.crash_month})")
        else:
            st.success("No crash within the horizon")
        frame = path.prices.to_frame()
        survival = hazard_to_lppls(hp, 100.0)
        frame["no_crash_expected"] = [math.exp(survival.log_price(t)) if t < t_c else None for t in path.prices.times()]
        st.dataframe(frame, width="stretch")


def main() -> None:
    """Main Streamlit application."""
    st.set_page_config(page_title="Bubblescope", layout="wide")
    st.title("Bubblescope")
    st.caption("Fundamental cointegration tests + LPPLS rolling-window scans + JLS simulation")

    tab_replay, tab_scan, tab_coint, tab_sim = st.tabs(
        ["Appendix Replay", "LPPLS Scan", "Fundamental Test", "Simulator"]
    )

    with tab_replay:
        render_replay_tab()

    with tab_scan:
        render_scan_tab()

    with tab_coint:
        render_coint_tab()

    with tab_sim:
        render_simulator_tab()


if __name__ == "__main__":
    main()
