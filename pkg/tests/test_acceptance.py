"""Acceptance checks, one per criterion.

Each check prints a ``PASS``/``FAIL`` line and then asserts.  Run with
``pytest -m acceptance tests/test_acceptance.py`` or directly with
``python3 tests/test_acceptance.py``.
"""

import math
import sys
import time
from datetime import date
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import flat_curve, flat_market  # noqa: E402
from equity_premium.historical import ReturnSeries, partition_returns, realized_rate, run_experiment_grid  # noqa: E402
from equity_premium.market import GridDensity, LogNormalMarket, log_strike_grid, option_curve_from_surface  # noqa: E402
from equity_premium.premium import (  # noqa: E402
    PremiumQuote,
    annualized_premium_numeric,
    expected_return_lognormal,
    implied_r_lognormal,
    implied_r_numeric,
)
from equity_premium.replication import expected_return_numeric, price_power_payoff  # noqa: E402
from equity_premium.structuring import (  # noqa: E402
    BeliefDensity,
    InvestorSpec,
    avg_risk_aversion_belief,
    avg_risk_aversion_from_profile,
    belief_from_payoff,
    equilibrium_market,
    growth_optimal_payoff,
    market_clearing_residual,
    payoff_from_belief,
    risk_aversion_profile,
)
from equity_premium.synth import SyntheticWorldSpec, generate_world  # noqa: E402

pytestmark = pytest.mark.acceptance

R_VALUES = (-1.0, 0.0, 0.5, 1.0, 2.0, 3.0)
HORIZONS = (1.0, 5.0)


def report(number, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}", flush=True)


def check_1():
    t0 = time.perf_counter()
    worst = 0.0
    for T in HORIZONS:
        curve, m = flat_curve(0.02, 0.2, T), flat_market(0.02, 0.2, T)
        for R in R_VALUES:
            z = m.df * math.exp(R * m.mu + 0.5 * R * R * m.sigma_total**2)
            worst = max(worst, abs(price_power_payoff(R, curve).price - z) / z)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 5.0
    return ok, f"power payoff prices vs log-normal closed form, max rel err {worst:.2e} (< 1e-4), {elapsed:.2f}s (< 5s)"


def check_2():
    worst = 0.0
    for T in HORIZONS:
        curve, m = flat_curve(0.02, 0.2, T), flat_market(0.02, 0.2, T)
        for R in R_VALUES:
            worst = max(worst, abs(expected_return_numeric(R, curve) - expected_return_lognormal(R, m)))
    return worst < 1e-4, f"replicated expected return vs closed form, max abs err {worst:.2e} (< 1e-4)"


def check_3():
    m = flat_market(0.02, 0.2, 1.0)
    premium = expected_return_lognormal(3.0, m) - m.r_total
    low_r = implied_r_lognormal(0.0035, 0.2)
    ratio = premium / 0.0035
    ok = premium == pytest.approx(0.10, abs=1e-15) and low_r == pytest.approx(0.5875, abs=1e-15) and ratio >= 10
    return ok, f"R=3 -> premium {premium!r}; 0.35% -> R {low_r!r}; premium ratio {ratio:.1f} (>= 10)"


def check_4():
    worst_err, worst_it, worst_ln = 0.0, 0, 0.0
    for T in HORIZONS:
        curve = flat_curve(0.02, 0.2, T)
        for R_star in np.linspace(0.0, 5.0, 11):
            target = annualized_premium_numeric(R_star, curve)
            got = implied_r_numeric(PremiumQuote(date(2020, 1, 1), target, T), curve)
            worst_err = max(worst_err, abs(got.R - R_star))
            worst_it = max(worst_it, got.iterations)
    # targets from the closed form as well, at one year
    curve = flat_curve(0.02, 0.2, 1.0)
    m = flat_market(0.02, 0.2, 1.0)
    for R_star in np.linspace(0.0, 5.0, 11):
        target = expected_return_lognormal(R_star, m) - m.r_total
        got = implied_r_numeric(PremiumQuote(date(2020, 1, 1), target, 1.0), curve)
        worst_ln = max(worst_ln, abs(got.R - R_star))
        worst_it = max(worst_it, got.iterations)
    ok = worst_err < 1e-6 and worst_ln < 1e-6 and worst_it <= 60
    return ok, (
        f"implied R round trip max |R-R*| {worst_err:.2e}, closed-form targets {worst_ln:.2e} (< 1e-6), "
        f"max iterations {worst_it} (<= 60)"
    )


def check_5():
    t0 = time.perf_counter()
    spec = SyntheticWorldSpec(years=15, r=0.02, sigma=0.2, R=2.0, seed=0)
    world = generate_world(spec)
    tau = 42 / 252
    analytic = LogNormalMarket.from_annual(spec.r, spec.sigma, tau)
    df = world.surface.discount_factor(tau)
    fd_curve = option_curve_from_surface(world.surface, tau, log_strike_grid(df, 0.1, 10.0, 401))

    an = run_experiment_grid(world.series, lambda d: analytic, slope=lambda mk, x: mk.log_slope(x))
    fd = run_experiment_grid(world.series, lambda d: fd_curve)

    def identity(run):
        lx = np.log(run.partition.factors)
        return 0.5 + (lx.mean() - analytic.r_total) / analytic.sigma_total**2

    id_an = max(abs(run.full_sample.r_avg - identity(run)) for run in an.runs)
    id_fd = max(abs(run.full_sample.r_avg - identity(run)) for run in fd.runs)
    mean_r = an.full_sample_values.mean()
    se = float(np.mean([run.full_sample.standard_error for run in an.runs]))
    elapsed = time.perf_counter() - t0
    ok = abs(mean_r - 2.0) < 3 * se and id_an < 1e-11 and id_fd < 1e-2 and elapsed < 60
    return ok, (
        f"42-offset mean <R>_P {mean_r:.4f}, |dev| {abs(mean_r - 2):.3f} vs 3 SE {3 * se:.3f}; "
        f"identity err analytic {id_an:.1e} (< 1e-11), finite-difference {id_fd:.1e} (< 1e-2); {elapsed:.1f}s (< 60s)"
    )


def check_6():
    world = generate_world(SyntheticWorldSpec(years=15, seed=0))
    m = LogNormalMarket.from_annual(0.02, 0.2, 42 / 252)
    grid = run_experiment_grid(world.series, lambda d: m, slope=lambda mk, x: mk.log_slope(x))
    counts = sorted({len(run.moving) for run in grid.runs})
    starts = {run.partition.start_dates[0] for run in grid.runs}
    n0 = partition_returns(world.series, 42, 0).n
    ok = n0 == 90 and len(grid.runs) == 42 and len(starts) == 42 and counts == [29, 30]
    return ok, f"N={n0}, offsets {len(grid.runs)} with {len(starts)} distinct starts, moving-average lengths {counts}"


def _struct_setup():
    grid = np.geomspace(0.1, 10.0, 2001)
    df = math.exp(-0.02)
    mu, s = 0.02 - 0.02, 0.2

    def ln(g, mu, s):
        return np.exp(-((np.log(g) - mu) ** 2) / (2 * s * s)) / (g * s * math.sqrt(2 * math.pi))

    m = GridDensity(grid, df * ln(grid, mu, s), target=df)
    return grid, df, m, ln


def check_7():
    grid, df, m, ln = _struct_setup()
    no_view = growth_optimal_payoff(BeliefDensity.normalized(grid, m.values), m)
    flat_dev = float(np.ptp(no_view.values))
    view = BeliefDensity.normalized(grid, ln(grid, 0.03, 0.2))
    rt = 0.0
    for R in (0.5, 1.0, 2.0, 3.0):
        F = payoff_from_belief(view, m, R)
        back = belief_from_payoff(F, R, m)
        rt = max(rt, float(np.max(np.abs(back.values - view.values))))
        rt = max(rt, float(np.max(np.abs(payoff_from_belief(back, m, R).values - F.values))))
    mix = BeliefDensity.normalized(grid, 0.6 * ln(grid, 0.0, 0.15) + 0.4 * ln(grid, 0.1, 0.3))
    ident = abs(avg_risk_aversion_from_profile(risk_aversion_profile(mix, m), mix) - avg_risk_aversion_belief(mix, m))
    ok = flat_dev < 1e-12 and rt < 1e-8 and ident < 1e-4
    return ok, f"no-view payoff spread {flat_dev:.1e}; round-trip sup {rt:.1e} (< 1e-8); profile vs closed-form average {ident:.1e} (< 1e-4)"


def check_8():
    grid, df, m, ln = _struct_setup()
    b1 = BeliefDensity.normalized(grid, ln(grid, 0.0, 0.2))
    b2 = BeliefDensity.normalized(grid, 0.6 * ln(grid, 0.0, 0.15) + 0.4 * ln(grid, 0.1, 0.3))
    single = equilibrium_market([InvestorSpec(4.0, b1)], df)
    exact = bool(np.array_equal(single.values, df * b1.values))
    inv = [InvestorSpec(1.0, b1), InvestorSpec(3.0, b2)]
    eq = equilibrium_market(inv, df)
    clear = float(np.max(np.abs(market_clearing_residual(inv, eq, df))))
    mass = eq.mass_error()
    ok = exact and clear < 1e-10 and mass < 1e-8
    return ok, f"single investor exact={exact}; clearing residual {clear:.1e} (< 1e-10); |int m - DF| {mass:.1e} (< 1e-8)"


def check_9():
    rng = np.random.default_rng(0)
    steps = np.exp(rng.normal(0.0003, 0.012, 2520))
    levels = 100 * np.concatenate([[1.0], np.cumprod(steps)])
    dates = np.busday_offset(np.datetime64("2000-01-03", "D"), np.arange(levels.size), roll="forward")
    series = ReturnSeries(dates, levels)
    total = math.log(levels[-1] / levels[0])
    worst = 0.0
    for step in (1, 2, 3, 5, 7, 10, 12, 20, 21, 42, 60, 84, 126, 252, 420, 630, 840, 1260):
        p = partition_returns(series, step, 0)
        assert p.n * step == 2520
        worst = max(worst, abs(p.n * realized_rate(p) - total))
    return worst < 1e-12, f"N * Rate vs total log return over 18 partitions, max err {worst:.1e} (< 1e-12)"


CHECKS = [check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8, check_9]


@pytest.mark.parametrize("number", range(1, 10))
def test_criterion(number, capsys):
    ok, detail = CHECKS[number - 1]()
    with capsys.disabled():
        report(number, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failures = 0
    for i, check in enumerate(CHECKS, start=1):
        ok, detail = check()
        report(i, ok, detail)
        failures += not ok
    sys.exit(1 if failures else 0)
