import math

import numpy as np
import pytest

from equity_premium.market import GridDensity
from equity_premium.structuring import (
    BeliefDensity,
    GridTailError,
    InvestorSpec,
    PayoffCurve,
    avg_risk_aversion_belief,
    avg_risk_aversion_from_profile,
    belief_from_payoff,
    equilibrium_market,
    growth_optimal_payoff,
    market_clearing_residual,
    payoff_from_belief,
    resample_density,
    risk_aversion_profile,
)

GRID = np.geomspace(0.1, 10.0, 2001)
DF = math.exp(-0.02)
SIGMA = 0.2
MU_M = 0.02 - 0.5 * SIGMA**2


def lognormal(grid, mu, s):
    return np.exp(-((np.log(grid) - mu) ** 2) / (2 * s * s)) / (grid * s * math.sqrt(2 * math.pi))


def market(grid=GRID, mu=MU_M, s=SIGMA):
    return GridDensity(grid, DF * lognormal(grid, mu, s), target=DF)


def belief(mu, s=SIGMA, grid=GRID):
    return BeliefDensity.normalized(grid, lognormal(grid, mu, s))


def mixture():
    return BeliefDensity.normalized(GRID, 0.6 * lognormal(GRID, 0.0, 0.15) + 0.4 * lognormal(GRID, 0.1, 0.3))


def budget(F, m):
    return float(np.trapezoid(F.values * resample_density(m.values, m.grid, F.grid), F.grid))


class TestPayoffs:
    def test_no_view_no_trade(self):
        m = market()
        b = BeliefDensity.normalized(GRID, m.values)
        for R in (0.5, 1.0, 2.0, -1.0):
            F = payoff_from_belief(b, m, R)
            np.testing.assert_allclose(F.values, 1 / m.total_mass, rtol=1e-12)

    def test_optimistic_belief_increasing_payoff(self):
        f = growth_optimal_payoff(belief(MU_M + 0.05), market())
        assert np.all(np.diff(f.values) > 0)

    def test_kelly_payoff_is_likelihood_ratio(self):
        b, m = mixture(), market()
        f = growth_optimal_payoff(b, m)
        assert np.allclose(f.values, payoff_from_belief(b, m, 1.0).values, rtol=0, atol=0)
        ratio = b.values / m.values
        np.testing.assert_allclose(f.values, ratio / np.trapezoid(ratio * m.values, GRID), rtol=1e-12)

    def test_growth_optimal_budget(self):
        b, m = mixture(), market()
        assert budget(growth_optimal_payoff(b, m), m) == pytest.approx(1.0, abs=1e-12)

    def test_r2_power_exponent(self):
        dmu = 0.04
        F = payoff_from_belief(belief(MU_M + dmu), market(), 2.0)
        exponent = np.diff(np.log(F.values)) / np.diff(np.log(GRID))
        np.testing.assert_allclose(exponent, dmu / (2 * SIGMA**2), rtol=1e-6)

    def test_zero_r_rejected(self):
        with pytest.raises(ValueError, match="R = 0"):
            payoff_from_belief(mixture(), market(), 0.0)

    def test_vanishing_market_rejected(self):
        m = market()
        vals = m.values.copy()
        vals[1000] = 0.0
        with pytest.raises(ValueError, match="unbounded"):
            growth_optimal_payoff(mixture(), GridDensity(GRID, vals, target=DF))

    @pytest.mark.parametrize("R", [0.5, 1.0, 2.0, 3.0, -2.0])
    def test_budget_and_elasticity(self, R):
        b, m = mixture(), market()
        F = payoff_from_belief(b, m, R)
        f = growth_optimal_payoff(b, m)
        assert F.budget == pytest.approx(1.0, abs=1e-8)
        assert budget(F, m) == pytest.approx(1.0, abs=1e-8)
        elasticity = np.diff(np.log(F.values)) / np.diff(np.log(f.values))
        np.testing.assert_allclose(elasticity, 1 / R, rtol=1e-8)


class TestBeliefFromPayoff:
    def test_flat_payoff_carries_no_view(self):
        m = market()
        b = belief_from_payoff(PayoffCurve(GRID, np.full(GRID.size, 3.0), 1.0), 2.0, m)
        np.testing.assert_allclose(b.values, m.values / m.total_mass, rtol=1e-12)

    def test_linear_payoff_kelly_shifts_log_mean(self):
        b = belief_from_payoff(PayoffCurve(GRID, GRID.copy(), 1.0), 1.0, market())
        np.testing.assert_allclose(b.values, lognormal(GRID, MU_M + SIGMA**2, SIGMA), rtol=1e-5, atol=1e-12)

    @pytest.mark.parametrize("R", [0.5, 1.0, 2.0, 3.0])
    def test_round_trip(self, R):
        # equal-vol view keeps F of order one, so the sup-norm is meaningful
        m = market()
        F0 = payoff_from_belief(belief(MU_M + 0.03), m, 1.7)
        b = belief_from_payoff(F0, R, m)
        F1 = payoff_from_belief(b, m, R)
        assert np.max(np.abs(F1.values - F0.values)) < 1e-8

    @pytest.mark.parametrize("R", [0.5, 1.0, 2.0, 3.0])
    def test_round_trip_from_belief(self, R):
        m, b0 = market(), belief(MU_M + 0.03)
        b1 = belief_from_payoff(payoff_from_belief(b0, m, R), R, m)
        assert np.max(np.abs(b1.values - b0.values)) < 1e-8

    def test_overflowing_normalizer(self):
        F = PayoffCurve(GRID, np.full(GRID.size, 1.0), 1.0)
        with pytest.raises(ValueError):
            belief_from_payoff(F, 2.0, GridDensity(GRID, np.zeros(GRID.size)))


class TestProfiles:
    def test_constant_r_round_trip(self):
        m = market()
        b = belief_from_payoff(PayoffCurve(GRID, GRID.copy(), 1.0), 2.0, m)
        prof = risk_aversion_profile(b, m)
        np.testing.assert_allclose(prof.values[prof.valid], 2.0, atol=1e-6)
        assert prof.valid.sum() == GRID.size - 4

    def test_market_believer_has_zero_profile(self):
        m = market()
        prof = risk_aversion_profile(BeliefDensity.normalized(GRID, m.values), m)
        np.testing.assert_allclose(prof.values[prof.valid], 0.0, atol=1e-9)

    def test_equal_vol_lognormals(self):
        dmu = 0.03
        prof = risk_aversion_profile(belief(MU_M + dmu), market())
        np.testing.assert_allclose(prof.values[prof.valid], dmu / SIGMA**2, rtol=1e-8)

    def test_nonpositive_density(self):
        b = mixture()
        vals = market().values.copy()
        vals[5] = 0.0
        with pytest.raises(ValueError):
            risk_aversion_profile(b, GridDensity(GRID, vals))


class TestAverageRiskAversion:
    def test_lognormal_identity_for_arbitrary_belief(self):
        b = mixture()
        avg = avg_risk_aversion_belief(b, market())
        mean_log = np.trapezoid(np.log(GRID) * b.values, GRID)
        assert mean_log == pytest.approx(0.02 + (avg - 0.5) * SIGMA**2, abs=1e-8)

    def test_market_believer_zero(self):
        m = market()
        assert avg_risk_aversion_belief(BeliefDensity.normalized(GRID, m.values), m) == pytest.approx(0.0, abs=1e-8)

    @pytest.mark.parametrize("make", [mixture, lambda: belief(0.05, 0.25)])
    def test_profile_average_matches_closed_form(self, make):
        b, m = make(), market()
        via_profile = avg_risk_aversion_from_profile(risk_aversion_profile(b, m), b)
        assert via_profile == pytest.approx(avg_risk_aversion_belief(b, m), abs=1e-4)

    def test_fat_edges_rejected(self):
        narrow = np.geomspace(0.7, 1.4, 401)
        b = BeliefDensity.normalized(narrow, lognormal(narrow, 0.0, 0.3))
        with pytest.raises(GridTailError):
            avg_risk_aversion_belief(b, market(narrow))


class TestEquilibrium:
    def test_single_investor(self):
        b = mixture()
        m = equilibrium_market([InvestorSpec(3.0, b)], DF)
        np.testing.assert_array_equal(m.values, DF * b.values)

    def test_two_equal_investors_mean(self):
        b1, b2 = belief(0.0), belief(0.05, 0.3)
        m = equilibrium_market([InvestorSpec(1.0, b1), InvestorSpec(1.0, b2)], 1.0)
        np.testing.assert_allclose(m.values, 0.5 * (b1.values + b2.values), rtol=1e-15)

    def test_clearing_and_normalization(self):
        investors = [InvestorSpec(2.0, belief(0.0)), InvestorSpec(1.0, mixture()), InvestorSpec(0.5, belief(0.1, 0.35))]
        m = equilibrium_market(investors, DF)
        assert np.max(np.abs(market_clearing_residual(investors, m, DF))) < 1e-10
        assert m.mass_error() < 1e-8
        for inv in investors:
            assert budget(growth_optimal_payoff(inv.belief, m), m) == pytest.approx(1.0, abs=1e-8)

    def test_needs_investors(self):
        with pytest.raises(ValueError):
            equilibrium_market([], DF)
        with pytest.raises(ValueError):
            InvestorSpec(0.0, mixture())


class TestBeliefValidation:
    def test_unnormalized(self):
        with pytest.raises(ValueError, match="integrates"):
            BeliefDensity(GRID, 2 * lognormal(GRID, 0.0, 0.2))

    def test_resample_round_trip_on_same_grid(self):
        v = lognormal(GRID, 0.0, 0.2)
        assert resample_density(v, GRID, GRID) is not None
        np.testing.assert_allclose(resample_density(v, GRID, GRID[::2]), v[::2], rtol=1e-12)
