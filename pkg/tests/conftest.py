import math

import pytest

from equity_premium.market import LogNormalMarket, VolSurface, option_curve_from_surface


def flat_curve(r=0.02, sigma=0.2, T=1.0, grid=None):
    surface = VolSurface.flat(r, sigma, maturities=(T,))
    return option_curve_from_surface(surface, T, grid)


def flat_market(r=0.02, sigma=0.2, T=1.0):
    return LogNormalMarket.from_annual(r, sigma, T)


@pytest.fixture
def curve_1y():
    return flat_curve(0.02, 0.2, 1.0)


@pytest.fixture
def curve_5y():
    return flat_curve(0.02, 0.2, 5.0)


@pytest.fixture
def curve_r10():
    """r_total = 0.1, sigma_total^2 = 0.2 over one year."""
    return flat_curve(0.1, math.sqrt(0.2), 1.0)
