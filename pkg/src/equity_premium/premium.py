"""Expected equity premiums and the risk aversion they imply.

Two routes are provided: the numeric one prices power payoffs off the option
curve, the log-normal one uses ``ER = r + (R - 1/2) sigma^2``.  Premiums are
annualized compound rates: horizon log returns divided by the horizon.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Callable, Literal, Mapping, Sequence

from .market import LogNormalMarket, OptionCurve, VolSurface, option_curve_from_surface
from .replication import expected_return_numeric

logger = logging.getLogger(__name__)

DEFAULT_BRACKET = (-5.0, 15.0)
DEFAULT_TOL = 1e-8


class NoSolutionError(ValueError):
    """Target premium is not reachable inside the bisection bracket."""

    def __init__(self, message: str, bracket: tuple[float, float], values: tuple[float, float]):
        super().__init__(message)
        self.bracket = bracket
        self.values = values


@dataclass(frozen=True)
class PremiumQuote:
    as_of_date: date
    premium_annual: float
    horizon_years: float = 5.0

    def __post_init__(self):
        if not math.isfinite(self.premium_annual):
            raise ValueError("premium must be finite")
        if not self.horizon_years > 0:
            raise ValueError("horizon must be positive")


@dataclass(frozen=True)
class ImpliedRiskAversion:
    R: float
    method: Literal["numeric", "lognormal"]
    residual: float = 0.0
    iterations: int = 0


def expected_return_lognormal(R: float, market: LogNormalMarket) -> float:
    return market.r_total + (R - 0.5) * market.sigma_total**2


def implied_r_lognormal(premium_annual: float, sigma_annual: float) -> float:
    if sigma_annual == 0:
        raise ValueError("zero volatility implies no risk aversion")
    return premium_annual / sigma_annual**2 + 0.5


def annualized_premium_numeric(
    R: float, curve: OptionCurve, risk_free_rate: float | None = None
) -> float:
    """``(ER_R + ln df) / T``, or ``ER_R/T - r`` when a rate is supplied."""
    er = expected_return_numeric(R, curve)
    if risk_free_rate is None:
        return (er + math.log(curve.df)) / curve.maturity
    return er / curve.maturity - risk_free_rate


def bisect(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = 200,
) -> tuple[float, float, int]:
    """Root of an increasing or decreasing ``fn`` on ``[lo, hi]``.

    Stops when ``|fn(x)| < tol``.  Returns ``(x, fn(x), iterations)``.
    """
    f_lo, f_hi = fn(lo), fn(hi)
    if abs(f_lo) < tol:
        return lo, f_lo, 0
    if abs(f_hi) < tol:
        return hi, f_hi, 0
    if f_lo * f_hi > 0:
        raise NoSolutionError(
            f"no sign change on [{lo}, {hi}]: residuals {f_lo:.6g}, {f_hi:.6g}",
            (lo, hi),
            (f_lo, f_hi),
        )
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if abs(f_mid) < tol or hi - lo <= 4 * math.ulp(mid):
            return mid, f_mid, it
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    raise NoSolutionError(f"bisection did not converge in {max_iter} steps", (lo, hi), (f_lo, f_mid))


def implied_r_numeric(
    quote: PremiumQuote,
    curve: OptionCurve,
    bracket: tuple[float, float] = DEFAULT_BRACKET,
    tol: float = DEFAULT_TOL,
    risk_free_rate: float | None = None,
    max_iter: int = 200,
) -> ImpliedRiskAversion:
    """Risk aversion whose replicated expected return matches the quoted premium."""
    if abs(curve.maturity - quote.horizon_years) > 1e-9 * quote.horizon_years:
        raise ValueError(
            f"curve maturity {curve.maturity} does not match quote horizon {quote.horizon_years}"
        )
    target = quote.premium_annual

    def residual(R):
        return annualized_premium_numeric(R, curve, risk_free_rate) - target

    R, res, it = bisect(residual, bracket[0], bracket[1], tol=tol, max_iter=max_iter)
    return ImpliedRiskAversion(R=R, method="numeric", residual=res, iterations=it)


@dataclass(frozen=True)
class ImpliedRPoint:
    date: date
    surface_date: date
    numeric: ImpliedRiskAversion
    lognormal: ImpliedRiskAversion
    atmf_vol: float


def match_surface_date(
    when: date, available: Sequence[date], staleness_days: int = 7
) -> date | None:
    """First surface dated on or after ``when`` within the staleness window."""
    limit = when + timedelta(days=staleness_days)
    candidates = [d for d in available if when <= d <= limit]
    return min(candidates) if candidates else None


def implied_r_series(
    quotes: Sequence[PremiumQuote],
    surfaces: Mapping[date, VolSurface],
    staleness_days: int = 7,
    bracket: tuple[float, float] = DEFAULT_BRACKET,
    tol: float = DEFAULT_TOL,
    risk_free_rate: float | None = None,
    strike_grid: Callable[[float], object] | None = None,
) -> list[ImpliedRPoint]:
    """Implied R by both methods for every quote with a usable surface.

    The log-normal route uses the at-the-money-forward vol at the quote
    horizon and ``r = -ln(df)/T`` from the same surface.  Quotes without a
    surface, or whose premium cannot be matched, are skipped and logged.
    """
    dates = sorted(surfaces)
    out = []
    for q in sorted(quotes, key=lambda q: q.as_of_date):
        surface_date = match_surface_date(q.as_of_date, dates, staleness_days)
        if surface_date is None:
            logger.warning("skipping %s: no surface within %d days", q.as_of_date, staleness_days)
            continue
        surface = surfaces[surface_date]
        T = q.horizon_years
        try:
            df = surface.discount_factor(T)
            grid = None if strike_grid is None else strike_grid(df)
            curve = option_curve_from_surface(surface, T, grid)
            numeric = implied_r_numeric(q, curve, bracket, tol, risk_free_rate)
        except ValueError as exc:
            logger.warning("skipping %s: %s", q.as_of_date, exc)
            continue
        r_market = -math.log(df) / T
        excess = q.premium_annual
        if risk_free_rate is not None:
            excess += risk_free_rate - r_market
        atmf = float(surface.implied_vol(T, 1.0))
        lognormal = ImpliedRiskAversion(R=implied_r_lognormal(excess, atmf), method="lognormal")
        out.append(ImpliedRPoint(q.as_of_date, surface_date, numeric, lognormal, atmf))
    return out
