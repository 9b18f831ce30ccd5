"""Realized rates and realized average risk aversion from index histories.

A total-return history is cut into consecutive reinvestment periods of a
fixed number of business days.  For period factors ``x_i`` and the market
density ``m_i`` seen at each period start,

    <R>_P = -1 - mean_i( x_i * (ln m_i)'(x_i) )

Periods are counted on the trading days present in the series; nothing is
imputed for holidays.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .market import log_density_slope

logger = logging.getLogger(__name__)

PERIOD_BUSINESS_DAYS = 42
WINDOW_PERIODS = 60
N_OFFSETS = 42
BUSINESS_DAYS_PER_YEAR = 252
MIN_COVERAGE = 0.9

SlopeFn = Callable[[Any, float], float]


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    dates: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.dates, dtype="datetime64[D]")
        lv = np.asarray(self.levels, dtype=float)
        if d.ndim != 1 or d.shape != lv.shape:
            raise ValueError("dates and levels must be 1-d and aligned")
        if np.any(lv <= 0) or not np.all(np.isfinite(lv)):
            raise ValueError("index levels must be positive")
        if np.any(np.diff(d) <= np.timedelta64(0, "D")):
            raise ValueError("dates must be strictly increasing")
        object.__setattr__(self, "dates", d)
        object.__setattr__(self, "levels", lv)

    def __len__(self):
        return self.levels.size


@dataclass(frozen=True, eq=False)
class PartitionedReturns:
    factors: np.ndarray
    period_business_days: int
    start_offset: int
    boundary_dates: np.ndarray

    @property
    def n(self) -> int:
        return self.factors.size

    @property
    def start_dates(self) -> np.ndarray:
        return self.boundary_dates[:-1]

    @property
    def end_dates(self) -> np.ndarray:
        return self.boundary_dates[1:]


@dataclass(frozen=True, eq=False)
class RealizedRiskAversion:
    r_avg: float
    per_period_terms: np.ndarray
    window: str = "full-sample"
    coverage: float = 1.0

    @property
    def standard_error(self) -> float:
        terms = self.per_period_terms[np.isfinite(self.per_period_terms)]
        if terms.size < 2:
            return math.nan
        return float(np.std(terms, ddof=1) / math.sqrt(terms.size))


def partition_returns(
    series: ReturnSeries,
    period_business_days: int = PERIOD_BUSINESS_DAYS,
    start_offset: int = 0,
) -> PartitionedReturns:
    if period_business_days < 1:
        raise ValueError("period must be at least one business day")
    if not 0 <= start_offset < period_business_days:
        raise ValueError(
            f"offset {start_offset} outside the first period [0, {period_business_days})"
        )
    n = (len(series) - 1 - start_offset) // period_business_days
    if n < 2:
        raise InsufficientDataError(
            f"series of {len(series)} days spans fewer than 2 periods from offset {start_offset}"
        )
    idx = start_offset + period_business_days * np.arange(n + 1)
    lv = series.levels[idx]
    return PartitionedReturns(
        factors=lv[1:] / lv[:-1],
        period_business_days=period_business_days,
        start_offset=start_offset,
        boundary_dates=series.dates[idx],
    )


def realized_rate(p: PartitionedReturns) -> float:
    return float(np.mean(np.log(p.factors)))


def slope_terms(p: PartitionedReturns, curves: Sequence, slope: SlopeFn = log_density_slope) -> np.ndarray:
    """``x_i * (ln m_i)'(x_i)`` per period; NaN where the slope cannot be read."""
    if len(curves) != p.n:
        raise ValueError(f"need one curve per period: got {len(curves)} for {p.n} periods")
    terms = np.full(p.n, np.nan)
    for i, (x, curve) in enumerate(zip(p.factors, curves)):
        try:
            terms[i] = x * slope(curve, float(x))
        except ValueError as exc:
            logger.info("period %d (x=%.6g): slope unavailable: %s", i, x, exc)
    return terms


def _from_terms(terms: np.ndarray, window: str, min_coverage: float) -> RealizedRiskAversion:
    ok = np.isfinite(terms)
    coverage = float(ok.mean()) if terms.size else 0.0
    if coverage < min_coverage:
        raise InsufficientDataError(
            f"log-density slopes available for only {coverage:.1%} of periods"
        )
    return RealizedRiskAversion(
        r_avg=-1.0 - float(np.mean(terms[ok])),
        per_period_terms=terms,
        window=window,
        coverage=coverage,
    )


def realized_avg_risk_aversion(
    p: PartitionedReturns,
    curves: Sequence,
    slope: SlopeFn = log_density_slope,
    min_coverage: float = MIN_COVERAGE,
) -> RealizedRiskAversion:
    """Full-sample ``<R>_P``.

    ``curves[i]`` describes the market at the start of period ``i``; ``slope``
    reads ``(ln m)'`` off it (finite differences of call prices by default).
    """
    return _from_terms(slope_terms(p, curves, slope), "full-sample", min_coverage)


def moving_average_r(
    p: PartitionedReturns,
    curves: Sequence | None = None,
    window_periods: int = WINDOW_PERIODS,
    slope: SlopeFn = log_density_slope,
    min_coverage: float = MIN_COVERAGE,
    terms: np.ndarray | None = None,
) -> list[tuple[np.datetime64, RealizedRiskAversion]]:
    """Trailing ``window_periods`` averages, dated by the window's last period end.

    Returns all ``N - window + 1`` windows.  Pass precomputed ``terms`` to skip
    re-reading slopes.
    """
    if window_periods < 1:
        raise ValueError("window must be at least one period")
    if window_periods > p.n:
        raise InsufficientDataError(f"window of {window_periods} exceeds {p.n} periods")
    if terms is None:
        if curves is None:
            raise ValueError("need curves or precomputed terms")
        terms = slope_terms(p, curves, slope)
    label = f"moving({window_periods})"
    out = []
    for end in range(window_periods, p.n + 1):
        est = _from_terms(terms[end - window_periods:end], label, min_coverage)
        out.append((p.end_dates[end - 1], est))
    return out


@dataclass(frozen=True, eq=False)
class OffsetRun:
    offset: int
    partition: PartitionedReturns
    full_sample: RealizedRiskAversion
    annualized_premium: float
    moving: list[tuple[np.datetime64, float]] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class ExperimentGrid:
    runs: list[OffsetRun]
    requested_offsets: int
    window_periods: int

    @property
    def full_sample_values(self) -> np.ndarray:
        return np.array([run.full_sample.r_avg for run in self.runs])

    @property
    def premiums(self) -> np.ndarray:
        return np.array([run.annualized_premium for run in self.runs])


def run_experiment_grid(
    series: ReturnSeries,
    curve_at: Callable[[np.datetime64], Any] | Mapping,
    period_business_days: int = PERIOD_BUSINESS_DAYS,
    n_offsets: int = N_OFFSETS,
    window_periods: int = WINDOW_PERIODS,
    business_days_per_year: int = BUSINESS_DAYS_PER_YEAR,
    slope: SlopeFn = log_density_slope,
    min_coverage: float = MIN_COVERAGE,
) -> ExperimentGrid:
    """Repeat the experiment from every business-day offset in the first period.

    ``curve_at`` maps a period-start date to that period's market (a callable
    or a mapping).  Each run reports the full-sample ``<R>_P``, the realized
    annualized premium over the per-period risk-free rates, and its moving
    averages.  Moving averages are reported from the first window that has
    rolled past the initial ``window_periods`` block, i.e. ``N - window``
    values per run: 30 for N = 90 and 29 for N = 89 at the default settings.
    """
    lookup = curve_at.__getitem__ if isinstance(curve_at, Mapping) else curve_at
    if n_offsets > period_business_days:
        warnings.warn(
            f"only {period_business_days} offsets fit in one period; {n_offsets} requested",
            RuntimeWarning,
            stacklevel=2,
        )
    tau = period_business_days / business_days_per_year
    runs = []
    for offset in range(min(n_offsets, period_business_days)):
        try:
            p = partition_returns(series, period_business_days, offset)
        except InsufficientDataError as exc:
            logger.warning("offset %d skipped: %s", offset, exc)
            continue
        curves = [lookup(d) for d in p.start_dates]
        terms = slope_terms(p, curves, slope)
        full = _from_terms(terms, "full-sample", min_coverage)
        rf = float(np.mean([-math.log(c.df) for c in curves]))
        premium = (realized_rate(p) - rf) / tau
        moving = []
        if p.n > window_periods:
            windows = moving_average_r(p, window_periods=window_periods, terms=terms, min_coverage=min_coverage)
            moving = [(d, est.r_avg) for d, est in windows[1:]]
        runs.append(OffsetRun(offset, p, full, premium, moving))
    if not runs:
        raise InsufficientDataError("no offset has enough history for a single experiment")
    if len(runs) < n_offsets:
        logger.warning("ran %d of %d requested offsets", len(runs), n_offsets)
    return ExperimentGrid(runs=runs, requested_offsets=n_offsets, window_periods=window_periods)
