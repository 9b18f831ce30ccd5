"""Seeded flat-volatility test worlds.

Daily log returns are i.i.d. normal with the drift a constant-``R`` investor
believes in a flat-vol market, ``(r - sigma^2/2 + R sigma^2)/252`` per day, so
any partition into periods has factors drawn from that investor's belief.

Randomness comes from numpy's Philox generator (a 64-bit counter-based
bit generator) seeded with the world's integer seed, drawing standard normals
via ``Generator.standard_normal``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .historical import BUSINESS_DAYS_PER_YEAR, ReturnSeries
from .market import VolSurface


@dataclass(frozen=True)
class SyntheticWorldSpec:
    years: float = 15.0
    r: float = 0.02
    sigma: float = 0.2
    R: float = 2.0
    business_days_per_year: int = BUSINESS_DAYS_PER_YEAR
    seed: int = 0
    start: str = "2000-05-17"
    initial_level: float = 100.0
    # rescale the drift so the whole path realizes exactly this premium
    target_premium: float | None = None

    def __post_init__(self):
        if not self.years > 0 or not self.sigma > 0 or self.business_days_per_year < 1:
            raise ValueError("years, sigma and business days per year must be positive")

    @property
    def expected_premium(self) -> float:
        return (self.R - 0.5) * self.sigma**2


@dataclass(frozen=True, eq=False)
class SyntheticWorld:
    spec: SyntheticWorldSpec
    series: ReturnSeries
    surface: VolSurface = field(repr=False)

    def surfaces(self) -> dict[date, VolSurface]:
        return {d.item(): self.surface for d in self.series.dates}


def generate_world(spec: SyntheticWorldSpec) -> SyntheticWorld:
    n_days = int(round(spec.years * spec.business_days_per_year))
    rng = np.random.Generator(np.random.Philox(spec.seed))
    daily_sigma = spec.sigma / math.sqrt(spec.business_days_per_year)
    drift = (spec.r - 0.5 * spec.sigma**2 + spec.R * spec.sigma**2) / spec.business_days_per_year
    steps = drift + daily_sigma * rng.standard_normal(n_days)
    if spec.target_premium is not None:
        years = n_days / spec.business_days_per_year
        realized = steps.sum() / years - spec.r
        steps += (spec.target_premium - realized) / spec.business_days_per_year
    log_levels = np.concatenate([[0.0], np.cumsum(steps)])
    if np.abs(log_levels).max() + math.log(spec.initial_level) > 700:
        raise ValueError("index levels overflow float64; shorten the horizon or lower the drift")
    dates = np.busday_offset(np.datetime64(spec.start, "D"), np.arange(n_days + 1), roll="forward")
    series = ReturnSeries(dates, spec.initial_level * np.exp(log_levels))
    return SyntheticWorld(spec, series, VolSurface.flat(spec.r, spec.sigma))
