"""Beliefs, payoffs and risk aversion, and the market they clear.

Everything lives on one positive return grid.  The growth-optimal payoff is
the likelihood ratio ``f = b/m``; a constant relative risk aversion ``R``
investor holds ``F ~ f**(1/R)``.  Utility is never represented: ``R`` is the
primitive throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .market import GridDensity

NORMALIZATION_TOL = 1e-6
TAIL_MASS_TOL = 1e-6
BOUNDARY_MARGIN = 2


class GridTailError(ValueError):
    """Belief carries too much mass at the grid edges for the identity to hold."""


def _integrate(values: np.ndarray, grid: np.ndarray) -> float:
    return float(np.trapezoid(values, grid))


def _check_grid(grid: np.ndarray) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 2 * BOUNDARY_MARGIN + 1:
        raise ValueError("grid too short")
    if np.any(g <= 0) or np.any(np.diff(g) <= 0):
        raise ValueError("grid must be positive and strictly increasing")
    return g


@dataclass(frozen=True, eq=False)
class BeliefDensity:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = _check_grid(self.grid)
        v = np.asarray(self.values, dtype=float)
        if v.shape != g.shape or np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("belief values must be finite, non-negative and match the grid")
        mass = _integrate(v, g)
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"belief integrates to {mass:.8g}, not 1")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @classmethod
    def normalized(cls, grid, values) -> "BeliefDensity":
        g = _check_grid(grid)
        v = np.asarray(values, dtype=float)
        return cls(g, v / _integrate(v, g))


@dataclass(frozen=True, eq=False)
class PayoffCurve:
    grid: np.ndarray
    values: np.ndarray
    budget: float

    def __post_init__(self):
        g = _check_grid(self.grid)
        v = np.asarray(self.values, dtype=float)
        if v.shape != g.shape or np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ValueError("payoff values must be finite, strictly positive and match the grid")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class RiskAversionProfile:
    """``R(x)``; NaN inside the boundary margin where no central difference exists."""

    grid: np.ndarray
    values: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)


@dataclass(frozen=True)
class InvestorSpec:
    weight: float
    belief: BeliefDensity

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError("investor weight must be positive")


def resample_density(values, grid, new_grid) -> np.ndarray:
    """Move a density onto ``new_grid``, linear in log-density vs log-return."""
    grid = np.asarray(grid, dtype=float)
    new_grid = np.asarray(new_grid, dtype=float)
    if grid.shape == new_grid.shape and np.array_equal(grid, new_grid):
        return np.asarray(values, dtype=float)
    with np.errstate(divide="ignore"):
        logv = np.log(np.asarray(values, dtype=float))
    out = np.exp(np.interp(np.log(new_grid), np.log(grid), logv, left=-np.inf, right=-np.inf))
    return out


def _pair(b, m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    grid = b.grid
    return grid, b.values, resample_density(m.values, m.grid, grid)


def _market_mass(payoff: np.ndarray, m: np.ndarray, grid: np.ndarray) -> float:
    return _integrate(payoff * m, grid)


def growth_optimal_payoff(b: BeliefDensity, m: GridDensity) -> PayoffCurve:
    """Kelly payoff ``b/m``, scaled to cost one unit."""
    return payoff_from_belief(b, m, 1.0)


def payoff_from_belief(b: BeliefDensity, m: GridDensity, R: float) -> PayoffCurve:
    """Constant-``R`` payoff ``(b/m)**(1/R)`` normalized to ``int F m = 1``."""
    if R == 0:
        raise ValueError("R = 0 has no finite payoff (infinite elasticity)")
    grid, bv, mv = _pair(b, m)
    if np.any((mv <= 0) & (bv > 0)):
        raise ValueError("market density vanishes where the belief does not: unbounded payoff")
    if np.any(bv <= 0):
        raise ValueError("belief must be strictly positive on the grid")
    log_f = np.log(bv) - np.log(mv)
    raw = np.exp((log_f - log_f.max()) / R) if R > 0 else np.exp((log_f - log_f.min()) / R)
    values = raw / _market_mass(raw, mv, grid)
    return PayoffCurve(grid, values, budget=_market_mass(values, mv, grid))


def belief_from_payoff(F: PayoffCurve, R: float, m: GridDensity) -> BeliefDensity:
    """Belief ``F**R m / Z`` under which buying ``F`` is optimal at risk aversion ``R``."""
    grid = F.grid
    mv = resample_density(m.values, m.grid, grid)
    log_fr = R * np.log(F.values)
    weights = np.exp(log_fr - log_fr.max()) * mv
    z = _integrate(weights, grid)
    if not (math.isfinite(z) and z > 0):
        raise ValueError(f"normalization integral is not finite and positive ({z})")
    return BeliefDensity(grid, weights / z)


def _dlog_dlogx(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    return np.gradient(np.log(values), np.log(grid))


def risk_aversion_profile(b: BeliefDensity, m: GridDensity) -> RiskAversionProfile:
    """``R(x) = d ln(b/m) / d ln x`` by central differences in ``ln x``."""
    grid, bv, mv = _pair(b, m)
    if np.any(bv <= 0) or np.any(mv <= 0):
        raise ValueError("profile needs strictly positive belief and market densities")
    values = _dlog_dlogx(bv / mv, grid)
    values[:BOUNDARY_MARGIN] = np.nan
    values[-BOUNDARY_MARGIN:] = np.nan
    return RiskAversionProfile(grid, values)


def boundary_mass(b: BeliefDensity) -> float:
    """Rough mass beyond the grid: ``x*b(x)`` at the larger end."""
    g, v = b.grid, b.values
    return float(max(g[0] * v[0], g[-1] * v[-1]))


def avg_risk_aversion_belief(
    b: BeliefDensity, m: GridDensity, tail_tol: float = TAIL_MASS_TOL
) -> float:
    """``<R>_b = -1 - <x (ln m)'>_b``."""
    tail = boundary_mass(b)
    if tail > tail_tol:
        raise GridTailError(
            f"belief mass near the grid edges ~{tail:.2e} exceeds {tail_tol:.0e}; "
            "the boundary term x*b does not vanish"
        )
    grid, bv, mv = _pair(b, m)
    if np.any(mv <= 0):
        raise ValueError("market density must be positive on the grid")
    slope = _dlog_dlogx(mv, grid)
    return -1.0 - _integrate(bv * slope, grid)


def avg_risk_aversion_from_profile(profile: RiskAversionProfile, b: BeliefDensity) -> float:
    """``int R(x) b(x) dx`` over the profile's valid points."""
    ok = profile.valid
    return _integrate(profile.values[ok] * b.values[ok], b.grid[ok])


def equilibrium_market(investors: Sequence[InvestorSpec], df: float) -> GridDensity:
    """Unique market clearing a closed pool of investors: ``(df/W) sum w_i beta_i``."""
    if not investors:
        raise ValueError("need at least one investor")
    total = sum(inv.weight for inv in investors)
    if not total > 0:
        raise ValueError("zero total weight")
    grid = investors[0].belief.grid
    values = np.zeros_like(grid)
    for inv in investors:
        beta = resample_density(inv.belief.values, inv.belief.grid, grid)
        values = values + (inv.weight / total) * beta
    return GridDensity(grid, df * values, target=df)


def market_clearing_residual(investors: Sequence[InvestorSpec], m: GridDensity, df: float) -> np.ndarray:
    """``sum w_i F_i - W/df`` pointwise, with ``F_i = beta_i/m``."""
    total = sum(inv.weight for inv in investors)
    acc = np.zeros_like(m.grid)
    for inv in investors:
        beta = resample_density(inv.belief.values, inv.belief.grid, m.grid)
        acc = acc + inv.weight * beta / m.values
    return acc - total / df
