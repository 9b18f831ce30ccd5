"""Markets: log-normal densities, vol surfaces, option curves and the
densities implied by call prices.

All quantities are in horizon-total units: a market over ``T`` years with
annual rate ``r`` and annual vol ``sigma`` has ``r_total = r*T`` and
``sigma_total = sigma*sqrt(T)``.  Strikes and returns are total returns on one
unit of wealth, so the forward is ``1/df``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import ndtr

CONVEXITY_TOL = 1e-8
PARITY_TOL = 1e-8

_EPS = np.finfo(float).eps


class UnreliableDensityError(ValueError):
    """Call curve is locally flat or non-convex; no density can be read off it."""


def _as_float(a):
    return float(a) if np.ndim(a) == 0 else a


@dataclass(frozen=True)
class LogNormalMarket:
    """Flat-volatility market over one horizon.

    ``df`` defaults to ``exp(-r_total)``, which is the only choice consistent
    with a unit-priced underlying.
    """

    r_total: float
    sigma_total: float
    df: float | None = None

    def __post_init__(self):
        if not self.sigma_total > 0:
            raise ValueError(f"sigma_total must be positive, got {self.sigma_total}")
        if self.df is None:
            object.__setattr__(self, "df", math.exp(-self.r_total))
        if not 0 < self.df <= 1:
            raise ValueError(f"df must lie in (0, 1], got {self.df}")

    @classmethod
    def from_annual(cls, r: float, sigma: float, maturity: float) -> "LogNormalMarket":
        return cls(r * maturity, sigma * math.sqrt(maturity), math.exp(-r * maturity))

    @property
    def mu(self) -> float:
        return self.r_total - 0.5 * self.sigma_total**2

    def density(self, x):
        return lognormal_density(self, x)

    def log_slope(self, x):
        return lognormal_log_slope(self, x)


def lognormal_density(market: LogNormalMarket, x):
    """Discounted log-normal density ``m(x)``; integrates to ``market.df``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("density is defined for positive returns only")
    s = market.sigma_total
    z = (np.log(x) - market.mu) / s
    out = market.df / (x * s * math.sqrt(2 * math.pi)) * np.exp(-0.5 * z * z)
    return _as_float(out)


def lognormal_log_slope(market: LogNormalMarket, x):
    """Analytic ``d ln m / dx`` for a log-normal market."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("slope is defined for positive returns only")
    out = -1.0 / x - (np.log(x) - market.mu) / (market.sigma_total**2 * x)
    return _as_float(out)


def bs_option_price(
    kind: Literal["call", "put"],
    strike,
    vol_total,
    df: float,
    forward: float | None = None,
):
    """Discounted Black price of a European option on a total-return underlying.

    Parameters
    ----------
    kind : {"call", "put"}
    strike : float or array
        Total-return strike, ``> 0``.
    vol_total : float or array
        ``sigma*sqrt(T)``; zero gives the discounted intrinsic value.
    df : float
        Discount factor to the option maturity.
    forward : float, optional
        Defaults to ``1/df`` (the underlying is worth one unit today).
    """
    if kind not in ("call", "put"):
        raise ValueError(f"unknown option kind {kind!r}")
    strike = np.asarray(strike, dtype=float)
    vol = np.asarray(vol_total, dtype=float)
    if np.any(vol < 0):
        raise ValueError("vol_total must be non-negative")
    if np.any(strike <= 0):
        raise ValueError("strike must be positive")
    fwd = 1.0 / df if forward is None else float(forward)

    live = vol > 0
    safe_vol = np.where(live, vol, 1.0)
    d1 = (np.log(fwd / strike) + 0.5 * safe_vol**2) / safe_vol
    d2 = d1 - safe_vol
    if kind == "call":
        price = df * (fwd * ndtr(d1) - strike * ndtr(d2))
        intrinsic = df * np.maximum(fwd - strike, 0.0)
    else:
        price = df * (strike * ndtr(-d2) - fwd * ndtr(-d1))
        intrinsic = df * np.maximum(strike - fwd, 0.0)
    return _as_float(np.where(live, price, intrinsic))


def log_strike_grid(df: float, lo: float = 0.02, hi: float = 20.0, n: int = 2001) -> np.ndarray:
    """Log-spaced strikes covering ``[lo, hi]`` times the forward.

    The grid is shifted (by less than half a step) so that the forward
    ``1/df`` sits exactly on a node; the replication quadrature relies on it.
    """
    if not 0 < lo < 1 < hi:
        raise ValueError("grid bounds must satisfy 0 < lo < 1 < hi")
    if n < 5:
        raise ValueError("grid needs at least 5 points")
    u = np.linspace(math.log(lo), math.log(hi), n)
    u -= u[np.argmin(np.abs(u))]
    return np.exp(u) / df


@dataclass(frozen=True, eq=False)
class VolSurface:
    """Implied vols quoted on forward moneyness (strike/forward).

    Interpolation is linear in total variance: across log-moneyness within a
    maturity (flat beyond the quoted strikes) and across maturities at fixed
    moneyness.  Discount factors are log-linear in maturity.
    """

    maturities: np.ndarray
    strikes: tuple[np.ndarray, ...]
    vols: tuple[np.ndarray, ...]
    discount_factors: np.ndarray

    def __post_init__(self):
        mats = np.asarray(self.maturities, dtype=float)
        dfs = np.asarray(self.discount_factors, dtype=float)
        strikes = tuple(np.asarray(k, dtype=float) for k in self.strikes)
        vols = tuple(np.asarray(v, dtype=float) for v in self.vols)
        if mats.ndim != 1 or mats.size == 0:
            raise ValueError("surface needs at least one maturity")
        if not (len(strikes) == len(vols) == mats.size == dfs.size):
            raise ValueError("maturities, strikes, vols and discount factors must align")
        if np.any(mats <= 0) or np.any(np.diff(mats) <= 0):
            raise ValueError("maturities must be positive and strictly increasing")
        if np.any(dfs <= 0):
            raise ValueError("discount factors must be positive")
        for t, k, v in zip(mats, strikes, vols):
            if k.size < 2:
                raise ValueError(f"insufficient strikes at maturity {t}: need at least 2")
            if k.shape != v.shape:
                raise ValueError(f"strike/vol shape mismatch at maturity {t}")
            if np.any(k <= 0) or np.any(np.diff(k) <= 0):
                raise ValueError(f"strikes at maturity {t} must be positive and strictly increasing")
            if np.any(v <= 0):
                raise ValueError(f"vols at maturity {t} must be positive")
        object.__setattr__(self, "maturities", mats)
        object.__setattr__(self, "discount_factors", dfs)
        object.__setattr__(self, "strikes", strikes)
        object.__setattr__(self, "vols", vols)

    @classmethod
    def flat(
        cls,
        r: float,
        sigma: float,
        maturities=(1 / 12, 0.25, 0.5, 1.0, 2.0, 5.0),
        moneyness=(0.5, 0.75, 0.9, 1.0, 1.1, 1.25, 1.5, 2.0),
    ) -> "VolSurface":
        mats = np.asarray(maturities, dtype=float)
        k = np.asarray(moneyness, dtype=float)
        return cls(
            maturities=mats,
            strikes=tuple(k.copy() for _ in mats),
            vols=tuple(np.full(k.shape, float(sigma)) for _ in mats),
            discount_factors=np.exp(-r * mats),
        )

    def _bracket(self, maturity: float) -> tuple[int, int, float]:
        mats = self.maturities
        if not mats[0] <= maturity <= mats[-1]:
            raise ValueError(
                f"maturity {maturity} outside quoted range [{mats[0]}, {mats[-1]}]"
            )
        j = int(np.searchsorted(mats, maturity))
        if mats[j] == maturity:
            return j, j, 0.0
        return j - 1, j, (maturity - mats[j - 1]) / (mats[j] - mats[j - 1])

    def _slice_variance(self, j: int, moneyness) -> np.ndarray:
        w = self.vols[j] ** 2 * self.maturities[j]
        return np.interp(np.log(moneyness), np.log(self.strikes[j]), w)

    def total_variance(self, maturity: float, moneyness):
        moneyness = np.asarray(moneyness, dtype=float)
        lo, hi, a = self._bracket(maturity)
        w = self._slice_variance(lo, moneyness)
        if hi != lo:
            w = (1 - a) * w + a * self._slice_variance(hi, moneyness)
        return _as_float(w)

    def implied_vol(self, maturity: float, moneyness):
        return _as_float(np.sqrt(np.asarray(self.total_variance(maturity, moneyness)) / maturity))

    def discount_factor(self, maturity: float) -> float:
        lo, hi, a = self._bracket(maturity)
        log_df = (1 - a) * math.log(self.discount_factors[lo]) + a * math.log(self.discount_factors[hi])
        return math.exp(log_df) if hi != lo else float(self.discount_factors[lo])


@dataclass(frozen=True, eq=False)
class OptionCurve:
    """Calls and puts at one maturity on an increasing strike grid.

    ``total_vol`` (strike -> sigma*sqrt(T)), when present, lets the curve be
    repriced at arbitrary strikes; otherwise prices off the grid come from a
    cubic spline through the quoted calls.
    """

    maturity: float
    df: float
    strikes: np.ndarray
    calls: np.ndarray
    puts: np.ndarray
    pivot: float
    total_vol: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        y = np.asarray(self.strikes, dtype=float)
        c = np.asarray(self.calls, dtype=float)
        p = np.asarray(self.puts, dtype=float)
        if y.ndim != 1 or y.size < 5:
            raise ValueError("option curve needs at least 5 strikes")
        if c.shape != y.shape or p.shape != y.shape:
            raise ValueError("calls and puts must match the strike grid")
        if np.any(y <= 0) or np.any(np.diff(y) <= 0):
            raise ValueError("strikes must be positive and strictly increasing")
        if not self.df > 0:
            raise ValueError("df must be positive")
        for name, prices, sign in (("call", c, -1.0), ("put", p, 1.0)):
            slopes = np.diff(prices) / np.diff(y)
            if np.any(sign * slopes < -CONVEXITY_TOL):
                raise ValueError(f"{name} prices are not monotone in strike")
            if np.any(np.diff(slopes) < -CONVEXITY_TOL):
                raise ValueError(f"{name} prices fail the convexity check")
        parity = np.max(np.abs(c - p - (1.0 - y * self.df)))
        if parity > PARITY_TOL:
            raise ValueError(f"put-call parity violated by {parity:.3g}")
        object.__setattr__(self, "strikes", y)
        object.__setattr__(self, "calls", c)
        object.__setattr__(self, "puts", p)

    @property
    def forward(self) -> float:
        return 1.0 / self.df

    def parity_residual(self) -> float:
        return float(np.max(np.abs(self.calls - self.puts - (1.0 - self.strikes * self.df))))

    def call_price(self, strike):
        if self.total_vol is not None:
            return bs_option_price("call", strike, self.total_vol(np.asarray(strike, dtype=float)), self.df)
        spline = self.__dict__.get("_spline")
        if spline is None:
            spline = CubicSpline(self.strikes, self.calls)
            object.__setattr__(self, "_spline", spline)
        return _as_float(spline(strike))

    def put_price(self, strike):
        if self.total_vol is not None:
            return bs_option_price("put", strike, self.total_vol(np.asarray(strike, dtype=float)), self.df)
        return _as_float(np.asarray(self.call_price(strike)) - (1.0 - np.asarray(strike) * self.df))

    def otm_prices(self, pivot: float | None = None) -> np.ndarray:
        """Puts at strikes ``<= pivot`` and calls above it, on the grid."""
        k = self.pivot if pivot is None else pivot
        return np.where(self.strikes <= k, self.puts, self.calls)


def option_curve_from_surface(
    surface: VolSurface,
    maturity: float,
    strike_grid=None,
) -> OptionCurve:
    """Price calls and puts off a vol surface at one maturity."""
    df = surface.discount_factor(maturity)
    if strike_grid is None:
        strike_grid = log_strike_grid(df)
    y = np.asarray(strike_grid, dtype=float)
    if y.size == 0:
        raise ValueError("empty strike grid")

    def total_vol(strike):
        return np.sqrt(surface.total_variance(maturity, np.asarray(strike) * df))

    vols = total_vol(y)
    return OptionCurve(
        maturity=maturity,
        df=df,
        strikes=y,
        calls=bs_option_price("call", y, vols, df),
        puts=bs_option_price("put", y, vols, df),
        pivot=1.0 / df,
        total_vol=total_vol,
    )


def _check_interior(curve: OptionCurve, x: np.ndarray, h: np.ndarray) -> None:
    y = curve.strikes
    if np.any(x < y[2]) or np.any(x > y[-3]) or np.any(x - 2 * h < y[0]) or np.any(x + 2 * h > y[-1]):
        raise ValueError("x too close to the strike grid boundary")


def density_from_calls(curve: OptionCurve, x, h=None):
    """``m(x)`` as the central second difference of call prices in strike."""
    x = np.asarray(x, dtype=float)
    h = 1e-3 * x if h is None else np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    if np.any(h <= 0):
        raise ValueError("step h must be positive")
    _check_interior(curve, x, h)
    c = curve.call_price
    return _as_float((np.asarray(c(x - h)) - 2 * np.asarray(c(x)) + np.asarray(c(x + h))) / h**2)


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Sampled density; ``target`` is the mass it should carry (df or 1)."""

    grid: np.ndarray
    values: np.ndarray
    target: float | None = None

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or g.size < 2:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if np.any(g <= 0) or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be positive and strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite and non-negative")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def total_mass(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    def mass_error(self) -> float:
        if self.target is None:
            raise ValueError("density has no declared target mass")
        return abs(self.total_mass - self.target)


def density_grid_from_calls(curve: OptionCurve, margin: int = 2) -> GridDensity:
    """Breeden-Litzenberger density on the curve's own strikes (minus margins)."""
    x = curve.strikes[margin:-margin]
    h = np.minimum(1e-3 * x, 0.25 * np.min(np.diff(curve.strikes)))
    h = np.minimum(h, (x - curve.strikes[0]) / 2)
    values = np.maximum(density_from_calls(curve, x, h), 0.0)
    return GridDensity(x, values, target=curve.df)


def log_density_slope(curve: OptionCurve, x: float, h: float | None = None, check: bool = False) -> float:
    """``(ln m)'(x)`` from call prices via a five-point ratio of differences.

    With ``check=True`` the estimate is repeated at ``h/2`` and ``h/4`` and a
    ``RuntimeWarning`` is raised if the three disagree by more than 1%.
    """
    x = float(x)
    h = 1e-3 * x if h is None else float(h)
    if h <= 0:
        raise ValueError("step h must be positive")
    value = _slope_ratio(curve, x, h)
    if check:
        finer = [_slope_ratio(curve, x, h / 2), _slope_ratio(curve, x, h / 4)]
        spread = max(abs(value - f) for f in finer)
        if spread > 1e-2 * max(1.0, abs(value)):
            warnings.warn(
                f"log-density slope at x={x:.6g} not stable under h-refinement (spread {spread:.3g})",
                RuntimeWarning,
                stacklevel=2,
            )
    return value


def _slope_ratio(curve: OptionCurve, x: float, h: float) -> float:
    _check_interior(curve, np.asarray(x), np.asarray(h))
    pts = np.array([x - 2 * h, x - h, x, x + h, x + 2 * h])
    c = np.asarray(curve.call_price(pts), dtype=float)
    second = c[1] - 2 * c[2] + c[3]
    if second <= 8 * _EPS * np.max(np.abs(c)):
        raise UnreliableDensityError(
            f"call curve has no resolvable convexity at x={x:.6g} (second difference {second:.3g})"
        )
    third = -0.5 * c[0] + c[1] - c[3] + 0.5 * c[4]
    return float(third / (h * second))
