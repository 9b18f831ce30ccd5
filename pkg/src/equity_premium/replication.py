"""Static replication of smooth payoffs with vanilla options.

A twice-differentiable payoff ``g`` is priced as a bond, a forward and a strip
of out-of-the-money options struck around a pivot ``k``:

    Price(g) = g(k)*df + g'(k)*(1 - k*df) + int g''(y) O(y, k) dy

Integrals run in ``u = ln y`` with the composite trapezoid rule.  The option
strip ``O`` has a kink at the pivot whose slope jump is fixed by put-call
parity (``C' - P' = -df``), so the leading trapezoid error there is known
exactly and subtracted when the pivot sits on a grid node.  Any other pivot
splits the integral there, since the strip jumps by ``C(k) - P(k)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtri

from .market import OptionCurve, bs_option_price

TAIL_WARN_R = 3.5
TAIL_WARN_FRACTION = 1e-4


class TruncationWarning(RuntimeWarning):
    """Replication integral may be missing mass beyond the strike grid."""


@dataclass(frozen=True)
class PowerPayoffPrice:
    R: float
    price: float
    i1: float
    i2: float
    df: float
    tail_i1: float = 0.0

    @property
    def dprice_dR(self) -> float:
        R, df = self.R, self.df
        return -(df ** (1 - R)) * math.log(df) + (2 * R - 1) * self.i1 + (R * R - R) * self.i2

    @property
    def expected_return(self) -> float:
        return self.dprice_dR / self.price


def _pivot_index(strikes: np.ndarray, k: float) -> int | None:
    i = int(np.argmin(np.abs(strikes - k)))
    return i if abs(strikes[i] - k) <= 1e-12 * k else None


def _kink_step2(u: np.ndarray, i: int) -> float:
    if i == 0 or i == u.size - 1:
        return 0.0
    h = 0.5 * (u[i + 1] - u[i - 1])
    return h * h


def _atm_total_vol(curve: OptionCurve) -> float:
    """Total vol implied by the at-the-money-forward call (closed form)."""
    k = curve.forward
    call = float(curve.call_price(k)) if curve.total_vol is not None else float(
        np.interp(k, curve.strikes, curve.calls)
    )
    # ATMF call on a unit-priced underlying is 2N(s/2) - 1
    ratio = min(max(call, 1e-300), 1 - 1e-16)
    return float(2 * ndtri(0.5 * (ratio + 1)))


def _tail_estimate(curve: OptionCurve, weight: Callable[[np.ndarray], np.ndarray], k: float) -> float:
    """Log-normal proxy for ``int weight(y) O(y, k) y du`` beyond the grid."""
    s = _atm_total_vol(curve)
    if not s > 0:
        return 0.0
    u0, u1 = math.log(curve.strikes[0]), math.log(curve.strikes[-1])
    span = 12 * s + 2.0
    total = 0.0
    for a, b in ((u0 - span, u0), (u1, u1 + span)):
        u = np.linspace(a, b, 801)
        y = np.exp(u)
        o = np.where(
            y <= k,
            bs_option_price("put", y, s, curve.df),
            bs_option_price("call", y, s, curve.df),
        )
        with np.errstate(over="ignore", invalid="ignore"):
            f = weight(y) * o * y
        f = np.where(np.isfinite(f), f, 0.0)
        total += float(np.trapezoid(f, u))
    return total


def _strip_integral(
    weight: Callable[[np.ndarray], np.ndarray],
    curve: OptionCurve,
    k: float,
    log_factor: bool = False,
) -> float:
    """``int weight(y) O(y, k) [ln y] dy`` over the strike grid."""
    y = curve.strikes
    u = np.log(y)
    o = curve.otm_prices(k)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        f = weight(y) * o * y
        if log_factor:
            f = f * u
    bad = ~np.isfinite(f)
    if np.any(bad):
        warnings.warn(
            f"replication integrand non-finite at {int(bad.sum())} of {y.size} strikes; dropped",
            TruncationWarning,
            stacklevel=3,
        )
        f = np.where(bad, 0.0, f)
    i = _pivot_index(y, k)
    if i is None and y[0] < k < y[-1]:
        # off-node pivot: the strip jumps by C(k) - P(k) there, so split at k
        j = int(np.searchsorted(y, k))
        uk = math.log(k)
        wk = float(weight(np.asarray(k))) * k * (uk if log_factor else 1.0)
        left = np.append(f[:j], wk * float(curve.put_price(k)))
        right = np.insert(f[j:], 0, wk * float(curve.call_price(k)))
        return float(np.trapezoid(left, np.append(u[:j], uk)) + np.trapezoid(right, np.insert(u[j:], 0, uk)))
    total = float(np.trapezoid(f, u))
    if i is not None:
        # slope of weight*O*y in u jumps by -weight(k)*k^2*df at the pivot
        jump = float(weight(np.asarray(k))) * k * k * curve.df
        if log_factor:
            jump *= math.log(k)
        total -= _kink_step2(u, i) / 12.0 * jump
    return total


def replicate_price(
    g: Callable,
    g_prime: Callable,
    g_second: Callable,
    curve: OptionCurve,
    pivot: float | None = None,
) -> float:
    """Price a twice-differentiable payoff off the option curve.

    ``pivot`` defaults to the forward ``1/df``, where the forward term drops
    out; any other pivot uses the general form.
    """
    k = curve.forward if pivot is None else float(pivot)
    if not k > 0:
        raise ValueError("pivot must be positive")
    integral = _strip_integral(g_second, curve, k)
    price = float(g(k)) * curve.df + integral
    if pivot is not None:
        price += float(g_prime(k)) * (1.0 - k * curve.df)
    return price


def price_power_payoff(R: float, curve: OptionCurve) -> PowerPayoffPrice:
    """Price ``x**R`` by replication around ``k = 1/df``."""
    R = float(R)
    if not math.isfinite(R):
        raise ValueError("R must be finite")
    k = curve.forward
    df = curve.df

    def weight(y):
        return np.power(y, R - 2.0)

    i1 = _strip_integral(weight, curve, k)
    i2 = _strip_integral(weight, curve, k, log_factor=True)
    tail = _tail_estimate(curve, weight, k)
    if R >= TAIL_WARN_R and abs(tail) > TAIL_WARN_FRACTION * abs(i1):
        warnings.warn(
            f"power payoff R={R}: estimated tail beyond strike grid is "
            f"{abs(tail) / abs(i1):.2e} of I1",
            TruncationWarning,
            stacklevel=2,
        )
    price = df ** (1 - R) + (R * R - R) * i1
    return PowerPayoffPrice(R=R, price=price, i1=i1, i2=i2, df=df, tail_i1=tail)


def expected_return_numeric(R: float, curve: OptionCurve) -> float:
    """Investor-expected log return over the curve's horizon, ``dlnPrice(x^R)/dR``."""
    return price_power_payoff(R, curve).expected_return
