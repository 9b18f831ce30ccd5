"""Command line entry point: ``equity-premium <command> ...``.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
Options may also come from a JSON file via ``--config`` (keys are option
names with underscores); explicit flags win.
"""

from __future__ import annotations

import argparse
import bisect as _bisect
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .dataio import (
    InputError,
    config_hash,
    header_line,
    read_index,
    read_investors,
    read_premium_quotes,
    read_surfaces_dir,
    read_vol_surface,
    read_xy,
    write_csv,
    write_index,
    write_vol_surface,
    write_xy,
)
from .historical import InsufficientDataError, run_experiment_grid
from .market import (
    GridDensity,
    LogNormalMarket,
    UnreliableDensityError,
    VolSurface,
    log_strike_grid,
    lognormal_density,
    option_curve_from_surface,
)
from .premium import (
    NoSolutionError,
    PremiumQuote,
    expected_return_lognormal,
    implied_r_lognormal,
    implied_r_numeric,
    implied_r_series,
)
from .replication import price_power_payoff
from .structuring import (
    BeliefDensity,
    PayoffCurve,
    avg_risk_aversion_belief,
    belief_from_payoff,
    equilibrium_market,
    growth_optimal_payoff,
    market_clearing_residual,
    payoff_from_belief,
    risk_aversion_profile,
)
from .synth import SyntheticWorldSpec, generate_world

logger = logging.getLogger("equity_premium")

EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    params: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        for key, value in self.params.items():
            if key.endswith("tol") and value is not None and not value > 0:
                raise UsageError(f"{key} must be positive")
        grid = self.params.get("grid")
        if grid is not None:
            lo, hi, n = grid
            if not 0 < lo < 1 < hi or n < 5:
                raise UsageError("grid must satisfy 0 < lo < 1 < hi with at least 5 points")
        return self

    def as_dict(self) -> dict[str, Any]:
        return {"command": self.command, **self.params}

    @property
    def digest(self) -> str:
        return config_hash(self.as_dict())

    @property
    def header(self) -> str:
        return header_line(self.as_dict())


def _grid(args) -> tuple[float, float, int]:
    lo, hi, n = args.grid
    return float(lo), float(hi), int(n)


def _emit_json(payload: dict, out: str | None, cfg: RunConfig) -> None:
    payload = {"meta": {"tool": f"equity_premium {__version__}", "config": cfg.digest}, **payload}
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _flat_surface(r: float, sigma: float, T: float) -> VolSurface:
    return VolSurface.flat(r, sigma, maturities=(T,))


# --------------------------------------------------------------------------- commands


def cmd_expected_return(args) -> int:
    if args.flat is not None:
        r, sigma, T = args.flat
        if not (sigma > 0 and T > 0):
            raise UsageError("--flat needs positive sigma and T")
        surface = _flat_surface(r, sigma, T)
    else:
        T = args.horizon
        surface = read_vol_surface(args.surface)
    mode = "R" if args.R is not None else "premium"
    cfg = RunConfig(
        "expected-return",
        {
            "horizon": T,
            "mode": mode,
            "value": args.R if mode == "R" else args.premium,
            "grid": list(_grid(args)),
            "bracket": list(args.bracket),
            "tol": args.tol,
            "r_override": args.r_override,
        },
    ).validate()

    df = surface.discount_factor(T)
    lo, hi, n = _grid(args)
    curve = option_curve_from_surface(surface, T, log_strike_grid(df, lo, hi, n))
    atmf = float(surface.implied_vol(T, 1.0))
    r_market = -math.log(df) / T
    r_ref = r_market if args.r_override is None else args.r_override
    market = LogNormalMarket(r_market * T, atmf * math.sqrt(T), df)

    payload: dict[str, Any] = {"horizon_years": T, "df": df, "atmf_vol": atmf, "risk_free_annual": r_ref}
    if mode == "R":
        pp = price_power_payoff(args.R, curve)
        er_num = pp.expected_return
        er_ln = expected_return_lognormal(args.R, market)
        prem_num = er_num / T - r_ref
        prem_ln = er_ln / T - r_ref
        payload.update(
            R=args.R,
            numeric={"ER": er_num, "premium_annual": prem_num, "price": pp.price},
            lognormal={"ER": er_ln, "premium_annual": prem_ln},
            residual=prem_num - prem_ln,
        )
    else:
        quote = PremiumQuote(date(1970, 1, 1), args.premium, T)
        try:
            num = implied_r_numeric(quote, curve, tuple(args.bracket), args.tol, args.r_override)
        except NoSolutionError as exc:
            diag = {"error": str(exc), "bracket": list(exc.bracket), "residuals": list(exc.values)}
            sys.stderr.write(json.dumps(diag) + "\n")
            return EXIT_NUMERICAL
        R_ln = implied_r_lognormal(args.premium + r_ref - r_market, atmf)
        payload.update(
            premium_annual=args.premium,
            numeric={
                "R": num.R,
                "residual": num.residual,
                "iterations": num.iterations,
                "ER": price_power_payoff(num.R, curve).expected_return,
            },
            lognormal={"R": R_ln, "ER": expected_return_lognormal(R_ln, market)},
            residual=num.R - R_ln,
        )
    _emit_json(payload, args.out, cfg)
    return 0


def cmd_implied_r_series(args) -> int:
    cfg = RunConfig(
        "implied-r-series",
        {
            "horizon": args.horizon,
            "staleness_days": args.staleness_days,
            "grid": list(_grid(args)),
            "bracket": list(args.bracket),
            "tol": args.tol,
            "r_override": args.r_override,
        },
    ).validate()
    quotes = read_premium_quotes(args.quotes, args.horizon)
    surfaces = read_surfaces_dir(args.surfaces)
    lo, hi, n = _grid(args)
    points = implied_r_series(
        quotes,
        surfaces,
        staleness_days=args.staleness_days,
        bracket=tuple(args.bracket),
        tol=args.tol,
        risk_free_rate=args.r_override,
        strike_grid=lambda df: log_strike_grid(df, lo, hi, n),
    )
    rows = [(p.date.isoformat(), p.numeric.R, p.lognormal.R, p.numeric.residual) for p in points]
    write_csv(args.out or sys.stdout, cfg.header, ("date", "R_numeric", "R_lognormal", "residual"), rows)
    return 0


def _surface_lookup(surfaces: dict[date, VolSurface], staleness_days: int):
    dates = sorted(surfaces)

    def find(when) -> VolSurface:
        when = when.item() if isinstance(when, np.datetime64) else when
        i = _bisect.bisect_right(dates, when) - 1
        if i < 0 or when - dates[i] > timedelta(days=staleness_days):
            raise InsufficientDataError(f"no surface on or before {when} within {staleness_days} days")
        return surfaces[dates[i]]

    return find


def cmd_historical_r(args) -> int:
    cfg = RunConfig(
        "historical-r",
        {
            "period": args.period,
            "window": args.window,
            "n_offsets": args.n_offsets,
            "bdays_per_year": args.bdays_per_year,
            "staleness_days": args.staleness_days,
            "grid": list(_grid(args)),
        },
    ).validate()
    series = read_index(args.index)
    find = _surface_lookup(read_surfaces_dir(args.surfaces), args.staleness_days)
    tau = args.period / args.bdays_per_year
    lo, hi, n = _grid(args)

    def curve_at(when):
        surface = find(when)
        df = surface.discount_factor(tau)
        return option_curve_from_surface(surface, tau, log_strike_grid(df, lo, hi, n))

    grid = run_experiment_grid(
        series,
        curve_at,
        period_business_days=args.period,
        n_offsets=args.n_offsets,
        window_periods=args.window,
        business_days_per_year=args.bdays_per_year,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    full_rows = [(run.offset, run.full_sample.r_avg, run.annualized_premium) for run in grid.runs]
    moving_rows = [(run.offset, d, value) for run in grid.runs for d, value in run.moving]
    full_path = out_dir / "full_sample.csv"
    moving_path = out_dir / "moving_average.csv"
    write_csv(full_path, cfg.header, ("offset", "full_sample_R", "annualized_premium"), full_rows)
    write_csv(moving_path, cfg.header, ("offset", "window_end_date", "moving_R"), moving_rows)
    _emit_json(
        {
            "offsets_run": len(grid.runs),
            "offsets_requested": grid.requested_offsets,
            "mean_full_sample_R": float(np.mean(grid.full_sample_values)),
            "premium_range": [float(grid.premiums.min()), float(grid.premiums.max())],
            "files": [str(full_path), str(moving_path)],
        },
        None,
        cfg,
    )
    return 0


def cmd_equilibrium(args) -> int:
    cfg = RunConfig("equilibrium", {"df": args.df}).validate()
    if not 0 < args.df:
        raise UsageError("--df must be positive")
    investors = read_investors(args.investors)
    m = equilibrium_market(investors, args.df)
    clearing = float(np.max(np.abs(market_clearing_residual(investors, m, args.df))))
    diag = {"integral": m.total_mass, "df": args.df, "abs_error": m.mass_error(), "clearing_residual": clearing}
    comment = " ".join(f"{k}={v!r}" for k, v in diag.items())
    write_xy(args.out or sys.stdout, m.grid, m.values, cfg.header, [comment])
    sys.stderr.write(json.dumps(diag, sort_keys=True) + "\n")
    return 0


def _market_on(grid: np.ndarray, args) -> GridDensity:
    if args.market:
        mx, mv = read_xy(args.market)
        return GridDensity(mx, mv)
    r, sigma, T = args.flat
    market = LogNormalMarket.from_annual(r, sigma, T)
    return GridDensity(grid, lognormal_density(market, grid), target=market.df)


def cmd_structuring(args) -> int:
    cfg = RunConfig("structuring", {"mode": args.mode, "R": args.R}).validate()
    needs_payoff = args.mode == "belief-from-payoff"
    source = args.payoff if needs_payoff else args.belief
    if source is None:
        raise UsageError(f"--{'payoff' if needs_payoff else 'belief'} is required for mode {args.mode}")
    if (args.market is None) == (args.flat is None):
        raise UsageError("give exactly one of --market or --flat")
    if args.mode in ("payoff-from-belief", "belief-from-payoff") and args.R is None:
        raise UsageError(f"--R is required for mode {args.mode}")
    grid, values = read_xy(source)
    m = _market_on(grid, args)
    out = args.out or sys.stdout

    if args.mode == "belief-from-payoff":
        F = PayoffCurve(grid, values, budget=float(np.trapezoid(values * np.interp(grid, m.grid, m.values), grid)))
        b = belief_from_payoff(F, args.R, m)
        write_xy(out, b.grid, b.values, cfg.header)
        return 0
    b = BeliefDensity(grid, values)
    if args.mode == "growth-optimal":
        F = growth_optimal_payoff(b, m)
        write_xy(out, F.grid, F.values, cfg.header, [f"budget={F.budget!r}"])
    elif args.mode == "payoff-from-belief":
        F = payoff_from_belief(b, m, args.R)
        write_xy(out, F.grid, F.values, cfg.header, [f"budget={F.budget!r}"])
    elif args.mode == "profile":
        prof = risk_aversion_profile(b, m)
        ok = prof.valid
        write_xy(out, prof.grid[ok], prof.values[ok], cfg.header)
    else:
        _emit_json({"avg_R": avg_risk_aversion_belief(b, m)}, args.out, cfg)
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticWorldSpec(
        years=args.years,
        r=args.r,
        sigma=args.sigma,
        R=args.R,
        business_days_per_year=args.bdays_per_year,
        seed=args.seed,
        start=args.start,
        target_premium=args.target_premium,
    )
    cfg = RunConfig("synth", {k: getattr(spec, k) for k in spec.__dataclass_fields__}).validate()
    world = generate_world(spec)
    out_dir = Path(args.out_dir)
    surf_dir = out_dir / "surfaces"
    surf_dir.mkdir(parents=True, exist_ok=True)
    write_index(out_dir / "index.csv", world.series, cfg.header)
    for d in world.series.dates:
        write_vol_surface(surf_dir / f"{d}.csv", world.surface, cfg.header)
    _emit_json(
        {
            "days": len(world.series),
            "expected_premium_annual": spec.expected_premium,
            "index": str(out_dir / "index.csv"),
            "surfaces": str(surf_dir),
        },
        None,
        cfg,
    )
    return 0


# --------------------------------------------------------------------------- parser


def _add_grid(p, lo=0.02, hi=20.0, n=2001):
    p.add_argument("--grid", nargs=3, type=float, metavar=("LO", "HI", "N"), default=[lo, hi, n],
                   help="strike grid as moneyness bounds and point count")


def _add_solver(p):
    p.add_argument("--bracket", nargs=2, type=float, metavar=("LO", "HI"), default=[-5.0, 15.0])
    p.add_argument("--tol", type=float, default=1e-8, help="premium residual tolerance")
    p.add_argument("--r-override", type=float, default=None,
                   help="annual risk-free rate premiums are quoted against (default: from the surface df)")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="equity-premium", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"equity_premium {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}

    p = sub.add_parser("expected-return", help="expected return / implied R at one horizon")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--surface", help="vol surface CSV")
    src.add_argument("--flat", nargs=3, type=float, metavar=("R_ANNUAL", "SIGMA_ANNUAL", "T"))
    p.add_argument("--horizon", type=float, default=5.0, help="years (surface input only)")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--R", type=float)
    mode.add_argument("--premium", type=float, help="annualized compound premium")
    _add_grid(p)
    _add_solver(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_expected_return)
    subs["expected-return"] = p

    p = sub.add_parser("implied-r-series", help="implied R for dated premium quotes")
    p.add_argument("--quotes", required=True)
    p.add_argument("--surfaces", required=True, help="directory of YYYY-MM-DD.csv surfaces")
    p.add_argument("--horizon", type=float, default=5.0)
    p.add_argument("--staleness-days", type=int, default=7)
    _add_grid(p)
    _add_solver(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_implied_r_series)
    subs["implied-r-series"] = p

    p = sub.add_parser("historical-r", help="realized risk aversion over offsets and windows")
    p.add_argument("--index", required=True)
    p.add_argument("--surfaces", required=True)
    p.add_argument("--period", type=int, default=42, help="business days per period")
    p.add_argument("--window", type=int, default=60, help="moving-average window in periods")
    p.add_argument("--n-offsets", type=int, default=42)
    p.add_argument("--bdays-per-year", type=int, default=252)
    p.add_argument("--staleness-days", type=int, default=7)
    _add_grid(p, 0.1, 10.0, 401)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_historical_r)
    subs["historical-r"] = p

    p = sub.add_parser("equilibrium", help="market density clearing a set of investors")
    p.add_argument("--investors", required=True, help="CSV weight,belief_csv_path")
    p.add_argument("--df", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_equilibrium)
    subs["equilibrium"] = p

    p = sub.add_parser("structuring", help="belief / payoff / risk-aversion conversions")
    p.add_argument("--mode", required=True,
                   choices=["growth-optimal", "payoff-from-belief", "belief-from-payoff", "profile", "avg-r"])
    p.add_argument("--belief")
    p.add_argument("--payoff")
    p.add_argument("--market", help="market density CSV x,value")
    p.add_argument("--flat", nargs=3, type=float, metavar=("R_ANNUAL", "SIGMA_ANNUAL", "T"))
    p.add_argument("--R", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_structuring)
    subs["structuring"] = p

    p = sub.add_parser("synth", help="seeded flat-vol world: index CSV + surfaces dir")
    p.add_argument("--years", type=float, default=15.0)
    p.add_argument("--r", type=float, default=0.02)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--R", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bdays-per-year", type=int, default=252)
    p.add_argument("--start", default="2000-05-17")
    p.add_argument("--target-premium", type=float, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)
    subs["synth"] = p

    for p in subs.values():
        p.add_argument("--config", help="JSON file of option defaults")
    return parser, subs


def main(argv=None) -> int:
    parser, subs = build_parser()
    try:
        return _run(parser, subs, argv)
    except SystemExit as exc:
        # argparse exits on --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE


def _run(parser, subs, argv) -> int:
    args = parser.parse_args(argv)
    if args.config:
        try:
            defaults = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            sys.stderr.write(f"equity-premium: cannot read config {args.config}: {exc}\n")
            return EXIT_USAGE
        subs[args.command].set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()})
        args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InputError) as exc:
        sys.stderr.write(f"equity-premium: {exc}\n")
        return EXIT_USAGE
    except (NoSolutionError, InsufficientDataError, UnreliableDensityError) as exc:
        sys.stderr.write(f"equity-premium: numerical failure: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
