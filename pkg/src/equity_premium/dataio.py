"""CSV readers and writers for surfaces, quotes, index levels and densities.

Lines starting with ``#`` are comments.  Every file written here starts with
one comment line naming the tool version and a hash of the run config.
Floats are written with ``repr`` so files round-trip exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from datetime import date
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence, TextIO

import numpy as np

from . import __version__
from .historical import ReturnSeries
from .market import VolSurface
from .premium import PremiumQuote
from .structuring import BeliefDensity, InvestorSpec

SURFACE_COLUMNS = ("maturity_years", "strike_ratio", "vol", "df")


class InputError(ValueError):
    """Malformed input file; carries the offending path and line number."""

    def __init__(self, path, line: int | None, message: str):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


def config_hash(config: Mapping) -> str:
    blob = json.dumps(config, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def header_line(config: Mapping) -> str:
    return f"# equity_premium {__version__} config={config_hash(config)}"


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.datetime64):
        return str(value.astype("datetime64[D]"))
    return str(value)


def write_csv(target: Path | TextIO, header: str, columns: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> None:
    buf = io.StringIO()
    buf.write(header + "\n")
    for c in comments:
        buf.write(f"# {c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    if isinstance(target, (str, Path)):
        Path(target).write_text(buf.getvalue(), encoding="utf-8")
    else:
        target.write(buf.getvalue())


def _records(path: Path, required: Sequence[str]) -> Iterator[tuple[int, dict]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(path, None, str(exc)) from exc
    header = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cells = next(csv.reader([line]))
        cells = [c.strip() for c in cells]
        if header is None:
            missing = [c for c in required if c not in cells]
            if missing:
                raise InputError(path, lineno, f"header missing columns {missing}")
            header = cells
            continue
        if len(cells) != len(header):
            raise InputError(path, lineno, f"expected {len(header)} fields, got {len(cells)}")
        yield lineno, dict(zip(header, cells))
    if header is None:
        raise InputError(path, None, "no header row")


def _float(path, lineno, row, key) -> float:
    try:
        return float(row[key])
    except ValueError:
        raise InputError(path, lineno, f"{key}={row[key]!r} is not a number") from None


def _date(path, lineno, text) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise InputError(path, lineno, f"{text!r} is not an ISO date") from None


def read_vol_surface(path) -> VolSurface:
    quotes: dict[float, list[tuple[float, float]]] = {}
    dfs: dict[float, float] = {}
    for lineno, row in _records(path, SURFACE_COLUMNS):
        t, k, v, df = (_float(path, lineno, row, c) for c in SURFACE_COLUMNS)
        if t in dfs and dfs[t] != df:
            raise InputError(path, lineno, f"inconsistent df for maturity {t}")
        dfs[t] = df
        quotes.setdefault(t, []).append((k, v))
    if not quotes:
        raise InputError(path, None, "no quotes")
    mats = sorted(quotes)
    strikes, vols = [], []
    for t in mats:
        kv = sorted(quotes[t])
        strikes.append(np.array([k for k, _ in kv]))
        vols.append(np.array([v for _, v in kv]))
    try:
        return VolSurface(np.array(mats), tuple(strikes), tuple(vols), np.array([dfs[t] for t in mats]))
    except ValueError as exc:
        raise InputError(path, None, str(exc)) from exc


def write_vol_surface(path, surface: VolSurface, header: str) -> None:
    rows = []
    for t, ks, vs, df in zip(surface.maturities, surface.strikes, surface.vols, surface.discount_factors):
        rows.extend((t, k, v, df) for k, v in zip(ks, vs))
    write_csv(path, header, SURFACE_COLUMNS, rows)


def read_surfaces_dir(path) -> dict[date, VolSurface]:
    """Surfaces stored one per file, named ``YYYY-MM-DD.csv``."""
    path = Path(path)
    if not path.is_dir():
        raise InputError(path, None, "not a directory")
    out = {}
    for f in sorted(path.glob("*.csv")):
        try:
            d = date.fromisoformat(f.stem)
        except ValueError:
            continue
        out[d] = read_vol_surface(f)
    if not out:
        raise InputError(path, None, "no dated surface files")
    return out


def read_premium_quotes(path, horizon_years: float = 5.0) -> list[PremiumQuote]:
    out = []
    for lineno, row in _records(path, ("date", "premium_annual")):
        d = _date(path, lineno, row["date"])
        try:
            out.append(PremiumQuote(d, _float(path, lineno, row, "premium_annual"), horizon_years))
        except ValueError as exc:
            raise InputError(path, lineno, str(exc)) from None
    return out


def read_index(path) -> ReturnSeries:
    dates, levels = [], []
    for lineno, row in _records(path, ("date", "level")):
        dates.append(_date(path, lineno, row["date"]))
        levels.append(_float(path, lineno, row, "level"))
    try:
        return ReturnSeries(np.array(dates, dtype="datetime64[D]"), np.array(levels))
    except ValueError as exc:
        raise InputError(path, None, str(exc)) from exc


def write_index(path, series: ReturnSeries, header: str) -> None:
    write_csv(path, header, ("date", "level"), zip(series.dates, series.levels))


def read_xy(path) -> tuple[np.ndarray, np.ndarray]:
    xs, vs = [], []
    for lineno, row in _records(path, ("x", "value")):
        xs.append(_float(path, lineno, row, "x"))
        vs.append(_float(path, lineno, row, "value"))
    return np.array(xs), np.array(vs)


def write_xy(target, grid, values, header: str, comments: Sequence[str] = ()) -> None:
    write_csv(target, header, ("x", "value"), zip(grid, values), comments)


def read_investors(path) -> list[InvestorSpec]:
    """Investors file ``weight,belief_csv_path``; paths resolve against its folder."""
    path = Path(path)
    out = []
    for lineno, row in _records(path, ("weight", "belief_csv_path")):
        weight = _float(path, lineno, row, "weight")
        belief_path = Path(row["belief_csv_path"])
        if not belief_path.is_absolute():
            belief_path = path.parent / belief_path
        try:
            grid, values = read_xy(belief_path)
            out.append(InvestorSpec(weight, BeliefDensity(grid, values)))
        except (ValueError, OSError) as exc:
            raise InputError(path, lineno, str(exc)) from None
    if not out:
        raise InputError(path, None, "no investors")
    return out
