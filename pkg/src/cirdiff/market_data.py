"""Market data: zero curve and swaption surface ingestion, validation, pricing quotes.

File formats
------------
Curve CSV, header ``maturity_years,zero_rate,discount`` (UTF-8, decimal point).
Surface CSV, header ``maturity_years,tenor_years,strike,normal_vol_bps,price``,
one file per swap type (payer/receiver).  Both loaders also accept a JSON
object form: ``{"points": [...]}`` for curves and
``{"swap_type": "payer", "quotes": [...]}`` for surfaces, with the same field
names as the CSV headers.

The curve interpolates the continuously compounded zero rate with a natural
cubic spline; discounts are exp(-R(t) * t).  No extrapolation beyond the last
knot — longer-dated requests raise ExtrapolationError.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.stats import norm

__all__ = [
    "CurvePoint",
    "DiscountCurve",
    "SwaptionQuote",
    "SwaptionSurface",
    "CurveError",
    "ExtrapolationError",
    "load_curve",
    "write_curve",
    "load_surface",
    "write_surface",
    "bachelier_price",
]

CURVE_HEADER = ["maturity_years", "zero_rate", "discount"]
SURFACE_HEADER = ["maturity_years", "tenor_years", "strike", "normal_vol_bps", "price"]

_DISCOUNT_TOL = 1e-10


class CurveError(ValueError):
    """Malformed or inconsistent market data."""


class ExtrapolationError(CurveError):
    """Request beyond the last curve knot."""


@dataclass(frozen=True)
class CurvePoint:
    maturity: float
    zero_rate: float
    discount: float

    def __post_init__(self) -> None:
        if self.maturity < 0.0:
            raise CurveError(f"maturity must be >= 0, got {self.maturity}")
        if self.discount <= 0.0:
            raise CurveError(f"discount must be positive, got {self.discount}")
        implied = math.exp(-self.zero_rate * self.maturity)
        if abs(implied - self.discount) > _DISCOUNT_TOL:
            raise CurveError(
                f"discount {self.discount!r} inconsistent with zero rate "
                f"{self.zero_rate!r} at maturity {self.maturity!r} "
                f"(exp(-r*t) = {implied!r})"
            )


@dataclass(frozen=True, eq=False)
class DiscountCurve:
    """Market zero curve P_M(0, .) with natural cubic spline interpolation.

    Immutable after construction; safe to share across concurrent pricers.
    """

    points: tuple[CurvePoint, ...]

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise CurveError("curve needs at least two points")
        mats = np.array([p.maturity for p in self.points])
        if np.any(np.diff(mats) <= 0.0):
            raise CurveError("maturities must be strictly increasing")
        rates = np.array([p.zero_rate for p in self.points])
        spline = CubicSpline(mats, rates, bc_type="natural")
        object.__setattr__(self, "_spline", spline)
        object.__setattr__(self, "_mats", mats)
        object.__setattr__(self, "_rates", rates)
        object.__setattr__(self, "_last", float(mats[-1]))

    @property
    def last_maturity(self) -> float:
        return self._last

    def zero_rate(self, t):
        """Spline-interpolated continuously compounded zero rate R(t); exact at knots."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0):
            raise CurveError("t must be non-negative")
        if np.any(t > self._last + 1e-12):
            raise ExtrapolationError(
                f"t = {float(np.max(t)):g} beyond last curve knot {self._last:g}"
            )
        out = np.asarray(self._spline(np.minimum(t, self._last)))
        idx = np.searchsorted(self._mats, t)
        idx = np.minimum(idx, self._mats.size - 1)
        at_knot = self._mats[idx] == t
        out = np.where(at_knot, self._rates[idx], out)
        return out if out.ndim else float(out)

    def discount(self, t):
        """P_M(0, t) = exp(-R(t) * t); exact at knots, 1.0 at t = 0."""
        if np.ndim(t) == 0:
            return math.exp(-self.zero_rate(float(t)) * float(t))
        t = np.asarray(t, dtype=float)
        return np.exp(-self.zero_rate(t) * t)


@dataclass(frozen=True)
class SwaptionQuote:
    maturity: float
    tenor: float
    strike: float
    normal_vol: float  # decimal, e.g. 0.0050 for 50 bps
    price: float
    zeta: int  # +1 payer, -1 receiver

    def __post_init__(self) -> None:
        if self.maturity <= 0.0 or self.tenor <= 0.0:
            raise CurveError(f"maturity and tenor must be positive, got "
                             f"({self.maturity}, {self.tenor})")
        if self.normal_vol < 0.0 or self.price < 0.0:
            raise CurveError("normal_vol and price must be non-negative")
        if self.zeta not in (1, -1):
            raise CurveError(f"zeta must be +1 or -1, got {self.zeta}")


@dataclass(frozen=True, eq=False)
class SwaptionSurface:
    """Grid of swaption quotes indexed by (maturity, tenor); annual payments."""

    quotes: tuple[SwaptionQuote, ...]
    zeta: int

    def __post_init__(self) -> None:
        keys = [(q.maturity, q.tenor) for q in self.quotes]
        if len(set(keys)) != len(keys):
            raise CurveError("duplicate (maturity, tenor) entries in surface")
        if any(q.zeta != self.zeta for q in self.quotes):
            raise CurveError("all quotes in a surface must share the swap type")
        object.__setattr__(self, "_by_key", {k: q for k, q in zip(keys, self.quotes)})

    def maturities(self) -> list[float]:
        return sorted({q.maturity for q in self.quotes})

    def tenors(self) -> list[float]:
        return sorted({q.tenor for q in self.quotes})

    def quote(self, maturity: float, tenor: float) -> SwaptionQuote:
        try:
            return self._by_key[(maturity, tenor)]
        except KeyError:
            raise KeyError(f"no quote at maturity {maturity}, tenor {tenor}") from None

    def column(self, tenor: float, maturities=None) -> list[SwaptionQuote]:
        """All quotes of one tenor, optionally restricted to given maturities."""
        out = [q for q in self.quotes if q.tenor == tenor]
        if maturities is not None:
            wanted = set(float(m) for m in maturities)
            out = [q for q in out if q.maturity in wanted]
        return sorted(out, key=lambda q: q.maturity)


def _parse_float(row: dict, key: str, path, line: int) -> float:
    raw = row.get(key)
    if raw is None or raw == "":
        raise CurveError(f"{path}:{line}: missing column {key!r}")
    try:
        return float(raw)
    except ValueError:
        raise CurveError(f"{path}:{line}: cannot parse {key}={raw!r} as a number") from None


def load_curve(path) -> DiscountCurve:
    """Load a zero curve from CSV or JSON; validates rates/discount consistency."""
    path = Path(path)
    if not path.exists():
        raise CurveError(f"curve file not found: {path}")
    if path.suffix.lower() == ".json":
        rows = json.loads(path.read_text())["points"]
        entries = list(enumerate(rows, start=1))
    else:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != CURVE_HEADER:
                raise CurveError(
                    f"{path}: expected header {','.join(CURVE_HEADER)}, "
                    f"got {reader.fieldnames}"
                )
            entries = [(i, row) for i, row in enumerate(reader, start=2)]
    points = []
    for line, row in entries:
        try:
            points.append(
                CurvePoint(
                    maturity=_parse_float(row, "maturity_years", path, line),
                    zero_rate=_parse_float(row, "zero_rate", path, line),
                    discount=_parse_float(row, "discount", path, line),
                )
            )
        except CurveError as exc:
            raise CurveError(f"{path}:{line}: {exc}") from None
    return DiscountCurve(points=tuple(points))


def write_curve(curve: DiscountCurve, path) -> None:
    """Write a curve back to CSV with full precision (round-trips bit-for-bit)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_HEADER)
        for p in curve.points:
            writer.writerow([repr(float(p.maturity)), repr(float(p.zero_rate)),
                             repr(float(p.discount))])


def _zeta_of(swap_type: str) -> int:
    st = swap_type.lower()
    if st in ("payer", "+1", "1"):
        return 1
    if st in ("receiver", "-1"):
        return -1
    raise CurveError(f"unknown swap type {swap_type!r}")


def load_surface(path, swap_type: str = "payer") -> SwaptionSurface:
    """Load a one-swap-type surface from CSV or JSON; vols quoted in bps."""
    path = Path(path)
    if not path.exists():
        raise CurveError(f"surface file not found: {path}")
    zeta = _zeta_of(swap_type)
    if path.suffix.lower() == ".json":
        obj = json.loads(path.read_text())
        if "swap_type" in obj:
            zeta = _zeta_of(obj["swap_type"])
        entries = list(enumerate(obj["quotes"], start=1))
    else:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != SURFACE_HEADER:
                raise CurveError(
                    f"{path}: expected header {','.join(SURFACE_HEADER)}, "
                    f"got {reader.fieldnames}"
                )
            entries = [(i, row) for i, row in enumerate(reader, start=2)]
    quotes = []
    for line, row in entries:
        try:
            quotes.append(
                SwaptionQuote(
                    maturity=_parse_float(row, "maturity_years", path, line),
                    tenor=_parse_float(row, "tenor_years", path, line),
                    strike=_parse_float(row, "strike", path, line),
                    normal_vol=_parse_float(row, "normal_vol_bps", path, line) * 1e-4,
                    price=_parse_float(row, "price", path, line),
                    zeta=zeta,
                )
            )
        except CurveError as exc:
            raise CurveError(f"{path}:{line}: {exc}") from None
    return SwaptionSurface(quotes=tuple(quotes), zeta=zeta)


def write_surface(surface: SwaptionSurface, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SURFACE_HEADER)
        for q in sorted(surface.quotes, key=lambda q: (q.tenor, q.maturity)):
            writer.writerow(
                [repr(float(q.maturity)), repr(float(q.tenor)), repr(float(q.strike)),
                 repr(float(q.normal_vol * 1e4)), repr(float(q.price))]
            )


def bachelier_price(
    forward: float,
    strike: float,
    normal_vol: float,
    expiry: float,
    annuity: float,
    zeta: int = 1,
) -> float:
    """Normal-model swaption price per unit notional.

    price = annuity * [zeta*(F-K)*N(zeta*d) + sigma*sqrt(T)*n(d)],
    d = (F-K)/(sigma*sqrt(T)); the zero-vol limit is the intrinsic value.
    """
    if expiry <= 0.0:
        raise ValueError("expiry must be positive")
    if annuity <= 0.0:
        raise ValueError("annuity must be positive")
    if normal_vol < 0.0:
        raise ValueError("normal_vol must be non-negative")
    if zeta not in (1, -1):
        raise ValueError("zeta must be +1 or -1")
    stdev = normal_vol * math.sqrt(expiry)
    if stdev == 0.0:
        return annuity * max(zeta * (forward - strike), 0.0)
    d = (forward - strike) / stdev
    return annuity * (zeta * (forward - strike) * norm.cdf(zeta * d) + stdev * norm.pdf(d))
