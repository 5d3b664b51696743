"""Regenerate the bundled sample market data (data/).

The dataset is a EUR-style snapshot dated 2019-12-30: a zero curve with
negative rates through year six, ATM swaption surfaces (payer and receiver)
quoted in normal vols, Bermudan strikes, and reference CMS/Bermudan values
produced by a fixed benchmark calibration (tenor-7 column, I2 start).
Everything is deterministic; rerunning reproduces the files byte-for-byte.

Run from the repository root:  python3 scripts/make_sample_data.py
"""

from __future__ import annotations

import csv
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from cirdiff.calibration import CalibrationOptions, calibrate, target_from_surface
from cirdiff.market_data import (
    CURVE_HEADER,
    SURFACE_HEADER,
    CurvePoint,
    DiscountCurve,
    SwaptionQuote,
    SwaptionSurface,
    bachelier_price,
    load_curve,
    write_curve,
    write_surface,
)
from cirdiff.model import ModelParams, ShiftedModel
from cirdiff.products import BermudanSpec, CmsSpec, RegressionBasis, cms_par_rate, lsmc_bermudan
from cirdiff.simulation import SimulationConfig, simulate

DATA_DIR = Path(__file__).resolve().parents[1] / "data"

CURVE_KNOTS = [0.0, 0.5] + list(range(1, 11)) + [12.0, 15.0, 20.0, 25.0, 30.0]

# smooth Svensson-family zero curve, rounded to 0.1 bp like a market export
NSS = dict(b0=0.019221085776086028, b1=-0.02371551477521936,
           b2=-0.01703100546612822, b3=0.0026149838896114973,
           tau1=6.843017048181558, tau2=1.1158162190089251)

SURFACE_MATURITIES = [1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0, 15.0, 20.0]
SURFACE_TENORS = [1.0, 2.0, 5.0, 7.0, 10.0]

# ATM normal vols in bps, maturities x tenors
VOLS_BPS = np.array([
    [17.0, 22.0, 33.0, 38.0, 44.0],
    [23.5, 28.0, 38.0, 42.0, 47.0],
    [30.0, 34.0, 42.5, 46.0, 50.0],
    [36.0, 39.5, 46.5, 49.0, 52.0],
    [41.0, 44.0, 49.5, 52.0, 54.0],
    [48.0, 50.0, 53.0, 55.0, 56.0],
    [54.0, 55.0, 56.0, 57.0, 57.0],
    [56.5, 56.0, 56.0, 55.5, 55.0],
    [55.0, 54.5, 54.0, 53.0, 52.0],
])

BERMUDAN_MATURITIES = [1.0, 3.0, 5.0, 7.0, 10.0]
BERMUDAN_TENORS = [2.0, 5.0, 7.0, 10.0]

CMS_CASES = [(0, 5, 5), (0, 10, 5), (0, 5, 10), (0, 10, 10), (3, 5, 5),
             (3, 5, 10), (5, 10, 5), (5, 5, 5), (5, 5, 10)]

REFERENCE_SEED = 20191130


def nss_rate(t: float) -> float:
    t = max(t, 1e-9)
    u1, u2 = t / NSS["tau1"], t / NSS["tau2"]
    f1 = (1 - math.exp(-u1)) / u1
    f2 = f1 - math.exp(-u1)
    f3 = (1 - math.exp(-u2)) / u2 - math.exp(-u2)
    return NSS["b0"] + NSS["b1"] * f1 + NSS["b2"] * f2 + NSS["b3"] * f3


def build_curve() -> DiscountCurve:
    pts = []
    for m in CURVE_KNOTS:
        r = round(nss_rate(m), 6)
        pts.append(CurvePoint(maturity=float(m), zero_rate=r, discount=math.exp(-r * m)))
    return DiscountCurve(points=tuple(pts))


def market_par_rate(curve: DiscountCurve, t0: float, tenor: int) -> tuple[float, float]:
    """Forward par rate and annuity from the market curve (annual schedule)."""
    bonds = [curve.discount(t0 + i) for i in range(tenor + 1)]
    annuity = sum(bonds[1:])
    return (bonds[0] - bonds[-1]) / annuity, annuity


def build_surfaces(curve: DiscountCurve) -> tuple[SwaptionSurface, SwaptionSurface]:
    payer, receiver = [], []
    for i, mat in enumerate(SURFACE_MATURITIES):
        for j, ten in enumerate(SURFACE_TENORS):
            fwd, annuity = market_par_rate(curve, mat, int(ten))
            strike = round(fwd, 6)
            vol = VOLS_BPS[i, j] * 1e-4
            for zeta, acc in ((1, payer), (-1, receiver)):
                price = bachelier_price(fwd, strike, vol, mat, annuity, zeta)
                acc.append(SwaptionQuote(maturity=mat, tenor=ten, strike=strike,
                                         normal_vol=vol, price=price, zeta=zeta))
    return (SwaptionSurface(quotes=tuple(payer), zeta=1),
            SwaptionSurface(quotes=tuple(receiver), zeta=-1))


def write_bermudan_strikes(curve: DiscountCurve, path: Path) -> dict:
    strikes = {}
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["maturity_years", "tenor_years", "strike"])
        for mat in BERMUDAN_MATURITIES:
            for ten in BERMUDAN_TENORS:
                fwd, _ = market_par_rate(curve, mat, int(ten))
                k = round(fwd, 6)
                strikes[(mat, ten)] = k
                w.writerow([repr(mat), repr(ten), repr(k)])
    return strikes


def main() -> None:
    DATA_DIR.mkdir(exist_ok=True)
    curve = build_curve()
    write_curve(curve, DATA_DIR / "curve_2019-12-30.csv")
    payer, receiver = build_surfaces(curve)
    write_surface(payer, DATA_DIR / "swaptions_payer_2019-12-30.csv")
    write_surface(receiver, DATA_DIR / "swaptions_receiver_2019-12-30.csv")
    strikes = write_bermudan_strikes(curve, DATA_DIR / "bermudan_strikes_2019-12-30.csv")

    # benchmark calibration for the reference values: tenor-7 column, I2 start
    target = target_from_surface(payer, tenor=7.0, maturities=[5, 7, 10, 15])
    result = calibrate(target, curve, initial="I2", options=CalibrationOptions(), seed=0)
    print(f"benchmark calibration: objective {result.objective_value:.3e}, "
          f"Pi* = {np.round(result.pi, 5)}")
    model = ShiftedModel(params=result.params, curve=curve)

    horizon = max(max(e + n - 1 + c for e, n, c in CMS_CASES),
                  max(m + t for m in BERMUDAN_MATURITIES for t in BERMUDAN_TENORS))
    config = SimulationConfig(n_paths=10_000, horizon=float(horizon), mesh=1 / 256,
                              seed=REFERENCE_SEED)
    paths = simulate(model, config)

    with (DATA_DIR / "reference_cms_2019-12-30.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["effective_years", "tenor_years", "index_years", "rate"])
        for eff, ten, idx in CMS_CASES:
            est = cms_par_rate(model, paths, CmsSpec(effective=eff, tenor=ten, index=idx))
            w.writerow([repr(float(eff)), repr(float(ten)), repr(float(idx)),
                        repr(round(est.rate, 6))])
            print(f"reference CMS({eff},{ten},{idx}) = {est.rate:.6f} +- {est.std_error:.2e}")

    with (DATA_DIR / "reference_bermudan_payer_2019-12-30.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["maturity_years", "tenor_years", "price"])
        for mat in BERMUDAN_MATURITIES:
            for ten in BERMUDAN_TENORS:
                spec = BermudanSpec(first_exercise=mat, last_payment=mat + ten,
                                    strike=strikes[(mat, ten)], zeta=-1)
                est = lsmc_bermudan(model, paths, spec, RegressionBasis(3))
                w.writerow([repr(mat), repr(ten), repr(round(est.price, 6))])
                print(f"reference Bermudan {mat:>4}x{ten:<4} K={strikes[(mat, ten)]:.4%}"
                      f"  price {est.price:.6f} +- {est.std_error:.2e}")


if __name__ == "__main__":
    main()
