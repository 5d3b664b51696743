"""Batch command-line frontend.

Subcommands: calibrate, price, cms, bermudan, simulate.  Every command is a
pure function of (input files, config, seed): machine-readable outputs land in
--out with full precision and no volatile fields, so identical invocations
produce byte-identical files.  Logs and human-readable summaries (3 significant
digits) go to stderr.

Options come from an optional JSON config file plus command-line flags; flags
win.  Exit codes: 0 ok, 2 input/usage error, 3 numerical non-convergence
(results still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .calibration import (
    CalibrationOptions,
    CalibrationResult,
    calibrate,
    target_from_surface,
)
from .gram_charlier import PricingError, Schedule, SwapSpec, gc_price
from .market_data import CurveError, load_curve, load_surface
from .model import ModelParams, ParameterError, ShiftedModel
from .products import (
    BermudanSpec,
    CmsSpec,
    RegressionBasis,
    cms_par_rate,
    lsmc_bermudan,
)
from .simulation import SimulationConfig, mc_swaption, mc_zcb, simulate

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NONCONVERGED = 3


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _sig3(x: float) -> str:
    return f"{x:.3g}"


class CliError(Exception):
    """Input/usage error; maps to exit code 2."""


def _load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise CliError(f"config file not found: {p}")
    try:
        obj = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"config {p} is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise CliError(f"config {p} must be a JSON object")
    return obj


def _merged(args: argparse.Namespace, config: dict, key: str, default=None):
    """Flag value if given, else config value, else default."""
    val = getattr(args, key.replace("-", "_"), None)
    if val is not None:
        return val
    return config.get(key, default)


def _require(value, name: str):
    if value is None:
        raise CliError(f"missing required option --{name}")
    return value


def _out_dir(args, config) -> Path:
    out = Path(_merged(args, config, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_orders(raw) -> tuple[int, ...]:
    if raw is None:
        return (3, 5, 7)
    if isinstance(raw, (list, tuple)):
        return tuple(int(v) for v in raw)
    return tuple(int(v) for v in str(raw).split(","))


def _parse_floats(raw) -> "list[float] | None":
    if raw is None:
        return None
    if isinstance(raw, (list, tuple)):
        return [float(v) for v in raw]
    return [float(v) for v in str(raw).split(",")]


def _load_params(path) -> ModelParams:
    p = Path(path)
    if not p.exists():
        raise CliError(f"params file not found: {p}")
    obj = json.loads(p.read_text())
    if "pi" not in obj:
        raise CliError(f"params file {p} has no 'pi' field")
    try:
        return ModelParams(pi=tuple(float(v) for v in obj["pi"]))
    except ParameterError as exc:
        raise CliError(f"invalid parameters in {p}: {exc}") from None


def _sim_config(args, config, horizon: float, readouts=None) -> SimulationConfig:
    steps_per_year = int(_merged(args, config, "mesh", 256))
    if steps_per_year < 1:
        raise CliError("--mesh (steps per year) must be >= 1")
    return SimulationConfig(
        n_paths=int(_merged(args, config, "paths", 10_000)),
        horizon=float(horizon),
        mesh=1.0 / steps_per_year,
        seed=int(_merged(args, config, "seed", 0)),
        readout_times=readouts,
    )


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])


def _select_quotes(args, config, surface):
    diagonal_raw = _merged(args, config, "diagonal")
    tenor = _merged(args, config, "tenor")
    if diagonal_raw is not None:
        if isinstance(diagonal_raw, str):
            diagonal = [tuple(float(v) for v in pair.split("x")) for pair in diagonal_raw.split(",")]
        else:
            diagonal = [tuple(float(v) for v in pair) for pair in diagonal_raw]
        return [surface.quote(m, t) for m, t in diagonal]
    if tenor is None:
        raise CliError("select a target: --tenor (with --maturities) or --diagonal")
    maturities = _parse_floats(_merged(args, config, "maturities"))
    quotes = surface.column(float(tenor), maturities)
    if bool(_merged(args, config, "drop-last-maturity", False)) and len(quotes) > 1:
        quotes = quotes[:-1]
    if not quotes:
        raise CliError("target selection matched no quotes")
    return quotes


def _calibration_target(args, config, surface):
    from cirdiff.calibration import CalibrationTarget

    orders = tuple(L for L in _parse_orders(_merged(args, config, "orders")) if L >= 3)
    if not orders:
        orders = (3, 5, 7)
    return CalibrationTarget(
        quotes=tuple(_select_quotes(args, config, surface)),
        orders=orders,
        zeta=surface.zeta,
    )


def _run_calibration(args, config) -> tuple[CalibrationResult, object, object]:
    curve = load_curve(_require(_merged(args, config, "curve"), "curve"))
    swap_type = str(_merged(args, config, "swap-type", "payer"))
    surface = load_surface(_require(_merged(args, config, "surface"), "surface"), swap_type)
    target = _calibration_target(args, config, surface)
    initial = _merged(args, config, "initial", "I1")
    if isinstance(initial, str) and initial.upper() not in ("I1", "I2"):
        initial = _parse_floats(initial)
    options = CalibrationOptions(
        max_evaluations=int(_merged(args, config, "max-evals", 5000)),
        extra_starts=int(_merged(args, config, "extra-starts", 0)),
        threads=int(_merged(args, config, "threads", 1)),
    )
    seed = int(_merged(args, config, "seed", 0))
    result = calibrate(target, curve, initial=initial, options=options, seed=seed)
    return result, curve, target


def _serialize_calibration(result: CalibrationResult, target) -> dict:
    # wall time deliberately omitted: outputs must be reproducible byte-for-byte
    return {
        "pi": list(result.pi),
        "objective_value": result.objective_value,
        "iterations": result.iterations,
        "n_evaluations": result.n_evaluations,
        "converged": result.converged,
        "start_label": result.start_label,
        "orders": list(target.orders),
        "swap_type": "payer" if target.zeta == 1 else "receiver",
        "quotes": [
            {"maturity_years": q.maturity, "tenor_years": q.tenor, "strike": q.strike}
            for q in target.quotes
        ],
    }


def cmd_calibrate(args, config) -> int:
    result, _curve, target = _run_calibration(args, config)
    out = _out_dir(args, config)
    payload = _serialize_calibration(result, target)
    (out / "calibration.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    rows = []
    for q, errs in zip(target.quotes, result.per_quote_rel_errors):
        for order, err in zip(target.orders, errs):
            rows.append([q.maturity, q.tenor, q.strike, float(order), err])
    _write_csv(
        out / "calibration_errors.csv",
        ["maturity_years", "tenor_years", "strike", "gc_order", "relative_error"],
        rows,
    )
    _log(
        f"calibrated {len(target.quotes)} quotes: objective {_sig3(result.objective_value)}, "
        f"{result.n_evaluations} evaluations, wall time {result.wall_time_s:.1f}s"
    )
    _log(f"Pi* = [{', '.join(_sig3(v) for v in result.pi)}]")
    if not result.converged:
        _log("warning: optimizer did not converge; best-so-far result written")
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_price(args, config) -> int:
    curve = load_curve(_require(_merged(args, config, "curve"), "curve"))
    swap_type = str(_merged(args, config, "swap-type", "payer"))
    surface = load_surface(_require(_merged(args, config, "surface"), "surface"), swap_type)
    zeta = surface.zeta
    params_path = _merged(args, config, "params")
    exit_code = EXIT_OK
    if params_path is not None:
        params = _load_params(params_path)
    else:
        result, _, _ = _run_calibration(args, config)
        params = result.params
        if not result.converged:
            exit_code = EXIT_NONCONVERGED
        _log(f"inline calibration objective {_sig3(result.objective_value)}")
    model = ShiftedModel(params=params, curve=curve)

    quotes = _select_quotes(args, config, surface)
    orders = tuple(sorted(set(_parse_orders(_merged(args, config, "orders")))))
    with_mc = bool(_merged(args, config, "mc", False))

    paths = None
    if with_mc:
        horizon = max(q.maturity for q in quotes)
        cfg = _sim_config(args, config, horizon)
        paths = simulate(model, cfg)

    header = ["maturity_years", "tenor_years", "strike", "market_price"]
    header += [f"gc{L}" for L in orders]
    if with_mc:
        header += ["mc_price", "mc_se"] + [f"abs_mc_minus_gc{L}" for L in orders]
    rows = []
    abs_errs = {L: [] for L in orders}
    abs_mkt = []
    for q in quotes:
        spec = SwapSpec(
            schedule=Schedule.annual(q.maturity, int(round(q.tenor))),
            fixed_rate=q.strike,
            zeta=zeta,
        )
        try:
            prices = gc_price(model, spec, 0.0, orders)
        except PricingError as exc:
            raise CliError(f"Gram-Charlier pricing failed at Pi: {exc}") from None
        row = [q.maturity, q.tenor, q.strike, q.price] + [prices[L] for L in orders]
        if with_mc:
            est = mc_swaption(paths, model, spec)
            row += [est.value, est.std_error]
            row += [abs(est.value - prices[L]) for L in orders]
            for L in orders:
                abs_errs[L].append(abs(est.value - prices[L]))
            abs_mkt.append(abs(est.value - q.price))
        rows.append(row)
    out = _out_dir(args, config)
    _write_csv(out / "prices.csv", header, rows)
    if with_mc:
        summary = [[f"mc_minus_gc{L}", float(np.mean(abs_errs[L]))] for L in orders]
        summary.append(["mc_minus_market", float(np.mean(abs_mkt))])
        _write_csv(out / "price_summary.csv", ["comparison", "average_abs_error"], summary)
        for name, val in summary:
            _log(f"{name}: {_sig3(val)}")
    _log(f"priced {len(rows)} swaptions at orders {list(orders)}")
    return exit_code


def _parse_cms_specs(raw) -> list[tuple[float, int, int]]:
    if raw is None:
        raise CliError("missing --specs (e.g. '0x5x5,3x5x10') or config 'specs'")
    if isinstance(raw, str):
        items = [tuple(part.split("x")) for part in raw.split(",")]
    else:
        items = [tuple(row) for row in raw]
    return [(float(e), int(t), int(c)) for e, t, c in items]


def cmd_cms(args, config) -> int:
    curve = load_curve(_require(_merged(args, config, "curve"), "curve"))
    params = _load_params(_require(_merged(args, config, "params"), "params"))
    model = ShiftedModel(params=params, curve=curve)
    try:
        specs = [CmsSpec(effective=e, tenor=t, index=c) for e, t, c in
                 _parse_cms_specs(_merged(args, config, "specs"))]
    except ValueError as exc:
        raise CliError(str(exc)) from None
    reference = {}
    ref_path = _merged(args, config, "reference")
    if ref_path is not None:
        with Path(ref_path).open(newline="") as fh:
            for row in csv.DictReader(fh):
                key = (float(row["effective_years"]), int(float(row["tenor_years"])),
                       int(float(row["index_years"])))
                reference[key] = float(row["rate"])
    horizon = max(s.last_fixing_end for s in specs)
    cfg = _sim_config(args, config, horizon)
    paths = simulate(model, cfg)
    rows = []
    for s in specs:
        est = cms_par_rate(model, paths, s)
        key = (s.effective, s.tenor, s.index)
        ref = reference.get(key)
        row = [s.effective, float(s.tenor), float(s.index), est.rate, est.std_error]
        row += [ref, abs(est.rate - ref)] if ref is not None else ["", ""]
        rows.append(row)
        ref_txt = f" ref {_sig3(ref)} |err| {_sig3(abs(est.rate - ref))}" if ref is not None else ""
        _log(f"CMS({s.effective:g},{s.tenor},{s.index}): rate {_sig3(est.rate)} "
             f"se {_sig3(est.std_error)}{ref_txt}")
    out = _out_dir(args, config)
    _write_csv(
        out / "cms.csv",
        ["effective_years", "tenor_years", "index_years", "model_rate", "model_se",
         "reference_rate", "abs_error"],
        rows,
    )
    return EXIT_OK


def cmd_bermudan(args, config) -> int:
    curve = load_curve(_require(_merged(args, config, "curve"), "curve"))
    params = _load_params(_require(_merged(args, config, "params"), "params"))
    model = ShiftedModel(params=params, curve=curve)
    strikes_path = _require(_merged(args, config, "strikes"), "strikes")
    grid = []
    with Path(strikes_path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            grid.append((float(row["maturity_years"]), float(row["tenor_years"]),
                         float(row["strike"])))
    if not grid:
        raise CliError(f"no strikes in {strikes_path}")
    reference = {}
    ref_path = _merged(args, config, "reference")
    if ref_path is not None:
        with Path(ref_path).open(newline="") as fh:
            for row in csv.DictReader(fh):
                reference[(float(row["maturity_years"]), float(row["tenor_years"]))] = float(
                    row["price"]
                )
    # market payer/receiver maps to the payoff (zeta (K - R))^+ with zeta = -1/+1
    swap_type = str(_merged(args, config, "swap-type", "payer"))
    zeta = -1 if swap_type == "payer" else 1
    regress_all = bool(_merged(args, config, "regress-all", False))
    degree = int(_merged(args, config, "degree", 3))
    horizon = max(m + t for m, t, _ in grid)
    cfg = _sim_config(args, config, horizon)
    paths = simulate(model, cfg)
    rows = []
    for mat, ten, strike in grid:
        spec = BermudanSpec(first_exercise=mat, last_payment=mat + ten, strike=strike, zeta=zeta)
        est = lsmc_bermudan(model, paths, spec, RegressionBasis(degree), regress_all=regress_all)
        ref = reference.get((mat, ten))
        row = [mat, ten, strike, est.price, est.std_error]
        row += [ref, abs(est.price - ref)] if ref is not None else ["", ""]
        row += ["1" if est.rank_deficient else "0"]
        rows.append(row)
        ref_txt = f" ref {_sig3(ref)} |err| {_sig3(abs(est.price - ref))}" if ref is not None else ""
        _log(f"bermudan {mat:g}x{ten:g} K {_sig3(strike)}: price {_sig3(est.price)} "
             f"se {_sig3(est.std_error)}{ref_txt}")
    out = _out_dir(args, config)
    _write_csv(
        out / "bermudan.csv",
        ["maturity_years", "tenor_years", "strike", "model_price", "model_se",
         "reference_price", "abs_error", "rank_deficient"],
        rows,
    )
    _log(f"payoff convention: (zeta*(K-R))^+ with zeta={zeta} (market {swap_type})")
    return EXIT_OK


def cmd_simulate(args, config) -> int:
    curve = load_curve(_require(_merged(args, config, "curve"), "curve"))
    params = _load_params(_require(_merged(args, config, "params"), "params"))
    model = ShiftedModel(params=params, curve=curve)
    horizon = float(_require(_merged(args, config, "horizon"), "horizon"))
    cfg = _sim_config(args, config, horizon)
    paths = simulate(model, cfg)
    rows = []
    for t in paths.times:
        est = mc_zcb(paths, model, float(t))
        rows.append([float(t), est.value, est.std_error, model.zcb0(float(t))])
    out = _out_dir(args, config)
    _write_csv(
        out / "simulation_zcb.csv",
        ["t_years", "mc_zcb", "mc_se", "closed_form_zcb"],
        rows,
    )
    if bool(_merged(args, config, "dump", False)):
        r = paths.short_rate()
        for name, arr in (("x", paths.x), ("y", paths.y), ("r", r),
                          ("discount", paths.discount)):
            header = [f"t_{t:g}" for t in paths.times]
            _write_csv(out / f"paths_{name}.csv", header, arr.tolist())
    _log(f"simulated {cfg.n_paths} paths to horizon {horizon:g}y "
         f"(mesh 1/{round(1 / cfg.mesh)}, seed {cfg.seed})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cirdiff",
        description="Pricing and calibration for the shift-extended CIR-difference model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--curve", help="zero curve CSV/JSON")
        p.add_argument("--out", help="output directory (default .)")
        p.add_argument("--seed", type=int, help="RNG seed (default 0)")
        p.add_argument("--threads", type=int, help="worker threads (default 1)")

    def add_target(p):
        p.add_argument("--surface", help="swaption surface CSV/JSON")
        p.add_argument("--swap-type", choices=["payer", "receiver"], help="surface swap type")
        p.add_argument("--tenor", type=float, help="calibration column tenor")
        p.add_argument("--maturities", help="comma-separated maturities, e.g. 5,7,10,15")
        p.add_argument("--diagonal", help="explicit pairs, e.g. 5x2,7x5,10x7")
        p.add_argument("--orders", help="GC orders, e.g. 3,5,7")
        p.add_argument("--drop-last-maturity", action="store_const", const=True,
                       help="drop the largest maturity from the column")

    def add_sim(p):
        p.add_argument("--paths", type=int, help="Monte Carlo paths (default 10000)")
        p.add_argument("--mesh", type=int, help="Euler steps per year (default 256)")

    p = sub.add_parser("calibrate", help="fit Pi to a surface slice")
    add_common(p)
    add_target(p)
    p.add_argument("--initial", help="I1, I2, or comma-separated 8-vector")
    p.add_argument("--max-evals", type=int, help="objective evaluation budget")
    p.add_argument("--extra-starts", type=int, help="additional perturbed starts")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("price", help="GC price table, optionally with an MC column")
    add_common(p)
    add_target(p)
    add_sim(p)
    p.add_argument("--params", help="params JSON (from calibrate); omit to calibrate inline")
    p.add_argument("--initial", help="inline calibration start")
    p.add_argument("--max-evals", type=int)
    p.add_argument("--extra-starts", type=int)
    p.add_argument("--mc", action="store_const", const=True, help="add Monte Carlo column")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("cms", help="par CMS rates by Monte Carlo")
    add_common(p)
    add_sim(p)
    p.add_argument("--params", help="params JSON (from calibrate)")
    p.add_argument("--specs", help="effectivextenorxindex triples, e.g. 0x5x5,3x5x10")
    p.add_argument("--reference", help="reference rates CSV")
    p.set_defaults(func=cmd_cms)

    p = sub.add_parser("bermudan", help="LSMC Bermudan swaption table")
    add_common(p)
    add_sim(p)
    p.add_argument("--params", help="params JSON (from calibrate)")
    p.add_argument("--strikes", help="strike grid CSV")
    p.add_argument("--reference", help="reference prices CSV")
    p.add_argument("--swap-type", choices=["payer", "receiver"],
                   help="market convention of the payoff (default payer)")
    p.add_argument("--degree", type=int, help="regression basis degree (default 3)")
    p.add_argument("--regress-all", action="store_const", const=True,
                   help="regress on all paths, not just in-the-money")
    p.set_defaults(func=cmd_bermudan)

    p = sub.add_parser("simulate", help="path sanity summary and optional dump")
    add_common(p)
    add_sim(p)
    p.add_argument("--params", help="params JSON (from calibrate)")
    p.add_argument("--horizon", type=float, help="simulation horizon in years")
    p.add_argument("--dump", action="store_const", const=True, help="write path matrices")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(getattr(args, "config", None))
        return args.func(args, config)
    except (CliError, CurveError, ParameterError, ValueError) as exc:
        _log(f"error: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
