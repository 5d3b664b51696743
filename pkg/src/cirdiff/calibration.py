"""Calibration of the 8-vector Pi to a slice of the market swaption surface.

The loss is the relative squared error summed over expansion orders and
quotes,

    f(Pi) = sum_{l in L} sum_{quotes} (market / GC_l(Pi) - 1)^2,

minimized over the polytope

    A Pi <= 0,  Pi >= 0,  Pi_3 >= 1,  Pi_6 >= 1,

with A encoding sigma^2 >= 0 and k >= 0 for both factors.  The optimizer is
derivative-free Nelder-Mead composed with a feasibility projection, plus an
optional multi-start wrapper; soft pricing failures (second cumulant not
positive, Riccati singularities) add a fixed penalty per failing quote so the
search backs away from the degenerate region instead of aborting.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .gram_charlier import (
    PricingError,
    Schedule,
    SwapSpec,
    gc_price,
    precompute_multiindices,
)
from .market_data import DiscountCurve, SwaptionQuote, SwaptionSurface
from .model import ModelParams, ShiftedModel, admissibility_violations

__all__ = [
    "ADMISSIBILITY_MATRIX",
    "I1",
    "I2",
    "CalibrationTarget",
    "CalibrationOptions",
    "CalibrationResult",
    "is_admissible",
    "project_admissible",
    "objective",
    "calibrate",
    "target_from_surface",
]

# rows: sigma_x^2 >= 0, sigma_y^2 >= 0, k_x >= 0, k_y >= 0
ADMISSIBILITY_MATRIX = np.array(
    [
        [-1, 1, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 1, -1, 0, 0, 0],
        [1, -2, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 1, -2, 0, 0, 0],
    ],
    dtype=float,
)

I1 = np.array([0.1, 0.095, 0.3, 0.095, 0.1, 0.3, 0.01, 0.01])
I2 = I1 / 2.0

PENALTY = 1e6


@dataclass(frozen=True)
class CalibrationTarget:
    """Quotes to fit (one surface slice), expansion orders, and swap type."""

    quotes: tuple[SwaptionQuote, ...]
    orders: tuple[int, ...] = (3, 5, 7)
    zeta: int = 1

    def __post_init__(self) -> None:
        if not self.quotes:
            raise ValueError("calibration target must contain at least one quote")
        if any(q.price <= 0.0 for q in self.quotes):
            raise ValueError("all target quotes must have positive market price")
        orders = tuple(sorted(set(int(o) for o in self.orders)))
        if not orders or min(orders) < 3 or max(orders) > 7:
            raise ValueError(f"orders must be a subset of 3..7, got {self.orders}")
        object.__setattr__(self, "orders", orders)
        if self.zeta not in (1, -1):
            raise ValueError("zeta must be +1 or -1")

    def specs(self) -> list[SwapSpec]:
        return [
            SwapSpec(
                schedule=Schedule.annual(q.maturity, int(round(q.tenor))),
                fixed_rate=q.strike,
                zeta=self.zeta,
            )
            for q in self.quotes
        ]


def target_from_surface(
    surface: SwaptionSurface,
    tenor: "float | None" = None,
    maturities=None,
    diagonal=None,
    orders=(3, 5, 7),
    drop_last_maturity: bool = False,
) -> CalibrationTarget:
    """Select a column (one tenor, several maturities) or an explicit diagonal."""
    if (tenor is None) == (diagonal is None):
        raise ValueError("select either a tenor column or a diagonal, not both")
    if tenor is not None:
        quotes = surface.column(tenor, maturities)
        if drop_last_maturity and len(quotes) > 1:
            quotes = quotes[:-1]
    else:
        quotes = [surface.quote(float(m), float(t)) for m, t in diagonal]
    if not quotes:
        raise ValueError("target selection matched no quotes")
    return CalibrationTarget(quotes=tuple(quotes), orders=tuple(orders), zeta=surface.zeta)


def is_admissible(pi, tol: float = 1e-9) -> bool:
    return not admissibility_violations(np.asarray(pi, dtype=float), tol=tol)


def project_admissible(pi) -> np.ndarray:
    """Feasibility repair: clip to bounds, then fix the (phi1, phi2) pairs.

    phi2_x is pulled into [phi1_x / 2, phi1_x] (sigma_x^2 >= 0 and k_x >= 0)
    and phi2_y raised to at least phi1_y; identity on admissible input.
    """
    out = np.array(pi, dtype=float).copy()
    out = np.maximum(out, 0.0)
    out[2] = max(out[2], 1.0)
    out[5] = max(out[5], 1.0)
    out[1] = min(out[1], out[0])          # sigma_x^2 >= 0
    out[1] = max(out[1], 0.5 * out[0])    # k_x >= 0
    out[4] = max(out[4], out[3])          # sigma_y^2 >= 0 (implies k_y >= 0)
    return out


def objective(pi, target: CalibrationTarget, curve: DiscountCurve) -> float:
    """Relative-squared-error loss; pricing failures add PENALTY per quote."""
    pi = np.asarray(pi, dtype=float)
    model = ShiftedModel(params=ModelParams(pi=tuple(pi)), curve=curve)
    total = 0.0
    for quote, spec in zip(target.quotes, target.specs()):
        try:
            prices = gc_price(model, spec, 0.0, target.orders)
        except PricingError:
            total += PENALTY
            continue
        if any(not p > 0.0 for p in prices.values()):
            total += PENALTY
            continue
        for L in target.orders:
            total += (quote.price / prices[L] - 1.0) ** 2
    return total


# search box for the optimizer (not part of the admissible set): keeps the
# over-parametrized flat directions (huge phi3 traded against tiny z0, or a
# fully collapsed factor) out of reach so fits stay simulatable and CIR-like
DEFAULT_LOWER = np.array([1e-4, 1e-4, 1.0, 1e-4, 1e-4, 1.0, 0.0, 0.0])
DEFAULT_UPPER = np.array([2.0, 2.0, 5.0, 2.0, 2.0, 5.0, 0.25, 0.25])


@dataclass(frozen=True)
class CalibrationOptions:
    max_evaluations: int = 5000
    improvement_tol: float = 1e-10
    improvement_window: int = 50
    extra_starts: int = 0
    perturbation: float = 0.25
    threads: int = 1
    lower: tuple[float, ...] = tuple(DEFAULT_LOWER)
    upper: tuple[float, ...] = tuple(DEFAULT_UPPER)


@dataclass(frozen=True)
class CalibrationResult:
    pi: tuple[float, ...]
    objective_value: float
    iterations: int
    n_evaluations: int
    wall_time_s: float
    converged: bool
    start_label: str
    per_quote_rel_errors: tuple[tuple[float, ...], ...]  # quote-major, order-minor

    @property
    def params(self) -> ModelParams:
        return ModelParams(pi=self.pi)


class _Stopper:
    """Stops Nelder-Mead once the best seen value stalls for a window of iterations."""

    def __init__(self, window: int, tol: float):
        self.window = window
        self.tol = tol
        self.best = math.inf
        self.marker = math.inf
        self.since_improvement = 0

    def record(self, val: float) -> None:
        if val < self.best:
            self.best = val

    def __call__(self, xk) -> None:
        if self.best < self.marker - self.tol:
            self.marker = self.best
            self.since_improvement = 0
        else:
            self.since_improvement += 1
            if self.since_improvement >= self.window:
                raise StopIteration


def _resolve_start(initial) -> tuple[np.ndarray, str]:
    if isinstance(initial, str):
        label = initial.upper()
        if label == "I1":
            return I1.copy(), "I1"
        if label == "I2":
            return I2.copy(), "I2"
        raise ValueError(f"unknown preset {initial!r} (use 'I1', 'I2', or a vector)")
    arr = np.asarray(initial, dtype=float)
    if arr.shape != (8,):
        raise ValueError(f"initial point must be an 8-vector, got shape {arr.shape}")
    return arr.copy(), "custom"


_STATUS_CALLBACK_HALT = 99  # scipy status when the callback raises StopIteration


def _run_single(
    start: np.ndarray, label: str, target, curve, options: CalibrationOptions
):
    evaluations = 0
    stopper = _Stopper(options.improvement_window, options.improvement_tol)
    lo = np.asarray(options.lower)
    hi = np.asarray(options.upper)

    def repair(p):
        return project_admissible(np.clip(p, lo, hi))

    def wrapped(p):
        nonlocal evaluations
        evaluations += 1
        q = repair(p)
        # strictly increasing outside the feasible box/polytope so the simplex
        # is pushed back inside instead of sliding along a flat projected face
        val = objective(q, target, curve) + 1e3 * float(np.sum((np.asarray(p) - q) ** 2))
        stopper.record(val)
        return val

    res = minimize(
        wrapped,
        repair(start),
        method="Nelder-Mead",
        callback=stopper,
        options={
            "maxfev": options.max_evaluations,
            "xatol": 1e-8,
            "fatol": 1e-12,
            "adaptive": True,
        },
    )
    # a callback halt is our improvement-window stop, i.e. convergence
    converged = bool(res.success) or res.status == _STATUS_CALLBACK_HALT
    return repair(res.x), label, res.nit, evaluations, converged


def calibrate(
    target: CalibrationTarget,
    curve: DiscountCurve,
    initial="I1",
    options: CalibrationOptions = CalibrationOptions(),
    seed: int = 0,
) -> CalibrationResult:
    """Projected Nelder-Mead fit of Pi to the target quotes.

    Deterministic given (initial, options, seed).  ``initial`` is 'I1', 'I2',
    or an explicit 8-vector; ``options.extra_starts`` adds seeded perturbed
    starts, and ties break by lowest objective then smallest ||Pi||_2.
    """
    t_begin = time.perf_counter()
    start, label = _resolve_start(initial)
    max_tenor = max(int(round(q.tenor)) for q in target.quotes)
    precompute_multiindices(max(target.orders), max_tenor)

    starts = [(start, label)]
    if options.extra_starts > 0:
        rng = np.random.default_rng(seed)
        for i in range(options.extra_starts):
            bump = 1.0 + options.perturbation * rng.uniform(-1.0, 1.0, size=8)
            starts.append((start * bump, f"{label}-perturbed-{i}"))

    def task(item):
        s, lab = item
        return _run_single(s, lab, target, curve, options)

    if options.threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=options.threads) as pool:
            raw = list(pool.map(task, starts))
    else:
        raw = [task(item) for item in starts]

    candidates = []
    for x, lab, iters, evals, success in raw:
        pi = project_admissible(x)
        val = objective(pi, target, curve)
        candidates.append((val, float(np.linalg.norm(pi)), pi, lab, iters, evals, success))
    best_val = min(c[0] for c in candidates)
    in_tie = [c for c in candidates if c[0] <= best_val + 1e-12]
    in_tie.sort(key=lambda c: c[1])
    val, _norm, pi, lab, iters, evals, success = in_tie[0]

    model = ShiftedModel(params=ModelParams(pi=tuple(pi)), curve=curve)
    rel_errors = []
    for quote, spec in zip(target.quotes, target.specs()):
        try:
            prices = gc_price(model, spec, 0.0, target.orders)
            rel_errors.append(
                tuple(quote.price / prices[L] - 1.0 for L in target.orders)
            )
        except PricingError:
            rel_errors.append(tuple(math.nan for _ in target.orders))
    return CalibrationResult(
        pi=tuple(float(v) for v in pi),
        objective_value=float(val),
        iterations=int(iters),
        n_evaluations=int(sum(c[5] for c in candidates)),
        wall_time_s=time.perf_counter() - t_begin,
        converged=bool(success),
        start_label=lab,
        per_quote_rel_errors=tuple(rel_errors),
    )
