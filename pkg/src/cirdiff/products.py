"""Swap analytics, CMS par rates by Monte Carlo, and LSMC Bermudan swaptions.

Everything prices off closed-form shifted bonds evaluated at simulated factor
states; the simulation only supplies states and pathwise discount factors.

The Bermudan payoff follows the optimal-stopping formulation literally:
exercise at T_i pays S_i(T_i) (zeta (K - R_i(T_i)))^+, so zeta = -1 is the
market *payer* convention ((R - K)^+) and zeta = +1 the market receiver.
Output metadata carries the mapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gram_charlier import Schedule, SwapSpec, swap_coefficients
from .model import ShiftedModel, zcb_shifted
from .simulation import McEstimate, PathSet

__all__ = [
    "CmsSpec",
    "BermudanSpec",
    "RegressionBasis",
    "CmsEstimate",
    "BermudanEstimate",
    "swap_value",
    "par_rate",
    "annuity",
    "cms_par_rate",
    "lsmc_bermudan",
]


@dataclass(frozen=True)
class CmsSpec:
    """Constant maturity swap: annual payments over [T0, TN], floating leg pays
    the c-year par swap rate fixed at each reset T_{i-1}."""

    effective: float
    tenor: int
    index: int
    zeta: int = 1

    def __post_init__(self) -> None:
        if self.tenor < 1:
            raise ValueError(f"tenor must be >= 1 year, got {self.tenor}")
        if self.index < 1 or self.index != int(self.index):
            raise ValueError(f"index must be a positive integer of years, got {self.index}")
        if self.effective < 0.0:
            raise ValueError("effective date must be >= 0")
        if self.zeta not in (1, -1):
            raise ValueError("zeta must be +1 or -1")

    @property
    def reset_times(self) -> tuple[float, ...]:
        return tuple(self.effective + i for i in range(self.tenor))

    @property
    def last_fixing_end(self) -> float:
        return self.reset_times[-1] + self.index


@dataclass(frozen=True)
class BermudanSpec:
    """TN no-call T0 Bermudan swaption with annual exercise dates T0..T_{N-1}."""

    first_exercise: float
    last_payment: float
    strike: float
    zeta: int = 1

    def __post_init__(self) -> None:
        n = self.last_payment - self.first_exercise
        if n < 1 or abs(n - round(n)) > 1e-9:
            raise ValueError(
                f"need an integer number of years between first exercise "
                f"{self.first_exercise} and last payment {self.last_payment}"
            )
        if self.zeta not in (1, -1):
            raise ValueError("zeta must be +1 or -1")

    @property
    def exercise_times(self) -> tuple[float, ...]:
        return tuple(
            self.first_exercise + i
            for i in range(int(round(self.last_payment - self.first_exercise)))
        )


@dataclass(frozen=True)
class RegressionBasis:
    """Monomial basis 1, r, ..., r^degree in the explanatory par rate."""

    degree: int = 3

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise ValueError("degree must be >= 1")

    def design(self, r: np.ndarray) -> np.ndarray:
        return np.vander(np.asarray(r, dtype=float), self.degree + 1, increasing=True)


def swap_value(model: ShiftedModel, spec: SwapSpec, x, y, t: float):
    """Net swap value zeta (P(t,T0) - P(t,TN) - K sum alpha_i P(t,T_i))."""
    sched = spec.schedule
    if t > sched.t0 + 1e-12:
        raise ValueError("valuation time must not exceed T0")
    p0 = zcb_shifted(model, x, y, t, sched.t0)
    bonds = [zcb_shifted(model, x, y, t, ti) for ti in sched.payment_times]
    fixed = sum(a * b for a, b in zip(sched.alphas, bonds))
    return spec.zeta * (p0 - bonds[-1] - spec.fixed_rate * fixed)


def annuity(model: ShiftedModel, t_start: float, t_end: float, x, y, t: float):
    """Accrual factor sum alpha_i P(t, T_i) over annual dates in (t_start, t_end]."""
    sched = Schedule.annual(t_start, int(round(t_end - t_start)))
    bonds = [zcb_shifted(model, x, y, t, ti) for ti in sched.payment_times]
    return sum(a * b for a, b in zip(sched.alphas, bonds))


def par_rate(model: ShiftedModel, t_start: float, t_end: float, x, y, t: float):
    """Forward par swap rate (P(t,T_n) - P(t,T_N)) / annuity for annual dates."""
    s = annuity(model, t_start, t_end, x, y, t)
    p_start = zcb_shifted(model, x, y, t, t_start)
    p_end = zcb_shifted(model, x, y, t, t_end)
    return (p_start - p_end) / s


@dataclass(frozen=True)
class CmsEstimate:
    rate: float
    std_error: float
    denominator: float


def cms_par_rate(model: ShiftedModel, paths: PathSet, spec: CmsSpec) -> CmsEstimate:
    """Par CMS rate: discounted floating-leg average over the market annuity.

    numerator wi = sum_i alpha_i D(T_{i-1}) R_{i-1}^{i-1+c}(T_{i-1}) pathwise,
    denominator  = sum_i alpha_i P_M(0, T_{i-1}) exactly from the curve.
    """
    if spec.last_fixing_end > paths.config.horizon + 1e-9:
        raise ValueError(
            f"paths end at {paths.config.horizon} but the last index fixing "
            f"needs {spec.last_fixing_end}"
        )
    numer = np.zeros(paths.x.shape[0])
    denom = 0.0
    for t_reset in spec.reset_times:
        xr, yr = paths.state(t_reset)
        j = paths.index_of(t_reset)
        r = par_rate(model, t_reset, t_reset + spec.index, xr, yr, t_reset)
        numer += paths.discount[:, j] * r
        denom += model.curve.discount(t_reset)
    n = numer.size
    mean = float(np.mean(numer))
    se = float(np.std(numer, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return CmsEstimate(rate=mean / denom, std_error=se / denom, denominator=denom)


@dataclass(frozen=True)
class BermudanEstimate:
    price: float
    std_error: float
    rank_deficient: bool
    zeta: int

    @property
    def market_convention(self) -> str:
        """Market name of the payoff (zeta (K - R))^+ implemented here."""
        return "receiver" if self.zeta == 1 else "payer"


def lsmc_bermudan(
    model: ShiftedModel,
    paths: PathSet,
    spec: BermudanSpec,
    basis: RegressionBasis = RegressionBasis(3),
    regress_all: bool = False,
) -> BermudanEstimate:
    """Bermudan swaption price by least-squares Monte Carlo backward induction.

    At T_{N-1} the value is P(T_{N-1}, TN) (zeta (K - R))^+.  Earlier, the
    continuation value is the regression of the one-step stochastically
    discounted value on basis(par rate), and the pathwise value is
    max(exercise, continuation).  By default the regression uses in-the-money
    paths only (out-of-the-money paths carry their realized value);
    ``regress_all`` regresses on every path instead.
    """
    t_n = spec.last_payment
    if t_n > paths.config.horizon + 1e-9:
        raise ValueError(f"paths end at {paths.config.horizon}, need {t_n}")
    ex_times = spec.exercise_times
    rank_deficient = False

    # terminal exercise date: one-period swap, no regression
    t_last = ex_times[-1]
    x_t, y_t = paths.state(t_last)
    r_last = par_rate(model, t_last, t_n, x_t, y_t, t_last)
    value = np.asarray(zcb_shifted(model, x_t, y_t, t_last, t_n)) * np.maximum(
        spec.zeta * (spec.strike - r_last), 0.0
    )

    for t_i in reversed(ex_times[:-1]):
        j = paths.index_of(t_i)
        j_next = paths.index_of(t_i + 1.0)
        carried = (paths.discount[:, j_next] / paths.discount[:, j]) * value
        x_t, y_t = paths.state(t_i)
        r_i = par_rate(model, t_i, t_n, x_t, y_t, t_i)
        s_i = annuity(model, t_i, t_n, x_t, y_t, t_i)
        exercise = s_i * np.maximum(spec.zeta * (spec.strike - r_i), 0.0)

        sel = np.ones_like(exercise, dtype=bool) if regress_all else exercise > 0.0
        value = carried.copy()
        if np.any(sel):
            design = basis.design(r_i[sel])
            gram = design.T @ design
            rhs = design.T @ carried[sel]
            if np.linalg.matrix_rank(design) < design.shape[1]:
                rank_deficient = True
                coef, *_ = np.linalg.lstsq(design, carried[sel], rcond=None)
            else:
                coef = np.linalg.solve(gram, rhs)
            continuation = design @ coef
            value[sel] = np.maximum(exercise[sel], continuation)
        assert np.all(value >= exercise - 1e-12), "value lost exercise dominance"

    j0 = paths.index_of(ex_times[0])
    discounted = paths.discount[:, j0] * value
    n = discounted.size
    price = float(np.mean(discounted))
    se = float(np.std(discounted, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return BermudanEstimate(
        price=price, std_error=se, rank_deficient=rank_deficient, zeta=spec.zeta
    )
