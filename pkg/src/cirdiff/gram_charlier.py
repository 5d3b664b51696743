"""Closed-form swaption pricing by truncated Gram-Charlier expansion.

The swaption payoff under the expiry-forward measure is E[(Swap(T0))^+], and
the swap value at expiry is a linear combination of zero-coupon bonds,

    Swap(T0) = sum_i a_i P(T0, T_i),
    a_0 = zeta, a_N = -zeta (1 + K alpha_N), a_i = -zeta K alpha_i,

so its moments reduce to "bond moments": forward-measure expectations of
products of unshifted bonds.  Those products keep the affine structure, and
the expectation solves the factor Riccati system with generic terminal values

    a_z = prod_j A_z(T0, T_j)^{k_j},   b_z = sum_j k_j B_z(T0, T_j),

one solve per multi-index (k_0, ..., k_N) with |k| = m.  Cumulants follow from
moments, and the order-L truncation evaluates a Hermite series around the
Gaussian base term.

The multi-index tables are cached per (m, N) and reduced with exact (fsum)
summation, so prices are independent of enumeration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import norm

from .model import FactorParams, ModelParams, ShiftedModel, _ab_phi, _zcb_cirminus_phi

__all__ = [
    "Schedule",
    "SwapSpec",
    "MultiIndex",
    "PricingError",
    "ExpansionError",
    "RiccatiSingularityError",
    "hermite",
    "cumulants_from_moments",
    "enumerate_multiindices",
    "precompute_multiindices",
    "riccati_terminal",
    "swap_coefficients",
    "star_coefficients",
    "bond_moment",
    "swap_moments",
    "gc_price",
]

_CHUNK = 200_000  # rows per vectorized block; bounds memory for large N


class PricingError(ArithmeticError):
    """Soft pricing failure; calibration maps these to a penalty."""


class ExpansionError(PricingError):
    """Gram-Charlier expansion undefined (second cumulant not positive)."""


class RiccatiSingularityError(PricingError):
    """Closed-form Riccati denominator lost positivity."""


@dataclass(frozen=True)
class Schedule:
    """Resettlement dates T0 < T1 < ... < TN with year fractions alpha_i."""

    t0: float
    payment_times: tuple[float, ...]

    def __post_init__(self) -> None:
        times = (self.t0, *self.payment_times)
        if len(self.payment_times) < 1:
            raise ValueError("schedule needs at least one payment date")
        if any(b - a <= 0.0 for a, b in zip(times, times[1:])):
            raise ValueError(f"dates must be strictly increasing: {times}")

    @classmethod
    def annual(cls, t0: float, n_payments: int) -> "Schedule":
        return cls(t0=float(t0), payment_times=tuple(float(t0 + i) for i in range(1, n_payments + 1)))

    @property
    def times(self) -> tuple[float, ...]:
        return (self.t0, *self.payment_times)

    @property
    def alphas(self) -> tuple[float, ...]:
        times = self.times
        return tuple(b - a for a, b in zip(times, times[1:]))

    @property
    def n_payments(self) -> int:
        return len(self.payment_times)


@dataclass(frozen=True)
class SwapSpec:
    """Fixed-for-floating swap: schedule, fixed rate K, zeta (+1 payer / -1 receiver)."""

    schedule: Schedule
    fixed_rate: float
    zeta: int = 1

    def __post_init__(self) -> None:
        if self.zeta not in (1, -1):
            raise ValueError(f"zeta must be +1 or -1, got {self.zeta}")


@dataclass(frozen=True)
class MultiIndex:
    """Occurrence counts (k_0, ..., k_N) with the multinomial multiplicity m!/prod k_j!."""

    counts: tuple[int, ...]
    multiplicity: int

    @property
    def order(self) -> int:
        return sum(self.counts)


def hermite(n: int, x):
    """Probabilist's Hermite polynomial H_n(x) via the three-term recurrence."""
    if n < 0:
        raise ValueError("order must be non-negative")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x.copy()
    for k in range(1, n):
        h, h_prev = x * h - k * h_prev, h
    return h if h.ndim else float(h)


def cumulants_from_moments(moments) -> np.ndarray:
    """Cumulants (c_1 ... c_L) from raw moments (mu_1 ... mu_L), L <= 7."""
    mu = np.asarray(moments, dtype=float)
    L = mu.size
    if L > 7:
        raise ValueError(f"at most 7 moments supported, got {L}")
    m = np.concatenate([[math.nan], mu])  # 1-based
    c = np.empty(L)
    if L >= 1:
        c[0] = m[1]
    if L >= 2:
        c[1] = m[2] - m[1] ** 2
    if L >= 3:
        c[2] = 2 * m[1] ** 3 - 3 * m[2] * m[1] + m[3]
    if L >= 4:
        c[3] = -6 * m[1] ** 4 + 12 * m[2] * m[1] ** 2 - 4 * m[3] * m[1] - 3 * m[2] ** 2 + m[4]
    if L >= 5:
        c[4] = (24 * m[1] ** 5 - 60 * m[2] * m[1] ** 3 + 20 * m[3] * m[1] ** 2
                + 30 * m[2] ** 2 * m[1] - 5 * m[4] * m[1] - 10 * m[2] * m[3] + m[5])
    if L >= 6:
        c[5] = (-120 * m[1] ** 6 + 360 * m[2] * m[1] ** 4 - 120 * m[3] * m[1] ** 3
                - 270 * m[2] ** 2 * m[1] ** 2 + 30 * m[4] * m[1] ** 2
                + 120 * m[2] * m[3] * m[1] - 6 * m[5] * m[1] + 30 * m[2] ** 3
                - 10 * m[3] ** 2 - 15 * m[2] * m[4] + m[6])
    if L >= 7:
        c[6] = (720 * m[1] ** 7 - 2520 * m[2] * m[1] ** 5 + 840 * m[3] * m[1] ** 4
                + 2520 * m[2] ** 2 * m[1] ** 3 - 210 * m[4] * m[1] ** 3
                - 1260 * m[2] * m[3] * m[1] ** 2 + 42 * m[5] * m[1] ** 2
                - 630 * m[2] ** 3 * m[1] + 140 * m[3] ** 2 * m[1]
                + 210 * m[2] * m[4] * m[1] - 7 * m[6] * m[1]
                + 210 * m[2] ** 2 * m[3] - 35 * m[3] * m[4] - 21 * m[2] * m[5] + m[7])
    return c


def _compositions(total: int, slots: int):
    """Yield all tuples of ``slots`` non-negative ints summing to ``total``."""
    if slots == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, slots - 1):
            yield (head, *tail)


@lru_cache(maxsize=None)
def _multiindex_arrays(m: int, n_payments: int) -> tuple[np.ndarray, np.ndarray]:
    """Count matrix (rows x (N+1), int8) and multiplicities for |k| = m."""
    if m < 0 or n_payments < 1:
        raise ValueError("need m >= 0 and at least one payment")
    rows = list(_compositions(m, n_payments + 1))
    K = np.array(rows, dtype=np.int8)
    fact_m = math.factorial(m)
    mult = np.array(
        [fact_m // math.prod(math.factorial(k) for k in row) for row in rows],
        dtype=float,
    )
    return K, mult


def enumerate_multiindices(m: int, n_payments: int) -> list[MultiIndex]:
    """All multi-indices of order m over N+1 payment slots, with multiplicities.

    The count is binomial(N + m, m).
    """
    K, mult = _multiindex_arrays(m, n_payments)
    return [
        MultiIndex(counts=tuple(int(k) for k in row), multiplicity=int(w))
        for row, w in zip(K, mult)
    ]


def precompute_multiindices(max_order: int, n_payments: int) -> None:
    """Warm the (m, N) cache before sharing it across threads."""
    for m in range(1, max_order + 1):
        _multiindex_arrays(m, n_payments)


def _mn_phi(phi, log_a, b, tau: float):
    """Riccati terminal-value solution (log M, N) for terminal (a, b), vectorized.

    Same stabilization as the bond coefficients; raises if the closed-form
    denominator loses positivity (possible for the y factor with large b).
    """
    p1, p2, p3 = phi
    if tau < 0.0:
        raise ValueError("tau must be non-negative")
    e = math.exp(-p1 * tau)
    u = -math.expm1(-p1 * tau) / p1 if p1 > 0.0 else tau
    b = np.asarray(b, dtype=float)
    w = 1.0 + b * (p1 - p2)
    den = e + p2 * u * w
    if np.any(den <= 0.0):
        raise RiccatiSingularityError(
            f"Riccati denominator non-positive (min {float(np.min(den)):.3g}) "
            f"for phi={phi}, tau={tau}"
        )
    N = (b * e + u * w) / den
    logM = np.asarray(log_a, dtype=float) + p3 * ((p2 - p1) * tau - np.log(den))
    return logM, N


def riccati_terminal(
    params: FactorParams, a_z: float, b_z: float, t: float, t0: float
) -> tuple[float, float]:
    """Closed-form (M_z, N_z) with generic terminal values M(T0,T0)=a_z, N(T0,T0)=b_z."""
    if a_z <= 0.0:
        raise ValueError(f"terminal value a_z must be positive, got {a_z}")
    if b_z < 0.0:
        raise ValueError(f"terminal value b_z must be non-negative, got {b_z}")
    if t > t0 + 1e-12:
        raise ValueError(f"need t <= T0, got t={t}, T0={t0}")
    logM, N = _mn_phi(params.phi, math.log(a_z), b_z, max(t0 - t, 0.0))
    return float(np.exp(logM)), float(N)


def swap_coefficients(spec: SwapSpec) -> np.ndarray:
    """Bond weights a_0..a_N with Swap(t) = sum_i a_i P(t, T_i)."""
    alphas = spec.schedule.alphas
    n = spec.schedule.n_payments
    a = np.empty(n + 1)
    a[0] = spec.zeta
    a[1:n] = -spec.zeta * spec.fixed_rate * np.asarray(alphas[:-1])
    a[n] = -spec.zeta * (1.0 + spec.fixed_rate * alphas[-1])
    return a


def star_coefficients(model: ShiftedModel, spec: SwapSpec) -> np.ndarray:
    """Shift-adjusted weights a_i * P_M(0, T_i) / P_cir(0, T_i)."""
    p = model.params
    times = np.asarray(spec.schedule.times)
    pm = np.asarray(model.curve.discount(times))
    pc = _zcb_cirminus_phi(p.phi_x, p.phi_y, p.x0, p.y0, times)
    return swap_coefficients(spec) * pm / pc


def _bond_coeffs(model: ShiftedModel, schedule: Schedule):
    """Per-payment-date (log A_z, B_z) relative to T0 for both factors."""
    p = model.params
    taus = np.asarray(schedule.times) - schedule.t0
    Ax, Bx = _ab_phi(p.phi_x, taus)
    Ay, By = _ab_phi(p.phi_y, taus)
    return np.log(Ax), Bx, np.log(Ay), By


def bond_moment(
    model: ShiftedModel,
    multi_index: MultiIndex,
    x: float,
    y: float,
    t: float,
    schedule: Schedule,
) -> float:
    """Forward-measure expectation of prod_j P_cir(T0, T_j)^{k_j} given state (x, y) at t."""
    k = np.asarray(multi_index.counts, dtype=float)
    if k.size != schedule.n_payments + 1:
        raise ValueError(
            f"multi-index has {k.size} slots, schedule has {schedule.n_payments + 1}"
        )
    logAx, Bx, logAy, By = _bond_coeffs(model, schedule)
    tau = schedule.t0 - t
    p = model.params
    logMx, Nx = _mn_phi(p.phi_x, k @ logAx, k @ Bx, tau)
    logMy, Ny = _mn_phi(p.phi_y, k @ logAy, k @ By, tau)
    pct = _zcb_cirminus_phi(p.phi_x, p.phi_y, x, y, tau)
    return float(np.exp(logMx + logMy - Nx * x + Ny * y) / pct)


def swap_moments(
    model: ShiftedModel,
    spec: SwapSpec,
    t: float = 0.0,
    max_order: int = 7,
    x: "float | None" = None,
    y: "float | None" = None,
) -> np.ndarray:
    """Forward-measure moments M^1 ... M^L of the swap value at expiry.

    State defaults to the initial values (x0, y0), the t = 0 case used in
    calibration.
    """
    if max_order < 1 or max_order > 7:
        raise ValueError("max_order must be in 1..7")
    sched = spec.schedule
    if t > sched.t0 + 1e-12:
        raise ValueError(f"need t <= T0, got t={t}, T0={sched.t0}")
    p = model.params
    if x is None:
        x = p.x0
    if y is None:
        y = p.y0
    atil = star_coefficients(model, spec)
    logAx, Bx, logAy, By = _bond_coeffs(model, sched)
    tau = max(sched.t0 - t, 0.0)
    pct = float(_zcb_cirminus_phi(p.phi_x, p.phi_y, x, y, tau))
    pref = float(
        _zcb_cirminus_phi(p.phi_x, p.phi_y, p.x0, p.y0, sched.t0)
        / model.curve.discount(sched.t0)
    )
    out = np.empty(max_order)
    for m in range(1, max_order + 1):
        K, mult = _multiindex_arrays(m, sched.n_payments)
        partials = []
        for lo in range(0, K.shape[0], _CHUNK):
            Kc = K[lo : lo + _CHUNK].astype(np.float64)
            aprod = np.prod(np.power(atil[None, :], Kc), axis=1)
            logMx, Nx = _mn_phi(p.phi_x, Kc @ logAx, Kc @ Bx, tau)
            logMy, Ny = _mn_phi(p.phi_y, Kc @ logAy, Kc @ By, tau)
            terms = mult[lo : lo + _CHUNK] * aprod * np.exp(
                logMx + logMy - Nx * x + Ny * y
            )
            partials.append(math.fsum(terms))
        out[m - 1] = pref**m / pct * math.fsum(partials)
    return out


def _gc_q(n: int, C: np.ndarray) -> float:
    """Hermite coefficient q_n from scaled cumulants C (1-based, C[l] = C_l)."""
    if n < 3:
        return 1.0 if n == 0 else 0.0
    total = 0.0
    for m in range(1, n // 3 + 1):
        for parts in _ordered_parts(n, m):
            num = math.prod(C[k] for k in parts)
            den = math.factorial(m) * math.prod(math.factorial(k) for k in parts)
            total += num / den
    return total * C[2] ** (-n / 2.0)


@lru_cache(maxsize=None)
def _ordered_parts(total: int, m: int) -> tuple[tuple[int, ...], ...]:
    """Ordered tuples (k_1..k_m), each k_i >= 3, summing to ``total``."""
    if m == 1:
        return ((total,),) if total >= 3 else ()
    out = []
    for head in range(3, total - 3 * (m - 1) + 1):
        for tail in _ordered_parts(total - head, m - 1):
            out.append((head, *tail))
    return tuple(out)


def gc_price(
    model: ShiftedModel,
    spec: SwapSpec,
    t: float = 0.0,
    orders=(3, 5, 7),
    x: "float | None" = None,
    y: "float | None" = None,
) -> dict[int, float]:
    """Swaption prices by Gram-Charlier truncation, one per requested order.

    Every order contains the Gaussian base term; order 2 is the base term
    alone.  Raises ExpansionError when the second cumulant is not positive
    (calibration treats that as a soft failure).
    """
    orders = sorted(set(int(o) for o in orders))
    if not orders or orders[0] < 2 or orders[-1] > 7:
        raise ValueError(f"orders must be within 2..7, got {orders}")
    max_l = max(orders)
    mom = swap_moments(model, spec, t=t, max_order=max(max_l, 2), x=x, y=y)
    cum = cumulants_from_moments(mom)
    p_t0 = float(model.zcb(x if x is not None else model.params.x0,
                           y if y is not None else model.params.y0,
                           t, spec.schedule.t0)) if t > 0.0 else float(
        model.curve.discount(spec.schedule.t0))
    C = np.concatenate([[math.nan], cum]) * p_t0 ** np.arange(0, cum.size + 1)
    if not C[2] > 0.0:
        raise ExpansionError(f"scaled second cumulant C2 = {C[2]:.3g} is not positive")
    d = C[1] / math.sqrt(C[2])
    base = C[1] * norm.cdf(d) + math.sqrt(C[2]) * norm.pdf(d)
    wanted = set(orders)
    prices: dict[int, float] = {}
    series = 0.0
    for L in range(2, max_l + 1):
        if L >= 3:
            series += (-1) ** L * _gc_q(L, C) * hermite(L - 2, d)
        if L in wanted:
            prices[L] = base + math.sqrt(C[2]) * norm.pdf(d) * series
    return prices
