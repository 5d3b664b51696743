"""Analytic core of the CIR-difference short-rate model with deterministic shift.

The short rate is r(t) = x(t) - y(t) + psi(t), where x and y are independent
CIR square-root diffusions

    dz(t) = k_z (theta_z - z(t)) dt + sigma_z sqrt(z(t)) dW_z(t),  z in {x, y},

and psi is the deterministic shift that forces the model discount curve onto
the observed market curve.  Zero-coupon bonds of the unshifted model have the
affine closed form

    P_cir(t, T) = A_x e^{-B_x x(t)} A_y e^{+B_y y(t)},

with A_z, B_z expressed through the reparametrization

    phi1 = sqrt(k^2 + 2 sigma^2)   (x factor;  k^2 - 2 sigma^2 for y)
    phi2 = (k + phi1) / 2
    phi3 = 2 k theta / sigma^2.

psi is never evaluated pointwise: shifted bonds use the exact curve-ratio form

    P(t, T) = [P_M(0,T) / P_M(0,t)] * [P_cir(0,t) / P_cir(0,T)] * P_cir(t, T),

which guarantees P(0, T) = P_M(0, T) identically.

All pricing functions broadcast over numpy arrays in the factor states, so the
same code path serves scalar analytics and Monte Carlo readouts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .market_data import DiscountCurve

__all__ = [
    "FactorParams",
    "ModelParams",
    "ShiftedModel",
    "ParameterError",
    "SingularityError",
    "phi_from_ksigma",
    "ksigma_from_phi",
    "bond_AB",
    "zcb_cirminus",
    "zcb_shifted",
    "forward_rate_model",
]

_TOL = 1e-12


class ParameterError(ValueError):
    """Raised when model parameters violate the admissibility constraints."""


class SingularityError(ArithmeticError):
    """Raised when a closed-form expression hits a removable-singularity locus."""


@dataclass(frozen=True)
class FactorParams:
    """(k, theta, sigma, z0) of one CIR factor.

    ``sign`` is +1 for the x factor and -1 for the y factor; the y factor
    additionally needs k^2 >= 2 sigma^2 so its phi1 stays real.
    """

    k: float
    theta: float
    sigma: float
    z0: float
    sign: int = 1

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise ParameterError(f"sign must be +1 or -1, got {self.sign}")
        for name in ("k", "theta", "sigma", "z0"):
            if getattr(self, name) < -_TOL:
                raise ParameterError(f"{name} must be non-negative, got {getattr(self, name)}")
        if 2.0 * self.k * self.theta < self.sigma**2 - _TOL:
            raise ParameterError(
                f"Feller condition violated: 2*k*theta = {2 * self.k * self.theta:.6g} "
                f"< sigma^2 = {self.sigma ** 2:.6g}"
            )
        if self.sign == -1 and self.k**2 < 2.0 * self.sigma**2 - _TOL:
            raise ParameterError(
                f"y factor needs k^2 >= 2*sigma^2, got k^2 = {self.k ** 2:.6g}, "
                f"2*sigma^2 = {2 * self.sigma ** 2:.6g}"
            )

    @property
    def phi(self) -> tuple[float, float, float]:
        disc = self.k**2 + 2.0 * self.sign * self.sigma**2
        phi1 = math.sqrt(max(disc, 0.0))
        phi2 = 0.5 * (self.k + phi1)
        phi3 = 2.0 * self.k * self.theta / self.sigma**2 if self.sigma > 0.0 else math.inf
        return (phi1, phi2, phi3)


def phi_from_ksigma(x_params: FactorParams, y_params: FactorParams) -> np.ndarray:
    """Map (k, theta, sigma) pairs to the 8-vector Pi = (phi_x, phi_y, x0, y0)."""
    if x_params.sign != 1 or y_params.sign != -1:
        raise ParameterError("x_params must have sign +1 and y_params sign -1")
    px = x_params.phi
    py = y_params.phi
    return np.array([*px, *py, x_params.z0, y_params.z0], dtype=float)


def ksigma_from_phi(pi: "np.ndarray | ModelParams") -> tuple[FactorParams, FactorParams]:
    """Invert the phi map: Pi -> (x FactorParams, y FactorParams).

    Singular on the face phi1 = 2*phi2 (zero mean reversion), where theta is
    unbounded.
    """
    if isinstance(pi, ModelParams):
        pi = np.asarray(pi.pi)
    pi = np.asarray(pi, dtype=float)
    out = []
    for offset, sign in ((0, 1), (3, -1)):
        p1, p2, p3 = pi[offset : offset + 3]
        k = 2.0 * p2 - p1
        if abs(p1 - 2.0 * p2) <= 1e-14 * max(1.0, p1):
            raise SingularityError(
                f"phi1 = 2*phi2 = {p1:.6g}: mean reversion k = 0, theta unbounded"
            )
        var = 2.0 * sign * (p2 * p1 - p2**2)
        sigma = math.sqrt(max(var, 0.0))
        theta = -sign * p2 * p3 * (p1 - p2) / (p1 - 2.0 * p2)
        z0 = float(pi[6 + (0 if sign == 1 else 1)])
        out.append(FactorParams(k=k, theta=theta, sigma=sigma, z0=z0, sign=sign))
    return out[0], out[1]


@dataclass(frozen=True)
class ModelParams:
    """The 8-vector Pi = (phi1_x, phi2_x, phi3_x, phi1_y, phi2_y, phi3_y, x0, y0).

    Admissibility: all components >= 0, phi3 >= 1 for both factors (Feller),
    phi2_x <= phi1_x <= 2*phi2_x and phi1_y <= phi2_y (which with positivity
    implies phi1_y <= 2*phi2_y).
    """

    pi: tuple[float, float, float, float, float, float, float, float]

    def __post_init__(self) -> None:
        pi = tuple(float(v) for v in self.pi)
        if len(pi) != 8:
            raise ParameterError(f"Pi must have 8 components, got {len(pi)}")
        object.__setattr__(self, "pi", pi)
        if not all(np.isfinite(pi)):
            raise ParameterError("Pi components must be finite")
        violations = admissibility_violations(np.asarray(pi))
        if violations:
            raise ParameterError("inadmissible Pi: " + "; ".join(violations))

    @property
    def phi_x(self) -> tuple[float, float, float]:
        return self.pi[0:3]

    @property
    def phi_y(self) -> tuple[float, float, float]:
        return self.pi[3:6]

    @property
    def x0(self) -> float:
        return self.pi[6]

    @property
    def y0(self) -> float:
        return self.pi[7]

    def factors(self) -> tuple[FactorParams, FactorParams]:
        """Recover the (k, theta, sigma) pairs; raises SingularityError if k = 0."""
        return ksigma_from_phi(np.asarray(self.pi))

    def affine_coeffs(self) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
        """Drift/diffusion triples (k, eta, sigma) with eta = k*theta per factor.

        eta = phi3 * sigma^2 / 2 stays finite on the k = 0 boundary where
        theta itself is unbounded, so simulation never needs theta.
        """
        out = []
        for phi, sign in ((self.phi_x, 1), (self.phi_y, -1)):
            p1, p2, p3 = phi
            k = 2.0 * p2 - p1
            var = max(2.0 * sign * (p2 * p1 - p2 * p2), 0.0)
            out.append((k, 0.5 * p3 * var, math.sqrt(var)))
        return out[0], out[1]


def admissibility_violations(pi: np.ndarray, tol: float = _TOL) -> list[str]:
    """List the admissibility constraints violated by ``pi`` (empty if none)."""
    v = []
    if np.min(pi) < -tol:
        v.append(f"negative component {np.min(pi):.3g}")
    if pi[2] < 1.0 - tol:
        v.append(f"phi3_x = {pi[2]:.6g} < 1 (Feller)")
    if pi[5] < 1.0 - tol:
        v.append(f"phi3_y = {pi[5]:.6g} < 1 (Feller)")
    if pi[1] - pi[0] > tol:
        v.append(f"phi2_x > phi1_x ({pi[1]:.6g} > {pi[0]:.6g}): sigma_x^2 < 0")
    if pi[0] - 2.0 * pi[1] > tol:
        v.append(f"phi1_x > 2*phi2_x ({pi[0]:.6g} > {2 * pi[1]:.6g}): k_x < 0")
    if pi[3] - pi[4] > tol:
        v.append(f"phi1_y > phi2_y ({pi[3]:.6g} > {pi[4]:.6g}): sigma_y^2 < 0")
    if pi[3] - 2.0 * pi[4] > tol:
        v.append(f"phi1_y > 2*phi2_y: k_y < 0")
    return v


def _ab_phi(phi: tuple[float, float, float], tau):
    """Stable evaluation of the bond coefficients (A, B) for one factor.

    Uses u = (1 - e^{-phi1 tau}) / phi1 so that neither large phi1*tau nor
    phi1 -> 0 overflows:  B = u / (phi2 u + e^{-phi1 tau}),
    log A = phi3 ((phi2 - phi1) tau - log(phi2 u + e^{-phi1 tau})).
    """
    p1, p2, p3 = phi
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < -1e-12):
        raise ValueError("tau = T - t must be non-negative")
    tau = np.maximum(tau, 0.0)
    e = np.exp(-p1 * tau)
    if p1 > 0.0:
        u = -np.expm1(-p1 * tau) / p1
    else:
        u = tau
    den = p2 * u + e
    B = u / den
    logA = p3 * ((p2 - p1) * tau - np.log(den))
    return np.exp(logA), B


def bond_AB(params: FactorParams, t: float, T: float) -> tuple[float, float]:
    """Closed-form (A_z, B_z) of the single-factor bond coefficient ODEs.

    A_z(T,T) = 1 and B_z(T,T) = 0; for phi2 > 0, B_z -> 1/phi2 as T-t -> inf.
    """
    if T < t - 1e-12:
        raise ValueError(f"need t <= T, got t={t}, T={T}")
    A, B = _ab_phi(params.phi, T - t)
    return float(A), float(B)


def _zcb_cirminus_phi(phi_x, phi_y, x, y, tau):
    Ax, Bx = _ab_phi(phi_x, tau)
    Ay, By = _ab_phi(phi_y, tau)
    return Ax * Ay * np.exp(-Bx * np.asarray(x) + By * np.asarray(y))


def zcb_cirminus(params: ModelParams, x, y, t: float, T: float):
    """Zero-coupon bond of the unshifted model: A_x e^{-B_x x} A_y e^{B_y y}."""
    if T < t - 1e-12:
        raise ValueError(f"need t <= T, got t={t}, T={T}")
    return _zcb_cirminus_phi(params.phi_x, params.phi_y, x, y, max(T - t, 0.0))


@dataclass(frozen=True)
class ShiftedModel:
    """Model parameters bound to a market curve; immutable and shareable.

    The shift never appears explicitly: every shifted bond price is the
    curve-ratio formula, so P(0, T) = P_M(0, T) holds by construction.
    """

    params: ModelParams
    curve: DiscountCurve

    def zcb_cirminus(self, x, y, t: float, T: float):
        return zcb_cirminus(self.params, x, y, t, T)

    def zcb(self, x, y, t: float, T: float):
        return zcb_shifted(self, x, y, t, T)

    def zcb0(self, T: float) -> float:
        """P(0, T) at the initial state; equals the market discount exactly."""
        return float(zcb_shifted(self, self.params.x0, self.params.y0, 0.0, T))

    def cir_ratio(self, t: float, T: float) -> float:
        """Deterministic shift factor exp(-int_t^T psi) as a curve ratio."""
        p = self.params
        num = self.curve.discount(T) * zcb_cirminus(p, p.x0, p.y0, 0.0, t)
        den = self.curve.discount(t) * zcb_cirminus(p, p.x0, p.y0, 0.0, T)
        return float(num / den)


def zcb_shifted(model: ShiftedModel, x, y, t: float, T: float):
    """Shifted-model bond price via the exact market/model curve ratio."""
    return model.cir_ratio(t, T) * zcb_cirminus(model.params, x, y, t, T)


def _dlogA_dT(phi, tau: float) -> float:
    """-d/dT log A_z(t, T) in closed form (zero at tau = 0)."""
    p1, p2, p3 = phi
    e = math.exp(-p1 * tau)
    u = -math.expm1(-p1 * tau) / p1 if p1 > 0.0 else tau
    return p2 * p3 * (p1 - p2) * u / (e + p2 * u)


def _dB_dT(phi, tau: float) -> float:
    """d/dT B_z(t, T) in closed form (one at tau = 0)."""
    p1, p2, p3 = phi
    e = math.exp(-p1 * tau)
    u = -math.expm1(-p1 * tau) / p1 if p1 > 0.0 else tau
    return e / (e + p2 * u) ** 2


def forward_rate_model(params: ModelParams, t: float) -> float:
    """Instantaneous forward rate f(0, t) of the unshifted model.

    f(0, 0) equals the initial short rate x0 - y0.
    """
    if t < 0.0:
        raise ValueError("t must be non-negative")
    fx = _dlogA_dT(params.phi_x, t) + _dB_dT(params.phi_x, t) * params.x0
    fy = _dlogA_dT(params.phi_y, t) - _dB_dT(params.phi_y, t) * params.y0
    return fx + fy
