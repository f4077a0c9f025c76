"""Stationary densities of the forward Kolmogorov equation.

Zero-flux stationary solutions are ``p0(x) = exp(2 G(x)) / gamma(x)^2``
with ``G`` the running integral of ``f / gamma^2`` from a reference point
inside the support. Closed forms are used where they exist (pitchfork,
saddle-node with alpha = 1); the generic exponential-integral route is
always available for cross-checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

import numpy as np
from scipy.optimize import brentq

from . import scale as _scale
from ._numerics import integrate
from .classify import Form, classify_stationary
from .model import PITCHFORK_KINDS, ModelKind, ModelSpec, diffusion_eval, drift_eval

__all__ = [
    "DensityError", "NotIntegrableError", "ModeKind", "Mode", "DensityProfile", "PBifurcation",
    "granted_support", "reference_point", "stationary_density_unnormalized", "normalize_density",
    "density_profile", "pitchfork_mode", "saddle_node_phi", "saddle_node_normalization",
    "saddle_node_moments", "saddle_node_mode", "lyapunov_exponent_sn", "p_bifurcation_points",
    "particular_solution", "kolmogorov_residual",
]


class DensityError(ValueError):
    """Request outside the domain where a stationary density exists."""


class NotIntegrableError(DensityError):
    """The unnormalized density is not integrable at ``endpoint``."""

    def __init__(self, endpoint: float, detail: str = ""):
        super().__init__(f"density is not integrable at {endpoint:g}" + (f": {detail}" if detail else ""))
        self.endpoint = endpoint


class ModeKind(str, Enum):
    INTERIOR = "Interior"
    DIVERGES_AT_BOUNDARY = "DivergesAtBoundary"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class Mode:
    """Location of the density maximum."""

    kind: ModeKind
    value: float | None  # interior maximiser, or the boundary point

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "value": self.value}


# --- supports ----------------------------------------------------------------

def granted_support(model: ModelSpec, x: float) -> tuple[float, float]:
    """Classifier-granted density support containing ``x``."""
    for e in classify_stationary(model):
        lo, hi = e.support
        if e.form is Form.DENSITY and lo < x < hi:
            return (lo, hi)
    raise DensityError(f"no stationary density is granted on an interval containing x = {x}")


def _check_support(model: ModelSpec, support: Sequence[float]) -> tuple[float, float]:
    lo, hi = float(support[0]), float(support[1])
    for e in classify_stationary(model):
        if e.form is Form.DENSITY and e.support == (lo, hi):
            return lo, hi
    raise DensityError(f"no stationary density is granted on ({lo}, {hi})")


def reference_point(support: Sequence[float]) -> float:
    """Reference point for the exponential integral.

    +1 on positive supports and -1 on negative ones when it lies inside;
    otherwise a point one unit inside the support (0 on the whole line).
    """
    lo, hi = support
    if lo < 1.0 < hi and lo >= 0.0:
        return 1.0
    if lo < -1.0 < hi and hi <= 0.0:
        return -1.0
    if math.isinf(lo) and math.isinf(hi):
        return 0.0
    if math.isinf(lo):
        return hi - 1.0
    if math.isinf(hi):
        return lo + 1.0
    return 0.5 * (lo + hi)


# --- unnormalized density ------------------------------------------------------

def _pitchfork_G(model: ModelSpec, x: float, ref: float) -> float:
    lam, s2, al = model.lam, model.sigma ** 2, model.alpha

    def prim(y, e):
        # antiderivative of y**(e - 1)
        return math.log(y) if e == 0 else y ** e / e

    def F(y):
        ay = abs(y)
        return (lam * prim(ay, 2 - 2 * al) - prim(ay, 4 - 2 * al)) / s2

    return F(x) - F(ref)


def _closed_form(model: ModelSpec, x: float) -> float | None:
    if model.kind is ModelKind.SADDLE_NODE and model.alpha == 1.0:
        a, s2 = model.a, model.sigma ** 2
        if a > 0:
            r = math.sqrt(a)
            phi = 1.0 / (s2 * r)
            return abs(x + r) ** (-2.0 + phi) * abs(x - r) ** (-2.0 - phi)
        if a < 0:
            b = math.sqrt(-a)
            return math.exp(-2.0 * math.atan(x / b) / (s2 * b)) / (x * x - a) ** 2
    return None


def stationary_density_unnormalized(model: ModelSpec, x: float, route: str = "auto") -> float:
    """Unnormalized stationary density at ``x``.

    Parameters
    ----------
    route : {"auto", "closed", "quadrature"}
        ``"closed"`` uses the closed forms (saddle-node with alpha = 1,
        pitchfork antiderivatives), ``"quadrature"`` the generic form
        ``exp(2 int_ref^x f / gamma^2) / gamma^2``. ``"auto"`` prefers
        closed forms. Different routes differ by a constant factor only.
    """
    support = granted_support(model, x)
    if route not in ("auto", "closed", "quadrature"):
        raise ValueError(f"unknown route {route!r}")
    if route != "quadrature":
        val = _closed_form(model, x)
        if val is not None:
            return val
        if model.kind in PITCHFORK_KINDS:
            G = _pitchfork_G(model, x, reference_point(support))
            return math.exp(2.0 * G) / diffusion_eval(model, x) ** 2
        if route == "closed":
            raise DensityError("no closed form for this model")
    ref = reference_point(support)
    G = _scale.compute_G(model, support, ref, x)
    return math.exp(2.0 * G) / diffusion_eval(model, x) ** 2


def _density_exponent(model: ModelSpec, end: float, ref: float) -> float | None:
    """Power of the density at a finite end, None if it decays faster than any power."""
    loc = _scale.local_behaviour(model, end, ref)
    if loc.regular:
        return 0.0
    if loc.drift_zero or loc.q > -1.0:
        return -2.0 * loc.diff_exp
    if loc.q < -1.0:
        return None
    return -2.0 * loc.coef - 2.0 * loc.diff_exp


def _require_integrable(model: ModelSpec, lo: float, hi: float, ref: float) -> None:
    for end in (lo, hi):
        loc = _scale.local_behaviour(model, end, ref)
        if not _scale._speed_finite(loc):
            raise NotIntegrableError(end, f"local density exponent analysis ({loc.q:g}, {loc.coef:g})")


def _integrate_density(model: ModelSpec, lo: float, hi: float, fun, route: str) -> float:
    ref = reference_point((lo, hi))
    lo_exp = _density_exponent(model, lo, ref) if math.isfinite(lo) else None
    hi_exp = _density_exponent(model, hi, ref) if math.isfinite(hi) else None
    lo_exp = lo_exp if lo_exp is not None and lo_exp < 0 else None
    hi_exp = hi_exp if hi_exp is not None and hi_exp < 0 else None
    if math.isinf(lo) and math.isinf(hi):
        v1, _ = integrate(lambda y: fun(y) * stationary_density_unnormalized(model, y, route), -math.inf, ref)
        v2, _ = integrate(lambda y: fun(y) * stationary_density_unnormalized(model, y, route), ref, math.inf)
        return v1 + v2
    # split at the reference point so each piece has one special end
    v1, _ = integrate(lambda y: fun(y) * stationary_density_unnormalized(model, y, route), lo, ref,
                      lo_exp=lo_exp, epsabs=1e-13, epsrel=1e-11)
    v2, _ = integrate(lambda y: fun(y) * stationary_density_unnormalized(model, y, route), ref, hi,
                      hi_exp=hi_exp, epsabs=1e-13, epsrel=1e-11)
    return v1 + v2


def normalize_density(model: ModelSpec, support: Sequence[float], route: str = "auto") -> float:
    """Normalization Z with ``Z * int q0 = 1`` over ``support``.

    Raises
    ------
    NotIntegrableError
        Naming the end where the unnormalized density is not integrable.
    """
    lo, hi = float(support[0]), float(support[1])
    ref = reference_point((lo, hi))
    _require_integrable(model, lo, hi, ref)
    _check_support(model, (lo, hi))
    if route == "closed" and model.kind is ModelKind.SADDLE_NODE and model.alpha == 1.0 and model.a > 0:
        return saddle_node_normalization(model.a, model.sigma)
    return 1.0 / _integrate_density(model, lo, hi, lambda y: 1.0, route)


# --- modes ---------------------------------------------------------------------

def pitchfork_mode(lam: float, sigma: float, alpha: float) -> float:
    """Positive density maximum of the pitchfork with alpha > 1.

    Root of ``sigma^2 alpha - lam X^(2-2alpha) + X^(4-2alpha) = 0``.
    """
    if not (lam > 0 and sigma > 0 and alpha > 1):
        raise DensityError("pitchfork_mode needs lam > 0, sigma > 0, alpha > 1")

    def eq(X):
        return sigma ** 2 * alpha - lam * X ** (2 - 2 * alpha) + X ** (4 - 2 * alpha)

    hi = math.sqrt(lam) * (1.0 + sigma ** 2 * alpha)
    lo = hi * 1e-12
    for _ in range(2):
        if eq(lo) * eq(hi) < 0:
            return brentq(eq, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        hi *= 10.0
    raise DensityError("mode equation has no sign change on the widened bracket")


def _mode_equation(model: ModelSpec, x: float) -> float:
    # d/dx log q0 * gamma^2 = 2 f - (gamma^2)'
    h = 1e-6 * max(1.0, abs(x))
    dg2 = (diffusion_eval(model, x + h) ** 2 - diffusion_eval(model, x - h) ** 2) / (2 * h)
    return 2.0 * drift_eval(model, x) - dg2


def _generic_mode(model: ModelSpec, lo: float, hi: float) -> Mode:
    ref = reference_point((lo, hi))
    for end in (lo, hi):
        if math.isfinite(end):
            p = _density_exponent(model, end, ref)
            if p is not None and p < 0:
                return Mode(ModeKind.DIVERGES_AT_BOUNDARY, end)
    a = lo if math.isfinite(lo) else ref - 50.0
    b = hi if math.isfinite(hi) else ref + 50.0
    xs = np.linspace(a, b, 4001)[1:-1]
    vals = np.array([_mode_equation(model, x) for x in xs])
    best, best_q = None, -math.inf
    for i in np.flatnonzero(np.sign(vals[:-1]) > np.sign(vals[1:])):
        r = brentq(lambda x: _mode_equation(model, x), xs[i], xs[i + 1], xtol=1e-14)
        q = stationary_density_unnormalized(model, r)
        if q > best_q:
            best, best_q = r, q
    if best is None:
        raise DensityError("no interior maximum found")
    return Mode(ModeKind.INTERIOR, best)


def density_mode(model: ModelSpec, support: Sequence[float]) -> Mode:
    """Mode of the stationary density on ``support``."""
    lo, hi = _check_support(model, support)
    if model.kind is ModelKind.SADDLE_NODE and model.alpha == 1.0:
        return saddle_node_mode(model.a, model.sigma)
    if model.kind in PITCHFORK_KINDS and model.lam > 0:
        sgn = 1.0 if lo >= 0 else -1.0
        if model.alpha > 1.0:
            return Mode(ModeKind.INTERIOR, sgn * pitchfork_mode(model.lam, model.sigma, model.alpha))
        if model.alpha == 1.0:
            s2 = model.sigma ** 2
            if model.lam > s2:
                return Mode(ModeKind.INTERIOR, sgn * math.sqrt(model.lam - s2))
            if model.lam == s2:
                return Mode(ModeKind.BOUNDARY, 0.0)
            return Mode(ModeKind.DIVERGES_AT_BOUNDARY, 0.0)
    return _generic_mode(model, lo, hi)


# --- saddle-node closed forms -----------------------------------------------

def saddle_node_phi(a: float, sigma: float) -> float:
    """Phi = 1 / (sigma^2 sqrt(a))."""
    return 1.0 / (sigma ** 2 * math.sqrt(a))


def _window(a: float, sigma: float) -> float:
    if not (sigma > 0 and 0 < a < sigma ** -4):
        raise DensityError(f"a = {a} is outside the existence window (0, sigma^-4) = (0, {sigma ** -4:g})")
    return saddle_node_phi(a, sigma)


def saddle_node_normalization(a: float, sigma: float) -> float:
    """Z = 4 a^(3/2) Phi (Phi^2 - 1) for the closed-form density on (-inf, -sqrt(a))."""
    phi = _window(a, sigma)
    return 4.0 * a ** 1.5 * phi * (phi * phi - 1.0)


def saddle_node_moments(a: float, sigma: float) -> tuple[float, float]:
    """Mean and second moment (m, s) of the saddle-node stationary density."""
    phi = _window(a, sigma)
    return -phi * math.sqrt(a), (2.0 * phi * phi - 1.0) * a


def saddle_node_mode(a: float, sigma: float) -> Mode:
    """Density maximum, alpha = 1.

    Interior at -1/(2 sigma^2) when Phi > 2 (or a < 0); the density
    diverges at -sqrt(a) when Phi < 2; Phi = 2 is the P-bifurcation.
    """
    if a < 0:
        return Mode(ModeKind.INTERIOR, -0.5 / sigma ** 2)
    phi = _window(a, sigma)
    if phi > 2.0:
        return Mode(ModeKind.INTERIOR, -0.5 / sigma ** 2)
    if phi < 2.0:
        return Mode(ModeKind.DIVERGES_AT_BOUNDARY, -math.sqrt(a))
    return Mode(ModeKind.BOUNDARY, -math.sqrt(a))


def lyapunov_exponent_sn(a: float, sigma: float) -> float:
    """Lyapunov exponent of the linearization, 2 (sigma^4 a - 1) / sigma^2."""
    _window(a, sigma)
    return 2.0 * (sigma ** 4 * a - 1.0) / sigma ** 2


@dataclass(frozen=True)
class PBifurcation:
    """Parameter value where the density changes shape."""

    parameter: str
    value: float
    condition: str

    def to_dict(self) -> dict[str, Any]:
        return {"parameter": self.parameter, "value": self.value, "condition": self.condition}


def p_bifurcation_points(model: ModelSpec) -> list[PBifurcation]:
    """Shape-transition thresholds at fixed sigma (alpha = 1 only)."""
    if model.alpha != 1.0:
        return []
    s2 = model.sigma ** 2
    if model.kind in PITCHFORK_KINDS:
        return [PBifurcation("lambda", s2, "lambda = sigma^2")]
    if model.kind is ModelKind.SADDLE_NODE:
        return [PBifurcation("a", (0.5 / s2) ** 2, "sigma^2 sqrt(a) = 1/2")]
    return []


# --- profile -------------------------------------------------------------------

@dataclass(frozen=True)
class DensityProfile:
    """Normalized density on a grid with summary statistics."""

    support: tuple[float, float]
    Z: float
    grid: tuple[float, ...]
    values: tuple[float, ...]
    mode: Mode
    mean: float
    second_moment: float
    shape: str

    def to_dict(self) -> dict[str, Any]:
        return {"support": [_jnum(v) for v in self.support], "Z": self.Z, "mode": self.mode.to_dict(),
                "mean": self.mean, "second_moment": self.second_moment, "shape": self.shape}


def _jnum(x: float):
    return ("inf" if x > 0 else "-inf") if math.isinf(x) else x


def density_profile(model: ModelSpec, support: Sequence[float], grid: Sequence[float],
                    route: str = "auto") -> DensityProfile:
    """Normalized density, mode and first two moments on ``support``."""
    lo, hi = _check_support(model, support)
    Z = normalize_density(model, (lo, hi), route)
    vals = [Z * stationary_density_unnormalized(model, x, route) if lo < x < hi else 0.0 for x in grid]
    mode = density_mode(model, (lo, hi))
    if model.kind is ModelKind.SADDLE_NODE and model.alpha == 1.0 and model.a > 0:
        m, s = saddle_node_moments(model.a, model.sigma)
    else:
        m = Z * _integrate_density(model, lo, hi, lambda y: y, route)
        try:
            s = Z * _integrate_density(model, lo, hi, lambda y: y * y, route)
        except Exception:
            s = math.inf
    shape = "PeakedInterior" if mode.kind is ModeKind.INTERIOR else "DivergentAtBoundary"
    return DensityProfile((lo, hi), Z, tuple(float(g) for g in grid), tuple(vals), mode, m, s, shape)


# --- nonzero flux ------------------------------------------------------------

def particular_solution(model: ModelSpec, x: float, K: float, ref: float = 1.0) -> float:
    """Stationary solution carrying constant probability flux K.

    ``p_K = exp(2G) / gamma^2 * (gamma(ref)^2 p0(ref) - 2 K int_ref^x exp(-2G))``
    with G measured from ``ref``; ``p0(ref) = 1 / gamma(ref)^2`` so the
    bracket starts at 1. Used only to check non-integrability claims.
    """
    lo, hi = _scale.natural_interval(model, ref)
    G = _scale.compute_G(model, (lo, hi), ref, x)
    if x == ref:
        P = 0.0
    else:
        P = integrate(lambda y: math.exp(-2.0 * _scale.compute_G(model, (lo, hi), ref, y)), min(ref, x),
                      max(ref, x), epsabs=1e-13, epsrel=1e-11)[0]
        P = P if x > ref else -P
    return math.exp(2.0 * G) / diffusion_eval(model, x) ** 2 * (1.0 - 2.0 * K * P)


def kolmogorov_residual(model: ModelSpec, x: float, K: float, ref: float = 1.0, h: float = 1e-4) -> float:
    """f p - (1/2) (gamma^2 p)' - K for ``p = particular_solution``, by central differences."""
    flux = lambda y: diffusion_eval(model, y) ** 2 * particular_solution(model, y, K, ref)
    d = (flux(x + h) - flux(x - h)) / (2 * h)
    return drift_eval(model, x) * particular_solution(model, x, K, ref) - 0.5 * d - K
