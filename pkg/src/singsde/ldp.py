"""Quasipotential of the absorption time at zero.

For ``dx = (lam x - mu x^(1+kappa)) dt + sigma x^alpha dW`` started at the
stable equilibrium ``x* = (lam/mu)^(1/kappa)``, the exponential scale of
the mean absorption time is governed by

    U(x) = int_x^{x*} (lam u - mu u^(1+kappa)) / u^(2 alpha) du,

whose value at zero has the closed form

    U(0) = lam (lam/mu)^(eps/kappa) (1/eps - 1/(eps + kappa)),  eps = 2 (1 - alpha).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from ._numerics import integrate

__all__ = [
    "LdpError", "Regime", "INF", "QuasipotentialReport", "quasipotential", "quasipotential_at_zero",
    "asymptotic_regime", "quasipotential_report", "series_expansion", "ExpansionDiagnostic",
    "resolve_expansion_sign",
]

INF = "inf"  # serialized infinity sentinel


class LdpError(ValueError):
    """Parameters outside the domain of the quasipotential formulas."""


class Regime(str, Enum):
    SUB_EXPONENTIAL = "SubExponential"
    EXPONENTIAL = "Exponential"
    SUPER_EXPONENTIAL = "SuperExponential"


def _check(lam: float, mu: float, kappa: float, alpha: float) -> None:
    if not (lam > 0 and mu > 0 and kappa > 0):
        raise LdpError("need lam > 0, mu > 0, kappa > 0")
    # alpha = 1/2 is accepted: the integrand stays bounded there
    if not 0.5 <= alpha < 1.0:
        raise LdpError(f"alpha = {alpha} outside [1/2, 1)")


def quasipotential(lam: float, mu: float, kappa: float, alpha: float, x: float) -> float:
    """U(x) by quadrature, with the u^(1-2alpha) singularity at 0 removed by substitution."""
    _check(lam, mu, kappa, alpha)
    xs = (lam / mu) ** (1.0 / kappa)
    if not 0.0 <= x <= xs:
        raise LdpError(f"x = {x} outside [0, {xs:g}]")
    if x == xs:
        return 0.0
    f = lambda u: (lam * u - mu * u ** (1.0 + kappa)) / u ** (2.0 * alpha) if u > 0 else 0.0
    p = 1.0 - 2.0 * alpha
    val, _ = integrate(f, x, xs, lo_exp=p if (x == 0.0 and p < 0) else None, epsabs=1e-14, epsrel=1e-13)
    return val


def quasipotential_at_zero(lam: float, mu: float, kappa: float, alpha: float) -> float:
    """Closed form of U(0)."""
    _check(lam, mu, kappa, alpha)
    eps = 2.0 * (1.0 - alpha)
    return lam * (lam / mu) ** (eps / kappa) * (1.0 / eps - 1.0 / (eps + kappa))


@dataclass(frozen=True)
class QuasipotentialReport:
    """Quasipotential value and blow-up regime.

    ``c`` is the constraint value lim lam / (1 - alpha); ``limit`` is the
    limit of U(0) along that constraint. Infinite values are the string
    ``"inf"``.
    """

    regime: Regime
    limit: float | str
    c: float | str
    mu: float
    kappa: float
    U0: float | None = None
    lam: float | None = None
    alpha: float | None = None
    path: tuple[tuple[float, float, float], ...] = ()
    empirical_limit: float | None = None
    deviation: float | None = None
    notes: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict[str, Any]:
        return {"regime": self.regime.value, "limit": self.limit, "c": self.c, "mu": self.mu,
                "kappa": self.kappa, "U0": self.U0, "lambda": self.lam, "alpha": self.alpha,
                "path": [{"alpha": a, "lambda": l, "U0": u} for a, l, u in self.path],
                "empirical_limit": self.empirical_limit, "deviation": self.deviation, "notes": list(self.notes)}


_PATH_ALPHAS = (0.9, 0.99, 0.999, 0.9999)


def asymptotic_regime(mu: float, kappa: float, c: float | str) -> QuasipotentialReport:
    """Regime of U(0) as alpha -> 1 with lam / (1 - alpha) -> c.

    c = 0 is sub-exponential, finite c > 0 exponential with limit c/2,
    c = inf super-exponential. For finite c the closed form is tabulated
    along lam = c (1 - alpha) and the last value is reported as the
    empirical limit.
    """
    if not (mu > 0 and kappa > 0):
        raise LdpError("need mu > 0, kappa > 0")
    if c == INF or (isinstance(c, float) and math.isinf(c)):
        return QuasipotentialReport(Regime.SUPER_EXPONENTIAL, INF, INF, mu, kappa)
    c = float(c)
    if c < 0:
        raise LdpError("c must be >= 0")
    if c == 0.0:
        return QuasipotentialReport(Regime.SUB_EXPONENTIAL, 0.0, 0.0, mu, kappa)
    path = tuple((a, c * (1 - a), quasipotential_at_zero(c * (1 - a), mu, kappa, a)) for a in _PATH_ALPHAS)
    emp = path[-1][2]
    return QuasipotentialReport(Regime.EXPONENTIAL, c / 2.0, c, mu, kappa, path=path, empirical_limit=emp,
                                deviation=abs(emp - c / 2.0) / (c / 2.0))


def quasipotential_report(lam: float, mu: float, kappa: float, alpha: float) -> QuasipotentialReport:
    """U(0) at one parameter point with the regime of c = lam / (1 - alpha)."""
    u0 = quasipotential_at_zero(lam, mu, kappa, alpha)
    rep = asymptotic_regime(mu, kappa, lam / (1.0 - alpha))
    return QuasipotentialReport(rep.regime, rep.limit, rep.c, mu, kappa, U0=u0, lam=lam, alpha=alpha,
                                path=rep.path, empirical_limit=rep.empirical_limit, deviation=rep.deviation,
                                notes=("regime evaluated at c = lam / (1 - alpha) for the given point",))


# --- series expansion (diagnostic) --------------------------------------------

def series_expansion(lam: float, mu: float, kappa: float, alpha: float, sign: int = 1) -> float:
    """Two-term small-(1-alpha) expansion of U(0).

    ``(sign * lam / (1 - alpha) + (2/kappa) lam log lam) / (2 mu^(eps/kappa))``.
    ``sign = -1`` reproduces the ``lam / (alpha - 1)`` variant.
    """
    _check(lam, mu, kappa, alpha)
    eps = 2.0 * (1.0 - alpha)
    return (sign * lam / (1.0 - alpha) + 2.0 / kappa * lam * math.log(lam)) / (2.0 * mu ** (eps / kappa))


@dataclass(frozen=True)
class ExpansionDiagnostic:
    sign: int
    error_plus: float
    error_minus: float


def resolve_expansion_sign(lam: float, mu: float, kappa: float, alpha: float) -> ExpansionDiagnostic:
    """Pick the sign of the leading expansion term closest to the exact closed form."""
    exact = quasipotential_at_zero(lam, mu, kappa, alpha)
    ep = abs(series_expansion(lam, mu, kappa, alpha, 1) - exact)
    em = abs(series_expansion(lam, mu, kappa, alpha, -1) - exact)
    return ExpansionDiagnostic(1 if ep <= em else -1, ep, em)
