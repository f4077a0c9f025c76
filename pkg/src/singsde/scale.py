"""Feller scale machinery: G, scale function p, speed measure and v.

For a diffusion ``dx = f(x) dt + gamma(x) dW`` on an interval I with
reference point c,

    G(x) = int_c^x f / gamma^2,        p(x) = int_c^x exp(-2 G),
    m(dy) = 2 exp(2 G(y)) / gamma(y)^2 dy,
    v(x) = int_c^x (p(x) - p(y)) m(dy).

Finiteness of p and v at the ends of I decides whether the ends are
reached and in what time. Infinity is always decided from the leading
local power of f / gamma^2 at the end; numerics only confirm it.

Numerically each half interval (c towards an end) is mapped to
tau in (0, 1], tau = 1 at c and tau -> 0 at the end, with a power
substitution that makes the integrands bounded. The running integrals
are piecewise-Chebyshev interpolants integrated exactly, which chains
G -> p -> M -> v without nested quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from ._numerics import ABS_TOL, REL_TOL, Piecewise, QuadratureError, cumulative_relative, fit, integrate, quad
from .model import (ZERO_SINGULAR_KINDS, ModelKind, ModelSpec, diffusion_eval, diffusion_vec,
                    drift_eval, drift_vec)

__all__ = [
    "ScaleError", "LimitKind", "Limit", "EndpointReport", "ExitTime", "Destination",
    "BoundaryReport", "ScaleTable", "compute_G", "scale_p", "scale_v", "boundary_limits",
    "build_scale_table", "hitting_probability", "mean_exit_time", "natural_interval",
    "local_behaviour",
]

_FIT_TOL = 1e-14
_GL40 = np.polynomial.legendre.leggauss(40)
_CUT_DROP = 80.0  # exp(-80) ~ 2e-35: negligible tail mass
_K_MAX = 64.0


class ScaleError(ValueError):
    """Invalid request (bad interval, infinite limit where a value is needed)."""


class LimitKind(str, Enum):
    FINITE = "Finite"
    PLUS_INFINITY = "PlusInfinity"
    MINUS_INFINITY = "MinusInfinity"
    INFINITE = "Infinite"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Limit:
    """Limit of p or v at an interval end."""

    kind: LimitKind
    value: float | None = None
    error: float | None = None
    confirmed: bool | None = None

    @property
    def finite(self) -> bool:
        return self.kind is LimitKind.FINITE

    @property
    def infinite(self) -> bool:
        return self.kind in (LimitKind.PLUS_INFINITY, LimitKind.MINUS_INFINITY, LimitKind.INFINITE)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "value": self.value, "error": self.error,
                "confirmed": self.confirmed}


# --- local analysis ---------------------------------------------------------

@dataclass(frozen=True)
class LocalBehaviour:
    """Leading behaviour near an interval end.

    With s the distance to a finite end (or |x| at an infinite one) and
    ``dir`` the direction from the interior towards the end,

        f / gamma^2 ~ dir * coef * s**q,   f ~ dir * drift_coef * s**drift_order,
        gamma^2 ~ s**(2 * diff_exp).

    ``coef > 0`` means the drift pushes towards the end.
    """

    end: float
    direction: int
    q: float
    coef: float
    drift_order: float
    diff_exp: float
    drift_zero: bool = False
    regular: bool = False
    minor_exps: tuple[float, ...] = ()


def _leading(terms: list[tuple[float, float]], largest: bool) -> tuple[float, float, tuple[float, ...]]:
    # terms: (exponent, coefficient); merge equal exponents, drop zeros
    merged: dict[float, float] = {}
    for e, c in terms:
        merged[e] = merged.get(e, 0.0) + c
    items = [(e, c) for e, c in merged.items() if c != 0.0]
    if not items:
        return math.nan, 0.0, ()
    items.sort(key=lambda t: t[0], reverse=largest)
    return items[0][0], items[0][1], tuple(e for e, _ in items[1:])


def local_behaviour(model: ModelSpec, end: float, c: float) -> LocalBehaviour:
    """Leading powers of drift and diffusion at ``end`` seen from ``c``."""
    d = 1 if end > c else -1
    s_, al = model.sigma, model.alpha
    if math.isinf(end):
        if model.kind is ModelKind.SADDLE_NODE:
            g2c, de = s_ ** 2, 2 * al
            of, fc, minor = 2.0, -float(d), ()
        elif model.kind in (ModelKind.PITCHFORK, ModelKind.SUBCRITICAL_PITCHFORK):
            g2c, de = s_ ** 2, al
            of, fc, minor = _leading([(3.0, -1.0), (1.0, model.lam)], largest=True)
        else:
            g2c, de = model.d_coef ** 2, model.delta_exp
            of, fc, minor = _leading([(1.0 + model.beta, -model.nu), (1.0, model.lam)], largest=True)
        if fc == 0.0:
            return LocalBehaviour(end, d, math.nan, 0.0, math.nan, de, drift_zero=True)
        return LocalBehaviour(end, d, of - 2 * de, fc / g2c, of, de,
                              minor_exps=tuple(m - 2 * de for m in minor))
    if diffusion_eval(model, end) != 0.0:
        f = drift_eval(model, end)
        return LocalBehaviour(end, d, 0.0, d * f / diffusion_eval(model, end) ** 2, 0.0, 0.0, regular=True)
    if model.kind is ModelKind.SADDLE_NODE:
        if model.a == 0.0:
            fc = -float(d)
            return LocalBehaviour(end, d, 2 - 4 * al, fc / s_ ** 2, 2.0, 2 * al)
        r2 = 2.0 * math.sqrt(model.a)
        fc = r2 if end > 0 else -r2
        return LocalBehaviour(end, d, 1 - 2 * al, fc / (s_ ** 2 * r2 ** (2 * al)), 1.0, al)
    # zero-singular kinds at 0: x = -d s, f = -d (lam s + mu s^(1+kappa))
    if model.kind in ZERO_SINGULAR_KINDS and end == 0.0:
        mu = -1.0 if model.kind is not ModelKind.GENERAL_POWER else model.mu
        kappa = 2.0 if model.kind is not ModelKind.GENERAL_POWER else model.kappa
        of, fc, minor = _leading([(1.0, -model.lam), (1.0 + kappa, -mu)], largest=False)
        if fc == 0.0:
            return LocalBehaviour(end, d, math.nan, 0.0, math.nan, al, drift_zero=True)
        return LocalBehaviour(end, d, of - 2 * al, fc / s_ ** 2, of, al,
                              minor_exps=tuple(m - 2 * al for m in minor))
    raise ScaleError(f"diffusion vanishes at {end:g} with no local expansion available")


def _G_diverges(loc: LocalBehaviour) -> bool:
    if loc.drift_zero or loc.regular:
        return False
    return loc.q <= -1.0 if math.isfinite(loc.end) else loc.q >= -1.0


def _p_finite(loc: LocalBehaviour) -> bool | None:
    if loc.regular:
        return True
    if math.isfinite(loc.end):
        if loc.drift_zero or loc.q > -1.0:
            return True
        if loc.q < -1.0:
            return loc.coef > 0.0
        if loc.coef == -0.5:
            return None
        return loc.coef > -0.5
    if loc.drift_zero or loc.q < -1.0:
        return False
    if loc.q > -1.0:
        return loc.coef > 0.0
    if loc.coef == 0.5:
        return None
    return loc.coef > 0.5


def _v_finite(loc: LocalBehaviour) -> bool:
    # only meaningful where p is finite
    if loc.regular:
        return True
    if math.isfinite(loc.end):
        if loc.drift_zero or loc.q > -1.0:
            return loc.diff_exp < 1.0
        return False
    if loc.q > -1.0:
        return loc.drift_order > 1.0
    return loc.diff_exp > 1.0


def _speed_finite(loc: LocalBehaviour) -> bool:
    # total speed measure towards an end where p is infinite
    if math.isfinite(loc.end):
        if loc.drift_zero or loc.q > -1.0:
            return 2 * loc.diff_exp < 1.0
        if loc.q < -1.0:
            return loc.coef < 0.0
        return -2 * loc.coef - 2 * loc.diff_exp > -1.0
    if loc.drift_zero or loc.q < -1.0:
        return 2 * loc.diff_exp > 1.0
    if loc.q > -1.0:
        return loc.coef < 0.0
    return 2 * loc.coef - 2 * loc.diff_exp < -1.0


# --- half-interval chain ---------------------------------------------------

class _Half:
    """Chained scale integrals from c towards one end of the interval."""

    def __init__(self, model: ModelSpec, c: float, end: float, tol: float | None = None):
        self.model, self.c, self.end = model, c, end
        self.tol = _FIT_TOL if tol is None else tol
        self.loc = loc = local_behaviour(model, end, c)
        self.dir = loc.direction
        self.finite = math.isfinite(end)
        q, A = loc.q, loc.coef
        singular = not (loc.regular or loc.drift_zero)
        expo = 1.0
        if self.finite:
            self.D = abs(c - end)
            if singular and -1.0 < q < 0.0:
                expo = max(expo, 1.0 / (1.0 + q))
            if singular and q == -1.0 and A > -0.5:
                expo = max(expo, 1.0 / (1.0 + 2.0 * A))
            if not loc.regular and loc.diff_exp < 1.0 and (loc.drift_zero or q > -1.0):
                expo = max(expo, 1.0 / (2.0 - 2.0 * loc.diff_exp))
            for mq in loc.minor_exps:
                if -1.0 < mq < 0.0:
                    expo = max(expo, 1.0 / (1.0 + mq))
        else:
            self.L = 1.0
            if singular and q == -1.0 and A > 0.5:
                expo = max(expo, 1.0 / (2.0 * A - 1.0))
        self.k = min(expo, _K_MAX)
        self.g_log = -A * self.k if (singular and q == -1.0) else 0.0
        self._R: Piecewise | None = None

    # coordinates
    def x_of(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.finite:
            return self.end - self.dir * self.D * tau ** self.k
        return self.c + self.dir * self.L * (tau ** (-self.k) - 1.0)

    def tau_of(self, x: float) -> float:
        if self.finite:
            return (abs(x - self.end) / self.D) ** (1.0 / self.k)
        return (1.0 + abs(x - self.c) / self.L) ** (-1.0 / self.k)

    def _log_dx(self, tau):
        # log |dx/dtau|; sign of dx/dtau is -dir
        lt = np.log(tau)
        if self.finite:
            return math.log(self.D * self.k) + (self.k - 1.0) * lt
        return math.log(self.L * self.k) + (-self.k - 1.0) * lt

    def _fg2(self, tau):
        """Drift and diffusion^2 at x(tau), factored near singular ends."""
        tau = np.asarray(tau, dtype=float)
        m = self.model
        if self.finite and not self.loc.regular and m.kind is ModelKind.SADDLE_NODE and m.a > 0:
            s = self.D * tau ** self.k
            r2 = 2.0 * math.sqrt(m.a)
            d = self.dir
            if self.end > 0:
                f = d * s * (r2 - d * s)
                g2 = m.sigma ** 2 * (s * np.abs(r2 - d * s)) ** (2 * m.alpha)
            else:
                f = -d * s * (r2 + d * s)
                g2 = m.sigma ** 2 * (s * np.abs(r2 + d * s)) ** (2 * m.alpha)
            return f, g2
        x = self.x_of(tau)
        return drift_vec(m, x), diffusion_vec(m, x) ** 2

    def h(self, tau):
        """dG/dtau."""
        f, g2 = self._fg2(tau)
        return f / g2 * (-self.dir) * np.exp(self._log_dx(tau))

    def _h_reg(self, tau):
        return self.h(tau) - self.g_log / np.asarray(tau, dtype=float)

    # G
    def fit_G(self, tau_lo: float) -> None:
        if self._R is not None and self._R.domain[0] <= tau_lo:
            return
        rint = fit(self._h_reg, tau_lo, 1.0, tol=self.tol)
        self._R = rint.cumulative_right()
        self._R_err = self._R.err

    def G(self, tau):
        tau = np.asarray(tau, dtype=float)
        with np.errstate(divide="ignore"):
            return -self._R(tau) + self.g_log * np.log(tau)

    def G_walk(self, taus, batch: int = 32):
        """Yield (tau, G(tau)) along decreasing taus.

        Consecutive taus are close (a fraction of an octave), so each step
        is integrated by 40-point Gauss-Legendre, a batch at a time.
        """
        x, w = _GL40
        taus = list(taus)
        acc, t_hi = 0.0, 1.0
        for b0 in range(0, len(taus), batch):
            ts = np.asarray(taus[b0:b0 + batch], dtype=float)
            his = np.concatenate([[t_hi], ts[:-1]])
            half = 0.5 * (his - ts)
            pts = ts[:, None] + half[:, None] * (x + 1.0)
            with np.errstate(over="ignore", invalid="ignore"):
                steps = half * (self._h_reg(pts.ravel()).reshape(pts.shape) @ w)
            for t, step in zip(ts, steps):
                acc += step
                g = -acc + self.g_log * math.log(t)
                if not math.isfinite(g):
                    return
                yield float(t), g
            t_hi = float(ts[-1])

    def probe_taus(self, count: int | None = 8, g_cap: float = 300.0, steps: int = 128) -> np.ndarray:
        """Points approaching the end where exp(+-2G) stays representable."""
        # quarter-octave steps in distance, thinned to ``count`` points afterwards (None keeps all)
        if self.finite:
            cands = [2.0 ** (-j / (4.0 * self.k)) for j in range(1, steps)
                     if self.D * 2.0 ** (-j / 4.0) > 1e-200]
        else:
            cands = [self.tau_of(self.c + self.dir * 2.0 ** (j / 4.0)) for j in range(0, steps)]
        kept = []
        for t, g in self.G_walk(cands):
            if abs(g) > g_cap:
                break
            kept.append(t)
        if len(kept) < 2:
            raise QuadratureError(f"no representable probe points towards {self.end}")
        if count is None:
            return np.array(kept)
        idx = np.unique(np.round(np.linspace(0, len(kept) - 1, min(count, len(kept)))).astype(int))
        return np.array(kept)[idx]

    def find_cut(self, sign: float) -> float:
        """Smallest tau needed so exp(sign * 2 G) beyond it is negligible."""
        emax = 0.0
        prev = None
        for t, g in self.G_walk(2.0 ** (-j / 2.0) for j in range(1, 400)):
            e = sign * 2.0 * g
            emax = max(emax, e)
            if e < emax - _CUT_DROP and prev is not None and e < prev:
                return t
            prev = e
        raise QuadratureError(f"could not locate a truncation point towards {self.end}")

    # integrand factories (scaled by exp(-shift))
    def _log_p_int(self, tau):
        return -2.0 * self.G(tau) + self._log_dx(tau)

    def _log_m_int(self, tau):
        _, g2 = self._fg2(tau)
        return math.log(2.0) + 2.0 * self.G(tau) - np.log(g2) + self._log_dx(tau)

    def _log_p_int_safe(self, tau):
        # combine log(tau) powers before evaluation so tau -> 0 stays finite
        tau = np.asarray(tau, dtype=float)
        if self.g_log == 0.0:
            return self._log_p_int(tau)
        lt = np.log(tau)
        if self.finite:
            pw, c0 = -2.0 * self.g_log + self.k - 1.0, math.log(self.D * self.k)
        else:
            pw, c0 = -2.0 * self.g_log - self.k - 1.0, math.log(self.L * self.k)
        return 2.0 * self._R(tau) + pw * lt + c0

    def build(self, tau_lo: float, tau_m: float | None) -> None:
        """Fit G and p on [tau_lo, 1], and M, v on [tau_m, 1]."""
        self.fit_G(min(tau_lo, tau_m) if tau_m is not None else tau_lo)
        s = -self.dir
        self.tau_lo = tau_lo
        grid = np.concatenate([[max(tau_lo, 1e-300)], np.geomspace(max(tau_lo, 1e-12), 1.0, 200)])
        lp = self._log_p_int_safe(grid[1:] if tau_lo == 0.0 else grid)
        self.Es = float(np.max(lp[np.isfinite(lp)]))
        self.p_int = lambda t: s * np.exp(self._log_p_int_safe(t) - self.Es)
        pint = fit(self.p_int, tau_lo, 1.0, tol=self.tol)
        self.P = pint.cumulative_right()
        self.P = Piecewise(self.P.breaks, [-c for c in self.P.coefs], self.P.err)
        self.Pint = pint
        self.tau_m = tau_m
        if tau_m is not None:
            g = np.geomspace(tau_m, 1.0, 200)
            lm = self._log_m_int(g)
            self.Em = float(np.max(lm))
            self.m_int = lambda t: s * np.exp(self._log_m_int(t) - self.Em)
            mint = fit(self.m_int, tau_m, 1.0, tol=self.tol)
            Mr = mint.cumulative_right()
            self.M = Piecewise(Mr.breaks, [-c for c in Mr.coefs], Mr.err)
            vint = fit(lambda t: self.p_int(t) * self.M(t), tau_m, 1.0, tol=self.tol)
            Vr = vint.cumulative_right()
            self.V = Piecewise(Vr.breaks, [-c for c in Vr.coefs], Vr.err)

    # outputs in true units
    @staticmethod
    def _unscale(val, log_scale):
        val = np.asarray(val, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            mag = np.exp(np.log(np.abs(val)) + log_scale)
        return np.where(val == 0.0, 0.0, np.sign(val) * mag)

    def p(self, tau):
        return self._unscale(self.P(tau), self.Es)

    def v(self, tau):
        return self._unscale(self.V(tau), self.Es + self.Em)

    def p_err(self) -> float:
        return float(self._unscale(self.P.err, self.Es))

    def v_err(self) -> float:
        return float(self._unscale(self.V.err, self.Es + self.Em))

    # limits
    def p_limit_value(self) -> tuple[float, float]:
        return float(self.p(self.tau_lo)), self.p_err()

    def _laplace(self, y: float, correction_only: bool = False) -> float:
        # int_y^end exp(-2 (G(z) - G(y))) dz ~ 1/a - b/a^3 with a = 2|G'|, b its outward slope
        m = self.model
        a = lambda u: 2.0 * abs(drift_eval(m, u) / diffusion_eval(m, u) ** 2)
        hstep = 1e-4 * max(1.0, abs(y))
        a0 = a(y)
        b0 = self.dir * (a(y + hstep) - a(y - hstep)) / (2.0 * hstep)
        if correction_only:
            return abs(b0) / a0 ** 3
        return 1.0 / a0 - b0 / a0 ** 3

    def v_limit_value(self) -> tuple[float, float]:
        """v at the end; requires build() with p finite at the end."""
        s = -self.dir
        Pe = self.Pint.cumulative_left()
        start = 0.0
        tail = tail_err = 0.0
        if self.tau_lo > 0.0:
            # Laplace estimate of the p-mass beyond the cut (scaled)
            t = self.tau_lo
            x = float(self.x_of(t))
            f, g2 = self._fg2(np.array([t]))
            G = float(self.G(t))
            del f, g2
            start = s * math.exp(-2.0 * G - self.Es) * self._laplace(x)
            if not self.finite:
                tail, _ = integrate(lambda y: 2.0 / diffusion_eval(self.model, y) ** 2 * self._laplace(y),
                                    min(x, self.end), max(x, self.end))
                # next asymptotic term is smaller than the last one by about |b| / a^2 at the cut
                corr, _ = integrate(lambda y: 2.0 / diffusion_eval(self.model, y) ** 2
                                    * self._laplace(y, True), min(x, self.end), max(x, self.end))
                tail_err = corr * self._laplace(x, True) * abs(self._laplace(x) ** -1)
        # exp of speed density with its own shift
        tau_probe = np.geomspace(max(self.tau_lo, 1e-12), 1.0, 200)
        lm = self._log_m_int(tau_probe) + np.log(np.abs(Pe(tau_probe) + start) + 1e-300)
        shift = float(np.max(lm[np.isfinite(lm)]))

        pe_ref = abs(float(Pe(1.0))) + abs(start)

        # where p(x) - p(end) is tiny the global interpolant is only absolutely accurate;
        # refit that stretch panel by panel so the cumulative keeps relative accuracy
        tg = np.linspace(self.tau_lo, 1.0, 401)
        small = np.flatnonzero(np.abs(Pe(tg) + start) < 1e-6 * pe_ref)
        t_star = float(tg[min(small[-1] + 1, len(tg) - 1)]) if len(small) else self.tau_lo
        Ploc = fit(self.p_int, self.tau_lo, t_star, tol=self.tol, local=True) if t_star > self.tau_lo else None

        def pe_rel(t):
            pe = Pe(t) + start
            bad = np.abs(pe) < 1e-6 * pe_ref
            if Ploc is not None:
                sel = t <= t_star
                pe[sel] = cumulative_relative(self.p_int, Ploc, t[sel]) + start
                bad &= ~sel
            for i in np.flatnonzero(bad):
                val, _ = quad(lambda u: float(self.p_int(np.array([u]))[0]), self.tau_lo, float(t[i]),
                              epsabs=0.0, epsrel=1e-11)
                pe[i] = val + start
            return pe

        def w(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            pe = pe_rel(t)
            with np.errstate(divide="ignore"):
                lv = self._log_m_int(t) + np.log(np.abs(pe)) - shift
            return np.where(pe == 0.0, 0.0, np.exp(lv))

        # the two evaluation routes meet at t_star; keep that seam on a panel boundary
        brk = [self.tau_lo, t_star, 1.0] if self.tau_lo < t_star < 1.0 else None
        W = fit(w, self.tau_lo, 1.0, tol=self.tol, breaks=brk)
        total = W.total()
        val = float(self._unscale(total, shift + self.Es)) + tail
        err = float(self._unscale(W._int_err(), shift + self.Es)) + tail_err
        return val, err

    def speed_total(self) -> float:
        """Total speed measure int_c^end m, towards an end where it is finite."""
        t = self.tau_lo
        lm = self._log_m_int(np.geomspace(t, 1.0, 200))
        shift = float(np.max(lm))
        Mf = fit(lambda u: np.exp(self._log_m_int(u) - shift), t, 1.0, tol=self.tol)
        return float(self._unscale(Mf.total(), shift))


def _check_interval(model: ModelSpec, interval: Sequence[float], c: float | None) -> tuple[float, float, float]:
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ScaleError(f"interval ({lo}, {hi}) is empty")
    if model.sigma == 0.0:
        raise ScaleError("sigma = 0: scale functions need a nondegenerate diffusion")
    if c is None:
        c = _default_reference(lo, hi)
    if not lo < c < hi:
        raise ScaleError(f"reference point {c} is not interior to ({lo}, {hi})")
    return lo, hi, float(c)


def _default_reference(lo: float, hi: float) -> float:
    if math.isinf(lo) and math.isinf(hi):
        return 0.0
    if math.isinf(hi):
        return lo + 1.0
    if math.isinf(lo):
        return hi - 1.0
    return 0.5 * (lo + hi)


def natural_interval(model: ModelSpec, x0: float) -> tuple[float, float]:
    """Maximal interval of nonvanishing diffusion that contains ``x0``."""
    from .model import singular_points
    pts = sorted(singular_points(model))
    if x0 in pts:
        raise ScaleError(f"x0 = {x0} is a singular point")
    lo = max([p for p in pts if p < x0], default=-math.inf)
    hi = min([p for p in pts if p > x0], default=math.inf)
    return lo, hi


def _f_over_g2(model: ModelSpec, x: float) -> float:
    return drift_eval(model, x) / diffusion_eval(model, x) ** 2


# --- public API ------------------------------------------------------------

def compute_G(model: ModelSpec, interval: Sequence[float], c: float, x: float,
              epsabs: float = ABS_TOL, epsrel: float = REL_TOL) -> float:
    """G(x) = int_c^x f / gamma^2 by adaptive quadrature.

    Raises :class:`QuadratureError` with the achieved error estimate when
    the tolerance is not met.
    """
    lo, hi, c = _check_interval(model, interval, c)
    if not lo < x < hi:
        if x in (lo, hi) and math.isfinite(x):
            loc = local_behaviour(model, x, c)
            if _G_diverges(loc):
                return math.copysign(math.inf, loc.coef)
            q = None if loc.drift_zero else loc.q
            a, b = sorted((c, x))
            val = integrate(lambda y: _f_over_g2(model, y), a, b, lo_exp=q if x == a else None,
                            hi_exp=q if x == b else None, epsabs=epsabs, epsrel=epsrel)[0]
            return val if x > c else -val
        raise ScaleError(f"x = {x} is outside ({lo}, {hi})")
    if x == c:
        return 0.0
    return quad(lambda y: _f_over_g2(model, y), c, x, epsabs=epsabs, epsrel=epsrel)[0]


def _halves(model, lo, hi, c):
    return _Half(model, c, lo), _Half(model, c, hi)


def _eval_points(model, interval, c, xs, want_v: bool, tol: float | None = None):
    lo, hi, c = _check_interval(model, interval, c)
    xs = np.asarray(xs, dtype=float)
    if np.any((xs <= lo) | (xs >= hi)):
        raise ScaleError("evaluation points must be interior to the interval")
    G = np.zeros_like(xs)
    p = np.zeros_like(xs)
    v = np.zeros_like(xs)
    errs = [0.0, 0.0, 0.0]
    for half, sel in ((_Half(model, c, lo, tol), xs < c), (_Half(model, c, hi, tol), xs > c)):
        if not np.any(sel):
            continue
        taus = np.array([half.tau_of(x) for x in xs[sel]])
        tmin = float(taus.min())
        half.build(tmin, tmin if want_v else None)
        G[sel] = half.G(taus)
        p[sel] = half.p(taus)
        errs[0] = max(errs[0], half._R_err)
        errs[1] = max(errs[1], half.p_err())
        if want_v:
            v[sel] = half.v(taus)
            errs[2] = max(errs[2], half.v_err())
    return G, p, v, errs


def scale_p(model: ModelSpec, interval: Sequence[float], c: float, x: float) -> float:
    """Scale function p(x) = int_c^x exp(-2 G). Overflow gives +-inf."""
    if x == c:
        return 0.0
    return float(_eval_points(model, interval, c, [x], False)[1][0])


def scale_v(model: ModelSpec, interval: Sequence[float], c: float, x: float) -> float:
    """v(x) = int_c^x (p(x) - p(y)) m(dy) >= 0."""
    if x == c:
        return 0.0
    return float(_eval_points(model, interval, c, [x], True)[2][0])


@dataclass(frozen=True)
class EndpointReport:
    """Boundary limits at one end of the interval."""

    end: float
    p_limit: Limit
    v_limit: Limit
    local: LocalBehaviour
    reachable: bool | None  # reached in finite time with positive probability

    def to_dict(self) -> dict[str, Any]:
        return {"end": _jnum(self.end), "p_limit": self.p_limit.to_dict(), "v_limit": self.v_limit.to_dict(),
                "local_exponent": _jnum(self.local.q), "local_coefficient": self.local.coef,
                "reachable": self.reachable}


class ExitTime(str, Enum):
    ALMOST_SURELY_FINITE = "AlmostSurelyFinite"
    ALMOST_SURELY_INFINITE = "AlmostSurelyInfinite"
    POSITIVE_PROBABILITY = "PositiveProbability"
    UNKNOWN = "Unknown"


class Destination(str, Enum):
    LEFT = "Left"
    RIGHT = "Right"
    EITHER = "Either"
    NEITHER = "Neither"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class BoundaryReport:
    """Feller classification of an interval."""

    interval: tuple[float, float]
    reference: float
    left: EndpointReport
    right: EndpointReport
    exit_time: ExitTime
    destination: Destination
    absorption: bool | None
    blowup: bool | None
    verdict: str

    def to_dict(self) -> dict[str, Any]:
        return {"interval": [_jnum(self.interval[0]), _jnum(self.interval[1])], "reference": self.reference,
                "left": self.left.to_dict(), "right": self.right.to_dict(), "exit_time": self.exit_time.value,
                "destination": self.destination.value, "absorption": self.absorption,
                "blowup": self.blowup, "verdict": self.verdict}


def _jnum(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _confirm_growth(log_values: np.ndarray) -> bool:
    # a divergent integral still gains visibly over the last quarter of the walk
    n = len(log_values)
    return bool(log_values[-1] - log_values[(3 * n) // 4 - 1 if n > 4 else 0] > 1e-3)


def _probe_values(half: _Half, want_v: bool, nodes: int = 8) -> np.ndarray:
    """log |p| or log |v| at the probe points, summed in log space from the reference point.

    Every value keeps relative accuracy however large the earlier ones are,
    which a single fit over the whole range cannot offer.
    """
    probe = half.probe_taus(count=None)
    x, w = np.polynomial.legendre.leggauss(nodes)
    his = np.concatenate([[1.0], probe[:-1]])
    hw = 0.5 * (his - probe)
    # nodes ordered from tau = 1 downwards
    pts = (probe[:, None] + hw[:, None] * (x[::-1] + 1.0)).ravel()
    lw = np.log((hw[:, None] * w[::-1]).ravel())
    gs = dict(half.G_walk(pts))
    if len(gs) < len(pts):
        raise QuadratureError(f"probe walk towards {half.end} left the representable range")
    G = np.array([gs[float(t)] for t in pts])
    ld = half._log_dx(pts)
    lp = lw - 2.0 * G + ld
    if want_v:
        _, g2 = half._fg2(pts)
        lm = lw + math.log(2.0) + 2.0 * G - np.log(g2) + ld
        lp = lp + np.logaddexp.accumulate(lm)
    cum = np.logaddexp.accumulate(lp)
    return cum.reshape(len(probe), nodes)[:, -1]


def _endpoint(model: ModelSpec, c: float, end: float, confirm: bool) -> EndpointReport:
    half = _Half(model, c, end)
    loc = half.loc
    pf = _p_finite(loc)
    if pf is None:
        return EndpointReport(end, Limit(LimitKind.UNKNOWN), Limit(LimitKind.UNKNOWN), loc, None)
    if not pf:
        kind = LimitKind.PLUS_INFINITY if loc.direction > 0 else LimitKind.MINUS_INFINITY
        ok = None
        if confirm:
            ok = _confirm_growth(_probe_values(half, False))
        return EndpointReport(end, Limit(kind, confirmed=ok), Limit(LimitKind.INFINITE), loc, False)
    tau_lo = 0.0
    if _G_diverges(loc) and loc.q != -1.0:
        tau_lo = half.find_cut(-1.0)
    half.build(tau_lo, None)
    pv, pe = half.p_limit_value()
    p_lim = Limit(LimitKind.FINITE, pv, pe, True)
    if _v_finite(loc):
        vv, ve = half.v_limit_value()
        v_lim = Limit(LimitKind.FINITE, vv, ve, bool(math.isfinite(vv)))
    else:
        ok = None
        if confirm:
            ok = _confirm_growth(_probe_values(_Half(model, c, end), True))
        v_lim = Limit(LimitKind.INFINITE, confirmed=ok)
    return EndpointReport(end, p_lim, v_lim, loc, v_lim.finite)


def boundary_limits(model: ModelSpec, interval: Sequence[float], c: float | None = None,
                    confirm: bool = True) -> BoundaryReport:
    """Limits of p and v at both ends plus the induced Feller verdict.

    Parameters
    ----------
    confirm : bool
        Also evaluate p or v on a sequence approaching each end where the
        analytic rule declares an infinite limit and record whether the
        values grow (``Limit.confirmed``).
    """
    lo, hi, c = _check_interval(model, interval, c)
    L = _endpoint(model, c, lo, confirm)
    R = _endpoint(model, c, hi, confirm)
    exit_time, dest, verdict = _feller(L, R)
    reach = [e for e in (L, R) if e.reachable]
    unknown = any(e.reachable is None for e in (L, R))
    absorb = any(math.isfinite(e.end) for e in reach) or (None if unknown else False)
    blow = any(math.isinf(e.end) for e in reach) or (None if unknown else False)
    return BoundaryReport((lo, hi), c, L, R, exit_time, dest, absorb, blow, verdict)


def _feller(L: EndpointReport, R: EndpointReport) -> tuple[ExitTime, Destination, str]:
    pl, pr = L.p_limit, R.p_limit
    if pl.kind is LimitKind.UNKNOWN or pr.kind is LimitKind.UNKNOWN:
        return ExitTime.UNKNOWN, Destination.UNKNOWN, "inconclusive: local exponent on an integrability boundary"
    if pl.infinite and pr.infinite:
        return ExitTime.ALMOST_SURELY_INFINITE, Destination.NEITHER, "no exit: both scale limits infinite"
    if pl.finite and pr.finite:
        vl, vr = L.v_limit.finite, R.v_limit.finite
        if vl and vr:
            return ExitTime.ALMOST_SURELY_FINITE, Destination.EITHER, "exit in finite time a.s. through either end"
        if not vl and not vr:
            return ExitTime.ALMOST_SURELY_INFINITE, Destination.EITHER, "converges to an end a.s. without reaching it"
        return ExitTime.POSITIVE_PROBABILITY, Destination.EITHER, "finite exit with probability in (0, 1)"
    end, dest = (L, Destination.LEFT) if pl.finite else (R, Destination.RIGHT)
    what = "blow-up" if math.isinf(end.end) else "absorption"
    if end.v_limit.finite:
        return ExitTime.ALMOST_SURELY_FINITE, dest, f"{what} at {_jnum(end.end)} in finite time a.s."
    return ExitTime.ALMOST_SURELY_INFINITE, dest, f"converges to {_jnum(end.end)} a.s., exit time infinite"


@dataclass(frozen=True)
class ScaleTable:
    """G, p and v tabulated on a grid with the boundary classification."""

    interval: tuple[float, float]
    reference: float
    grid: tuple[float, ...]
    G_vals: tuple[float, ...]
    p_vals: tuple[float, ...]
    v_vals: tuple[float, ...]
    boundary: BoundaryReport
    error: dict[str, float] = field(default_factory=dict)

    def rows(self) -> list[tuple[float, float, float, float]]:
        return list(zip(self.grid, self.G_vals, self.p_vals, self.v_vals))

    def to_dict(self) -> dict[str, Any]:
        return {"interval": [_jnum(self.interval[0]), _jnum(self.interval[1])], "reference": self.reference,
                "grid": list(self.grid), "G": list(self.G_vals), "p": [_jnum(v) for v in self.p_vals],
                "v": [_jnum(v) for v in self.v_vals], "boundary": self.boundary.to_dict(), "error": self.error}


def build_scale_table(model: ModelSpec, interval: Sequence[float], grid: Sequence[float],
                      c: float | None = None, tol: float | None = None) -> ScaleTable:
    """Tabulate G, p, v on ``grid`` (interior points) and classify the ends.

    ``tol`` is the relative tail tolerance of the piecewise Chebyshev fits
    (default ``1e-14``); ``error`` holds the resulting estimates.
    """
    lo, hi, c = _check_interval(model, interval, c)
    g = np.asarray(sorted(float(x) for x in grid))
    G, p, v, errs = _eval_points(model, (lo, hi), c, g, True, tol)
    rep = boundary_limits(model, (lo, hi), c)
    return ScaleTable((lo, hi), c, tuple(g.tolist()), tuple(G.tolist()), tuple(p.tolist()), tuple(v.tolist()),
                      rep, {"G": errs[0], "p": errs[1], "v": errs[2]})


def hitting_probability(model: ModelSpec, x0: float, convergence_probability: bool = False) -> float:
    """Probability of reaching -sqrt(a) before sqrt(a) from x0 (saddle-node, a > 0).

    Parameters
    ----------
    convergence_probability : bool
        Required when alpha >= 1. The ends are then not reached in finite
        time and the same scale ratio is read as the probability that the
        path converges to -sqrt(a) rather than to sqrt(a).
    """
    if model.kind is not ModelKind.SADDLE_NODE or model.a <= 0:
        raise ScaleError("hitting_probability needs a saddle-node model with a > 0")
    r = math.sqrt(model.a)
    if not -r < x0 < r:
        raise ScaleError(f"x0 = {x0} must lie in (-{r:g}, {r:g})")
    if model.alpha >= 1.0 and not convergence_probability:
        raise ScaleError("for alpha >= 1 the ends are not reached in finite time; pass "
                         "convergence_probability=True for the convergence-probability reading")
    left, right = _Half(model, 0.0, -r), _Half(model, 0.0, r)
    lims = []
    for half in (left, right):
        pf = _p_finite(half.loc)
        if pf is None:
            raise ScaleError("scale limit sits on an integrability boundary; probability undefined")
        if not pf:
            lims.append(None)
            continue
        tau_lo = half.find_cut(-1.0) if (_G_diverges(half.loc) and half.loc.q != -1.0) else 0.0
        half.build(tau_lo, None)
        lims.append(half)
    if lims[0] is None and lims[1] is None:
        raise ScaleError("both scale limits are infinite; the path reaches neither end")
    if lims[0] is None:
        return 0.0
    if lims[1] is None:
        return 1.0
    # combine on a common log scale
    sl, sr = left.Es, right.Es
    smax = max(sl, sr)
    pl = float(left.P(left.tau_lo)) * math.exp(sl - smax)
    pr = float(right.P(right.tau_lo)) * math.exp(sr - smax)
    if x0 == 0.0:
        px = 0.0
    elif x0 < 0:
        px = float(left.P(left.tau_of(x0))) * math.exp(sl - smax)
    else:
        px = float(right.P(right.tau_of(x0))) * math.exp(sr - smax)
    return min(1.0, max(0.0, (pr - px) / (pr - pl)))


def mean_exit_time(model: ModelSpec, interval: Sequence[float], x0: float) -> float:
    """Expected exit time of ``interval`` from ``x0`` (inf when exit is not a.s. finite).

    Uses the Green function of the generator, ``E[S] = int G(x0, y) m(dy)``,
    with the reference point at x0.
    """
    lo, hi, c = _check_interval(model, interval, x0)
    L, R = _Half(model, c, lo), _Half(model, c, hi)
    pf = [_p_finite(L.loc), _p_finite(R.loc)]
    if None in pf:
        raise ScaleError("scale limit sits on an integrability boundary")
    if not any(pf):
        return math.inf
    parts = {}
    for half, fin in ((L, pf[0]), (R, pf[1])):
        if fin:
            if not _v_finite(half.loc):
                return math.inf
            tau_lo = half.find_cut(-1.0) if (_G_diverges(half.loc) and half.loc.q != -1.0) else 0.0
            half.build(tau_lo, None)
            parts[id(half)] = (half.p_limit_value()[0], half.v_limit_value()[0])
        else:
            if not _speed_finite(half.loc):
                return math.inf
            if not (_G_diverges(half.loc) and half.loc.q != -1.0):
                raise ScaleError("total speed measure towards this end is not supported numerically")
            half.tau_lo = half.find_cut(+1.0)
            half.fit_G(half.tau_lo)
            parts[id(half)] = (None, abs(half.speed_total()))
    (pl, al), (pr, ar) = parts[id(L)], parts[id(R)]
    if pl is not None and pr is not None:
        return (pr * al - pl * ar) / (pr - pl)
    if pl is not None:
        return al + (-pl) * ar
    return ar + pr * al
