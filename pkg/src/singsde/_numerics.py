"""Quadrature helpers shared by the analysis modules.

Two tools live here:

* :func:`integrate`, a wrapper around QUADPACK that removes algebraic
  endpoint singularities by substitution and maps infinite ranges to
  finite ones;
* :class:`Piecewise`, an adaptive piecewise-Chebyshev representation
  whose indefinite integrals are exact, used to chain running integrals
  (G, then exp(-2G), then the speed measure, ...).
"""

from __future__ import annotations

import math
import warnings
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import integrate as _si

ABS_TOL = 1e-10
REL_TOL = 1e-8


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float = math.nan):
        super().__init__(f"{message} (achieved error estimate {achieved:.3g})")
        self.achieved = achieved


def quad(f: Callable[[float], float], a: float, b: float, epsabs: float = ABS_TOL,
         epsrel: float = REL_TOL, limit: int = 500) -> tuple[float, float]:
    """QUADPACK integral of ``f`` over [a, b] with an explicit failure mode."""
    if a == b:
        return 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, err, info = _si.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)[:3]
    if not math.isfinite(val):
        raise QuadratureError("integral is not finite", err)
    if err > max(epsabs, epsrel * abs(val)) * 10:
        raise QuadratureError(f"quadrature over [{a:g}, {b:g}] did not converge", err)
    return val, err


def _half_with_singularity(f, e: float, length: float, p: float | None, toward: int, **kw):
    """Integral of f over the segment of given length starting at e.

    ``toward`` is +1 when the segment is [e, e + length] and -1 for
    [e - length, e]. When f ~ |x - e|**p with -1 < p < 0 the substitution
    |x - e| = u**(1/(1+p)) makes the integrand bounded.
    """
    if p is None or p >= 0:
        lo, hi = (e, e + length) if toward > 0 else (e - length, e)
        return quad(f, lo, hi, **kw)
    if p <= -1:
        raise QuadratureError(f"endpoint exponent {p:g} is not integrable")
    k = 1.0 / (1.0 + p)

    def g(u):
        if u <= 0.0:
            return 0.0
        s = u ** k
        return f(e + toward * s) * k * u ** (k - 1.0)

    umax = length ** (1.0 + p)
    return quad(g, 0.0, umax, **kw)


def integrate(f: Callable[[float], float], lo: float, hi: float, lo_exp: float | None = None,
              hi_exp: float | None = None, epsabs: float = ABS_TOL, epsrel: float = REL_TOL) -> tuple[float, float]:
    """Integral of ``f`` over (lo, hi) handling singular and infinite ends.

    Parameters
    ----------
    f : callable
        Scalar integrand.
    lo, hi : float
        Bounds, possibly infinite.
    lo_exp, hi_exp : float, optional
        Exponent p of the algebraic behaviour ``f ~ |x - end|**p`` at a
        finite end. Ends with -1 < p < 0 are treated by substitution.

    Returns
    -------
    (value, error_estimate)
    """
    if lo == hi:
        return 0.0, 0.0
    if lo > hi:
        v, e = integrate(f, hi, lo, hi_exp, lo_exp, epsabs, epsrel)
        return -v, e
    kw = dict(epsabs=epsabs, epsrel=epsrel)
    total, err = 0.0, 0.0
    if math.isinf(lo) and math.isinf(hi):
        for part in ((-math.inf, 0.0), (0.0, math.inf)):
            v, e = integrate(f, *part, **kw)
            total, err = total + v, err + e
        return total, err
    if math.isinf(hi):
        v1, e1 = _half_with_singularity(f, lo, 1.0, lo_exp, +1, **kw)
        # x = lo + 1 + t / (1 - t), t in [0, 1)
        v2, e2 = quad(lambda t: f(lo + 1.0 + t / (1.0 - t)) / (1.0 - t) ** 2 if t < 1.0 else 0.0,
                      0.0, 1.0, **kw)
        return v1 + v2, e1 + e2
    if math.isinf(lo):
        v1, e1 = _half_with_singularity(f, hi, 1.0, hi_exp, -1, **kw)
        # x = hi - 1 - t / (1 - t)
        v2, e2 = quad(lambda t: f(hi - 1.0 - t / (1.0 - t)) / (1.0 - t) ** 2 if t < 1.0 else 0.0,
                      0.0, 1.0, **kw)
        return v1 + v2, e1 + e2
    half = 0.5 * (hi - lo)
    v1, e1 = _half_with_singularity(f, lo, half, lo_exp, +1, **kw)
    v2, e2 = _half_with_singularity(f, hi, half, hi_exp, -1, **kw)
    return v1 + v2, e1 + e2


# --- piecewise Chebyshev ---------------------------------------------------

DEG = 24
_TAIL = 3


class Piecewise:
    """Piecewise Chebyshev series on contiguous panels of [a, b].

    Attributes
    ----------
    breaks : ndarray
        Panel boundaries, increasing, ``len(coefs) + 1`` entries.
    coefs : list of ndarray
        Chebyshev coefficients of each panel on the reference [-1, 1].
    err : float
        Accumulated absolute error estimate of the represented function.
    """

    def __init__(self, breaks, coefs, err: float = 0.0):
        self.breaks = np.asarray(breaks, dtype=float)
        self.coefs = list(coefs)
        self.err = float(err)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.breaks[0]), float(self.breaks[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        idx = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, len(self.coefs) - 1)
        out = np.empty_like(t)
        for i in np.unique(idx):
            sel = idx == i
            lo, hi = self.breaks[i], self.breaks[i + 1]
            s = (2.0 * t[sel] - (lo + hi)) / (hi - lo)
            out[sel] = C.chebval(np.clip(s, -1.0, 1.0), self.coefs[i])
        return float(out[0]) if scalar else out

    def _panel_integrals(self, lbnd: float):
        ints = []
        for i, c in enumerate(self.coefs):
            h = self.breaks[i + 1] - self.breaks[i]
            ints.append(C.chebint(c, lbnd=lbnd, scl=0.5 * h))
        return ints

    def cumulative_left(self) -> "Piecewise":
        """F(t) = integral of self from the left end to t."""
        ints = self._panel_integrals(-1.0)
        offset = 0.0
        out = []
        for ci in ints:
            ci = ci.copy()
            ci[0] += offset
            offset = C.chebval(1.0, ci)
            out.append(ci)
        return Piecewise(self.breaks, out, self._int_err())

    def cumulative_right(self) -> "Piecewise":
        """F(t) = integral of self from t to the right end."""
        ints = self._panel_integrals(1.0)
        offset = 0.0
        out = [None] * len(ints)
        for i in range(len(ints) - 1, -1, -1):
            ci = -ints[i]
            ci[0] += offset
            offset = C.chebval(-1.0, ci)
            out[i] = ci
        return Piecewise(self.breaks, out, self._int_err())

    def total(self) -> float:
        return float(self.cumulative_left()(self.breaks[-1]))

    def _int_err(self) -> float:
        widths = np.diff(self.breaks)
        tails = np.array([np.abs(c[-_TAIL:]).max() for c in self.coefs])
        return float(np.sum(widths * tails) + self.err * (self.breaks[-1] - self.breaks[0]))

    def panel_integrals(self) -> np.ndarray:
        """Integral of the series over each panel."""
        out = np.empty(len(self.coefs))
        for i, c in enumerate(self.coefs):
            ci = C.chebint(c)
            out[i] = 0.5 * (self.breaks[i + 1] - self.breaks[i]) * (C.chebval(1.0, ci) - C.chebval(-1.0, ci))
        return out

    def node_values(self) -> np.ndarray:
        """Function values at Chebyshev points of every panel (for scaling)."""
        s = np.cos(np.pi * (np.arange(DEG + 1) + 0.5) / (DEG + 1))
        return np.concatenate([C.chebval(s, c) for c in self.coefs])


def fit(fun: Callable[[np.ndarray], np.ndarray], a: float, b: float, tol: float = 1e-14,
        vscale: float | None = None, max_panels: int = 4000, breaks=None, local: bool = False) -> Piecewise:
    """Adaptive piecewise-Chebyshev interpolant of a vectorized function.

    Panels are bisected until the trailing coefficients fall below
    ``tol * vscale`` where ``vscale`` is the largest magnitude seen on the
    whole interval, so regions where the function is negligible are not
    refined needlessly. With ``local=True`` each panel is judged against
    its own magnitude instead, which keeps cumulative integrals of a
    one-signed function accurate in the relative sense.
    """
    if not b > a:
        raise ValueError("fit requires b > a")
    if vscale is None:
        t = a + (b - a) * (0.5 - 0.5 * np.cos(np.pi * (np.arange(257) + 0.5) / 257))
        v = np.asarray(fun(t), dtype=float)
        if not np.all(np.isfinite(v)):
            raise QuadratureError("integrand is not finite on the interval")
        vscale = float(np.max(np.abs(v)))
    vscale = max(vscale, 1e-300)
    stack = [(x0, x1) for x0, x1 in zip(breaks[:-1], breaks[1:])][::-1] if breaks is not None else [(a, b)]
    done: list[tuple[float, float, np.ndarray]] = []
    err = 0.0
    while stack:
        lo, hi = stack.pop()
        c = C.chebinterpolate(lambda s: fun(0.5 * (lo + hi) + 0.5 * (hi - lo) * s), DEG)
        if not np.all(np.isfinite(c)):
            raise QuadratureError(f"integrand is not finite on [{lo:g}, {hi:g}]")
        vscale = max(vscale, float(np.abs(c).max()))
        tail = float(np.abs(c[-_TAIL:]).max())
        if local:
            vscale = max(float(np.abs(c).max()), 1e-300)
        tiny = (hi - lo) <= 4e-16 * max(1.0, abs(lo), abs(hi))
        if tail <= tol * vscale or tiny or len(done) + len(stack) >= max_panels:
            if not tail <= tol * vscale:
                err = max(err, tail)
            done.append((lo, hi, c))
        else:
            mid = 0.5 * (lo + hi)
            stack.append((mid, hi))
            stack.append((lo, mid))
    done.sort(key=lambda p: p[0])
    brk = [done[0][0]] + [p[1] for p in done]
    return Piecewise(brk, [p[2] for p in done], err)


def cumulative_relative(fun: Callable[[np.ndarray], np.ndarray], pw: Piecewise, t, nodes: int = 32) -> np.ndarray:
    """``int_a^t fun`` with relative accuracy for a one-signed ``fun``.

    Whole panels of ``pw`` (a fit of ``fun`` made with ``local=True``)
    contribute their exact series integrals; the partial panel ending at
    ``t`` is integrated by Gauss-Legendre on ``fun`` itself. This avoids
    the cancellation of an antiderivative series evaluated near the left
    end of its panel.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    starts = np.concatenate([[0.0], np.cumsum(pw.panel_integrals())])
    idx = np.clip(np.searchsorted(pw.breaks, t, side="right") - 1, 0, len(pw.coefs) - 1)
    lo = pw.breaks[idx]
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (t - lo)
    pts = lo[:, None] + half[:, None] * (x + 1.0)
    vals = np.asarray(fun(pts.ravel()), dtype=float).reshape(pts.shape)
    return starts[idx] + half * (vals @ w)
