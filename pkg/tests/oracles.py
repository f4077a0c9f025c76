"""Independent reference values used by several test modules.

Nothing here imports the package's numerical internals: verdicts are
written out by hand from the regime rules and numbers come from closed forms
or plain nested ``scipy.integrate.quad``.
"""

import math

from scipy.integrate import quad

ALPHAS = (0.5, 0.6, 0.75, 0.85, 1.0, 1.2, 1.5, 2.0, 3.0)
LAMBDAS = (-1.0, 0.3, 0.5, 0.7, 2.0)
SIGMAS = (0.5, 1.0)


def pitchfork_verdicts(lam, sigma, alpha):
    """Expected (delta0, absorption, n_densities, qsd) for the pitchfork family."""
    half = sigma ** 2 / 2
    if alpha < 1:
        d0 = "AsymptoticallyStableInProbability"
    elif alpha == 1:
        d0 = ("AlmostSurelyExponentiallyStable" if lam < half else
              "UnstableInProbability" if lam > half else "Boundary")
    else:
        d0 = "StableInProbability" if lam < 0 else "UnstableInProbability" if lam > 0 else "Boundary"
    absorption = "AlmostSurelyFinite" if alpha < 1 else "Never"
    if alpha < 1:
        dens = 0
    elif alpha == 1:
        dens = 2 if lam > half else 0
    else:
        dens = 2 if lam > 0 else 0
    if alpha < 0.75:
        qsd = "Exists"
    elif alpha == 0.75:
        qsd = "Unknown"
    elif alpha < 1:
        qsd = "NumericallyAbsent"
    else:
        qsd = "NotApplicable"
    return d0, absorption, dens, qsd


def pitchfork_G(lam, sigma, alpha, c, x):
    """Closed-form int_c^x (lam y - y^3) / (sigma^2 y^(2 alpha)) dy for c, x > 0."""

    def prim(y):
        out = 0.0
        for coef, e in ((lam, 2 - 2 * alpha), (-1.0, 4 - 2 * alpha)):
            out += coef * (math.log(y) if e == 0 else y ** e / e)
        return out / sigma ** 2

    return prim(x) - prim(c)


def nested_p_v(f, gamma, c, x, lo=None):
    """p(x) and v(x) by plain nested quadrature (slow, for a handful of points)."""

    def G(y):
        return quad(lambda z: f(z) / gamma(z) ** 2, c, y, epsabs=1e-14, epsrel=1e-13, limit=200)[0]

    def p(y):
        return quad(lambda z: math.exp(-2 * G(z)), c, y, epsabs=1e-14, epsrel=1e-12, limit=200)[0]

    px = p(x)
    v = quad(lambda y: (px - p(y)) * 2 * math.exp(2 * G(y)) / gamma(y) ** 2, c, x,
             epsabs=1e-13, epsrel=1e-11, limit=200)[0]
    return px, v


def arcsin_hitting(a, sigma, alpha, x0):
    """Probability of reaching +sqrt(a) first for the saddle node with 2 alpha = 3/2 and 4 alpha - 2 = 1.

    For alpha = 3/4 the integrand f / gamma^2 = 1 / (sigma^2 sqrt(a - x^2)),
    so G = asin(x / sqrt a) / sigma^2 and p is an exponential-sine
    integral in theta = asin(x / sqrt a).
    """
    assert alpha == 0.75
    r = math.sqrt(a)
    k = 2 / sigma ** 2

    def P(th):
        # int exp(-k th) r cos th d th
        return r * math.exp(-k * th) * (math.sin(th) - k * math.cos(th)) / (k * k + 1)

    lo, hi, t0 = P(-math.pi / 2), P(math.pi / 2), P(math.asin(x0 / r))
    return (t0 - lo) / (hi - lo)
