"""SDE family with Hölder diffusion vanishing at singular points.

The family is

    dx = (lam * x + g(x)) dt + gamma(x) dW

with ``gamma(x) ~ sigma |x|**alpha`` near the singular point. Two named
specializations are provided: the pitchfork ``lam x - x**3`` with
``sigma |x|**alpha`` and the saddle-node ``-x**2 + a`` with
``sigma |x**2 - a|**alpha``.

Powers of negative numbers follow the signed convention
``x**a := sign(x) |x|**a`` so that odd drift terms stay odd.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from enum import Enum
from typing import Any

import numpy as np


class ModelError(ValueError):
    """Invalid model parameters."""


class ModelKind(str, Enum):
    GENERAL_POWER = "GeneralPower"
    PITCHFORK = "Pitchfork"
    SUBCRITICAL_PITCHFORK = "SubcriticalPitchfork"
    SADDLE_NODE = "SaddleNode"


PITCHFORK_KINDS = (ModelKind.PITCHFORK, ModelKind.SUBCRITICAL_PITCHFORK)
ZERO_SINGULAR_KINDS = (ModelKind.GENERAL_POWER,) + PITCHFORK_KINDS

# JSON field name -> attribute name; "lambda" is a keyword in Python
_JSON_TO_ATTR = {"lambda": "lam"}
_ATTR_TO_JSON = {v: k for k, v in _JSON_TO_ATTR.items()}


def signed_power(x: float, a: float) -> float:
    """Return ``sign(x) * |x|**a`` (exactly 0 at 0)."""
    if a <= 0:
        raise ValueError("signed_power requires a > 0")
    if x == 0.0:
        return 0.0
    return math.copysign(abs(x) ** a, x)


@dataclass(frozen=True)
class ModelSpec:
    """Full parameterization of the SDE family.

    Parameters left as ``None`` are derived from ``kind`` where the
    specialization fixes them (pitchfork: mu=-1, kappa=beta=2, nu=1,
    delta=alpha, d=sigma; saddle-node: mu=-1, nu=1, kappa=beta=1,
    delta=2 alpha, d=sigma). For GeneralPower, ``d_coef`` and
    ``delta_exp`` default to ``sigma`` and ``alpha``.
    """

    kind: ModelKind
    sigma: float
    alpha: float
    lam: float = 0.0
    mu: float | None = None
    kappa: float | None = None
    nu: float | None = None
    beta: float | None = None
    tail_threshold: float = 1.0
    d_coef: float | None = None
    delta_exp: float | None = None
    a: float = 0.0

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in PITCHFORK_KINDS:
            derived = dict(mu=-1.0, kappa=2.0, nu=1.0, beta=2.0,
                           d_coef=self.sigma, delta_exp=self.alpha)
        elif kind is ModelKind.SADDLE_NODE:
            derived = dict(mu=-1.0, kappa=1.0, nu=1.0, beta=1.0,
                           d_coef=self.sigma, delta_exp=2.0 * self.alpha)
        else:
            missing = [n for n in ("mu", "kappa", "nu", "beta") if getattr(self, n) is None]
            if missing:
                raise ModelError(f"GeneralPower requires fields: {', '.join(missing)}")
            derived = dict(d_coef=self.sigma if self.d_coef is None else self.d_coef,
                           delta_exp=self.alpha if self.delta_exp is None else self.delta_exp)
        for name, value in derived.items():
            given = getattr(self, name)
            if given is not None and kind is not ModelKind.GENERAL_POWER and float(given) != float(value):
                raise ModelError(f"{name}={given} conflicts with the value {value} fixed by kind {kind.value}")
            object.__setattr__(self, name, float(value))
        for f in fields(self):
            if f.name == "kind":
                continue
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ModelError(f"{_ATTR_TO_JSON.get(f.name, f.name)} must be a real number")
            v = float(v)
            if not math.isfinite(v):
                raise ModelError(f"{_ATTR_TO_JSON.get(f.name, f.name)} must be finite")
            object.__setattr__(self, f.name, v)
        if self.alpha < 0.5:
            raise ModelError(
                f"alpha={self.alpha} is below the strong-uniqueness threshold 1/2 "
                "(non-uniqueness of solutions for alpha < 1/2)")
        if self.sigma < 0:
            raise ModelError("sigma must be >= 0")
        if self.kappa <= 0:
            raise ModelError("kappa must be > 0")
        if self.beta <= 0:
            raise ModelError("beta must be > 0")
        if self.tail_threshold <= 0:
            raise ModelError("tail_threshold must be > 0")
        if self.d_coef < 0:
            raise ModelError("d_coef must be >= 0")
        if self.delta_exp < 0:
            raise ModelError("delta_exp must be >= 0")

    # constructors for the named specializations
    @classmethod
    def pitchfork(cls, lam: float, sigma: float, alpha: float) -> "ModelSpec":
        return cls(ModelKind.PITCHFORK, sigma=sigma, alpha=alpha, lam=lam)

    @classmethod
    def subcritical_pitchfork(cls, lam: float, sigma: float, alpha: float) -> "ModelSpec":
        return cls(ModelKind.SUBCRITICAL_PITCHFORK, sigma=sigma, alpha=alpha, lam=lam)

    @classmethod
    def saddle_node(cls, a: float, sigma: float, alpha: float) -> "ModelSpec":
        return cls(ModelKind.SADDLE_NODE, sigma=sigma, alpha=alpha, a=a)

    @classmethod
    def general_power(cls, lam: float, sigma: float, alpha: float, mu: float, kappa: float,
                      nu: float, beta: float, tail_threshold: float = 1.0,
                      d_coef: float | None = None, delta_exp: float | None = None) -> "ModelSpec":
        return cls(ModelKind.GENERAL_POWER, sigma=sigma, alpha=alpha, lam=lam, mu=mu,
                   kappa=kappa, nu=nu, beta=beta, tail_threshold=tail_threshold,
                   d_coef=d_coef, delta_exp=delta_exp)

    @property
    def has_tail_blend(self) -> bool:
        """True when the GeneralPower diffusion switches to d|x|^delta in the tail."""
        return (self.kind is ModelKind.GENERAL_POWER
                and (self.d_coef != self.sigma or self.delta_exp != self.alpha))

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for k, v in asdict(self).items():
            out[_ATTR_TO_JSON.get(k, k)] = v.value if isinstance(v, Enum) else v
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelSpec":
        if not isinstance(data, dict):
            raise ModelError("model must be a JSON object")
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            attr = _JSON_TO_ATTR.get(key, key)
            if attr not in known or key in _ATTR_TO_JSON:
                raise ModelError(f"unknown model field: {key}")
            kwargs[attr] = value
        if "kind" not in kwargs:
            raise ModelError("model field 'kind' is required")
        try:
            kwargs["kind"] = ModelKind(kwargs["kind"])
        except ValueError:
            raise ModelError(f"unknown model kind: {kwargs['kind']}") from None
        for req in ("sigma", "alpha"):
            if req not in kwargs:
                raise ModelError(f"model field '{req}' is required")
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


def _blend_weight(ax: float, A: float) -> float:
    # 0 on |x| <= A, 1 on |x| >= 2A, linear in between
    if ax <= A:
        return 0.0
    if ax >= 2.0 * A:
        return 1.0
    return (ax - A) / A


def nonlinear_drift(model: ModelSpec, x: float) -> float:
    """The nonlinear part g(x) of the drift (GeneralPower only)."""
    A = model.tail_threshold
    w = _blend_weight(abs(x), A)
    loc = model.mu * signed_power(x, 1.0 + model.kappa) if w < 1.0 else 0.0
    tail = -model.nu * signed_power(x, 1.0 + model.beta) if w > 0.0 else 0.0
    return (1.0 - w) * loc + w * tail


def drift_eval(model: ModelSpec, x: float) -> float:
    """Drift f(x) = lam x + g(x)."""
    kind = model.kind
    if kind is ModelKind.SADDLE_NODE:
        return -x * x + model.a
    if kind in PITCHFORK_KINDS:
        return model.lam * x - x * x * x
    return model.lam * x + nonlinear_drift(model, x)


def diffusion_eval(model: ModelSpec, x: float) -> float:
    """Diffusion coefficient gamma(x) >= 0."""
    if model.kind is ModelKind.SADDLE_NODE:
        return model.sigma * abs(x * x - model.a) ** model.alpha
    ax = abs(x)
    local = model.sigma * ax ** model.alpha
    if not model.has_tail_blend:
        return local
    w = _blend_weight(ax, model.tail_threshold)
    tail = model.d_coef * ax ** model.delta_exp
    return (1.0 - w) * local + w * tail


def drift_vec(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`drift_eval`."""
    x = np.asarray(x, dtype=float)
    kind = model.kind
    if kind is ModelKind.SADDLE_NODE:
        return -x * x + model.a
    if kind in PITCHFORK_KINDS:
        return model.lam * x - x * x * x
    A = model.tail_threshold
    ax = np.abs(x)
    w = np.clip((ax - A) / A, 0.0, 1.0)
    loc = model.mu * np.sign(x) * ax ** (1.0 + model.kappa)
    tail = -model.nu * np.sign(x) * ax ** (1.0 + model.beta)
    return model.lam * x + ((1.0 - w) * loc + w * tail)


def diffusion_vec(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`diffusion_eval`."""
    x = np.asarray(x, dtype=float)
    if model.kind is ModelKind.SADDLE_NODE:
        return model.sigma * np.abs(x * x - model.a) ** model.alpha
    ax = np.abs(x)
    local = model.sigma * ax ** model.alpha
    if not model.has_tail_blend:
        return local
    w = np.clip((ax - model.tail_threshold) / model.tail_threshold, 0.0, 1.0)
    return (1.0 - w) * local + w * model.d_coef * ax ** model.delta_exp


def singular_points(model: ModelSpec) -> list[float]:
    """Points where drift and diffusion both vanish."""
    if model.kind is ModelKind.SADDLE_NODE:
        if model.a > 0:
            r = math.sqrt(model.a)
            return [-r, r]
        if model.a == 0:
            return [0.0]
        return []
    return [0.0]


class Status(str, Enum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    NOT_CHECKABLE = "not-checkable"


@dataclass(frozen=True)
class AssumptionVerdict:
    status: Status
    witness: str


@dataclass(frozen=True)
class AssumptionReport:
    h1: AssumptionVerdict
    h2: AssumptionVerdict
    h3: AssumptionVerdict
    h4: AssumptionVerdict
    h5: AssumptionVerdict
    h6: AssumptionVerdict

    def all_satisfied(self, names=("h1", "h2", "h3", "h4", "h5", "h6")) -> bool:
        return all(getattr(self, n).status is Status.SATISFIED for n in names)

    def to_dict(self) -> dict[str, Any]:
        return {n: {"status": getattr(self, n).status.value, "witness": getattr(self, n).witness}
                for n in ("h1", "h2", "h3", "h4", "h5", "h6")}


def h6_holds(nu: float, beta: float, delta: float) -> bool:
    """Tail condition: nu >= 0, or nu < 0 with delta > 1 + beta/2."""
    return nu >= 0 or delta > 1.0 + beta / 2.0


def check_assumptions(model: ModelSpec) -> AssumptionReport:
    """Evaluate the six structural assumptions from the parameters.

    The check is symbolic: each verdict follows from the parameter values
    and the known closed form of the family, never from sampling.
    """
    ok, bad = Status.SATISFIED, Status.VIOLATED
    sn = model.kind is ModelKind.SADDLE_NODE
    if sn:
        h1 = AssumptionVerdict(ok, "f(x) = -(x - r)(x + r): linear vanishing at each root (kappa = 1)")
        h2 = AssumptionVerdict(ok, "g(x) = -x^2 <= -nu |x|^{1+beta} with nu = 1, beta = 1")
    elif model.kind in PITCHFORK_KINDS:
        h1 = AssumptionVerdict(ok, "g(x) = -x^3 = mu x^{1+kappa} with mu = -1, kappa = 2")
        h2 = AssumptionVerdict(ok, "g(x) = -x^3 = -nu x^{1+beta} with nu = 1, beta = 2 (signed power)")
    else:
        h1 = AssumptionVerdict(ok, f"g(x) = {model.mu:g} x^{{1+{model.kappa:g}}} on |x| <= A")
        h2 = AssumptionVerdict(
            ok, f"g(x) = -{model.nu:g} x^{{1+{model.beta:g}}} for |x| >= 2A (signed power, both sides)")
    h3 = AssumptionVerdict(ok, f"gamma ~ sigma |x|^alpha at the singular point, sigma = {model.sigma:g} >= 0")
    if model.d_coef > 0:
        h4 = AssumptionVerdict(ok, f"gamma ~ d |x|^delta in the tail with d = {model.d_coef:g} > 0")
    else:
        h4 = AssumptionVerdict(bad, "d = 0: no diffusion in the tail")
    if sn:
        if model.a > 0:
            h5 = AssumptionVerdict(bad, "gamma vanishes at two points -sqrt(a) and +sqrt(a)")
        elif model.a < 0:
            h5 = AssumptionVerdict(bad, "gamma has no zero (no singular point)")
        else:
            h5 = AssumptionVerdict(ok, "gamma vanishes only at 0")
    elif model.sigma > 0:
        h5 = AssumptionVerdict(ok, "gamma vanishes only at 0")
    else:
        h5 = AssumptionVerdict(bad, "sigma = 0: gamma vanishes everywhere")
    nu, beta, delta = model.nu, model.beta, model.delta_exp
    if nu >= 0:
        h6 = AssumptionVerdict(ok, f"nu = {nu:g} >= 0")
    elif delta > 1.0 + beta / 2.0:
        h6 = AssumptionVerdict(ok, f"nu < 0 and delta = {delta:g} > 1 + beta/2 = {1 + beta / 2:g}")
    else:
        h6 = AssumptionVerdict(bad, f"nu < 0 and delta = {delta:g} <= 1 + beta/2 = {1 + beta / 2:g}")
    return AssumptionReport(h1, h2, h3, h4, h5, h6)
