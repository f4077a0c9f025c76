"""Analytic regime verdicts for the singular SDE family.

Every verdict is produced by a small decision table whose rows are
``(condition, verdict)`` pairs. Conditions are Python expressions over
the model parameters (``lam``, ``sigma``, ``alpha``, ``nu``, ``beta``,
``delta``, ``a``, ``h6``, ...). The first row whose condition holds wins
and its condition text travels with the verdict, so a report can be
re-audited by evaluating the text again (see :func:`audit`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

from .model import (
    PITCHFORK_KINDS,
    ZERO_SINGULAR_KINDS,
    ModelKind,
    ModelSpec,
    check_assumptions,
)


class DeterministicSystemError(ValueError):
    """Stability in probability is undefined without noise."""


class Existence(str, Enum):
    UNIQUE_STRONG = "UniqueStrong"
    NON_UNIQUE = "NonUnique"


class Blowup(str, Enum):
    NEVER = "Never"
    ALMOST_SURELY_FINITE_TIME = "AlmostSurelyFiniteTime"
    UNKNOWN = "Unknown"


class Absorption(str, Enum):
    ALMOST_SURELY_FINITE = "AlmostSurelyFinite"
    NEVER = "Never"
    UNKNOWN = "Unknown"


class Stability(str, Enum):
    ASYMPTOTICALLY_STABLE = "AsymptoticallyStableInProbability"
    STABLE = "StableInProbability"
    AS_EXPONENTIALLY_STABLE = "AlmostSurelyExponentiallyStable"
    UNSTABLE = "UnstableInProbability"
    BOUNDARY = "Boundary"


class Qsd(str, Enum):
    EXISTS = "Exists"
    NUMERICALLY_ABSENT = "NumericallyAbsent"
    NOT_APPLICABLE = "NotApplicable"
    UNKNOWN = "Unknown"


class Form(str, Enum):
    DIRAC = "DiracAtPoint"
    DENSITY = "HomogeneousDensity"


class Shape(str, Enum):
    PEAKED_INTERIOR = "PeakedInterior"
    DIVERGENT_AT_BOUNDARY = "DivergentAtBoundary"
    BOUNDARY = "Boundary"


_SAFE = {"__builtins__": {}, "sqrt": math.sqrt, "inf": math.inf}


def _namespace(model: ModelSpec) -> dict[str, Any]:
    rep = check_assumptions(model)
    return {
        "lam": model.lam, "sigma": model.sigma, "alpha": model.alpha,
        "mu": model.mu, "kappa": model.kappa, "nu": model.nu, "beta": model.beta,
        "delta": model.delta_exp, "d": model.d_coef, "a": model.a,
        "h6": rep.h6.status.value == "satisfied",
        "h1_h6": rep.all_satisfied(),
        "exact_power": _is_exact_power_form(model),
    }


def evaluate(condition: str, namespace: dict[str, Any]) -> bool:
    return bool(eval(condition, dict(_SAFE), dict(namespace)))  # noqa: S307 - fixed table text


def _decide(table: Sequence[tuple[str, Any]], ns: dict[str, Any]) -> tuple[Any, str]:
    for cond, verdict in table:
        if evaluate(cond, ns):
            return verdict, cond
    raise AssertionError("decision table is not exhaustive")  # pragma: no cover


def _is_exact_power_form(model: ModelSpec) -> bool:
    # g(x) = -m x^{1+k} globally with m, k > 0 and gamma = sigma x
    if model.kind in PITCHFORK_KINDS:
        return model.alpha == 1.0
    if model.kind is ModelKind.GENERAL_POWER:
        return (model.mu < 0 and model.nu == -model.mu and model.beta == model.kappa
                and model.alpha == 1.0 and not model.has_tail_blend)
    return False


@dataclass(frozen=True)
class StabilityVerdict:
    point: float
    status: Stability
    condition: str

    def to_dict(self) -> dict[str, Any]:
        return {"point": self.point, "status": self.status.value, "condition": self.condition}


@dataclass(frozen=True)
class StationaryEntry:
    """A stationary solution: a Dirac mass or a homogeneous density.

    ``support`` is an open interval (floats, possibly infinite). For
    densities ``shape`` and ``stability`` describe the solution; the
    density itself is evaluated by :mod:`singsde.density`.
    """

    support: tuple[float, float]
    form: Form
    point: float | None = None
    condition: str = ""
    shape: Shape | None = None
    stability: str | None = None

    def to_dict(self) -> dict[str, Any]:
        out = {"support": [_num(self.support[0]), _num(self.support[1])], "form": self.form.value,
               "condition": self.condition}
        if self.point is not None:
            out["point"] = self.point
        if self.shape is not None:
            out["shape"] = self.shape.value
        if self.stability is not None:
            out["stability"] = self.stability
        return out


def _num(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass(frozen=True)
class ExistenceVerdict:
    existence: Existence
    blowup: Blowup
    condition: str


@dataclass(frozen=True)
class RegimeReport:
    existence: Existence
    blowup: Blowup
    absorption: Absorption
    stability: tuple[StabilityVerdict, ...]
    stationary: tuple[StationaryEntry, ...]
    qsd: Qsd
    conditions: dict[str, str] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @property
    def delta0(self) -> StabilityVerdict | None:
        for v in self.stability:
            if v.point == 0.0:
                return v
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "existence": self.existence.value,
            "blowup": self.blowup.value,
            "absorption": self.absorption.value,
            "stability": [v.to_dict() for v in self.stability],
            "stationary": [e.to_dict() for e in self.stationary],
            "qsd": self.qsd.value,
            "conditions": dict(self.conditions),
            "notes": list(self.notes),
        }


# --- decision tables -------------------------------------------------------

_DELTA0_TABLE = [
    ("alpha < 1", Stability.ASYMPTOTICALLY_STABLE),
    ("alpha == 1 and lam < sigma**2 / 2 and exact_power", Stability.AS_EXPONENTIALLY_STABLE),
    ("alpha == 1 and lam < sigma**2 / 2", Stability.ASYMPTOTICALLY_STABLE),
    ("alpha == 1 and lam > sigma**2 / 2", Stability.UNSTABLE),
    ("alpha == 1 and lam == sigma**2 / 2", Stability.BOUNDARY),
    ("alpha > 1 and lam < 0", Stability.STABLE),
    ("alpha > 1 and lam > 0", Stability.UNSTABLE),
    ("alpha > 1 and lam == 0", Stability.BOUNDARY),
]

_ABSORPTION_TABLE = [
    ("alpha >= 1", Absorption.NEVER),
    ("sigma == 0", Absorption.NEVER),
    ("alpha < 1 and sigma > 0 and nu > 0", Absorption.ALMOST_SURELY_FINITE),
    ("alpha < 1 and sigma > 0 and nu == 0 and lam < 0", Absorption.ALMOST_SURELY_FINITE),
    ("alpha < 1 and sigma > 0 and (nu < 0 or (nu == 0 and lam >= 0))", Absorption.UNKNOWN),
]

_BLOWUP_TABLE = [
    ("h6", Blowup.NEVER),
    ("not h6", Blowup.UNKNOWN),
]

# half-line densities for singular point 0
_DENSITY_TABLE = [
    ("sigma == 0", False),
    ("alpha < 1", False),
    ("alpha == 1 and lam > sigma**2 / 2 and h6", True),
    ("alpha == 1 and not (lam > sigma**2 / 2 and h6)", False),
    ("alpha > 1 and lam > 0 and h6", True),
    ("alpha > 1 and not (lam > 0 and h6)", False),
]

_QSD_TABLE = [
    ("alpha >= 1", Qsd.NOT_APPLICABLE),
    ("0.5 <= alpha < 0.75 and nu > 0 and h1_h6", Qsd.EXISTS),
    ("0.75 < alpha < 1", Qsd.NUMERICALLY_ABSENT),
    ("alpha == 0.75 or not (nu > 0 and h1_h6)", Qsd.UNKNOWN),
]

_SN_EXISTENCE_BLOWUP = [
    ("alpha >= 1", Blowup.NEVER),
    ("alpha < 1 and a < 0", Blowup.ALMOST_SURELY_FINITE_TIME),
    ("alpha < 1 and a >= 0", Blowup.UNKNOWN),
]

_SN_ABSORPTION = [
    ("alpha >= 1", Absorption.NEVER),
    ("alpha < 1 and a > 0", Absorption.ALMOST_SURELY_FINITE),
    ("alpha < 1 and a < 0", Absorption.NEVER),
    ("alpha < 1 and a == 0", Absorption.UNKNOWN),
]

_SN_UPPER = [
    ("alpha < 1", Stability.STABLE),
    ("alpha == 1", Stability.STABLE),
    ("alpha > 1", Stability.STABLE),
]

_SN_LOWER = [
    ("alpha < 1", Stability.STABLE),
    ("alpha == 1 and a > sigma**-4", Stability.STABLE),
    ("alpha == 1 and a < sigma**-4", Stability.UNSTABLE),
    ("alpha == 1 and a == sigma**-4", Stability.BOUNDARY),
    ("alpha > 1", Stability.UNSTABLE),
]

_SN_SHAPE = [
    ("sigma**2 * sqrt(a) < 0.5", Shape.PEAKED_INTERIOR),
    ("sigma**2 * sqrt(a) > 0.5", Shape.DIVERGENT_AT_BOUNDARY),
    ("sigma**2 * sqrt(a) == 0.5", Shape.BOUNDARY),
]

_SN_QSD = [
    ("alpha >= 1", Qsd.NOT_APPLICABLE),
    ("alpha < 1", Qsd.UNKNOWN),
]


# --- operations ------------------------------------------------------------

def _require_zero_singular(model: ModelSpec):
    if model.kind not in ZERO_SINGULAR_KINDS:
        raise ValueError(f"{model.kind.value} has no singular point at 0; use classify_saddle_node")


def classify_existence(model: ModelSpec) -> ExistenceVerdict:
    """Strong existence/uniqueness and the blow-up verdict.

    Construction rejects alpha < 1/2, so existence is always unique strong.
    """
    if model.kind is ModelKind.SADDLE_NODE:
        blow, cond = _decide(_SN_EXISTENCE_BLOWUP, _namespace(model))
    else:
        blow, cond = _decide(_BLOWUP_TABLE, _namespace(model))
    return ExistenceVerdict(Existence.UNIQUE_STRONG, blow, cond)


def classify_delta0(model: ModelSpec) -> StabilityVerdict:
    """Stability in probability of the Dirac mass at 0."""
    _require_zero_singular(model)
    if model.sigma == 0:
        raise DeterministicSystemError("sigma = 0: deterministic system, stability in probability undefined")
    status, cond = _decide(_DELTA0_TABLE, _namespace(model))
    return StabilityVerdict(0.0, status, cond)


def classify_absorption(model: ModelSpec) -> Absorption:
    """Whether the first hitting time of 0 is almost surely finite."""
    return _classify_absorption(model)[0]


def _classify_absorption(model: ModelSpec) -> tuple[Absorption, str]:
    if model.kind is ModelKind.SADDLE_NODE:
        return _decide(_SN_ABSORPTION, _namespace(model))
    return _decide(_ABSORPTION_TABLE, _namespace(model))


def _density_stability(model: ModelSpec) -> str:
    if model.alpha == 1.0:
        return "StableFirstApproximation"
    if model.alpha == 2.0:
        return "Stable"
    return "Unknown"


def classify_stationary(model: ModelSpec) -> list[StationaryEntry]:
    """Catalog of stationary solutions: Dirac masses plus granted densities."""
    if model.kind is ModelKind.SADDLE_NODE:
        return list(classify_saddle_node(model.a, model.sigma, model.alpha).stationary)
    entries = [StationaryEntry((0.0, 0.0), Form.DIRAC, point=0.0, condition="singular point")]
    grant, cond = _decide(_DENSITY_TABLE, _namespace(model))
    if grant:
        stab = _density_stability(model)
        entries.append(StationaryEntry((0.0, math.inf), Form.DENSITY, condition=cond, stability=stab))
        entries.append(StationaryEntry((-math.inf, 0.0), Form.DENSITY, condition=cond, stability=stab))
    return entries


def density_condition(model: ModelSpec) -> tuple[bool, str]:
    """Whether half-line densities are granted, with the deciding condition."""
    if model.kind is ModelKind.SADDLE_NODE:
        ok = any(e.form is Form.DENSITY for e in classify_stationary(model))
        return ok, "saddle-node density requires alpha == 1 and 0 < a < sigma**-4"
    return _decide(_DENSITY_TABLE, _namespace(model))


def classify_qsd(model: ModelSpec) -> Qsd:
    """Existence of a quasi-stationary distribution for the absorbed process."""
    return _classify_qsd(model)[0]


def _classify_qsd(model: ModelSpec) -> tuple[Qsd, str]:
    table = _SN_QSD if model.kind is ModelKind.SADDLE_NODE else _QSD_TABLE
    return _decide(table, _namespace(model))


def classify_saddle_node(a: float, sigma: float, alpha: float) -> RegimeReport:
    """Full regime report for dx = (a - x^2) dt + sigma |x^2 - a|^alpha dW."""
    if sigma <= 0:
        raise DeterministicSystemError("sigma must be > 0")
    model = ModelSpec.saddle_node(a, sigma, alpha)
    ns = _namespace(model)
    conditions = {}
    blow, conditions["blowup"] = _decide(_SN_EXISTENCE_BLOWUP, ns)
    absorb, conditions["absorption"] = _decide(_SN_ABSORPTION, ns)
    qsd, conditions["qsd"] = _decide(_SN_QSD, ns)
    stability = []
    entries = []
    notes = []
    if a > 0:
        r = math.sqrt(a)
        lo_status, lo_cond = _decide(_SN_LOWER, ns)
        up_status, up_cond = _decide(_SN_UPPER, ns)
        stability = [StabilityVerdict(-r, lo_status, lo_cond), StabilityVerdict(r, up_status, up_cond)]
        entries = [StationaryEntry((-r, -r), Form.DIRAC, point=-r, condition="singular point"),
                   StationaryEntry((r, r), Form.DIRAC, point=r, condition="singular point")]
        if alpha == 1.0 and a < sigma ** -4:
            shape, shape_cond = _decide(_SN_SHAPE, ns)
            entries.append(StationaryEntry(
                (-math.inf, -r), Form.DENSITY, condition=f"alpha == 1 and 0 < a < sigma**-4; {shape_cond}",
                shape=shape, stability="StableFirstApproximation"))
        if alpha < 0.75:
            notes.append("absorption from (sqrt(a), inf) at sqrt(a): Unknown")
        if alpha < 1:
            notes.append("hitting of +-sqrt(a) is a.s. finite for initial conditions in (-sqrt(a), sqrt(a))")
    elif a < 0:
        if alpha == 1.0:
            entries.append(StationaryEntry((-math.inf, math.inf), Form.DENSITY, condition="alpha == 1 and a < 0",
                                           shape=Shape.PEAKED_INTERIOR, stability="Unknown"))
    else:
        entries = [StationaryEntry((0.0, 0.0), Form.DIRAC, point=0.0, condition="singular point")]
        notes.append("a = 0: degenerate saddle-node, stability not classified")
    return RegimeReport(Existence.UNIQUE_STRONG, blow, absorb, tuple(stability), tuple(entries), qsd,
                        conditions, tuple(notes))


def classify(model: ModelSpec) -> RegimeReport:
    """Aggregate every verdict for ``model`` into one report."""
    if model.kind is ModelKind.SADDLE_NODE:
        return classify_saddle_node(model.a, model.sigma, model.alpha)
    ex = classify_existence(model)
    absorb, acond = _classify_absorption(model)
    qsd, qcond = _classify_qsd(model)
    conditions = {"blowup": ex.condition, "absorption": acond, "qsd": qcond}
    stability: tuple[StabilityVerdict, ...] = ()
    notes = []
    if model.sigma > 0:
        stability = (classify_delta0(model),)
    else:
        notes.append("sigma = 0: deterministic system, stability in probability undefined")
    return RegimeReport(ex.existence, ex.blowup, absorb, stability, tuple(classify_stationary(model)), qsd,
                        conditions, tuple(notes))


def audit(report: RegimeReport, model: ModelSpec) -> bool:
    """Re-evaluate every recorded condition against ``model``.

    Returns True when each condition text still holds for the model,
    i.e. the report is consistent with the decision tables.
    """
    ns = _namespace(model)
    conds = [v.condition for v in report.stability] + list(report.conditions.values())
    for e in report.stationary:
        if e.form is Form.DENSITY:
            conds.extend(part.strip() for part in e.condition.split(";"))
    return all(evaluate(c, ns) for c in conds)
