import json
import math

import pytest
from hypothesis import given, strategies as st

from singsde.model import (ModelError, ModelKind, ModelSpec, Status, check_assumptions, diffusion_eval,
                           drift_eval, h6_holds, signed_power, singular_points)

finite = st.floats(-50, 50, allow_nan=False)
pos_exp = st.floats(0.05, 5)


@pytest.mark.parametrize("x,a,expected", [(-2, 3, -8), (0, 0.5, 0), (-4, 0.5, -2), (9, 0.5, 3)])
def test_signed_power_examples(x, a, expected):
    assert signed_power(x, a) == expected


@given(finite, pos_exp)
def test_signed_power_is_odd(x, a):
    assert signed_power(-x, a) == -signed_power(x, a)


def test_drift_examples():
    assert drift_eval(ModelSpec.pitchfork(1, 1, 1), 1.0) == 0.0
    assert drift_eval(ModelSpec.saddle_node(4, 1, 1), -2.0) == 0.0
    gp = ModelSpec.general_power(lam=2, sigma=1, alpha=1, mu=-1, kappa=2, nu=1, beta=2)
    assert drift_eval(gp, 0.5) == pytest.approx(0.875, abs=1e-15)


def test_diffusion_examples():
    assert diffusion_eval(ModelSpec.pitchfork(1, 0.5, 0.6), 0.0) == 0.0
    assert diffusion_eval(ModelSpec.saddle_node(1, 1, 1), 1.0) == 0.0
    assert diffusion_eval(ModelSpec.pitchfork(1, 2, 0.5), 4.0) == 4.0


def test_singular_points():
    assert singular_points(ModelSpec.saddle_node(4, 1, 1)) == [-2.0, 2.0]
    assert singular_points(ModelSpec.saddle_node(-1, 1, 1)) == []
    assert singular_points(ModelSpec.pitchfork(7, 1, 1)) == [0.0]
    assert singular_points(ModelSpec.general_power(1, 1, 1, -1, 2, 1, 2)) == [0.0]


# magnitudes away from the underflow range of |x|^alpha
away = finite.filter(lambda v: v == 0.0 or abs(v) > 1e-6)


@given(st.sampled_from(["pf", "sn_pos", "gp"]), st.floats(0.5, 3), st.floats(0.1, 2), away)
def test_diffusion_zero_exactly_on_singular_points(which, alpha, sigma, x):
    if which == "pf":
        m = ModelSpec.pitchfork(1.0, sigma, alpha)
    elif which == "sn_pos":
        m = ModelSpec.saddle_node(4.0, sigma, alpha)
    else:
        m = ModelSpec.general_power(1.0, sigma, alpha, -1.0, 2.0, 1.0, 2.0)
    sing = singular_points(m)
    if which == "sn_pos" and min(abs(x - 2), abs(x + 2)) < 1e-6:
        return
    assert (diffusion_eval(m, x) == 0.0) == (x in sing)
    for s in sing:
        assert diffusion_eval(m, s) == 0.0
        if m.kind is not ModelKind.GENERAL_POWER:
            assert drift_eval(m, s) == 0.0


def test_pitchfork_derived_fields():
    m = ModelSpec.pitchfork(0.3, 0.7, 1.4)
    assert (m.mu, m.kappa, m.nu, m.beta, m.delta_exp, m.d_coef) == (-1.0, 2.0, 1.0, 2.0, 1.4, 0.7)


def test_saddle_node_derived_fields():
    m = ModelSpec.saddle_node(1, 0.5, 0.75)
    assert (m.kappa, m.beta, m.delta_exp, m.d_coef) == (1.0, 1.0, 1.5, 0.5)


def test_alpha_below_half_rejected():
    with pytest.raises(ModelError, match="strong-uniqueness threshold"):
        ModelSpec.pitchfork(1, 1, 0.4)


@pytest.mark.parametrize("bad", [{"sigma": -1}, {"kappa": 0}, {"beta": -1}, {"tail_threshold": 0}])
def test_invalid_fields_rejected(bad):
    kw = dict(kind=ModelKind.GENERAL_POWER, lam=1, sigma=1, alpha=1, mu=-1, kappa=2, nu=1, beta=2)
    kw.update(bad)
    with pytest.raises(ModelError):
        ModelSpec(**kw)


def test_json_roundtrip_and_unknown_fields():
    m = ModelSpec.general_power(lam=1, sigma=0.5, alpha=0.75, mu=-1, kappa=2, nu=1, beta=2)
    assert ModelSpec.from_json(m.to_json()) == m
    d = json.loads(m.to_json())
    assert "lambda" in d
    d["bogus"] = 1
    with pytest.raises(ModelError, match="unknown model field: bogus"):
        ModelSpec.from_dict(d)
    with pytest.raises(ModelError):
        ModelSpec.from_dict({"kind": "Pitchfork", "lam": 1, "sigma": 1, "alpha": 1})


def test_assumptions_pitchfork_all_satisfied():
    for lam in (-1, 0, 2):
        assert check_assumptions(ModelSpec.pitchfork(lam, 0.5, 0.6)).all_satisfied()


def test_assumptions_saddle_node_h5_violated():
    rep = check_assumptions(ModelSpec.saddle_node(1, 1, 1))
    assert rep.h5.status is Status.VIOLATED
    assert rep.all_satisfied(("h1", "h2", "h3", "h4", "h6"))


def test_assumptions_h6_violated():
    m = ModelSpec.general_power(lam=1, sigma=1, alpha=1, mu=-1, kappa=2, nu=-1, beta=2, delta_exp=1)
    assert check_assumptions(m).h6.status is Status.VIOLATED


@given(st.floats(-3, 3), st.floats(0.1, 4), st.floats(0, 5))
def test_h6_rule(nu, beta, delta):
    assert h6_holds(nu, beta, delta) == (nu >= 0 or delta > 1 + beta / 2)


def test_check_assumptions_pure():
    m = ModelSpec.general_power(lam=1, sigma=1, alpha=2, mu=1, kappa=1, nu=-1, beta=2, delta_exp=3)
    assert check_assumptions(m) == check_assumptions(m)


def test_general_power_blend_is_continuous():
    m = ModelSpec.general_power(lam=0.5, sigma=1, alpha=1, mu=2, kappa=1, nu=3, beta=2, tail_threshold=1.5)
    for edge in (1.5, 3.0, -1.5, -3.0):
        assert drift_eval(m, edge * (1 + 1e-12)) == pytest.approx(drift_eval(m, edge * (1 - 1e-12)), rel=1e-9)
    assert drift_eval(m, -2.2) == -drift_eval(m, 2.2)
    assert math.isclose(drift_eval(m, 4.0), 0.5 * 4 - 3 * 4 ** 3)
