import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import ALPHAS, LAMBDAS, SIGMAS, arcsin_hitting, nested_p_v, pitchfork_G
from singsde.classify import Absorption, classify_absorption
from singsde.model import ModelSpec
from singsde.scale import (Destination, ExitTime, LimitKind, ScaleError, boundary_limits, build_scale_table,
                           compute_G, hitting_probability, mean_exit_time, natural_interval, scale_p, scale_v)

POS = (0.0, math.inf)

# Values below were produced once by nested scipy quadrature on closed-form
# drift/diffusion (tests/oracles.py) and frozen.
P_ZERO_PF_SUB = -0.09317172167427559     # pitchfork(-0.5, 0.5, 0.6), p(0+) with c = 1
V_ZERO_PF_SUB = 4.130104129422934
P_ZERO_PF_075 = -0.851525133299028        # pitchfork(0.3, 1, 0.75)
V_ZERO_PF_075 = 4.4929309273792954
V_LEFT_SN = 1.7282393082765688            # saddle_node(-1, 1, 0.6), v(-inf) with c = 0
NESTED_075 = {0.25: (-0.5973573758348247, 0.9779277701549116),
              0.5: (-0.4040058754078445, 0.3154413861637324),
              2.0: (5.747270592421905, 3.017887537587822)}
MEAN_TIME_PF = 1.5999502228398619         # pitchfork(-1, 1, 0.6) from x = 1, double integral


def test_compute_G_closed_forms():
    m = ModelSpec.pitchfork(1, 1, 1)
    assert compute_G(m, POS, 1.0, 2.0) == pytest.approx(math.log(2) - 1.5, abs=1e-12)
    sn = ModelSpec.saddle_node(1, 1, 0.75)
    assert compute_G(sn, (-1, 1), 0.0, 0.5) == pytest.approx(math.asin(0.5), abs=1e-12)


@pytest.mark.parametrize("lam,sigma,alpha", [(0.3, 1, 0.75), (-1, 0.5, 1.5), (2, 1, 3), (0.7, 0.5, 1)])
def test_compute_G_matches_antiderivative(lam, sigma, alpha):
    m = ModelSpec.pitchfork(lam, sigma, alpha)
    for x in (0.1, 0.7, 1.9):
        want = pitchfork_G(lam, sigma, alpha, 1.0, x)
        assert compute_G(m, POS, 1.0, x) == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_compute_G_at_singular_end():
    assert compute_G(ModelSpec.pitchfork(1, 1, 1.5), POS, 1.0, 0.0) == -math.inf
    assert compute_G(ModelSpec.pitchfork(1, 1, 0.6), POS, 1.0, 0.0) == pytest.approx(
        pitchfork_G(1, 1, 0.6, 1.0, 1e-300), rel=1e-9)


def test_compute_G_rejects_outside_points():
    with pytest.raises(ScaleError):
        compute_G(ModelSpec.pitchfork(1, 1, 1), POS, 1.0, -1.0)


def test_table_matches_nested_quadrature():
    m = ModelSpec.pitchfork(0.3, 1, 0.75)
    t = build_scale_table(m, POS, sorted(NESTED_075), c=1.0)
    for x, p, v in zip(t.grid, t.p_vals, t.v_vals):
        assert p == pytest.approx(NESTED_075[x][0], rel=1e-10)
        assert v == pytest.approx(NESTED_075[x][1], rel=1e-10)
    assert max(t.error.values()) < 1e-10


def test_point_functions_agree_with_table():
    m = ModelSpec.pitchfork(0.3, 1, 0.75)
    assert scale_p(m, POS, 1.0, 0.5) == pytest.approx(NESTED_075[0.5][0], rel=1e-10)
    assert scale_v(m, POS, 1.0, 2.0) == pytest.approx(NESTED_075[2.0][1], rel=1e-10)
    assert scale_p(m, POS, 1.0, 1.0) == 0.0 and scale_v(m, POS, 1.0, 1.0) == 0.0


def test_nested_oracle_on_a_second_model():
    m = ModelSpec.pitchfork(-1, 0.5, 1.5)
    f = lambda x: -x - x ** 3
    g = lambda x: 0.5 * abs(x) ** 1.5
    t = build_scale_table(m, POS, [0.6, 1.7], c=1.0)
    for x, p, v in zip(t.grid, t.p_vals, t.v_vals):
        po, vo = nested_p_v(f, g, 1.0, x)
        assert p == pytest.approx(po, rel=1e-9)
        assert v == pytest.approx(vo, rel=1e-8)


def test_zero_drift_gives_identity_scale():
    gp = ModelSpec.general_power(lam=0, sigma=1, alpha=1, mu=0, kappa=2, nu=0, beta=2)
    assert scale_p(gp, POS, 1.0, 3.0) == pytest.approx(2.0, abs=1e-13)
    assert scale_p(gp, POS, 1.0, 0.2) == pytest.approx(-0.8, abs=1e-13)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([(0.3, 1, 0.75), (-1, 0.5, 1.2), (2, 1, 2)]),
       st.lists(st.floats(0.05, 3), min_size=2, max_size=6, unique=True))
def test_p_nondecreasing_and_v_nonnegative(params, xs):
    m = ModelSpec.pitchfork(*params)
    t = build_scale_table(m, POS, xs, c=1.0)
    assert np.all(np.diff(t.p_vals) >= 0)
    assert all(v >= 0 for v in t.v_vals)


def test_tolerance_halving_changes_less_than_reported_error():
    m = ModelSpec.pitchfork(0.3, 1, 0.75)
    grid = [0.1, 0.5, 1.5, 3.0]
    a = build_scale_table(m, POS, grid, c=1.0, tol=1e-10)
    b = build_scale_table(m, POS, grid, c=1.0, tol=5e-11)
    for key, va, vb in (("p", a.p_vals, b.p_vals), ("v", a.v_vals, b.v_vals)):
        assert np.max(np.abs(np.subtract(va, vb))) <= 2 * max(a.error[key], b.error[key]) + 1e-14


@pytest.mark.parametrize("params,p0,v0", [((-0.5, 0.5, 0.6), P_ZERO_PF_SUB, V_ZERO_PF_SUB),
                                          ((0.3, 1, 0.75), P_ZERO_PF_075, V_ZERO_PF_075)])
def test_boundary_values_at_zero(params, p0, v0):
    r = boundary_limits(ModelSpec.pitchfork(*params), POS)
    assert r.reference == 1.0
    assert r.left.p_limit.kind is LimitKind.FINITE
    assert r.left.p_limit.value == pytest.approx(p0, rel=1e-10)
    assert r.left.v_limit.value == pytest.approx(v0, rel=1e-10)
    assert r.exit_time is ExitTime.ALMOST_SURELY_FINITE
    assert r.absorption is True


def test_saddle_node_blowup_to_minus_infinity():
    r = boundary_limits(ModelSpec.saddle_node(-1, 1, 0.6), (-math.inf, math.inf))
    lim = r.left.v_limit
    assert abs(lim.value - V_LEFT_SN) <= 2 * lim.error + 1e-12
    assert r.right.p_limit.kind is LimitKind.PLUS_INFINITY and r.right.p_limit.confirmed
    assert r.blowup is True and r.destination is Destination.LEFT


def test_saddle_node_alpha_above_one_no_exit():
    r = boundary_limits(ModelSpec.saddle_node(1, 1, 1.2), (-1, 1))
    assert r.left.p_limit.kind is LimitKind.MINUS_INFINITY and r.left.p_limit.confirmed
    assert r.right.p_limit.kind is LimitKind.FINITE
    assert r.right.v_limit.kind is LimitKind.INFINITE and r.right.v_limit.confirmed
    assert r.exit_time is ExitTime.ALMOST_SURELY_INFINITE


@pytest.mark.parametrize("alpha", [1.0, 1.5, 3.0])
def test_no_exit_when_both_scale_limits_infinite(alpha):
    r = boundary_limits(ModelSpec.pitchfork(2, 0.5, alpha), POS)
    assert r.left.p_limit.kind is LimitKind.MINUS_INFINITY
    assert r.right.p_limit.kind is LimitKind.PLUS_INFINITY
    assert r.left.p_limit.confirmed and r.right.p_limit.confirmed
    assert r.absorption is False


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("lam", LAMBDAS)
@pytest.mark.parametrize("sigma", SIGMAS)
def test_boundary_absorption_agrees_with_classifier(alpha, lam, sigma):
    m = ModelSpec.pitchfork(lam, sigma, alpha)
    r = boundary_limits(m, POS, confirm=False)
    verdict = classify_absorption(m)
    if verdict is Absorption.ALMOST_SURELY_FINITE:
        assert r.absorption is True
    elif verdict is Absorption.NEVER:
        # an exponent exactly on the integrability edge is left undecided by the Feller route
        assert r.absorption is False or r.left.p_limit.kind is LimitKind.UNKNOWN


def test_integrability_boundary_is_unknown():
    r = boundary_limits(ModelSpec.pitchfork(0.5, 1, 1), POS)
    assert r.left.p_limit.kind is LimitKind.UNKNOWN


@pytest.mark.parametrize("x0", [-0.8, -0.4, 0.0, 0.3, 0.8])
def test_hitting_probability_matches_exponential_sine_integral(x0):
    m = ModelSpec.saddle_node(1, 0.5, 0.75)
    want = 1.0 - arcsin_hitting(1, 0.5, 0.75, x0)
    assert hitting_probability(m, x0) == pytest.approx(want, rel=1e-9, abs=1e-14)


def test_hitting_probability_requires_opt_in_above_one():
    m = ModelSpec.saddle_node(1, 1, 1.2)
    with pytest.raises(ScaleError, match="convergence_probability"):
        hitting_probability(m, 0.0)
    assert 0.0 <= hitting_probability(m, 0.0, convergence_probability=True) <= 1.0


@given(st.floats(-0.95, 0.95), st.floats(-0.95, 0.95))
@settings(max_examples=20, deadline=None)
def test_hitting_probability_monotone(x, y):
    m = ModelSpec.saddle_node(1, 0.7, 0.75)
    lo, hi = sorted((x, y))
    assert hitting_probability(m, lo) >= hitting_probability(m, hi) - 1e-12


def test_mean_exit_time_matches_double_integral():
    m = ModelSpec.pitchfork(-1, 1, 0.6)
    assert mean_exit_time(m, POS, 1.0) == pytest.approx(MEAN_TIME_PF, rel=1e-9)


def test_mean_exit_time_infinite_without_absorption():
    assert mean_exit_time(ModelSpec.pitchfork(1, 1, 1.2), POS, 1.0) == math.inf


def test_natural_interval():
    assert natural_interval(ModelSpec.saddle_node(1, 0.5, 0.75), 0.2) == (-1.0, 1.0)
    assert natural_interval(ModelSpec.pitchfork(1, 1, 1), -3) == (-math.inf, 0.0)
    with pytest.raises(ScaleError):
        natural_interval(ModelSpec.pitchfork(1, 1, 1), 0.0)


def test_report_json_keys():
    d = boundary_limits(ModelSpec.pitchfork(1, 1, 1.5), POS).to_dict()
    assert d["interval"] == [0.0, "inf"]
    assert {"left", "right", "exit_time", "destination", "verdict"} <= set(d)
