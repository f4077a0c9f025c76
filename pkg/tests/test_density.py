import math

import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from singsde.density import (DensityError, ModeKind, NotIntegrableError, density_mode, density_profile,
                             granted_support, kolmogorov_residual, lyapunov_exponent_sn, normalize_density,
                             p_bifurcation_points, pitchfork_mode, saddle_node_moments, saddle_node_normalization,
                             saddle_node_phi, stationary_density_unnormalized)
from singsde.model import ModelSpec

POS = (0.0, math.inf)
A, SIG = 0.4, 0.8
SN_SUPPORT = (-math.inf, -math.sqrt(A))


def test_saddle_node_scalars():
    assert saddle_node_phi(A, SIG) == pytest.approx(2.4705294220065465, rel=1e-12)
    assert saddle_node_normalization(A, SIG) == pytest.approx(12.7587890625, rel=1e-12)
    m, s = saddle_node_moments(A, SIG)
    assert m == pytest.approx(-1.5625, rel=1e-14)
    assert s == pytest.approx(4.4828125, rel=1e-13)
    assert lyapunov_exponent_sn(A, SIG) == pytest.approx(-2.613, rel=1e-13)


def test_saddle_node_quadrature_normalization_and_moments():
    model = ModelSpec.saddle_node(A, SIG, 1)
    Z = normalize_density(model, SN_SUPPORT)
    assert Z == pytest.approx(saddle_node_normalization(A, SIG), rel=1e-6)
    q = lambda x: Z * stationary_density_unnormalized(model, x)
    b = SN_SUPPORT[1]
    mass = quad(q, -math.inf, b, epsabs=0, epsrel=1e-12, limit=200)[0]
    mean = quad(lambda x: x * q(x), -math.inf, b, epsabs=0, epsrel=1e-12, limit=200)[0]
    second = quad(lambda x: x * x * q(x), -math.inf, b, epsabs=0, epsrel=1e-12, limit=200)[0]
    assert mass == pytest.approx(1.0, rel=1e-8)
    assert mean == pytest.approx(-1 / SIG ** 2, rel=1e-6)
    assert second == pytest.approx((2 * saddle_node_phi(A, SIG) ** 2 - 1) * A, rel=1e-6)


@given(st.floats(0.05, 1.5), st.floats(0.4, 1.2))
def test_lyapunov_identity(a, sigma):
    if not a < sigma ** -4 * 0.999:
        return
    m, s = saddle_node_moments(a, sigma)
    assert lyapunov_exponent_sn(a, sigma) == pytest.approx(-2 * m - 2 * sigma ** 2 * s, rel=1e-9, abs=1e-12)


def test_saddle_node_window_enforced():
    with pytest.raises(DensityError, match="existence window"):
        saddle_node_normalization(3.0, 0.8)


@pytest.mark.parametrize("alpha,want", [(1.5, 0.5), (2.0, 1 / math.sqrt(3)),
                                        (3.0, math.sqrt((math.sqrt(13) - 1) / 6))])
def test_pitchfork_mode_closed_forms(alpha, want):
    # at lam = sigma = 1 the mode solves x - x^3 = alpha x^(2 alpha - 1)
    assert pitchfork_mode(1, 1, alpha) == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("alpha", [1.25, 1.5, 1.75])
def test_mode_scaling_below_two(alpha):
    lam = 1e-6
    assert pitchfork_mode(lam, 1, alpha) * (lam / alpha) ** (-1 / (2 * alpha - 2)) == pytest.approx(1, rel=1e-2)


@pytest.mark.parametrize("alpha", [2.5, 3.0])
def test_mode_scaling_above_two(alpha):
    lam = 1e-6
    assert pitchfork_mode(lam, 1, alpha) / math.sqrt(lam) == pytest.approx(1, rel=1e-2)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 5), st.floats(0.2, 2), st.floats(1.05, 4))
def test_mode_solves_stationarity(lam, sigma, alpha):
    x = pitchfork_mode(lam, sigma, alpha)
    lhs = lam * x - x ** 3
    rhs = sigma ** 2 * alpha * x ** (2 * alpha - 1)
    assert 0 < x < math.sqrt(lam)
    assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-300)


def test_mode_kinds_at_alpha_one():
    assert density_mode(ModelSpec.pitchfork(2, 1, 1), POS).value == pytest.approx(1.0)
    assert density_mode(ModelSpec.pitchfork(0.7, 1, 1), POS).kind is ModeKind.DIVERGES_AT_BOUNDARY
    assert density_mode(ModelSpec.pitchfork(1, 1, 1), POS).kind is ModeKind.BOUNDARY
    assert density_mode(ModelSpec.pitchfork(2, 1, 1.5), (-math.inf, 0)).value < 0


def test_generic_mode_matches_pitchfork_mode():
    gp = ModelSpec.general_power(lam=1, sigma=1, alpha=1.5, mu=-1, kappa=2, nu=1, beta=2)
    assert density_mode(gp, POS).value == pytest.approx(0.5, abs=1e-10)


def test_saddle_node_mode_transition():
    assert density_mode(ModelSpec.saddle_node(A, SIG, 1), SN_SUPPORT).value == pytest.approx(-1 / (2 * SIG ** 2))
    big = ModelSpec.saddle_node(1.0, SIG, 1)
    assert density_mode(big, (-math.inf, -1.0)).kind is ModeKind.DIVERGES_AT_BOUNDARY


def test_p_bifurcation_points():
    (pb,) = p_bifurcation_points(ModelSpec.saddle_node(A, SIG, 1))
    assert pb.parameter == "a" and pb.value == pytest.approx(0.6103515625, rel=1e-13)
    (pf,) = p_bifurcation_points(ModelSpec.pitchfork(2, 0.5, 1))
    assert pf.value == 0.25
    assert p_bifurcation_points(ModelSpec.pitchfork(2, 0.5, 1.5)) == []


@pytest.mark.parametrize("lam,sigma,alpha", [(2, 1, 1), (1, 1, 1.5), (0.3, 0.5, 2), (2, 0.5, 3)])
def test_routes_agree_and_integrate_to_one(lam, sigma, alpha):
    m = ModelSpec.pitchfork(lam, sigma, alpha)
    Zc = normalize_density(m, POS, "closed")
    Zq = normalize_density(m, POS, "quadrature")
    for x in (0.3, 1.1):
        a = Zc * stationary_density_unnormalized(m, x, "closed")
        b = Zq * stationary_density_unnormalized(m, x, "quadrature")
        assert a == pytest.approx(b, rel=1e-8)
    mass = quad(lambda x: Zc * stationary_density_unnormalized(m, x, "closed"), 0, math.inf, limit=200)[0]
    assert mass == pytest.approx(1.0, rel=1e-7)


def test_density_symmetric_supports():
    m = ModelSpec.pitchfork(2, 1, 1.5)
    assert normalize_density(m, (-math.inf, 0)) == pytest.approx(normalize_density(m, POS), rel=1e-10)


@pytest.mark.parametrize("lam,sigma,alpha", [(0.3, 1, 1), (0.5, 1, 1), (-1, 1, 1.5)])
def test_not_integrable_or_not_granted(lam, sigma, alpha):
    with pytest.raises(DensityError):
        normalize_density(ModelSpec.pitchfork(lam, sigma, alpha), POS)


def test_not_integrable_names_the_end():
    from singsde.density import _require_integrable
    with pytest.raises(NotIntegrableError, match="at 0"):
        _require_integrable(ModelSpec.pitchfork(0.3, 1, 1), 0.0, math.inf, 1.0)


def test_granted_support():
    assert granted_support(ModelSpec.pitchfork(1, 1, 1.5), 0.3) == POS
    with pytest.raises(DensityError, match="no stationary density"):
        granted_support(ModelSpec.pitchfork(1, 1, 0.6), 0.3)


@pytest.mark.parametrize("K", [0.0, 0.3, -1.0])
def test_particular_solution_solves_kolmogorov_equation(K):
    m = ModelSpec.pitchfork(1, 1, 1.5)
    for x in (0.4, 0.9, 1.6):
        assert abs(kolmogorov_residual(m, x, K)) < 1e-6


def test_profile_summary():
    m = ModelSpec.saddle_node(A, SIG, 1)
    prof = density_profile(m, SN_SUPPORT, [-3.0, -1.0, 0.0])
    assert prof.values[-1] == 0.0
    assert prof.mean == pytest.approx(-1.5625)
    assert prof.shape == "PeakedInterior"
    assert set(prof.to_dict()) == {"support", "Z", "mode", "mean", "second_moment", "shape"}
