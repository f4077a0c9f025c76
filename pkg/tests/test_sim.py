import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singsde.model import ModelSpec
from singsde.rng import standard_normal
from singsde.scale import mean_exit_time
from singsde.sim import (Label, SimConfig, SimConfigError, ensemble_run, euler_maruyama_path, exit_frequencies,
                         mean_absorption_time)

MEAN_TIME_PF = 1.5999502228398619  # exact, see test_scale


def test_config_validation():
    with pytest.raises(SimConfigError):
        SimConfig(dt=-1)
    with pytest.raises(SimConfigError):
        SimConfig.from_dict({"dt": 0.1, "bogus": 1})
    cfg = SimConfig(dt=0.01, T=1)
    assert cfg.n_steps == 100
    assert SimConfig.from_dict(cfg.to_dict()) == cfg


def test_zero_noise_is_plain_euler():
    m = ModelSpec.pitchfork(1.0, 0.0, 0.6)
    cfg = SimConfig(dt=0.01, T=3, n_particles=1)
    rec = euler_maruyama_path(m, 0.2, cfg)
    x, want = 0.2, [0.2]
    for _ in range(cfg.n_steps):
        x = x + (1.0 * x - x * x * x) * 0.01 + 0.0
        want.append(x)
    assert rec.values.tolist() == want
    assert rec.label is Label.ALIVE


def test_first_step_uses_addressed_normal():
    m = ModelSpec.pitchfork(0.5, 0.7, 1.0)
    cfg = SimConfig(dt=0.01, T=0.02, master_seed=42)
    rec = euler_maruyama_path(m, 1.0, cfg, particle_index=17)
    z = standard_normal(42, 17, 0)
    assert rec.values[1] == 1.0 + (0.5 - 1.0) * 0.01 + 0.7 * 1.0 * math.sqrt(0.01) * z


def test_ensemble_independent_of_threads_and_chunking():
    m = ModelSpec.subcritical_pitchfork(-0.5, 0.5, 0.6)
    cfg = SimConfig(dt=0.01, T=2, n_particles=5000, master_seed=9, snapshot_times=(1.0, 2.0))
    a = ensemble_run(m, 1.0, cfg, threads=1)
    b = ensemble_run(m, 1.0, cfg, threads=4)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.final_states, b.final_states)
    assert np.array_equal(a.event_times, b.event_times, equal_nan=True)
    assert np.array_equal(a.hist_counts, b.hist_counts)
    tail = ensemble_run(m, 1.0, SimConfig(**{**cfg.to_dict(), "n_particles": 10}), threads=1, first_index=4990)
    assert np.array_equal(tail.final_states, a.final_states[4990:])


def test_single_path_matches_ensemble_member():
    m = ModelSpec.pitchfork(-1, 1, 0.6)
    cfg = SimConfig(dt=0.01, T=1, n_particles=20, master_seed=5)
    st_ = ensemble_run(m, 1.0, cfg, threads=2)
    rec = euler_maruyama_path(m, 1.0, cfg, particle_index=13)
    assert rec.values[-1] == st_.final_states[13]
    assert rec.label == st_.labels[13]


def test_weak_order_one():
    # dx = -x dt + 0.5 x dW has E[x_T^2] = exp(-1.75 T); the Euler chain has ((1 - dt)^2 + dt / 4)^n
    m = ModelSpec.general_power(lam=-1, sigma=0.5, alpha=1, mu=0, kappa=2, nu=0, beta=2)
    exact = math.exp(-1.75)
    errs = []
    for dt in (0.1, 0.05):
        cfg = SimConfig(dt=dt, T=1, n_particles=1_000_000, master_seed=3)
        st_ = ensemble_run(m, 1.0, cfg)
        assert np.all(st_.labels == Label.ALIVE)
        x2 = st_.final_states ** 2
        se = x2.std() / math.sqrt(len(x2))
        euler = ((1 - dt) ** 2 + 0.25 * dt) ** round(1 / dt)
        assert abs(x2.mean() - euler) < 4 * se
        errs.append(abs(x2.mean() - exact))
    assert 1.6 < errs[0] / errs[1] < 2.5


def test_mean_absorption_time_matches_exact():
    m = ModelSpec.pitchfork(-1, 1, 0.6)
    cfg = SimConfig(dt=0.001, T=40, n_particles=20000, master_seed=3)
    r = mean_absorption_time(m, cfg, x0=1.0)
    assert r.censored_fraction == 0.0 and not r.biased_low
    assert abs(r.estimate - MEAN_TIME_PF) < 4 * r.stderr
    assert MEAN_TIME_PF == pytest.approx(mean_exit_time(m, (0, math.inf), 1.0), rel=1e-9)


def test_mean_absorption_time_general_power():
    # drift x - x^3 and diffusion |x|^0.75; exact value by nested quadrature over the closed-form G
    m = ModelSpec.general_power(lam=1, sigma=1.0, alpha=0.75, mu=-1, kappa=2, nu=1, beta=2)
    exact = 11.18482930097598
    assert mean_exit_time(m, (0, math.inf), 1.0) == pytest.approx(exact, rel=1e-8)
    r = mean_absorption_time(m, SimConfig(dt=0.001, T=200, n_particles=5000, master_seed=2), x0=1.0)
    assert abs(r.estimate - exact) < 4 * r.stderr


def test_mean_absorption_time_refuses_without_absorption():
    with pytest.raises(SimConfigError, match="not almost surely finite"):
        mean_absorption_time(ModelSpec.pitchfork(1, 1, 1.2), SimConfig(n_particles=10))


@pytest.mark.parametrize("alpha", [1.0, 1.2, 2.0])
def test_no_absorption_above_one(alpha):
    # dt small enough that the explicit step never overshoots the cubic drift across 0
    m = ModelSpec.pitchfork(-1, 1, alpha)
    cfg = SimConfig(dt=0.001, T=20, n_particles=2000, master_seed=1)
    st_ = ensemble_run(m, 1.0, cfg)
    assert not np.any(st_.labels == Label.ABSORBED_AT_ZERO)
    assert np.all(st_.min_distance > 0)


def test_histograms_and_survivors():
    m = ModelSpec.subcritical_pitchfork(-0.5, 0.5, 0.6)
    cfg = SimConfig(dt=0.01, T=4, n_particles=20000, master_seed=2, snapshot_times=(1, 2, 3, 4))
    st_ = ensemble_run(m, 1.0, cfg)
    mass = st_.hist_mass
    assert np.allclose(mass.sum(axis=1)[st_.hist_counts.sum(axis=1) > 0], 1.0, atol=1e-12)
    assert np.all(np.diff(st_.survivor_counts) <= 0)
    assert st_.survivor_counts[-1] == np.sum(st_.labels == Label.ALIVE)
    t = st_.absorption_times
    assert np.all((t > 0) & (t <= 4))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32), st.floats(0.3, 1.5))
def test_absorbed_paths_stop_at_zero(seed, x0):
    m = ModelSpec.pitchfork(-1, 1, 0.6)
    rec = euler_maruyama_path(m, x0, SimConfig(dt=0.01, T=5, master_seed=seed))
    if rec.label is Label.ABSORBED_AT_ZERO:
        k = math.ceil(rec.event_time / 0.01)
        assert np.all(rec.values[k:] == 0.0)
        assert np.all(rec.values[:k] > 0)


def test_blowup_label():
    m = ModelSpec.saddle_node(-1, 1, 0.6)
    rec = euler_maruyama_path(m, 0.0, SimConfig(dt=0.001, T=20, blowup_threshold=1e6))
    assert rec.label is Label.BLOWN_UP


def test_exit_frequencies_labels_and_seeding():
    m = ModelSpec.saddle_node(1, 0.5, 0.75)
    cfg = SimConfig(dt=0.01, T=30, n_particles=2000, master_seed=4)
    res = exit_frequencies(m, [-0.5, 0.5], cfg)
    for r in res:
        assert r.n_right + r.n_left + r.n_unresolved + r.n_blown_up == r.n
    assert res[0].frequency_right < res[1].frequency_right


def test_exit_frequencies_auto_convergence_rule():
    m = ModelSpec.saddle_node(1, 1, 1.2)
    cfg = SimConfig(dt=0.01, T=200, n_particles=200, master_seed=4, convergence_hold=2)
    (r,) = exit_frequencies(m, [0.0], cfg)
    assert r.n_unresolved < r.n
