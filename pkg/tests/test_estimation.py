import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mixedfeedback.circuits import build_burster, build_fhn, build_spiker, static_reduction
from mixedfeedback.estimation import (
    ConductanceModel, GainWarning, ObserverConfig, batch_least_squares, contracting_observer,
    output_feedback_gain_bound, rls, rls_estimate, simulate_modulated, with_injection)
from mixedfeedback.operators import ConfigError
from mixedfeedback.solvers import SimConfig, simulate
from mixedfeedback.stimuli import constant, ornstein_uhlenbeck


@pytest.fixture(scope="module")
def spiker_data():
    cell = build_spiker(g_fast=1.0, g_slow_pos=0.5)
    n, dt = 20000, 0.01
    I = ornstein_uhlenbeck(n, dt, 2.0, 1.0, seed=3)
    V = simulate(cell, I, SimConfig(dt, n * dt)).V
    return cell, I, V


def test_gain_bound_of_fhn_is_k():
    assert output_feedback_gain_bound(build_fhn(k=1.3)) == pytest.approx(1.3, rel=1e-9)
    assert output_feedback_gain_bound(build_fhn(k=0.0)) == 0.0


def _negative_slope(c, v):
    return sum(static_reduction(b.element).derivative(v) for b in c.branches
               if b.role == "negative")


@pytest.mark.parametrize("make", [build_fhn, build_spiker, build_burster],
                         ids=["fhn", "spiker", "burster"])
def test_injection_at_the_bound_monotonifies(make):
    c = make()
    v = np.linspace(-10, 10, 20001)
    assert np.min(_negative_slope(c, v) + output_feedback_gain_bound(c)) >= -1e-9


@pytest.mark.parametrize("make", [build_fhn, build_spiker], ids=["fhn", "spiker"])
def test_bound_is_tight_for_one_negative_branch(make):
    c = make()
    v = np.linspace(-10, 10, 20001)
    assert np.min(_negative_slope(c, v) + 0.99 * output_feedback_gain_bound(c)) < 0


def test_with_injection_adds_linear_branch():
    c = with_injection(build_fhn(), 2.0)
    assert c.branch("injection").element.slope == 2.0
    assert len(c.branches) == 3


def test_observer_converges_above_bound():
    c = build_fhn(V_init=0.0)
    n, dt = 40000, 0.01
    I = constant(0.2, n, dt)
    V = simulate(c, I, SimConfig(dt, n * dt)).V
    start = {"V": 1.8, "I_L": -0.5}
    hat = contracting_observer(c, I, V, 1.5, start)
    span = np.ptp(V.samples)
    assert abs(hat.samples[-1] - V.samples[-1]) <= 1e-3 * span
    assert abs(hat.samples[0] - V.samples[0]) > 1.0


def test_observer_warns_below_bound():
    c = build_fhn()
    I = constant(0.2, 1000, 0.01)
    V = simulate(c, I, SimConfig(0.01, 10.0)).V
    with pytest.warns(GainWarning):
        contracting_observer(c, I, V, 0.5)


def test_regression_is_exact_on_self_generated_data(spiker_data):
    cell, I, V = spiker_data
    model = ConductanceModel(cell, ("fast_mixed", "slow_positive"))
    phi, y, _ = model.regression(I, V)
    assert np.max(np.abs(phi @ model.truth() - y)) < 1e-10


@given(arrays(float, (60, 3), elements=st.floats(-3, 3)), arrays(float, 3, elements=st.floats(-2, 2)),
       arrays(float, 60, elements=st.floats(-0.1, 0.1)))
def test_rls_matches_batch_normal_equations(phi, theta, noise):
    y = phi @ theta + noise
    hist, _, _ = rls(phi, y, np.zeros(3), cov_scale=10.0, project=False)
    ref = batch_least_squares(phi, y, np.zeros(3), cov_scale=10.0)
    np.testing.assert_allclose(hist[-1], ref, rtol=1e-8, atol=1e-8 * (1 + np.abs(ref).max()))


def test_covariance_trace_is_nonincreasing(spiker_data):
    cell, I, V = spiker_data
    rep = rls_estimate(ConductanceModel(cell, ("fast_mixed", "slow_positive")), I, V)
    assert np.all(np.diff(rep.cov_trace) <= 1e-9)
    assert not rep.resets


def test_rls_recovers_conductances(spiker_data):
    cell, I, V = spiker_data
    rep = rls_estimate(ConductanceModel(cell, ("fast_mixed", "slow_positive")), I, V)
    assert rep.final_error < 0.01
    np.testing.assert_allclose(rep.final_theta, [1.0, 0.5], rtol=0.01)
    # one-step voltage prediction from the converged estimate is accurate
    assert np.max(np.abs(rep.v_hat.samples[-1000:] - V.samples[-1000:])) < 1e-4


def test_filtered_regression_still_converges(spiker_data):
    cell, I, V = spiker_data
    cfg = ObserverConfig(derivative_filter_tau=0.5)
    rep = rls_estimate(ConductanceModel(cell, ("fast_mixed", "slow_positive")), I, V, cfg)
    assert rep.final_error < 0.01


def test_forgetting_tracks_modulated_conductance():
    cell = build_spiker(g_fast=1.0, g_slow_pos=0.5)
    n, dt = 30000, 0.01
    I = ornstein_uhlenbeck(n, dt, 2.0, 1.0, seed=5)
    g = np.linspace(1.0, 1.3, n)
    V = simulate_modulated(cell, I, {"fast_mixed": g})
    model = ConductanceModel(cell, ("fast_mixed", "slow_positive"))
    fixed = rls_estimate(model, I, V, ObserverConfig(forgetting=1.0))
    forget = rls_estimate(model, I, V, ObserverConfig(forgetting=0.99))
    err = lambda r: abs(r.final_theta[0] - 1.3)
    assert err(forget) < 0.01 and err(forget) < err(fixed)


def test_modulated_run_with_constant_schedule_matches_simulate():
    cell = build_spiker()
    n = 5000
    I = constant(0.5, n, 0.01)
    a = simulate_modulated(cell, I, {"fast_mixed": np.full(n, cell.branch("fast_mixed").element.g_max)})
    b = simulate(cell, I, SimConfig(0.01, n * 0.01)).V
    np.testing.assert_array_equal(a.samples, b.samples)


def test_report_csv_and_summary(spiker_data):
    cell, I, V = spiker_data
    rep = rls_estimate(ConductanceModel(cell, ("fast_mixed",)), I, V)
    header = rep.to_csv().splitlines()[0]
    assert header == "t,theta_1,vhat,cov_trace"
    assert set(rep.summary()) == {"theta_1", "relative_error", "covariance_resets"}


def test_validation():
    with pytest.raises(ConfigError):
        ObserverConfig(forgetting=0.0)
    with pytest.raises(ConfigError):
        ObserverConfig(cov_scale=-1.0)
    with pytest.raises(ConfigError):
        ObserverConfig(theta_init=(-1.0,))
    with pytest.raises(ConfigError):
        ConductanceModel(build_fhn(), ("cubic",))
    with pytest.raises(KeyError):
        ConductanceModel(build_spiker(), ("missing",))
