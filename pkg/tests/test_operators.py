import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mixedfeedback.operators import (
    ConfigError, Cubic, CubicMinusLinear, Linear, LTIFirstOrder, MixedOperator,
    NoHysteresisError, PiecewiseLinear, Saturation, Scaled, Sigmoid, StiffnessWarning, Sum,
    closed_loop_gain, default_probe_suite, evaluate, hysteresis_trace, jump_points,
    linear_range, max_negative_slope, mixed_amplifier_characteristic,
    monotonicity_certificate, multivalued_interval, negative_conductance_range,
    operator_from_dict, resolvent)
from mixedfeedback.signals import Signal, Unit, norm

STATICS = [Linear(0.7), Cubic(0.5), CubicMinusLinear(1 / 3, 1.0), Saturation(2.0),
           Sigmoid(3.0, 0.4), Sigmoid(-2.0, -0.5),
           PiecewiseLinear(((-1.0, 0.0), (0.0, 1.0), (2.0, 1.5)))]


@pytest.mark.parametrize("f", STATICS, ids=lambda f: type(f).__name__)
def test_derivative_matches_finite_difference(f):
    x = np.linspace(-2.3, 2.3, 91)
    x = x[np.abs(x) > 1e-3]
    if isinstance(f, Saturation):
        x = x[(np.abs(x) > 1e-3) & (np.abs(x - 0.5) > 1e-3)]
    if isinstance(f, PiecewiseLinear):
        x = x[np.min(np.abs(x[:, None] - np.array([-1.0, 0.0, 2.0])), axis=1) > 1e-3]
    h = 1e-6
    fd = (f(x + h) - f(x - h)) / (2 * h)
    np.testing.assert_allclose(f.derivative(x), fd, rtol=1e-5, atol=1e-6)


def test_sigmoid_bounds_and_center():
    s = Sigmoid(4.0, 0.3)
    assert s(0.3) == pytest.approx(0.5)
    v = s(np.linspace(-50, 50, 101))
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(np.diff(v) >= 0)


def test_saturation_rejects_bad_gain():
    with pytest.raises(ConfigError):
        Saturation(0.0)


def test_piecewise_requires_increasing_breakpoints():
    with pytest.raises(ConfigError):
        PiecewiseLinear(((0.0, 0.0), (0.0, 1.0)))


@given(st.floats(0.05, 3.0), st.floats(0.05, 4.0))
def test_cubic_minus_linear_negative_range(c, k):
    # f' = 3 c V^2 - k < 0 exactly on (-sqrt(k/3c), sqrt(k/3c))
    edge = math.sqrt(k / (3 * c))
    (lo, hi), = negative_conductance_range(CubicMinusLinear(c, k))
    assert lo == pytest.approx(-edge, abs=1e-7)
    assert hi == pytest.approx(edge, abs=1e-7)
    assert max_negative_slope(CubicMinusLinear(c, k)) == pytest.approx(k, rel=1e-9)


def test_monotone_statics_have_no_negative_range():
    for f in (Linear(1.0), Cubic(1.0), Saturation(3.0), Sigmoid(2.0)):
        assert negative_conductance_range(f) == []
        assert max_negative_slope(f) == 0.0


def test_lti_step_response_matches_exponential():
    tau, g, dt, v = 2.0, 1.5, 0.05, 0.8
    n = np.arange(200)
    y = LTIFirstOrder(g, tau).evaluate(np.full(200, v), dt)
    np.testing.assert_allclose(y, g * v * (1 - np.exp(-(n + 1) * dt / tau)), rtol=1e-12)


def test_lti_rejects_nonpositive_tau():
    with pytest.raises(ConfigError):
        LTIFirstOrder(1.0, 0.0)


OPS = [Linear(2.0), CubicMinusLinear(1 / 3, 1.0), LTIFirstOrder(1.0, 0.5, 0.2),
       Sum((Cubic(1.0), LTIFirstOrder(2.0, 1.0))), Scaled(0.5, LTIFirstOrder(1.0, 0.3)),
       MixedOperator(Cubic(1.0), Linear(0.5))]


@pytest.mark.parametrize("op", OPS, ids=lambda o: type(o).__name__)
@given(v=arrays(float, 30, elements=st.floats(-2, 2)))
def test_stepper_reproduces_batch_evaluation(op, v):
    st_ = op.stepper(0.1, 0.0)
    seq = []
    for x in v:
        y, _ = st_.output(x)
        st_.commit(x)
        seq.append(y)
    np.testing.assert_allclose(seq, op.evaluate(v, 0.1, 0.0), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("op", OPS, ids=lambda o: type(o).__name__)
def test_dict_round_trip(op):
    back = operator_from_dict(op.to_dict())
    v = np.sin(np.linspace(0, 6, 50))
    np.testing.assert_array_equal(back.evaluate(v, 0.1), op.evaluate(v, 0.1))


def test_evaluate_warns_on_stiff_time_constant():
    with pytest.warns(StiffnessWarning):
        evaluate(LTIFirstOrder(1.0, 0.01), Signal.zeros(10, 0.1, Unit.VOLT))


def test_evaluate_maps_voltage_to_current():
    out = evaluate(Linear(2.0), Signal([1.0, -1.0], 0.1, Unit.VOLT))
    assert out.unit == Unit.AMPERE
    assert np.array_equal(out.samples, [2.0, -2.0])


# certificates


@pytest.mark.parametrize("op", [Linear(0.3), Cubic(1.0), Saturation(2.0), Sigmoid(1.5),
                                LTIFirstOrder(1.0, 0.5), Sum((Cubic(0.2), LTIFirstOrder(2.0, 3.0)))],
                         ids=lambda o: type(o).__name__)
def test_monotone_operators_pass(op):
    cert = monotonicity_certificate(op)
    assert cert.passed and cert.pairs_checked == 32


def test_negative_conductance_fails():
    cert = monotonicity_certificate(Linear(-1.0))
    assert not cert.passed and cert.value < 0


@given(st.floats(0.05, 4.0))
def test_cubic_minus_linear_witness_inside_negative_range(k):
    cert = monotonicity_certificate(CubicMinusLinear(1 / 3, k))
    assert not cert.passed
    v1, v2 = cert.witness
    for v in (v1, v2):
        assert np.ptp(v.samples) == 0.0
        assert abs(v.samples[0]) < math.sqrt(k)


def test_probe_suite_shape():
    probes = default_probe_suite()
    assert len(probes) == 32
    assert all(a.conformable(b) for a, b in probes)


def test_empty_probe_suite_rejected():
    with pytest.raises(ConfigError):
        monotonicity_certificate(Linear(1.0), [])


def test_mixed_operator_certifies_parts():
    pos, neg = MixedOperator(Cubic(1 / 3), Linear(1.0)).certify()
    assert pos.passed and neg.passed


# resolvent


@given(st.floats(0.01, 10.0), st.floats(0.0, 5.0),
       arrays(float, 20, elements=st.floats(-5, 5)))
def test_resolvent_of_linear(alpha, a, t):
    x = resolvent(Linear(a), alpha, Signal(t, 0.1))
    np.testing.assert_allclose(x.samples, t / (1 + alpha * a), rtol=1e-9, atol=1e-10)


@given(st.floats(0.1, 5.0), arrays(float, 10, elements=st.floats(-5, 5)))
def test_resolvent_of_cubic_matches_polynomial_root(alpha, t):
    x = resolvent(Cubic(1.0), alpha, Signal(t, 0.1)).samples
    for xi, ti in zip(x, t):
        roots = np.roots([alpha, 0.0, 1.0, -ti])
        real = roots[np.abs(roots.imag) < 1e-9].real
        assert xi == pytest.approx(real[0], abs=1e-8)


def test_resolvent_of_dynamic_operator_solves_equation():
    op = Sum((Cubic(1 / 3), LTIFirstOrder(1.0, 2.0)))
    t = Signal(np.sin(np.linspace(0, 10, 300)), 0.05)
    x = resolvent(op, 0.7, t)
    res = x.samples + 0.7 * op.evaluate(x.samples, 0.05) - t.samples
    assert np.max(np.abs(res)) < 1e-9


@given(arrays(float, 25, elements=st.floats(-3, 3)), arrays(float, 25, elements=st.floats(-3, 3)))
def test_resolvent_is_nonexpansive(t1, t2):
    op = Sum((Cubic(0.5), LTIFirstOrder(1.0, 0.4)))
    a, b = Signal(t1, 0.1), Signal(t2, 0.1)
    x1, x2 = resolvent(op, 1.3, a), resolvent(op, 1.3, b)
    assert norm(x1 - x2) <= norm(a - b) * (1 + 1e-9) + 1e-12


def test_resolvent_requires_positive_alpha():
    with pytest.raises(ConfigError):
        resolvent(Linear(1.0), 0.0, Signal.zeros(3, 0.1))


# amplifier algebra


@given(st.floats(0.1, 20.0), st.floats(0.0, 5.0))
def test_negative_feedback_slope(g, k):
    lo, hi = linear_range(g, k, "negative")
    u1, u2 = lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo)
    y1, = mixed_amplifier_characteristic(g, k, "negative", u1).values
    y2, = mixed_amplifier_characteristic(g, k, "negative", u2).values
    assert (y2 - y1) / (u2 - u1) == pytest.approx(g / (1 + g * k), rel=1e-9)
    assert closed_loop_gain(g, k, "negative") == pytest.approx(g / (1 + g * k), rel=1e-14)


@given(st.floats(0.2, 10.0), st.floats(1.01, 4.0))
def test_positive_feedback_interval_and_solution_count(g, factor):
    k = factor / g
    lo, hi = multivalued_interval(g, k, "positive")
    assert lo == pytest.approx(1 / g - k, rel=1e-12, abs=1e-15)
    assert hi == 0.0
    mid = 0.5 * (lo + hi)
    assert len(mixed_amplifier_characteristic(g, k, "positive", mid)) == 3
    assert len(mixed_amplifier_characteristic(g, k, "positive", hi + 1.0)) == 1
    assert len(mixed_amplifier_characteristic(g, k, "positive", lo - 1.0)) == 1


def test_no_interval_without_positive_feedback():
    assert multivalued_interval(2.0, 1.0, "negative") is None
    assert multivalued_interval(2.0, 0.3, "positive") is None


def test_critical_gain_is_degenerate():
    sol = mixed_amplifier_characteristic(2.0, 0.5, "positive", 0.0)
    assert sol.degenerate and sol.values == (0.0, 1.0)


def test_hysteresis_jumps_at_interval_edges():
    g, k = 2.0, 1.0
    n = 4001
    u = np.concatenate([np.linspace(-1, 1, n), np.linspace(1, -1, n)[1:]])
    sweep = Signal(u, 1.0)
    jumps = jump_points(sweep, hysteresis_trace(g, k, "positive", sweep))
    step = 2.0 / (n - 1)
    (u_up, d_up), (u_down, d_down) = jumps
    assert d_up == "up" and 0.0 < u_up <= step + 1e-12
    assert d_down == "down" and -step - 1e-12 <= u_down - (1 / g - k) < 0.0


def test_hysteresis_needs_bistability():
    with pytest.raises(NoHysteresisError):
        hysteresis_trace(2.0, 0.2, "positive", Signal.zeros(5, 1.0))


def test_negative_scaling_rejected():
    with pytest.raises(ConfigError):
        Scaled(-0.5, Linear(1.0))
