import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mixedfeedback.circuits import (
    Branch, ConductanceBranch, Gate, GapJunction, NetworkCircuit,
    OnePortCircuit, ParameterError, Synapse, as_network, build_burster, build_fhn, build_hco,
    build_rc_network, build_spiker, circuit_from_dict, circuit_to_dict, compile_network,
    decompose, fhn_vector_field, get_parameter, lowest_rest_potential, set_parameter,
    static_reduction)
from mixedfeedback.operators import CubicMinusLinear, Linear, Sigmoid, negative_conductance_range

BUILDERS = {
    "fhn": build_fhn,
    "fhn_k0": lambda: build_fhn(k=0.0),
    "burster": build_burster,
    "spiker": build_spiker,
    "hco": build_hco,
    "rc": lambda: build_rc_network(3, [1.0, 2.0, 0.5], 0.3, -0.2, [(0, 1, 0.5), (1, 2, 1.0)]),
}


@given(arrays(float, 200, elements=st.floats(-20, 20)), st.floats(0, 1),
       st.floats(0.01, 10), st.floats(0.001, 0.5), st.floats(-8, 8))
def test_gate_stays_in_unit_interval(v, m0, tau, dt, slope):
    if abs(slope) < 1e-3:
        slope = 1.0
    gate = (Gate.activation if slope > 0 else Gate.inactivation)(slope, 0.2, tau)
    m = gate.trajectory(v, dt, m0)
    assert np.all((m >= 0) & (m <= 1))


def test_gate_relaxes_exponentially_at_constant_voltage():
    gate = Gate.activation(3.0, 0.0, 2.0)
    v, m0, dt = 0.4, 0.1, 0.05
    n = np.arange(100)
    target = 1 / (1 + math.exp(-3.0 * 0.4))
    expected = target + (m0 - target) * np.exp(-(n + 1) * dt / 2.0)
    np.testing.assert_allclose(gate.trajectory(np.full(100, v), dt, m0), expected, rtol=1e-12)


def test_voltage_dependent_tau():
    gate = Gate(Sigmoid(2.0), 1.0, tau_amp=3.0, tau_slope=1.0, tau_center=0.5)
    assert gate.tau_of(0.5) == pytest.approx(4.0)
    assert np.all(gate.trajectory(np.linspace(-3, 3, 50), 0.1, 0.3) <= 1)


@pytest.mark.parametrize("kwargs", [dict(tau=0.0), dict(tau=1.0, exponent=0),
                                    dict(tau=1.0, sign="other")])
def test_gate_validation(kwargs):
    with pytest.raises(ParameterError):
        Gate(Sigmoid(1.0), **kwargs)


def test_activation_needs_increasing_steady_state():
    with pytest.raises(ParameterError):
        Gate(Sigmoid(-1.0), 1.0, sign="activation")


def test_static_reduction_formula():
    br = ConductanceBranch(2.0, 3.0, (Gate.activation(4.0, -0.5, 1.0, exponent=2),))
    v = np.linspace(-3, 3, 13)
    m = 1 / (1 + np.exp(-4.0 * (v + 0.5)))
    np.testing.assert_allclose(static_reduction(br)(v), 2.0 * m ** 2 * (v - 3.0), rtol=1e-12)


def test_conductance_stepper_matches_evaluate():
    br = ConductanceBranch(1.5, -2.0, (Gate.activation(3.0, 0.0, 0.7),
                                       Gate.inactivation(2.0, -0.5, 4.0)))
    v = np.sin(np.linspace(0, 8, 120))
    stp = br.stepper(0.05, 0.0)
    seq = []
    for x in v:
        seq.append(stp.output(x)[0])
        stp.commit(x)
    np.testing.assert_allclose(seq, br.evaluate(v, 0.05, 0.0), rtol=1e-12, atol=1e-14)


def test_negative_conductance_rejected():
    with pytest.raises(ParameterError):
        ConductanceBranch(-1.0, 0.0)


def test_negative_tag_requires_negative_range():
    with pytest.raises(ParameterError):
        OnePortCircuit(1.0, branches=(Branch("lin", Linear(1.0), "negative"),))
    # switched off branches may keep their tag
    off = ConductanceBranch(0.0, 3.0, (Gate.activation(4, 0, 1),))
    OnePortCircuit(1.0, 1.0, branches=(Branch("off", off, "negative"),))


def test_circuit_validation():
    with pytest.raises(ParameterError):
        OnePortCircuit(0.0)
    with pytest.raises(ParameterError):
        OnePortCircuit(1.0, -1.0)
    with pytest.raises(ParameterError):
        OnePortCircuit(1.0, branches=(Branch("a", Linear(1)), Branch("a", Linear(2))))
    with pytest.raises(ParameterError):
        Branch("x", Linear(1.0), "neutral")


def test_network_references():
    a = OnePortCircuit(1.0, 1.0, name="a")
    b = OnePortCircuit(1.0, 1.0, name="b")
    with pytest.raises(IndexError):
        NetworkCircuit((a, b), (GapJunction(0, 2, 1.0),))
    with pytest.raises(IndexError):
        NetworkCircuit((a, b), synapses=(Synapse(0, 5, 1.0, -2.0),))
    with pytest.raises(ParameterError):
        NetworkCircuit((a, a))
    with pytest.raises(ParameterError):
        GapJunction(0, 1, -1.0)


@pytest.mark.parametrize("name", BUILDERS)
def test_builder_round_trip(name):
    c = BUILDERS[name]()
    assert circuit_from_dict(circuit_to_dict(c)) == c


def test_fhn_structure():
    c = build_fhn(C=2.0, L=50.0, R=0.8, k=1.2)
    cubic = c.branch("cubic")
    assert cubic.role == "negative"
    assert cubic.element == CubicMinusLinear(1 / 3, 1.2)
    rl = c.branch("I_L").element
    assert (rl.gain, rl.tau) == (0.8, 50.0)
    dV, dI = fhn_vector_field(c, 1.0, 0.5, I_ext=0.3)
    assert dV == pytest.approx((0.3 - (1 / 3 - 1.2) - 0.5) / 2.0)
    assert dI == pytest.approx((-0.5 + 0.8) / 50.0)


def test_fhn_parameters_validated():
    with pytest.raises(ParameterError):
        build_fhn(L=0.0)


def test_burster_branches():
    c = build_burster()
    assert [b.name for b in c.branches] == ["fast_mixed", "slow_positive", "slow_mixed",
                                            "ultraslow_positive"]
    assert c.branch("fast_mixed").negative_range()
    assert c.branch("slow_mixed").negative_range()
    # outward currents only turn over below their reversal, outside the operating range
    red = static_reduction(c.branch("slow_positive").element)
    assert negative_conductance_range(red, (-3.0, 3.0)) == []
    assert [b.name for b in build_spiker().branches] == ["fast_mixed", "slow_positive"]


def test_burster_timescales_ordered():
    with pytest.raises(ParameterError):
        build_burster(tau_slow=200.0)


def test_rest_potential_is_equilibrium():
    c = build_burster()
    v = lowest_rest_potential(c, -1.5)
    assert abs(c.static_iv(v) + 1.5) < 1e-6


def test_hco_requires_inhibitory_reversal():
    with pytest.raises(ParameterError):
        build_hco(V_syn=0.0)
    with pytest.raises(ParameterError):
        build_hco(g_syn=-0.1)


def test_hco_is_symmetric():
    net = build_hco()
    assert [c.name for c in net.nodes] == ["A", "B"]
    s0, s1 = net.synapses
    assert (s0.pre, s0.post, s1.pre, s1.post) == (0, 1, 1, 0)
    assert s0.g == s1.g and s0.V_syn == s1.V_syn


def test_rc_network_broadcasts_parameters():
    net = build_rc_network(4, C=2.0, g_leak=[1, 2, 3, 4])
    assert [c.C for c in net.nodes] == [2.0] * 4
    assert [c.g_leak for c in net.nodes] == [1, 2, 3, 4]
    with pytest.raises(ParameterError):
        build_rc_network(0)


def test_parameter_paths():
    c = build_burster()
    assert get_parameter(c, "branches.slow_mixed.g_max") == 1.15
    c2 = set_parameter(c, "branches.slow_mixed.g_max", 0.0)
    assert c2.branch("slow_mixed").element.g_max == 0.0
    assert c.branch("slow_mixed").element.g_max == 1.15
    net = set_parameter(build_hco(), "nodes.A.branches.slow_mixed.g_max", 0.5)
    assert net.nodes[0].branch("slow_mixed").element.g_max == 0.5
    assert net.nodes[1].branch("slow_mixed").element.g_max == 1.15
    assert get_parameter(net, "synapses.0.g") == 0.3
    with pytest.raises(KeyError):
        set_parameter(c, "nonexistent", 1.0)


def test_compiled_state_names():
    one = compile_network(build_fhn())
    assert one.node_names == ["fhn"] and one.state_names == ["I_L"]
    net = compile_network(build_hco())
    assert "A.fast_mixed.m" in net.state_names
    assert "syn0.A->B" in net.state_names and "syn1.B->A" in net.state_names


def test_state_init_is_rest():
    cn = compile_network(build_burster())
    s = cn.state_init(np.array([0.0]))
    np.testing.assert_allclose(s, 1 / (1 + np.exp(-4.3 * (0.0 - cn.states["s_p2"]))))


def test_decompose_reconstructs_controller():
    cell = build_burster()
    P, mixed = decompose(cell)
    assert (P.C, P.g_leak, P.V0) == (cell.C, cell.g_leak, cell.v0)
    v = -1.0 + 0.8 * np.sin(np.linspace(0, 20, 400))
    total = sum(b.element.evaluate(v, 0.05, cell.v0) for b in cell.branches)
    np.testing.assert_allclose(mixed.evaluate(v, 0.05, cell.v0), total, atol=1e-12)


def test_decompose_static_parts_are_monotone():
    _, mixed = decompose(build_fhn())
    x = np.linspace(-3, 3, 601)
    for part in (mixed.positive.terms[0], mixed.negative):
        assert np.all(np.diff(part.evaluate(x, 1.0)) >= 0)


def test_as_network_wraps_one_port():
    c = build_fhn()
    assert as_network(c).nodes == (c,)
