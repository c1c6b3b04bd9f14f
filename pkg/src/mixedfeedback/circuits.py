"""Circuit descriptions: conductance branches, one-ports and networks.

Sign convention: branch currents are positive outward, the external current
is positive inward, so every node obeys

    C dV/dt = I_ext - g_leak (V - V_leak) - sum(branch currents) - coupling

Builders return immutable descriptions; simulation state lives in
``solvers``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import _kernel as K
from .operators import (
    Cubic, CubicMinusLinear, Linear, LTIFirstOrder, MixedOperator, Operator,
    PiecewiseLinear, Saturation, Sigmoid, StaticFunction, Stepper, Sum, max_negative_slope,
    negative_conductance_range, operator_from_dict)


class ParameterError(ValueError):
    pass


def _logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class Gate:
    """First-order gating variable ``tau(V) dm/dt = m_inf(V) - m``.

    ``tau(V) = tau + tau_amp / cosh(tau_slope (V - tau_center))``; the default
    ``tau_amp = 0`` gives a constant time constant.
    """

    steady_state: Sigmoid
    tau: float
    exponent: int = 1
    sign: str = "activation"
    tau_amp: float = 0.0
    tau_slope: float = 1.0
    tau_center: float = 0.0

    def __post_init__(self):
        if not self.tau > 0 or self.tau_amp < 0:
            raise ParameterError("gate time constants must be positive")
        if int(self.exponent) != self.exponent or self.exponent < 1:
            raise ParameterError("gate exponent must be a positive integer")
        if self.sign not in ("activation", "inactivation"):
            raise ParameterError(f"unknown gate sign {self.sign!r}")
        slope = self.steady_state.slope
        if (self.sign == "activation") != (slope > 0):
            raise ParameterError(f"{self.sign} gate needs a "
                                 f"{'increasing' if self.sign == 'activation' else 'decreasing'}"
                                 " steady state")

    @classmethod
    def activation(cls, slope, center, tau, exponent=1):
        return cls(Sigmoid(abs(slope), center), tau, exponent, "activation")

    @classmethod
    def inactivation(cls, slope, center, tau, exponent=1):
        return cls(Sigmoid(-abs(slope), center), tau, exponent, "inactivation")

    def m_inf(self, v):
        return self.steady_state(v)

    def tau_of(self, v):
        if self.tau_amp == 0.0:
            return self.tau * np.ones_like(np.asarray(v, dtype=float))
        return self.tau + self.tau_amp / np.cosh(self.tau_slope * (np.asarray(v) - self.tau_center))

    def trajectory(self, v, dt, m0):
        target = self.m_inf(v)
        if self.tau_amp == 0.0:
            a = math.exp(-dt / self.tau)
            return lfilter([1.0 - a], [1.0, -a], target, zi=[a * m0])[0]
        a = np.exp(-dt / self.tau_of(v))
        m = np.empty(len(v))
        prev = m0
        for n in range(len(v)):
            prev = target[n] + (prev - target[n]) * a[n]
            m[n] = prev
        return m

    def to_dict(self):
        d = {"slope": self.steady_state.slope, "center": self.steady_state.center,
             "tau": self.tau, "exponent": self.exponent, "sign": self.sign}
        if self.tau_amp:
            d.update(tau_amp=self.tau_amp, tau_slope=self.tau_slope,
                     tau_center=self.tau_center)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        ss = Sigmoid(d.pop("slope"), d.pop("center"))
        return cls(ss, **d)


class StaticReduction(StaticFunction):
    """Steady-state I-V curve of a gated branch: gates frozen at ``m_inf(V)``."""

    kind = "static_reduction"

    def __init__(self, branch):
        self.branch = branch

    def __call__(self, x):
        b = self.branch
        x = np.asarray(x, dtype=float)
        prod = b.g_max * np.ones_like(x)
        for gt in b.gates:
            prod = prod * gt.m_inf(x) ** gt.exponent
        return prod * (x - b.reversal)

    def derivative(self, x):
        b = self.branch
        x = np.asarray(x, dtype=float)
        ms = [gt.m_inf(x) for gt in b.gates]
        dms = [gt.steady_state.derivative(x) for gt in b.gates]
        prod = b.g_max * np.ones_like(x)
        for gt, m in zip(b.gates, ms):
            prod = prod * m ** gt.exponent
        dprod = np.zeros_like(x)
        for i, gt in enumerate(b.gates):
            term = b.g_max * gt.exponent * ms[i] ** (gt.exponent - 1) * dms[i]
            for j, gj in enumerate(b.gates):
                if j != i:
                    term = term * ms[j] ** gj.exponent
            dprod = dprod + term
        return prod + dprod * (x - b.reversal)


@dataclass(frozen=True)
class ConductanceBranch(Operator):
    """Gated current source ``I = g_max * prod(m_i ** p_i) * (V - reversal)``."""

    g_max: float
    reversal: float
    gates: tuple = ()
    kind = "conductance"

    def __post_init__(self):
        if self.g_max < 0:
            raise ParameterError("maximal conductance must be nonnegative")
        object.__setattr__(self, "gates", tuple(self.gates))

    def rest_gates(self, v_rest):
        return [float(g.m_inf(v_rest)) for g in self.gates]

    def gate_trajectories(self, v, dt, v_rest=0.0, m0=None):
        m0 = self.rest_gates(v_rest) if m0 is None else m0
        return [g.trajectory(np.asarray(v, dtype=float), dt, m) for g, m in zip(self.gates, m0)]

    def driving_term(self, v, dt, v_rest=0.0, m0=None):
        """``prod(m_i ** p_i) * (V - reversal)``: the current per unit conductance."""
        v = np.asarray(v, dtype=float)
        prod = np.ones_like(v)
        for gt, m in zip(self.gates, self.gate_trajectories(v, dt, v_rest, m0)):
            prod = prod * m ** gt.exponent
        return prod * (v - self.reversal)

    def evaluate(self, v, dt, v_rest=0.0):
        return self.g_max * self.driving_term(v, dt, v_rest)

    def stepper(self, dt, v_rest=0.0):
        return _GatedStepper(self, dt, self.rest_gates(v_rest))

    def static_reduction(self) -> StaticReduction:
        return StaticReduction(self)

    def time_constants(self):
        return [g.tau for g in self.gates]

    def to_dict(self):
        return {"type": self.kind, "g_max": self.g_max, "reversal": self.reversal,
                "gates": [g.to_dict() for g in self.gates]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["g_max"], d["reversal"], tuple(Gate.from_dict(g) for g in d["gates"]))


class _GatedStepper(Stepper):
    def __init__(self, branch, dt, m0):
        self.b = branch
        self.dt = dt
        self.m = list(m0)

    def _gates(self, v):
        ms, dms = [], []
        for gt, m in zip(self.b.gates, self.m):
            a = math.exp(-self.dt / float(gt.tau_of(v)))
            target = float(gt.m_inf(v))
            ms.append(target + (m - target) * a)
            dms.append((1.0 - a) * float(gt.steady_state.derivative(v)))
        return ms, dms

    def output(self, v):
        b = self.b
        ms, dms = self._gates(v)
        prod = b.g_max
        for gt, m in zip(b.gates, ms):
            prod *= m ** gt.exponent
        dprod = 0.0
        for i, gt in enumerate(b.gates):
            term = b.g_max * gt.exponent * ms[i] ** (gt.exponent - 1) * dms[i]
            for j, gj in enumerate(b.gates):
                if j != i:
                    term *= ms[j] ** gj.exponent
            dprod += term
        return prod * (v - b.reversal), prod + dprod * (v - b.reversal)

    def commit(self, v):
        self.m = self._gates(v)[0]


def static_reduction(element) -> StaticFunction:
    if isinstance(element, ConductanceBranch):
        return element.static_reduction()
    if isinstance(element, LTIFirstOrder):
        return Linear(element.gain + element.feedthrough)
    if isinstance(element, StaticFunction):
        return element
    raise TypeError(f"no static reduction for {type(element).__name__}")


@dataclass(frozen=True)
class Branch:
    """A named controller element with its conductance role."""

    name: str
    element: Operator
    role: str = "positive"

    def __post_init__(self):
        if self.role not in ("positive", "negative"):
            raise ParameterError(f"branch role must be positive or negative, got {self.role!r}")

    def negative_range(self):
        return negative_conductance_range(static_reduction(self.element))

    def to_dict(self):
        return {"name": self.name, "role": self.role, "element": self.element.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], operator_from_dict(d["element"]), d.get("role", "positive"))


@dataclass(frozen=True)
class OnePortCircuit:
    """Capacitor and leak (the passive plant) in parallel with controller branches."""

    C: float
    g_leak: float = 0.0
    V_leak: float = 0.0
    branches: tuple = ()
    V_init: float | None = None
    name: str = "cell"

    def __post_init__(self):
        if not self.C > 0:
            raise ParameterError("capacitance must be positive")
        if self.g_leak < 0:
            raise ParameterError("leak conductance must be nonnegative")
        object.__setattr__(self, "branches", tuple(self.branches))
        names = [b.name for b in self.branches]
        if len(set(names)) != len(names):
            raise ParameterError(f"duplicate branch names in {names}")
        for b in self.branches:
            if b.role == "negative" and self._is_active(b) and not b.negative_range():
                raise ParameterError(f"branch {b.name!r} is tagged negative but has no "
                                     "negative conductance range")

    @staticmethod
    def _is_active(b):
        return not (isinstance(b.element, ConductanceBranch) and b.element.g_max == 0)

    @property
    def v0(self) -> float:
        return self.V_leak if self.V_init is None else self.V_init

    def branch(self, name) -> Branch:
        for b in self.branches:
            if b.name == name:
                return b
        raise KeyError(name)

    def without_negative(self) -> "OnePortCircuit":
        return dataclasses.replace(
            self, branches=tuple(b for b in self.branches if b.role != "negative"))

    def static_iv(self, v):
        """Total steady-state outward current, leak included."""
        v = np.asarray(v, dtype=float)
        out = self.g_leak * (v - self.V_leak)
        for b in self.branches:
            out = out + static_reduction(b.element)(v)
        return out

    def to_dict(self):
        return {"C": self.C, "g_leak": self.g_leak, "V_leak": self.V_leak,
                "V_init": self.V_init, "name": self.name,
                "branches": [b.to_dict() for b in self.branches]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["C"], d.get("g_leak", 0.0), d.get("V_leak", 0.0),
                   tuple(Branch.from_dict(b) for b in d.get("branches", ())),
                   d.get("V_init"), d.get("name", "cell"))


@dataclass(frozen=True)
class GapJunction:
    i: int
    j: int
    g: float

    def __post_init__(self):
        if self.g < 0:
            raise ParameterError("gap junction conductance must be nonnegative")


@dataclass(frozen=True)
class Synapse:
    """Graded synapse: ``g s (V_post - V_syn)``, ``tau ds/dt = s_inf(V_pre) - s``."""

    pre: int
    post: int
    g: float
    V_syn: float
    activation: Sigmoid = Sigmoid(4.0, -1.0)
    tau: float = 5.0

    def __post_init__(self):
        if self.g < 0 or not self.tau > 0:
            raise ParameterError("synapse needs g >= 0 and tau > 0")


@dataclass(frozen=True)
class NetworkCircuit:
    nodes: tuple
    gap_junctions: tuple = ()
    synapses: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "gap_junctions", tuple(self.gap_junctions))
        object.__setattr__(self, "synapses", tuple(self.synapses))
        n = len(self.nodes)
        if n < 1:
            raise ParameterError("network needs at least one node")
        for gj in self.gap_junctions:
            if not (0 <= gj.i < n and 0 <= gj.j < n) or gj.i == gj.j:
                raise IndexError(f"gap junction ({gj.i}, {gj.j}) references a missing node")
        for s in self.synapses:
            if not (0 <= s.pre < n and 0 <= s.post < n):
                raise IndexError(f"synapse ({s.pre} -> {s.post}) references a missing node")
        names = [c.name for c in self.nodes]
        if len(set(names)) != n:
            raise ParameterError(f"node names must be unique, got {names}")

    def to_dict(self):
        return {
            "nodes": [c.to_dict() for c in self.nodes],
            "gap_junctions": [dataclasses.asdict(g) for g in self.gap_junctions],
            "synapses": [{"pre": s.pre, "post": s.post, "g": s.g, "V_syn": s.V_syn,
                          "slope": s.activation.slope, "threshold": s.activation.center,
                          "tau": s.tau} for s in self.synapses],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            tuple(OnePortCircuit.from_dict(c) for c in d["nodes"]),
            tuple(GapJunction(**g) for g in d.get("gap_junctions", ())),
            tuple(Synapse(s["pre"], s["post"], s["g"], s["V_syn"],
                          Sigmoid(s["slope"], s["threshold"]), s["tau"])
                  for s in d.get("synapses", ())))


def as_network(circuit) -> NetworkCircuit:
    if isinstance(circuit, NetworkCircuit):
        return circuit
    return NetworkCircuit((circuit,))


def circuit_to_dict(circuit) -> dict:
    if isinstance(circuit, NetworkCircuit):
        return {"network": circuit.to_dict()}
    return {"one_port": circuit.to_dict()}


def circuit_from_dict(d):
    if "network" in d:
        return NetworkCircuit.from_dict(d["network"])
    return OnePortCircuit.from_dict(d["one_port"])


# ---------------------------------------------------------------- builders


def build_fhn(C=1.0, L=100.0, R=1.0, k=1.0, V_init=0.0) -> OnePortCircuit:
    """FitzHugh-Nagumo circuit.

    Capacitor ``C`` in parallel with the cubic resistor ``V^3/3 - k V`` and
    the RL branch ``L dI_L/dt = -I_L + R V``.
    """
    if not (C > 0 and L > 0 and R > 0):
        raise ParameterError("FitzHugh-Nagumo needs C, L, R > 0")
    return OnePortCircuit(
        C=C, g_leak=0.0, V_leak=0.0, V_init=V_init, name="fhn",
        branches=(Branch("cubic", CubicMinusLinear(1.0 / 3.0, k), "negative" if k > 0 else "positive"),
                  Branch("I_L", LTIFirstOrder(gain=R, tau=L), "positive")))


def fhn_vector_field(circuit: OnePortCircuit, V, I_L, I_ext=0.0):
    """(dV/dt, dI_L/dt) of a circuit made by :func:`build_fhn`."""
    cubic = circuit.branch("cubic").element
    rl = circuit.branch("I_L").element
    dV = (I_ext - cubic(V) - I_L) / circuit.C
    dI = (-I_L + rl.gain * V) / rl.tau
    return dV, dI


@dataclass(frozen=True)
class BursterParams:
    """Four-branch burster in normalized units (version 1 calibration).

    The fast and slow mixed branches are inward currents (reversal above the
    operating range) with activation gates; the two positive branches are
    outward currents.  Bursting window for constant input: roughly
    ``I_ext`` in [-1.7, -1.4]; ``I_burst`` sits inside it.
    """

    version: int = 1
    C: float = 1.0
    g_leak: float = 1.0
    V_leak: float = 0.0
    E_inward: float = 3.0
    E_outward: float = -3.0
    slope: float = 4.3
    g_fast: float = 1.6
    c_fast: float = 0.0
    tau_fast: float = 0.1
    g_slow_pos: float = 2.4
    c_slow_pos: float = 0.0
    tau_slow: float = 5.0
    g_slow_mixed: float = 1.15
    c_slow_mixed: float = -0.88
    g_ultraslow: float = 1.5
    c_ultraslow: float = -0.8
    tau_ultraslow: float = 100.0
    V_init: float = -1.0
    I_burst: float = -1.5


def build_burster(params: BursterParams | None = None, name="burster", **overrides) -> OnePortCircuit:
    """Leak plus fast mixed, slow positive, slow mixed and ultraslow positive branches."""
    p = dataclasses.replace(params or BursterParams(), **overrides)
    if not (p.tau_fast < p.tau_slow < p.tau_ultraslow):
        raise ParameterError("burster timescales must satisfy tau_fast < tau_slow < tau_ultraslow")

    def branch(name, g, E, c, tau, role):
        return Branch(name, ConductanceBranch(g, E, (Gate.activation(p.slope, c, tau),)), role)

    return OnePortCircuit(
        C=p.C, g_leak=p.g_leak, V_leak=p.V_leak, V_init=p.V_init, name=name,
        branches=(
            branch("fast_mixed", p.g_fast, p.E_inward, p.c_fast, p.tau_fast, "negative"),
            branch("slow_positive", p.g_slow_pos, p.E_outward, p.c_slow_pos, p.tau_slow, "positive"),
            branch("slow_mixed", p.g_slow_mixed, p.E_inward, p.c_slow_mixed, p.tau_slow, "negative"),
            branch("ultraslow_positive", p.g_ultraslow, p.E_outward, p.c_ultraslow,
                   p.tau_ultraslow, "positive"),
        ))


def build_spiker(params: BursterParams | None = None, name="spiker", **overrides) -> OnePortCircuit:
    """Fast mixed plus slow positive branch only: a single-threshold spiking one-port."""
    full = build_burster(params, name=name, **overrides)
    keep = ("fast_mixed", "slow_positive")
    return dataclasses.replace(full, branches=tuple(b for b in full.branches if b.name in keep))


def lowest_rest_potential(cell: OnePortCircuit, I_ext=0.0, domain=(-10.0, 10.0)) -> float:
    v = np.linspace(domain[0], domain[1], 40001)
    f = cell.static_iv(v) - I_ext
    idx = np.where(np.sign(f[:-1]) != np.sign(f[1:]))[0]
    if len(idx) == 0:
        raise ParameterError("no equilibrium in domain")
    i = idx[0]
    return float(v[i] - f[i] * (v[i + 1] - v[i]) / (f[i + 1] - f[i]))


@dataclass(frozen=True)
class HCOParams:
    g_syn: float = 0.3
    V_syn: float = -3.0
    tau_syn: float = 5.0
    threshold: float = -1.0
    slope: float = 4.0
    drive: float = -1.3
    V_init_a: float = -1.0
    V_init_b: float = -1.8


def build_hco(burster_a: OnePortCircuit | None = None, burster_b: OnePortCircuit | None = None,
              g_syn=None, V_syn=None, tau_syn=None, params: HCOParams | None = None) -> NetworkCircuit:
    """Two bursters coupled by mutual inhibitory graded synapses.

    Node initial voltages differ by default so the symmetric network can
    leave its synchronous solution.
    """
    p = params or HCOParams()
    g_syn = p.g_syn if g_syn is None else g_syn
    V_syn = p.V_syn if V_syn is None else V_syn
    tau_syn = p.tau_syn if tau_syn is None else tau_syn
    a = burster_a or build_burster(name="A", V_init=p.V_init_a)
    b = burster_b or build_burster(name="B", V_init=p.V_init_b)
    if a.name == b.name:
        b = dataclasses.replace(b, name=b.name + "_2")
    if g_syn < 0:
        raise ParameterError("synaptic conductance must be nonnegative")
    for cell in (a, b):
        if V_syn >= lowest_rest_potential(cell):
            raise ParameterError("inhibitory synapses need V_syn below the resting potentials")
    act = Sigmoid(p.slope, p.threshold)
    return NetworkCircuit(
        nodes=(a, b),
        synapses=(Synapse(0, 1, g_syn, V_syn, act, tau_syn),
                  Synapse(1, 0, g_syn, V_syn, act, tau_syn)))


def build_rc_network(n: int, C=1.0, g_leak=1.0, V_leak=0.0, gap_junctions=()) -> NetworkCircuit:
    """Passive network: ``n`` leaky capacitors joined by resistive wires.

    ``C``, ``g_leak`` and ``V_leak`` may be scalars or length-``n`` sequences;
    ``gap_junctions`` holds ``(i, j, g)`` triples.
    """
    if n < 1:
        raise ParameterError("need at least one node")
    Cs, gs, Es = (np.broadcast_to(np.asarray(x, dtype=float), (n,)) for x in (C, g_leak, V_leak))
    nodes = tuple(OnePortCircuit(float(Cs[i]), float(gs[i]), float(Es[i]), name=f"n{i}")
                  for i in range(n))
    gjs = tuple(g if isinstance(g, GapJunction) else GapJunction(int(g[0]), int(g[1]), float(g[2]))
                for g in gap_junctions)
    return NetworkCircuit(nodes, gjs)


# -------------------------------------------------------------- parameters


def _resolve_child(obj, key):
    if isinstance(obj, tuple):
        for idx, item in enumerate(obj):
            if getattr(item, "name", None) == key:
                return idx
        return int(key)
    return key


def get_parameter(circuit, path: str):
    obj = circuit
    for key in path.split("."):
        if isinstance(obj, Branch) and not hasattr(obj, key):
            obj = obj.element
        k = _resolve_child(obj, key)
        obj = obj[k] if isinstance(obj, tuple) else getattr(obj, k)
    return obj


def set_parameter(circuit, path: str, value):
    """Copy of ``circuit`` with the dotted ``path`` replaced by ``value``.

    Tuple elements are addressed by index or by ``name``; branch parameters
    fall through to the branch element, e.g. ``nodes.A.branches.slow_mixed.g_max``.
    """
    keys = path.split(".")

    def rec(obj, keys):
        if not keys:
            return value
        key = keys[0]
        if isinstance(obj, tuple):
            idx = _resolve_child(obj, key)
            items = list(obj)
            items[idx] = rec(items[idx], keys[1:])
            return tuple(items)
        if isinstance(obj, Branch) and not hasattr(obj, key):
            return dataclasses.replace(obj, element=rec(obj.element, keys))
        if not hasattr(obj, key):
            raise KeyError(f"{type(obj).__name__} has no parameter {key!r} (path {path!r})")
        return dataclasses.replace(obj, **{key: rec(getattr(obj, key), keys[1:])})

    return rec(circuit, keys)


# ------------------------------------------------------------- compilation

_STATIC_CODES = {Linear: K.F_LINEAR, Cubic: K.F_CUBIC, CubicMinusLinear: K.F_CUBIC_MINUS_LINEAR,
                 Saturation: K.F_SATURATION, Sigmoid: K.F_SIGMOID, PiecewiseLinear: K.F_PWL}


def _static_params(f):
    if isinstance(f, Linear):
        return [f.slope]
    if isinstance(f, Cubic):
        return [f.c]
    if isinstance(f, CubicMinusLinear):
        return [f.c, f.k]
    if isinstance(f, Saturation):
        return [f.g]
    if isinstance(f, Sigmoid):
        return [f.slope, f.center]
    if isinstance(f, PiecewiseLinear):
        return [p[0] for p in f.points] + [p[1] for p in f.points]
    raise TypeError(f"static function {type(f).__name__} cannot be compiled")


@dataclass
class CompiledNetwork:
    node_names: list
    state_names: list
    node_C: np.ndarray
    node_g: np.ndarray
    node_E: np.ndarray
    V_init: np.ndarray
    S_init: np.ndarray
    states: dict = field(repr=False)
    terms: dict = field(repr=False)

    @property
    def n_nodes(self):
        return len(self.node_names)

    def state_init(self, V):
        """States at rest for the node voltages ``V`` held forever."""
        s = np.empty(len(self.state_names))
        st = self.states
        for j in range(s.size):
            v = V[st["s_node"][j]]
            if st["s_kind"][j] == K.TARGET_SIGMOID:
                s[j] = _logistic(st["s_p1"][j] * (v - st["s_p2"][j]))
            else:
                s[j] = st["s_p1"][j] * v
        return s

    def kernel_args(self):
        st, tm = self.states, self.terms
        return dict(
            node_C=self.node_C, node_g=self.node_g, node_E=self.node_E,
            s_node=st["s_node"], s_kind=st["s_kind"], s_p1=st["s_p1"], s_p2=st["s_p2"],
            s_tau=st["s_tau"], s_tamp=st["s_tamp"], s_tslope=st["s_tslope"],
            s_tcenter=st["s_tcenter"], s_clamp=st["s_clamp"],
            t_kind=tm["t_kind"], t_node=tm["t_node"], t_a=tm["t_a"], t_g=tm["t_g"],
            t_E=tm["t_E"], t_start=tm["t_start"], t_count=tm["t_count"],
            g_idx=tm["g_idx"], g_exp=tm["g_exp"], fp=tm["fp"])


def compile_network(circuit) -> CompiledNetwork:
    net = as_network(circuit)
    single = len(net.nodes) == 1
    prefix = (lambda c: "") if single else (lambda c: c.name + ".")
    S = {k: [] for k in ("s_node", "s_kind", "s_p1", "s_p2", "s_tau", "s_tamp", "s_tslope",
                         "s_tcenter", "s_clamp")}
    T = {k: [] for k in ("t_kind", "t_node", "t_a", "t_g", "t_E", "t_start", "t_count")}
    g_idx, g_exp, fp, names = [], [], [], []

    def add_state(node, kind, p1, p2, tau, clamp, name, tamp=0.0, tslope=1.0, tcenter=0.0):
        for key, val in zip(S, (node, kind, p1, p2, tau, tamp, tslope, tcenter, clamp)):
            S[key].append(val)
        names.append(name)
        return len(names) - 1

    def add_term(kind, node, a=0, g=0.0, E=0.0, start=0, count=0):
        for key, val in zip(T, (kind, node, a, g, E, start, count)):
            T[key].append(val)

    for i, cell in enumerate(net.nodes):
        for br in cell.branches:
            el = br.element
            label = prefix(cell) + br.name
            if isinstance(el, ConductanceBranch):
                start = len(g_idx)
                for q, gt in enumerate(el.gates):
                    j = add_state(i, K.TARGET_SIGMOID, gt.steady_state.slope,
                                  gt.steady_state.center, gt.tau, True,
                                  f"{label}.m{q}" if len(el.gates) > 1 else f"{label}.m",
                                  gt.tau_amp, gt.tau_slope, gt.tau_center)
                    g_idx.append(j)
                    g_exp.append(float(gt.exponent))
                add_term(K.TERM_CONDUCTANCE, i, 0, el.g_max, el.reversal, start, len(el.gates))
            elif isinstance(el, LTIFirstOrder):
                j = add_state(i, K.TARGET_LINEAR, el.gain, 0.0, el.tau, False, label)
                add_term(K.TERM_LTI, i, j, el.feedthrough)
            elif type(el) in _STATIC_CODES:
                params = _static_params(el)
                add_term(K.TERM_STATIC, i, _STATIC_CODES[type(el)], 0.0, 0.0, len(fp), len(params))
                fp.extend(params)
            else:
                raise TypeError(f"branch {br.name!r}: cannot simulate {type(el).__name__}")
    for q, syn in enumerate(net.synapses):
        post = net.nodes[syn.post]
        j = add_state(syn.pre, K.TARGET_SIGMOID, syn.activation.slope, syn.activation.center,
                      syn.tau, True, f"syn{q}.{net.nodes[syn.pre].name}->{post.name}")
        add_term(K.TERM_SYNAPSE, syn.post, j, syn.g, syn.V_syn)
    for gj in net.gap_junctions:
        add_term(K.TERM_GAP, gj.i, gj.j, gj.g)
        add_term(K.TERM_GAP, gj.j, gj.i, gj.g)

    ints = {"s_node", "s_kind", "t_kind", "t_node", "t_a", "t_start", "t_count"}
    states = {k: np.array(v, dtype=np.int64 if k in ints else
                          (np.bool_ if k == "s_clamp" else float)) for k, v in S.items()}
    terms = {k: np.array(v, dtype=np.int64 if k in ints else float) for k, v in T.items()}
    terms["g_idx"] = np.array(g_idx, dtype=np.int64)
    terms["g_exp"] = np.array(g_exp, dtype=float)
    terms["fp"] = np.array(fp if fp else [0.0], dtype=float)
    V_init = np.array([c.v0 for c in net.nodes], dtype=float)
    cn = CompiledNetwork(
        node_names=[c.name for c in net.nodes], state_names=names,
        node_C=np.array([c.C for c in net.nodes], dtype=float),
        node_g=np.array([c.g_leak for c in net.nodes], dtype=float),
        node_E=np.array([c.V_leak for c in net.nodes], dtype=float),
        V_init=V_init, S_init=np.zeros(len(names)), states=states, terms=terms)
    cn.S_init = cn.state_init(V_init)
    return cn


# ---------------------------------------------------- mixed decomposition


@dataclass(frozen=True)
class RCPlant:
    """Passive plant ``C dV/dt = I - g_leak (V - V_leak)`` with pinned ``V(0)``."""

    C: float
    g_leak: float = 0.0
    V_leak: float = 0.0
    V0: float = 0.0


def _split(element):
    if isinstance(element, StaticFunction):
        return element.split()
    if isinstance(element, LTIFirstOrder):
        if element.gain >= 0 and element.feedthrough >= 0:
            return element, None
        raise ParameterError("cannot split a non-positive first-order branch")
    if isinstance(element, ConductanceBranch):
        red = element.static_reduction()
        if not negative_conductance_range(red):
            return element, None
        kmax = max_negative_slope(red)
        return Sum((element, Linear(kmax))), Linear(kmax)
    raise TypeError(type(element).__name__)


def decompose(cell: OnePortCircuit):
    """Plant and mixed controller ``(C1, C2)`` of a one-port.

    Positive branches go to ``C1``.  A negative branch is split into monotone
    parts; gated branches use the shift by their largest negative slope.
    """
    pos, neg = [], []
    for b in cell.branches:
        p, n = _split(b.element)
        if p is not None:
            pos.append(p)
        if n is not None:
            neg.append(n)
    C1 = Sum(tuple(pos)) if pos else None
    C2 = Sum(tuple(neg)) if neg else None
    return RCPlant(cell.C, cell.g_leak, cell.V_leak, cell.v0), MixedOperator(C1, C2)
