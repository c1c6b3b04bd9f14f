"""Trajectory engines: fixed-step simulation and the difference-of-monotone iteration.

Both engines share one discretization.  For the passive RC plant the inverse
map is the forward difference

    P^-1(V)_n = C_eff (V_{n+1} - V_n) / dt + g_leak (V_n - V_leak),  n < N - 1

with ``C_eff = g_leak dt / (1 - exp(-g_leak dt / C))``, the capacitance for
which the leak update of the simulator is exact (``C_eff = C`` at zero leak),
and the controller samples are those of the operator steppers, which use the
same exponential state update as the simulator kernel.  A closed-loop
trajectory produced by ``simulate`` is therefore an exact zero of
``feedback_residual`` up to rounding.
"""
from __future__ import annotations

import enum
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernel as K
from .circuits import RCPlant, compile_network
from .operators import (ConfigError, NonConvergenceError, Operator, StiffnessWarning,
                        resolvent)
from .signals import Signal, Unit, check_conformable, norm

log = logging.getLogger(__name__)


class Method(str, enum.Enum):
    SEMI_IMPLICIT_EULER = "semi_implicit_euler"
    RK4 = "rk4"


class BlowUpError(RuntimeError):
    def __init__(self, time, message=None):
        super().__init__(message or f"state diverged (|V| > {K.BLOWUP_LEVEL:g}) at t = {time:g}")
        self.time = time


@dataclass(frozen=True)
class NoiseConfig:
    """Additive current noise of intensity ``std`` (per square-root time unit)."""

    std: float
    seed: int = 0

    def __post_init__(self):
        if self.std < 0:
            raise ConfigError("noise std must be nonnegative")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    horizon: float = 100.0
    method: Method = Method.SEMI_IMPLICIT_EULER
    noise: NoiseConfig | None = None
    initial_state: dict | None = None

    def __post_init__(self):
        if not (self.dt > 0 and self.horizon > 0 and self.dt < self.horizon):
            raise ConfigError(f"need 0 < dt < horizon, got dt={self.dt}, horizon={self.horizon}")
        object.__setattr__(self, "method", Method(self.method))

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class DCSolveConfig:
    outer_tol: float = 1e-8
    inner_tol: float = 1e-10
    max_outer: int = 500
    damping: float = 0.5
    continuation_steps: int = 10
    require_convergence: bool = False

    def __post_init__(self):
        if not (self.outer_tol > 0 and self.inner_tol > 0):
            raise ConfigError("tolerances must be positive")
        if self.max_outer < 1 or self.continuation_steps < 1:
            raise ConfigError("max_outer and continuation_steps must be >= 1")
        if not 0 < self.damping <= 1:
            raise ConfigError("damping must lie in (0, 1]")


@dataclass
class SolveReport:
    trajectory: dict
    residual_history: list = field(default_factory=list)
    converged: bool = True
    outer_iterations: int = 0
    diagnostics: dict = field(default_factory=dict)

    def __getitem__(self, name) -> Signal:
        return self.trajectory[name]

    @property
    def V(self) -> Signal:
        if "V" in self.trajectory:
            return self.trajectory["V"]
        return next(s for k, s in self.trajectory.items() if k.endswith(".V"))

    def to_csv(self) -> str:
        names = list(self.trajectory)
        first = self.trajectory[names[0]]
        cols = [first.times] + [self.trajectory[k].samples for k in names]
        buf = io.StringIO()
        buf.write(",".join(["t"] + names) + "\n")
        np.savetxt(buf, np.column_stack(cols), delimiter=",", fmt="%.17g")
        return buf.getvalue()

    def summary(self) -> dict:
        out = {"converged": self.converged, "outer_iterations": self.outer_iterations,
               "final_residual": self.residual_history[-1] if self.residual_history else ""}
        out.update(self.diagnostics)
        return out

    def summary_lines(self) -> str:
        return format_summary(self.summary())


def format_summary(record: dict) -> str:
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return f"{v:.12g}"
        return str(v)

    return "".join(f"{k}={fmt(v)}\n" for k, v in record.items())


# -------------------------------------------------------------- simulate


def _drive_matrix(I_ext, n_nodes, cfg: SimConfig):
    N = cfg.n_steps
    if isinstance(I_ext, Signal):
        I_ext = [I_ext] * n_nodes if n_nodes > 1 else [I_ext]
    if isinstance(I_ext, dict):
        raise TypeError("pass per-node inputs as a sequence in node order")
    if len(I_ext) != n_nodes:
        raise ConfigError(f"expected {n_nodes} input signals, got {len(I_ext)}")
    cols = []
    for s in I_ext:
        if len(s) != N or not math.isclose(s.dt, cfg.dt, rel_tol=1e-12):
            raise ConfigError(f"input {s.name!r} (len {len(s)}, dt {s.dt}) does not "
                              f"match the grid (len {N}, dt {cfg.dt})")
        cols.append(s.samples)
    return np.ascontiguousarray(np.column_stack(cols))


def _initial_state(cn, cfg: SimConfig):
    V = cn.V_init.copy()
    init = dict(cfg.initial_state or {})
    single = cn.n_nodes == 1
    for i, name in enumerate(cn.node_names):
        for key in ((["V"] if single else []) + [f"{name}.V"]):
            if key in init:
                V[i] = float(init.pop(key))
    S = cn.state_init(V)
    for j, name in enumerate(cn.state_names):
        if name in init:
            S[j] = float(init.pop(name))
    if init:
        raise ConfigError(f"unknown initial-state entries: {sorted(init)}")
    return V, S


def stiffness_flags(cn, dt):
    taus = [float(t) for t in cn.states["s_tau"]]
    plant = [c / g for c, g in zip(cn.node_C, cn.node_g) if g > 1e-300]
    fastest = min(taus + plant) if taus + plant else math.inf
    return {"fastest_time_constant": fastest, "stiff": bool(fastest < 2 * dt)}


def simulate(circuit, I_ext, cfg: SimConfig) -> SolveReport:
    """Integrate a one-port or network on the fixed grid of ``cfg``.

    ``I_ext`` is one Signal (shared by all nodes) or a sequence with one
    Signal per node.  Trajectory keys are ``V`` and the state names for a
    one-port, ``<node>.V`` and ``<node>.<state>`` for networks.
    """
    cn = compile_network(circuit)
    I = _drive_matrix(I_ext, cn.n_nodes, cfg)
    if cfg.noise is not None and cfg.noise.std > 0:
        rng = np.random.default_rng(cfg.noise.seed)
        I = I + cfg.noise.std / math.sqrt(cfg.dt) * rng.standard_normal(I.shape)
    V0, S0 = _initial_state(cn, cfg)
    flags = stiffness_flags(cn, cfg.dt)
    if flags["stiff"] and cfg.method == Method.RK4:
        warnings.warn(f"time constant {flags['fastest_time_constant']:g} < 2*dt", StiffnessWarning,
                      stacklevel=2)
    method = 0 if cfg.method == Method.SEMI_IMPLICIT_EULER else 1
    Vout, Sout, status, idx = K.run(I, cfg.dt, method, V0, S0, **cn.kernel_args())
    if status == K.BLOWUP:
        raise BlowUpError(idx * cfg.dt)
    return SolveReport(_trajectory(cn, Vout, Sout, cfg.dt), [], True, 0,
                       {"method": cfg.method.value, **flags})


def _trajectory(cn, Vout, Sout, dt):
    single = cn.n_nodes == 1
    traj = {}
    for i, name in enumerate(cn.node_names):
        key = "V" if single else f"{name}.V"
        traj[key] = Signal(Vout[:, i], dt, Unit.VOLT, key)
    for j, name in enumerate(cn.state_names):
        unit = Unit.AMPERE if cn.states["s_kind"][j] == K.TARGET_LINEAR else Unit.DIMENSIONLESS
        traj[name] = Signal(Sout[:, j], dt, unit, name)
    return traj


def kirchhoff_residual(circuit, report: SolveReport, I_ext) -> np.ndarray:
    """``C_eff dV/dt - (I_ext - sum of outward currents)`` at every accepted step.

    Only meaningful for noise-free semi-implicit runs, where it vanishes up
    to rounding.  ``C_eff`` differs from ``C`` by ``O(g_leak dt)``.
    """
    cn = compile_network(circuit)
    N = len(report.V)
    cfg_dt = report.V.dt
    I = _drive_matrix(I_ext, cn.n_nodes, SimConfig(cfg_dt, N * cfg_dt))
    single = cn.n_nodes == 1
    V = np.column_stack([report.trajectory["V" if single else f"{n}.V"].samples
                         for n in cn.node_names])
    S = (np.column_stack([report.trajectory[n].samples for n in cn.state_names])
         if cn.state_names else np.zeros((N, 0)))
    a = cn.kernel_args()
    out = K.currents_along(V, np.ascontiguousarray(S), a["node_g"], a["node_E"], a["t_kind"],
                           a["t_node"], a["t_a"], a["t_g"], a["t_E"], a["t_start"],
                           a["t_count"], a["g_idx"], a["g_exp"], a["fp"])
    c_eff = np.array([effective_capacitance(c, g, cfg_dt) for c, g in zip(cn.node_C, cn.node_g)])
    return c_eff * np.diff(V, axis=0) / cfg_dt - (I[:-1] - out[:-1])


def driving_point(circuit, node: int = 0, dt_cfg: SimConfig | None = None):
    """Current-to-voltage map at one node, all other inputs held at zero.

    Sample ``n`` of the output is the voltage at the end of the step driven
    by ``I_n``.  With that alignment the discrete map of a passive RC
    circuit is exactly incrementally passive for the Riemann-sum inner
    product; pairing ``I_n`` with ``V_n`` instead loses ``dt/(2C) |dI|^2``.
    Every call starts from the same initial state.
    """
    cn = compile_network(circuit)
    key = "V" if cn.n_nodes == 1 else f"{cn.node_names[node]}.V"

    def op(I: Signal) -> Signal:
        n = len(I) + 1
        sim = dt_cfg or SimConfig(I.dt, n * I.dt)
        drive = Signal(np.append(I.samples, I.samples[-1]), I.dt, Unit.AMPERE)
        zero = drive.with_samples(np.zeros(n))
        drives = [drive if k == node else zero for k in range(cn.n_nodes)]
        V = simulate(circuit, drives, sim)[key]
        return Signal(V.samples[1:], I.dt, Unit.VOLT, "V")

    return op


# ------------------------------------------------------ splitting engine


def effective_capacitance(C, g_leak, dt):
    return dt / K.step_factor(dt, C, g_leak)


def plant_inverse(P: RCPlant, V: Signal) -> np.ndarray:
    v = V.samples
    out = np.zeros(len(v))
    out[:-1] = effective_capacitance(P.C, P.g_leak, V.dt) * np.diff(v) / V.dt + P.g_leak * (v[:-1] - P.V_leak)
    return out


def _apply(op, V: Signal, v_rest):
    if op is None:
        return np.zeros(len(V))
    return op.evaluate(V.samples, V.dt, v_rest)


def feedback_residual(P: RCPlant, C1, C2, I_star: Signal, V: Signal,
                      v_rest: float | None = None) -> Signal:
    """``P^-1(V) + C1(V) - I* - C2(V)``; the final sample carries no equation.

    Dynamic controller parts start at rest for ``v_rest`` (default: the
    plant's pinned initial voltage).
    """
    check_conformable(I_star, V)
    vr = P.V0 if v_rest is None else v_rest
    r = plant_inverse(P, V) + _apply(C1, V, vr) - I_star.samples - _apply(C2, V, vr)
    r[-1] = 0.0
    return Signal(r, V.dt, Unit.AMPERE, "residual")


@dataclass(frozen=True)
class PlantLoop(Operator):
    """The monotone part ``P^-1 + C1`` of a feedback relation, as a signal operator."""

    P: RCPlant
    C1: Operator | None
    v_rest: float | None = None
    kind = "plant_loop"

    @property
    def rest(self):
        return self.P.V0 if self.v_rest is None else self.v_rest

    def evaluate(self, v, dt, v_rest=None):
        sig = Signal(v, dt, Unit.VOLT)
        out = plant_inverse(self.P, sig) + _apply(self.C1, sig, self.rest)
        out[-1] = 0.0
        return out

    def time_constants(self):
        return [] if self.C1 is None else self.C1.time_constants()

    def _compiled(self):
        """Kernel form of the loop when every part of ``C1`` is a circuit element."""
        from .circuits import Branch, OnePortCircuit
        from .operators import Sum

        parts, stack = [], [] if self.C1 is None else [self.C1]
        while stack:
            op = stack.pop()
            if isinstance(op, Sum):
                stack.extend(reversed(op.terms))
            else:
                parts.append(op)
        if self.rest != self.P.V0:
            return None
        try:
            cell = OnePortCircuit(self.P.C, self.P.g_leak, self.P.V_leak,
                                  tuple(Branch(f"c{i}", op) for i, op in enumerate(parts)),
                                  V_init=self.P.V0)
            return compile_network(cell)
        except TypeError:
            return None

    def causal_solve(self, target: Signal) -> Signal:
        """Exact solution with ``V_0`` pinned: forward substitution in time.

        The equation at sample ``n`` determines ``V_{n+1}`` from ``V_n`` and
        the controller output at ``n``, so the solve is one causal sweep.
        """
        P, dt = self.P, target.dt
        t = target.samples
        fast = self._compiled()
        if fast is not None:
            cn = fast
            V0 = np.array([P.V0])
            Vout, _, status, idx = K.run(np.ascontiguousarray(t.reshape(-1, 1)), dt, 0, V0,
                                         cn.state_init(V0), **cn.kernel_args())
            if status == K.BLOWUP:
                raise BlowUpError(idx * dt)
            return Signal(Vout[:, 0], dt, Unit.VOLT, "V")
        v = np.empty(len(t))
        v[0] = P.V0
        st = None if self.C1 is None else self.C1.stepper(dt, self.rest)
        phi = K.step_factor(dt, P.C, P.g_leak)
        for n in range(len(t) - 1):
            c1 = 0.0
            if st is not None:
                c1 = st.output(v[n])[0]
                st.commit(v[n])
            v[n + 1] = v[n] + phi * (t[n] - P.g_leak * (v[n] - P.V_leak) - c1)
            if not abs(v[n + 1]) < K.BLOWUP_LEVEL:
                raise BlowUpError((n + 1) * dt)
        return Signal(v, dt, Unit.VOLT, "V")


def monotone_solve(op, target: Signal, inner_tol: float = 1e-10, max_iter: int = 200,
                   alpha0: float = 1.0) -> Signal:
    """Zero of ``op(x) - target`` for a monotone ``op``.

    A :class:`PlantLoop` is solved exactly by its causal sweep.  Other
    operators use the proximal-point iteration
    ``x <- (I + alpha op)^-1 (x + alpha target)`` with ``alpha`` doubling
    each sweep.
    """
    if isinstance(op, PlantLoop):
        x = op.causal_solve(target)
        diff = op.evaluate(x.samples, x.dt) - target.samples
        diff[-1] = 0.0
        r = norm(target.with_samples(diff))
        if r > inner_tol * max(1.0, norm(target)):
            raise NonConvergenceError(f"causal solve residual {r:g}", residual=r, history=[r])
        return x
    x = target.with_samples(np.zeros(len(target)), unit=Unit.VOLT)
    alpha = alpha0
    history = []
    for _ in range(max_iter):
        x = resolvent(op, alpha, x + alpha * target.samples, tol=inner_tol * 1e-3)
        r = norm(target.with_samples(op.evaluate(x.samples, x.dt) - target.samples))
        history.append(r)
        if r <= inner_tol:
            return x
        alpha *= 2.0
    raise NonConvergenceError(f"monotone_solve: residual {history[-1]:g} after {max_iter} "
                              "iterations", residual=history[-1], history=history)


def dc_solve(P: RCPlant, C1, C2, I_star: Signal, V_init: Signal | None = None,
             cfg: DCSolveConfig = DCSolveConfig()) -> SolveReport:
    """Difference-of-monotone iteration for ``P^-1(V) + C1(V) = I* + C2(V)``.

    Each outer step freezes ``C2`` at the current iterate, solves the
    monotone problem exactly and relaxes with ``cfg.damping``.  The stopping
    test is on the undamped map: stop when ``||T(V_i) - V_i|| <= outer_tol``
    and return ``T(V_i)``.
    """
    loop = PlantLoop(P, C1)
    N, dt = len(I_star), I_star.dt
    V = (V_init if V_init is not None else Signal(np.full(N, P.V0), dt, Unit.VOLT)).samples
    if len(V) != N:
        raise ConfigError("V_init is not conformable with I_star")
    rho = cfg.damping
    history = []
    V = np.array(V, dtype=float)
    if C2 is None:
        Vn = monotone_solve(loop, I_star, cfg.inner_tol)
        res = norm(feedback_residual(P, C1, C2, I_star, Vn))
        return SolveReport({"V": Vn}, [res], True, 1, {"stopping": "C2 absent"})
    Vn = None
    for i in range(1, cfg.max_outer + 1):
        c2 = C2.evaluate(V, dt, P.V0)
        Vn = monotone_solve(loop, I_star.with_samples(I_star.samples + c2),
                            cfg.inner_tol).samples
        gap = math.sqrt(np.dot(Vn - V, Vn - V) * dt)
        history.append(gap)
        if not math.isfinite(gap):
            break
        if gap <= cfg.outer_tol:
            out = Signal(Vn, dt, Unit.VOLT, "V")
            res = norm(feedback_residual(P, C1, C2, I_star, out))
            return SolveReport({"V": out}, history, True, i,
                               {"final_feedback_residual": res, "damping": rho})
        V = rho * Vn + (1.0 - rho) * V
    out = Signal(V if Vn is None else V, dt, Unit.VOLT, "V")
    rep = SolveReport({"V": out}, history, False, len(history), {"damping": rho})
    if cfg.require_convergence:
        raise NonConvergenceError(f"dc_solve stalled at gap {history[-1]:g}",
                                  residual=history[-1], history=history)
    return rep


def continuation_solve(P: RCPlant, C1, C2_at_k: Callable[[float], Operator | None],
                       I_star: Signal, k_target: float,
                       cfg: DCSolveConfig = DCSolveConfig(), V_init: Signal | None = None
                       ) -> SolveReport:
    """Solve at ``k = 0`` (monotone, global) and ramp ``k`` to ``k_target``.

    Each step warm-starts ``dc_solve`` from the previous solution.  On
    failure the report carries the last converged ``k`` and the failing one.
    """
    base = dc_solve(P, C1, C2_at_k(0.0), I_star, V_init, cfg)
    steps = [] if k_target == 0 else list(np.linspace(0.0, k_target, cfg.continuation_steps + 1)[1:])
    reports = [("0", base)]
    current, k_reached = base, 0.0
    total = base.outer_iterations
    for k in steps:
        rep = dc_solve(P, C1, C2_at_k(float(k)), I_star, current.V, cfg)
        total += rep.outer_iterations
        reports.append((f"{k:g}", rep))
        log.info("continuation k=%g converged=%s iterations=%d", k, rep.converged,
                 rep.outer_iterations)
        if not rep.converged:
            diag = {"k_reached": k_reached, "k_failed": float(k),
                    "steps_converged": len(reports) - 2}
            return SolveReport(rep.trajectory, rep.residual_history, False, total, diag)
        current, k_reached = rep, float(k)
    diag = {"k_reached": k_reached, "steps_converged": len(reports) - 1,
            "per_step_iterations": ";".join(f"{k}:{r.outer_iterations}" for k, r in reports)}
    if "final_feedback_residual" in current.diagnostics:
        diag["final_feedback_residual"] = current.diagnostics["final_feedback_residual"]
    return SolveReport(current.trajectory, current.residual_history, True, total, diag)


def fhn_splitting(circuit):
    """``(P, C1, C2_at_k)`` for a FitzHugh-Nagumo one-port.

    ``C1`` is the cubic plus the RL branch; ``C2`` is the negative linear
    conductance ``k V``.
    """
    from .operators import Cubic, Linear, Sum

    cubic = circuit.branch("cubic").element
    rl = circuit.branch("I_L").element
    P = RCPlant(circuit.C, circuit.g_leak, circuit.V_leak, circuit.v0)
    C1 = Sum((Cubic(cubic.c), rl))
    return P, C1, (lambda k: None if k == 0 else Linear(k))
