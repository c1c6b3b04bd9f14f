"""Event-based speed control of a motor with dry friction.

The speed error drives a spiking one-port; every spike fires a torque pulse
of fixed amplitude and width.  At low reference the pulses kick the rotor
through stiction one at a time; at high reference the spike rate sets the
mean torque.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _kernel as K
from .circuits import OnePortCircuit, build_spiker, compile_network
from .operators import ConfigError
from .solvers import BlowUpError, SimConfig


@dataclass(frozen=True)
class MotorPlant:
    """``J dw/dt = k_t u - b w - friction``; Coulomb friction ``c`` with stiction."""

    J: float = 50.0
    b: float = 0.2
    k_t: float = 1.0
    c: float = 0.3
    omega0: float = 0.0

    def __post_init__(self):
        if not (self.J > 0 and self.k_t > 0 and self.b >= 0 and self.c >= 0):
            raise ConfigError("motor needs J > 0, k_t > 0, b >= 0, c >= 0")

    def step(self, omega, u, dt):
        return _plant_step(omega, u, dt, self.J, self.b, self.k_t, self.c)

    def run(self, u: np.ndarray, dt: float) -> np.ndarray:
        w = np.empty(len(u))
        omega = self.omega0
        for n, un in enumerate(u):
            w[n] = omega
            omega = self.step(omega, un, dt)
        return w


@njit(cache=True)
def _plant_step(omega, u, dt, J, b, k_t, c):
    tau = k_t * u
    if omega == 0.0:
        if abs(tau) <= c:
            return 0.0
        return (tau - math.copysign(c, tau)) * dt / J
    new = omega + dt / J * (tau - b * omega - math.copysign(c, omega))
    if new * omega < 0.0:
        # friction cannot reverse motion within a step: stick
        return 0.0
    return new


@dataclass(frozen=True)
class SpikingController:
    """Spiking one-port driven by ``min(bias + gain * (w_ref - w), input_max)``.

    The bias sits below the cell's threshold, so zero error means no spikes;
    the cap keeps the drive below depolarization block.
    """

    cell: OnePortCircuit = field(default_factory=build_spiker)
    bias: float = -0.8
    gain: float = 50.0
    input_max: float = 2.0
    threshold: float = -0.3
    pulse_amplitude: float = 1.0
    pulse_width: float = 4.0


@dataclass
class MotorReport:
    t: np.ndarray
    omega: np.ndarray
    torque: np.ndarray
    V: np.ndarray | None
    spike_times: np.ndarray
    reference: float
    window_start: float

    def _tail(self, x):
        return x[self.t >= self.window_start]

    @property
    def mean_speed(self) -> float:
        return float(np.mean(self._tail(self.omega)))

    @property
    def spike_rate(self) -> float:
        span = self.t[-1] - self.window_start
        return float(np.sum(self.spike_times >= self.window_start) / span) if span > 0 else 0.0

    @property
    def stalled(self) -> bool:
        return bool(np.all(self._tail(self.omega) == 0.0))

    @property
    def tracking_error(self) -> float:
        if self.reference == 0:
            return abs(self.mean_speed)
        return abs(self.mean_speed - self.reference) / self.reference

    def summary(self, prefix="") -> dict:
        return {f"{prefix}mean_speed": self.mean_speed, f"{prefix}spike_rate": self.spike_rate,
                f"{prefix}stalled": self.stalled, f"{prefix}tracking_error": self.tracking_error}


@njit(cache=True)
def _spiking_loop(N, dt, ref, bias, gain, imax, thr, amp, width, omega0, J, b, k_t, c, V0, S0,
                  node_C, node_g, node_E, s_node, s_kind, s_p1, s_p2, s_tau, s_tamp, s_tslope,
                  s_tcenter, t_kind, t_node, t_a, t_g, t_E, t_start, t_count, g_idx, g_exp, fp):
    V = V0.copy()
    S = S0.copy()
    I = np.empty(1)
    w_out = np.empty(N)
    u_out = np.empty(N)
    v_out = np.empty(N)
    spikes = np.empty(N)
    n_sp = 0
    omega = omega0
    timer = 0.0
    for n in range(N):
        v_prev = V[0]
        I[0] = min(bias + gain * (ref - omega), imax)
        K.step_once(V, S, I, dt, node_C, node_g, node_E, s_node, s_kind, s_p1, s_p2, s_tau,
                    s_tamp, s_tslope, s_tcenter, t_kind, t_node, t_a, t_g, t_E, t_start,
                    t_count, g_idx, g_exp, fp)
        if abs(V[0]) > K.BLOWUP_LEVEL:
            return w_out, u_out, v_out, spikes[:n_sp], n
        if v_prev < thr <= V[0]:
            spikes[n_sp] = (n + (thr - v_prev) / (V[0] - v_prev)) * dt
            n_sp += 1
            timer = width
        u = amp if timer > 0.0 else 0.0
        timer -= dt
        w_out[n] = omega
        u_out[n] = u
        v_out[n] = v_prev
        omega = _plant_step(omega, u, dt, J, b, k_t, c)
    return w_out, u_out, v_out, spikes[:n_sp], N


def motor_demo(reference_speed: float, controller: SpikingController = SpikingController(),
               plant: MotorPlant = MotorPlant(), cfg: SimConfig = SimConfig(0.01, 3000.0),
               window: float = 0.5) -> MotorReport:
    """Closed loop with the spiking controller; statistics over the last ``window`` fraction."""
    if reference_speed < 0:
        raise ConfigError("reference speed must be nonnegative")
    cn = compile_network(controller.cell)
    args = cn.kernel_args()
    args.pop("s_clamp")
    N = cfg.n_steps
    w, u, v, spikes, n_ok = _spiking_loop(
        N, cfg.dt, reference_speed, controller.bias, controller.gain, controller.input_max,
        controller.threshold,
        controller.pulse_amplitude, controller.pulse_width, plant.omega0, plant.J, plant.b,
        plant.k_t, plant.c, cn.V_init, cn.S_init, **args)
    if n_ok < N:
        raise BlowUpError(n_ok * cfg.dt)
    t = np.arange(N) * cfg.dt
    return MotorReport(t, w, u, v, spikes, reference_speed, (1 - window) * cfg.horizon)


def proportional_baseline(reference_speed: float, Kp: float = 5.0,
                          plant: MotorPlant = MotorPlant(),
                          cfg: SimConfig = SimConfig(0.01, 3000.0),
                          window: float = 0.5) -> MotorReport:
    """Conventional controller ``u = Kp (w_ref - w)`` on the same plant."""
    N = cfg.n_steps
    w = np.empty(N)
    u = np.empty(N)
    omega = plant.omega0
    for n in range(N):
        w[n] = omega
        u[n] = Kp * (reference_speed - omega)
        omega = plant.step(omega, u[n], cfg.dt)
    t = np.arange(N) * cfg.dt
    return MotorReport(t, w, u, None, np.array([]), reference_speed, (1 - window) * cfg.horizon)


def motor_csv(report: MotorReport) -> str:
    cols = [report.t, report.omega, report.torque]
    header = "t,omega,torque"
    if report.V is not None:
        cols.append(report.V)
        header += ",V"
    buf = io.StringIO()
    buf.write(header + "\n")
    np.savetxt(buf, np.column_stack(cols), delimiter=",", fmt="%.10g")
    return buf.getvalue()
