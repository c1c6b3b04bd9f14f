"""Output-feedback monotonification, contracting observer and RLS conductance estimation."""
from __future__ import annotations

import dataclasses
import io
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import _kernel as K
from .circuits import Branch, ConductanceBranch, OnePortCircuit, compile_network, static_reduction
from .operators import ConfigError, Linear, max_negative_slope
from .signals import Signal, Unit
from .solvers import SimConfig, effective_capacitance, simulate

log = logging.getLogger(__name__)


class GainWarning(UserWarning):
    """Injection gain below the monotonification bound."""


def output_feedback_gain_bound(circuit: OnePortCircuit, domain=(-10.0, 10.0)) -> float:
    """Sum over negative-tagged branches of their largest negative static slope."""
    total = 0.0
    for b in circuit.branches:
        if b.role == "negative":
            total += max_negative_slope(static_reduction(b.element), domain)
    return max(total, 0.0)


def with_injection(circuit: OnePortCircuit, K_gain: float) -> OnePortCircuit:
    """Copy with an extra outward branch ``K V``; driven by ``I + K V_meas`` it
    realizes the error injection ``K (V_meas - V_hat)``."""
    return dataclasses.replace(
        circuit, branches=circuit.branches + (Branch("injection", Linear(K_gain)),))


def contracting_observer(circuit_copy: OnePortCircuit, I: Signal, V: Signal, K_gain: float,
                         initial_state: dict | None = None) -> Signal:
    """Observer voltage ``V_hat``: the circuit copy driven by ``I + K (V - V_hat)``.

    ``initial_state`` sets the observer's own initial state (defaults to the
    copy's rest state).  A :class:`GainWarning` is issued below the bound.
    """
    bound = output_feedback_gain_bound(circuit_copy)
    if K_gain < bound:
        warnings.warn(f"injection gain {K_gain:g} below the bound {bound:g}", GainWarning,
                      stacklevel=2)
    obs = with_injection(circuit_copy, K_gain)
    drive = I.with_samples(I.samples + K_gain * V.samples, unit=Unit.AMPERE)
    cfg = SimConfig(I.dt, len(I) * I.dt, initial_state=initial_state)
    V_hat = simulate(obs, drive, cfg).V
    return V_hat.with_samples(V_hat.samples, name="V_hat")


# ------------------------------------------------------------------- RLS


@dataclass(frozen=True)
class ObserverConfig:
    K: float = 0.0
    forgetting: float = 1.0
    cov_scale: float = 100.0
    theta_init: tuple = ()
    derivative_filter_tau: float | None = None
    project: bool = True

    def __post_init__(self):
        if not 0 < self.forgetting <= 1:
            raise ConfigError("forgetting factor must lie in (0, 1]")
        if not self.cov_scale > 0:
            raise ConfigError("initial covariance scale must be positive")
        if any(t < 0 for t in self.theta_init):
            raise ConfigError("initial conductance estimates must be nonnegative")


@dataclass(frozen=True)
class ConductanceModel:
    """Known-kinetics model: every branch's gates are known, the maximal
    conductances of ``unknown`` branches are the parameters."""

    circuit: OnePortCircuit
    unknown: tuple

    def __post_init__(self):
        object.__setattr__(self, "unknown", tuple(self.unknown))
        for name in self.unknown:
            if not isinstance(self.circuit.branch(name).element, ConductanceBranch):
                raise ConfigError(f"branch {name!r} is not a conductance branch")

    def truth(self) -> np.ndarray:
        return np.array([self.circuit.branch(n).element.g_max for n in self.unknown])

    def regression(self, I: Signal, V: Signal):
        """Regressor rows ``phi_n`` and targets ``y_n`` with ``y_n = theta . phi_n``.

        Uses the simulator's discrete scheme, so the relation is exact on
        self-generated data.  The last sample carries no equation and is zero.
        """
        c = self.circuit
        v, dt = V.samples, V.dt
        v_rest = float(v[0])
        known = np.zeros(len(v))
        cols = {}
        for b in c.branches:
            if b.name in self.unknown:
                cols[b.name] = b.element.driving_term(v, dt, v_rest)
            else:
                known += b.element.evaluate(v, dt, v_rest)
        phi = np.column_stack([cols[n] for n in self.unknown])
        y = np.zeros(len(v))
        c_eff = effective_capacitance(c.C, c.g_leak, dt)
        y[:-1] = (I.samples[:-1] - c_eff * np.diff(v) / dt
                  - c.g_leak * (v[:-1] - c.V_leak) - known[:-1])
        phi[-1] = 0.0
        return phi, y, known


@dataclass
class EstimationReport:
    t: np.ndarray
    theta: np.ndarray
    v_hat: Signal
    cov_trace: np.ndarray
    resets: list = field(default_factory=list)
    names: tuple = ()
    truth: np.ndarray | None = None

    @property
    def final_theta(self) -> np.ndarray:
        return self.theta[-1]

    @property
    def final_error(self) -> float | None:
        if self.truth is None:
            return None
        return float(np.max(np.abs(self.final_theta - self.truth) / np.abs(self.truth)))

    def to_csv(self) -> str:
        n = self.theta.shape[1]
        header = ["t"] + [f"theta_{i + 1}" for i in range(n)] + ["vhat", "cov_trace"]
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        data = np.column_stack([self.t, self.theta, self.v_hat.samples, self.cov_trace])
        np.savetxt(buf, data, delimiter=",", fmt="%.12g")
        return buf.getvalue()

    def summary(self) -> dict:
        out = {f"theta_{i + 1}": float(v) for i, v in enumerate(self.final_theta)}
        if self.truth is not None:
            out["relative_error"] = self.final_error
        out["covariance_resets"] = len(self.resets)
        return out


def _first_order(x, tau, dt):
    a = math.exp(-dt / tau)
    return lfilter([1.0 - a], [1.0, -a], x, axis=0)


def rls(phi: np.ndarray, y: np.ndarray, theta0, cov_scale=100.0, forgetting=1.0,
        project=True):
    """Exponentially weighted recursive least squares.

    Returns ``(theta history, covariance-trace history, reset indices)``.
    The covariance is reset to ``cov_scale * I`` if it stops being positive
    definite.
    """
    N, p = phi.shape
    theta = np.array(theta0, dtype=float).reshape(p)
    P = cov_scale * np.eye(p)
    hist = np.empty((N, p))
    tr = np.empty(N)
    resets = []
    lam = forgetting
    for n in range(N):
        f = phi[n]
        if f.any():
            Pf = P @ f
            gain = Pf / (lam + f @ Pf)
            theta = theta + gain * (y[n] - f @ theta)
            P = (P - np.outer(gain, Pf)) / lam
            P = 0.5 * (P + P.T)
            if project:
                np.maximum(theta, 0.0, out=theta)
            if not (np.all(np.isfinite(P)) and np.linalg.eigvalsh(P)[0] > 0):
                log.warning("covariance lost definiteness at sample %d; reset", n)
                resets.append(n)
                P = cov_scale * np.eye(p)
        elif lam < 1:
            P = P / lam
        hist[n] = theta
        tr[n] = np.trace(P)
    return hist, tr, resets


def batch_least_squares(phi, y, theta0, cov_scale=100.0):
    """Normal-equations oracle for RLS at unit forgetting:
    ``(P0^-1 + sum phi phi^T) theta = P0^-1 theta0 + sum phi y``."""
    p = phi.shape[1]
    A = np.eye(p) / cov_scale + phi.T @ phi
    b = np.asarray(theta0, dtype=float) / cov_scale + phi.T @ y
    return np.linalg.solve(A, b)


def rls_estimate(model: ConductanceModel, I: Signal, V: Signal,
                 cfg: ObserverConfig = ObserverConfig()) -> EstimationReport:
    """Recursive estimate of the unknown maximal conductances from ``(I, V)``.

    Gates are reconstructed from the measured voltage (kinetics known).  With
    ``derivative_filter_tau`` set, targets and regressors pass through the
    same causal first-order filter, which keeps the relation linear in theta
    while smoothing the voltage derivative.
    """
    phi, y, known = model.regression(I, V)
    p = len(model.unknown)
    theta0 = np.array(cfg.theta_init if cfg.theta_init else [0.0] * p, dtype=float)
    if theta0.size != p:
        raise ConfigError(f"theta_init has {theta0.size} entries for {p} unknowns")
    if cfg.derivative_filter_tau:
        phi = _first_order(phi, cfg.derivative_filter_tau, V.dt)
        y = _first_order(y, cfg.derivative_filter_tau, V.dt)
    hist, tr, resets = rls(phi, y, theta0, cfg.cov_scale, cfg.forgetting, cfg.project)
    # one-step voltage prediction from the running estimate
    c = model.circuit
    v = V.samples
    phi_raw, _, _ = model.regression(I, V)
    prev = np.vstack([theta0, hist[:-1]])
    step = K.step_factor(V.dt, c.C, c.g_leak)
    vhat = np.empty(len(v))
    vhat[0] = v[0]
    drive = I.samples - c.g_leak * (v - c.V_leak) - known - np.sum(prev * phi_raw, axis=1)
    vhat[1:] = v[:-1] + step * drive[:-1]
    return EstimationReport(V.times, hist, Signal(vhat, V.dt, Unit.VOLT, "vhat"), tr, resets,
                            model.unknown, model.truth())


def simulate_modulated(circuit: OnePortCircuit, I: Signal, schedules: dict,
                       initial_state: dict | None = None) -> Signal:
    """Semi-implicit run with time-varying maximal conductances.

    ``schedules`` maps branch names to arrays of ``g_max`` per sample.
    """
    cn = compile_network(circuit)
    args = cn.kernel_args()
    t_g = args["t_g"].copy()
    args["t_g"] = t_g
    names = [b.name for b in circuit.branches]
    term_of = {name: k for k, name in enumerate(names)}
    sched = {term_of[n]: np.asarray(s, dtype=float) for n, s in schedules.items()}
    V = cn.V_init.copy()
    init = dict(initial_state or {})
    if "V" in init:
        V[0] = float(init["V"])
    S = cn.state_init(V)
    out = np.empty(len(I))
    drive = np.empty(1)
    for n in range(len(I)):
        for k, s in sched.items():
            t_g[k] = s[n]
        out[n] = V[0]
        drive[0] = I.samples[n]
        K.step_once(V, S, drive, I.dt, **{k: v for k, v in args.items() if k != "s_clamp"})
    return Signal(out, I.dt, Unit.VOLT, "V")
