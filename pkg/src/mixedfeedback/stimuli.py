"""Input current generators on a fixed grid."""
from __future__ import annotations

import math

import numpy as np
from scipy.signal import lfilter

from .signals import Signal, Unit


def constant(level, n, dt, name="I_ext") -> Signal:
    return Signal.constant(level, n, dt, Unit.AMPERE, name)


def step(level, n, dt, t_on=0.0, baseline=0.0, t_off=None, name="I_ext") -> Signal:
    t = np.arange(n) * dt
    on = (t >= t_on) & ((t < t_off) if t_off is not None else True)
    return Signal(np.where(on, level, baseline), dt, Unit.AMPERE, name)


def triangle(low, high, n, dt, name="u") -> Signal:
    """Linear sweep ``low -> high -> low`` over the grid (up-leg has ``ceil(n/2)`` samples)."""
    up = (n + 1) // 2
    rise = np.linspace(low, high, up)
    fall = np.linspace(high, low, n - up + 1)[1:]
    return Signal(np.concatenate([rise, fall]), dt, Unit.DIMENSIONLESS, name)


def ornstein_uhlenbeck(n, dt, tau, std, seed, mean=0.0, name="I_ou") -> Signal:
    """Stationary OU process with correlation time ``tau`` and standard deviation ``std``.

    Exact discretization; the first sample is drawn from the stationary law.
    """
    if tau <= 0 or std < 0:
        raise ValueError("OU needs tau > 0 and std >= 0")
    rng = np.random.default_rng(seed)
    a = math.exp(-dt / tau)
    b = std * math.sqrt(1.0 - a * a)
    xi = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = std * xi[0]
    x[1:] = lfilter([b], [1.0, -a], xi[1:], zi=[a * x[0]])[0]
    return Signal(mean + x, dt, Unit.AMPERE, name)
