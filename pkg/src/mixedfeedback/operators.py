"""Monotone and mixed operator descriptions.

Operators map a voltage signal to a current signal (or, for the amplifier
block, a dimensionless input to a dimensionless output).  All dynamic parts
are discretized with the same exponential update used by the simulator, so
an operator evaluated here and the corresponding circuit branch inside
``solvers.simulate`` produce identical samples.

Every operator can hand out a *stepper*: a small causal state machine whose
``output(v)`` gives the current-step value and its derivative with respect to
the current input sample.  Per-step implicit solves (resolvents, the monotone
inner solve of the splitting iteration) are built on that.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from .signals import Signal, Unit, inner_product, increment_pair, norm


class ConfigError(ValueError):
    pass


class NonConvergenceError(RuntimeError):
    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history) if history is not None else []


class NoHysteresisError(ValueError):
    pass


class StiffnessWarning(UserWarning):
    pass


def output_unit(unit: Unit) -> Unit:
    return {Unit.VOLT: Unit.AMPERE, Unit.AMPERE: Unit.VOLT}.get(unit, Unit.DIMENSIONLESS)


def _logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Operator:
    """Base class for everything `evaluate` understands."""

    def evaluate(self, v: np.ndarray, dt: float, v_rest: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def stepper(self, dt: float, v_rest: float = 0.0) -> "Stepper":
        raise NotImplementedError

    def time_constants(self) -> list[float]:
        return []

    def to_dict(self) -> dict:
        raise NotImplementedError


class Stepper:
    """Causal one-sample-at-a-time view of an operator."""

    def output(self, v: float) -> tuple[float, float]:
        raise NotImplementedError

    def commit(self, v: float) -> None:
        pass


# ---------------------------------------------------------------- static kinds


class StaticFunction(Operator):
    """Memoryless scalar map, applied sample by sample."""

    kind = "static"

    def __call__(self, x):
        raise NotImplementedError

    def derivative(self, x):
        raise NotImplementedError

    def evaluate(self, v, dt, v_rest=0.0):
        return np.asarray(self(np.asarray(v, dtype=float)), dtype=float)

    def stepper(self, dt, v_rest=0.0):
        return _StaticStepper(self)

    def split(self) -> tuple[Operator | None, Operator | None]:
        """Decompose into (monotone part, monotone part subtracted)."""
        ranges = negative_conductance_range(self)
        if not ranges:
            return self, None
        k = max_negative_slope(self)
        return Sum((self, Linear(k))), Linear(k)

    def to_dict(self):
        d = {"type": self.kind}
        d.update({k: v for k, v in self.__dict__.items()})
        return d


class _StaticStepper(Stepper):
    __slots__ = ("f",)

    def __init__(self, f):
        self.f = f

    def output(self, v):
        return float(self.f(v)), float(self.f.derivative(v))


@dataclass(frozen=True)
class Linear(StaticFunction):
    slope: float
    kind = "linear"

    def __call__(self, x):
        return self.slope * x

    def derivative(self, x):
        return self.slope * np.ones_like(np.asarray(x, dtype=float))

    def split(self):
        if self.slope >= 0:
            return self, None
        return None, Linear(-self.slope)


@dataclass(frozen=True)
class Cubic(StaticFunction):
    c: float
    kind = "cubic"

    def __call__(self, x):
        return self.c * x ** 3

    def derivative(self, x):
        return 3.0 * self.c * np.asarray(x, dtype=float) ** 2

    def split(self):
        if self.c >= 0:
            return self, None
        return None, Cubic(-self.c)


@dataclass(frozen=True)
class CubicMinusLinear(StaticFunction):
    """``I = c V^3 - k V``: the tunnel-diode style negative resistance."""

    c: float
    k: float
    kind = "cubic_minus_linear"

    def __call__(self, x):
        return self.c * x ** 3 - self.k * x

    def derivative(self, x):
        return 3.0 * self.c * np.asarray(x, dtype=float) ** 2 - self.k

    def split(self):
        if self.c >= 0 and self.k >= 0:
            return Cubic(self.c), (Linear(self.k) if self.k > 0 else None)
        return super().split()


@dataclass(frozen=True)
class Saturation(StaticFunction):
    """Open-loop amplifier: 0 below 0, slope g on [0, 1/g], 1 above."""

    g: float
    kind = "saturation"

    def __post_init__(self):
        if not self.g > 0:
            raise ConfigError(f"saturation gain must be positive, got {self.g}")

    def __call__(self, x):
        return np.clip(self.g * np.asarray(x, dtype=float), 0.0, 1.0)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= 1.0 / self.g), self.g, 0.0)


@dataclass(frozen=True)
class Sigmoid(StaticFunction):
    """Logistic curve ``1 / (1 + exp(-slope (x - center)))``.

    A negative slope gives the decreasing curve used for inactivation.
    """

    slope: float
    center: float = 0.0
    kind = "sigmoid"

    def __call__(self, x):
        return _logistic(self.slope * (np.asarray(x, dtype=float) - self.center))

    def derivative(self, x):
        s = self(x)
        return self.slope * s * (1.0 - s)


@dataclass(frozen=True)
class PiecewiseLinear(StaticFunction):
    """Linear interpolation through ``points``; end segments are extended."""

    points: tuple

    kind = "piecewise_linear"

    def __post_init__(self):
        pts = tuple((float(a), float(b)) for a, b in self.points)
        if len(pts) < 2:
            raise ConfigError("piecewise linear function needs at least two points")
        xs = [p[0] for p in pts]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ConfigError("breakpoints must be strictly increasing")
        object.__setattr__(self, "points", pts)

    def _slopes(self):
        xs = np.array([p[0] for p in self.points])
        ys = np.array([p[1] for p in self.points])
        return xs, ys, np.diff(ys) / np.diff(xs)

    def __call__(self, x):
        xs, ys, m = self._slopes()
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(m) - 1)
        return ys[idx] + m[idx] * (x - xs[idx])

    def derivative(self, x):
        xs, _, m = self._slopes()
        idx = np.clip(np.searchsorted(xs, np.asarray(x, dtype=float), side="right") - 1,
                      0, len(m) - 1)
        return m[idx]

    def to_dict(self):
        return {"type": self.kind, "points": [list(p) for p in self.points]}


# ------------------------------------------------------------ dynamic kinds


@dataclass(frozen=True)
class LTIFirstOrder(Operator):
    """First-order lag ``tau ds/dt = -s + gain v`` with output ``s + feedthrough v``.

    With ``gain = R`` and ``tau = L`` this is the RL branch of the
    FitzHugh-Nagumo circuit.
    """

    gain: float
    tau: float
    feedthrough: float = 0.0
    kind = "lti_first_order"

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"time constant must be positive, got {self.tau}")

    def decay(self, dt):
        return math.exp(-dt / self.tau)

    def evaluate(self, v, dt, v_rest=0.0, state=None):
        a = self.decay(dt)
        s0 = self.gain * v_rest if state is None else float(state)
        s = lfilter([(1.0 - a) * self.gain], [1.0, -a], v, zi=[a * s0])[0]
        return s + self.feedthrough * np.asarray(v)

    def stepper(self, dt, v_rest=0.0, state=None):
        s0 = self.gain * v_rest if state is None else float(state)
        return _LTIStepper(self.decay(dt), self.gain, self.feedthrough, s0)

    def time_constants(self):
        return [self.tau]

    def to_dict(self):
        return {"type": self.kind, "gain": self.gain, "tau": self.tau,
                "feedthrough": self.feedthrough}


class _LTIStepper(Stepper):
    __slots__ = ("a", "b", "f", "s")

    def __init__(self, a, gain, feedthrough, s0):
        self.a, self.b, self.f, self.s = a, (1.0 - a) * gain, feedthrough, s0

    def output(self, v):
        s = self.a * self.s + self.b * v
        return s + self.f * v, self.b + self.f

    def commit(self, v):
        self.s = self.a * self.s + self.b * v


@dataclass(frozen=True)
class Sum(Operator):
    terms: tuple
    kind = "sum"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(t for t in self.terms if t is not None))

    def evaluate(self, v, dt, v_rest=0.0):
        out = np.zeros(len(v))
        for t in self.terms:
            out = out + t.evaluate(v, dt, v_rest)
        return out

    def stepper(self, dt, v_rest=0.0):
        return _SumStepper([t.stepper(dt, v_rest) for t in self.terms])

    def time_constants(self):
        return [tc for t in self.terms for tc in t.time_constants()]

    def to_dict(self):
        return {"type": self.kind, "terms": [t.to_dict() for t in self.terms]}


class _SumStepper(Stepper):
    __slots__ = ("parts",)

    def __init__(self, parts):
        self.parts = parts

    def output(self, v):
        y = dy = 0.0
        for p in self.parts:
            a, b = p.output(v)
            y += a
            dy += b
        return y, dy

    def commit(self, v):
        for p in self.parts:
            p.commit(v)


@dataclass(frozen=True)
class Scaled(Operator):
    factor: float
    op: Operator
    kind = "scaled"

    def __post_init__(self):
        if not self.factor >= 0:
            raise ConfigError("scaling factors must be nonnegative")

    def evaluate(self, v, dt, v_rest=0.0):
        return self.factor * self.op.evaluate(v, dt, v_rest)

    def stepper(self, dt, v_rest=0.0):
        return _ScaledStepper(self.factor, self.op.stepper(dt, v_rest))

    def time_constants(self):
        return self.op.time_constants()

    def to_dict(self):
        return {"type": self.kind, "factor": self.factor, "op": self.op.to_dict()}


class _ScaledStepper(Stepper):
    __slots__ = ("c", "inner")

    def __init__(self, c, inner):
        self.c, self.inner = c, inner

    def output(self, v):
        y, dy = self.inner.output(v)
        return self.c * y, self.c * dy

    def commit(self, v):
        self.inner.commit(v)


@dataclass(frozen=True)
class MixedOperator(Operator):
    """Difference ``positive - negative`` of two monotone operators."""

    positive: Operator | None
    negative: Operator | None
    kind = "mixed"

    def evaluate(self, v, dt, v_rest=0.0):
        out = np.zeros(len(v))
        if self.positive is not None:
            out = out + self.positive.evaluate(v, dt, v_rest)
        if self.negative is not None:
            out = out - self.negative.evaluate(v, dt, v_rest)
        return out

    def stepper(self, dt, v_rest=0.0):
        parts = []
        if self.positive is not None:
            parts.append(self.positive.stepper(dt, v_rest))
        if self.negative is not None:
            parts.append(_ScaledStepper(-1.0, self.negative.stepper(dt, v_rest)))
        return _SumStepper(parts)

    def time_constants(self):
        return [tc for p in (self.positive, self.negative) if p is not None
                for tc in p.time_constants()]

    def certify(self, probes=None, tol=1e-9):
        """Certify both parts separately; returns the pair of certificates."""
        return tuple(
            Certificate(True) if p is None else monotonicity_certificate(p, probes, tol)
            for p in (self.positive, self.negative))

    def to_dict(self):
        return {"type": self.kind,
                "positive": None if self.positive is None else self.positive.to_dict(),
                "negative": None if self.negative is None else self.negative.to_dict()}


ZERO = Linear(0.0)


def operator_from_dict(d: dict) -> Operator:
    kind = d["type"]
    simple = {"linear": Linear, "cubic": Cubic, "cubic_minus_linear": CubicMinusLinear,
              "saturation": Saturation, "sigmoid": Sigmoid, "lti_first_order": LTIFirstOrder}
    args = {k: v for k, v in d.items() if k != "type"}
    if kind in simple:
        return simple[kind](**args)
    if kind == "piecewise_linear":
        return PiecewiseLinear(tuple(tuple(p) for p in d["points"]))
    if kind == "sum":
        return Sum(tuple(operator_from_dict(t) for t in d["terms"]))
    if kind == "scaled":
        return Scaled(d["factor"], operator_from_dict(d["op"]))
    if kind == "mixed":
        return MixedOperator(
            None if d["positive"] is None else operator_from_dict(d["positive"]),
            None if d["negative"] is None else operator_from_dict(d["negative"]))
    if kind == "conductance":
        from .circuits import ConductanceBranch
        return ConductanceBranch.from_dict(d)
    raise ConfigError(f"unknown operator type {kind!r}")


# ----------------------------------------------------------------- evaluate


def evaluate(op: Operator, v: Signal, v_rest: float = 0.0) -> Signal:
    """Causal rollout of ``op`` on the sample grid of ``v``.

    Dynamic parts start from the rest state for the input held at ``v_rest``
    forever.  A :class:`StiffnessWarning` is issued when a time constant is
    shorter than two steps.
    """
    if not isinstance(v, Signal):
        v = Signal(v, 1.0)
    taus = op.time_constants()
    if taus and min(taus) < 2 * v.dt:
        warnings.warn(f"time constant {min(taus)} < 2*dt = {2 * v.dt}", StiffnessWarning,
                      stacklevel=2)
    y = op.evaluate(v.samples, v.dt, v_rest)
    return Signal(y, v.dt, output_unit(v.unit), name="y")


def _apply(op, v: Signal) -> Signal:
    if isinstance(op, Operator):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StiffnessWarning)
            return evaluate(op, v)
    return op(v)


# ------------------------------------------------------------ certificates


@dataclass
class Certificate:
    passed: bool
    witness: tuple | None = None
    value: float | None = None
    pairs_checked: int = 0

    def __bool__(self):
        return self.passed


def default_probe_suite(n: int = 400, dt: float = 0.01, amplitude: float = 1.0,
                        offset: float = 0.0, unit: Unit = Unit.VOLT, seed: int = 0):
    """8 step, 8 ramp, 8 sinusoid (3 frequencies) and 8 smooth random pairs.

    The first two step pairs start at t=0, i.e. they are constant signals;
    the very first is the symmetric pair at +-0.1*amplitude.
    """
    t = np.arange(n) * dt
    T = n * dt
    A = amplitude

    def sig(x):
        return Signal(offset + A * np.asarray(x) * np.ones(n), dt, unit)

    pairs = []
    levels = [(0.1, -0.1), (0.5, 0.2), (1.0, -1.0), (1.5, 0.5), (-0.3, -0.8),
              (2.0, -0.5), (0.05, 0.0), (-1.2, 0.3)]
    for j, (a, b) in enumerate(levels):
        t0 = 0.0 if j < 2 else T * (0.1 + 0.08 * j)
        h = (t >= t0).astype(float)
        pairs.append((sig(a * h), sig(b * h)))
    for j in range(8):
        s1, s2 = (j + 1) * 0.25, -(j % 3) * 0.4
        pairs.append((sig(s1 * t / T), sig(s2 * t / T + 0.1 * j)))
    freqs = [1.0, 3.0, 9.0]
    for j in range(8):
        w = 2 * math.pi * freqs[j % 3] / T
        pairs.append((sig(np.sin(w * t + 0.3 * j)), sig(0.5 * np.cos(w * t) - 0.2 * (j % 2))))
    rng = np.random.default_rng(seed)
    width = max(3, n // 40)
    kernel = np.exp(-0.5 * (np.arange(-3 * width, 3 * width + 1) / width) ** 2)
    kernel /= kernel.sum()
    for _ in range(8):
        x1 = np.convolve(rng.standard_normal(n + 6 * width), kernel, mode="valid")[:n]
        x2 = np.convolve(rng.standard_normal(n + 6 * width), kernel, mode="valid")[:n]
        pairs.append((sig(3 * x1), sig(3 * x2)))
    return pairs


def monotonicity_certificate(op, probes=None, tol: float = 1e-9) -> Certificate:
    """Falsification test of incremental positivity on a probe suite.

    ``op`` is an :class:`Operator` or any callable mapping a Signal to a
    Signal.  The test passes iff ``<op(v1) - op(v2), v1 - v2> >= -tol |v1 - v2|^2``
    for every probe pair; otherwise the first violating pair is returned.
    """
    if probes is None:
        probes = default_probe_suite()
    probes = list(probes)
    if not probes:
        raise ConfigError("probe suite is empty")
    for j, (v1, v2) in enumerate(probes):
        dv = increment_pair(v1, v2)
        dy = increment_pair(_apply(op, v1), _apply(op, v2))
        val = inner_product(dy, dv)
        if val < -tol * norm(dv) ** 2:
            return Certificate(False, (v1, v2), val, j + 1)
    return Certificate(True, pairs_checked=len(probes))


def max_negative_slope(f: StaticFunction, domain=(-10.0, 10.0), n: int = 20001) -> float:
    """Largest value of ``-f'(x)`` over the domain, clamped at 0."""
    x = np.linspace(domain[0], domain[1], n)
    d = np.asarray(f.derivative(x), dtype=float)
    best = float(np.max(-d))
    if best <= 0:
        return 0.0
    i = int(np.argmax(-d))
    lo, hi = x[max(i - 1, 0)], x[min(i + 1, n - 1)]
    # golden-section refinement of the slope minimum
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    for _ in range(100):
        c1, c2 = b - g * (b - a), a + g * (b - a)
        if float(f.derivative(c1)) < float(f.derivative(c2)):
            b = c2
        else:
            a = c1
    return max(best, -float(f.derivative(0.5 * (a + b))), 0.0)


def negative_conductance_range(f: StaticFunction, domain=(-10.0, 10.0),
                               n: int = 20001, xtol: float = 1e-9) -> list[tuple[float, float]]:
    """Intervals of the domain on which ``f' < 0``.

    Found by dense sampling of the derivative followed by bisection on each
    sign change.  Intervals touching the domain edge are clipped to it.
    """
    x = np.linspace(domain[0], domain[1], n)
    neg = np.asarray(f.derivative(x), dtype=float) < 0

    def edge(a, b, neg_at_a):
        # bisection for the sign change of f' inside [a, b]
        while b - a > xtol:
            m = 0.5 * (a + b)
            if (float(f.derivative(m)) < 0) == neg_at_a:
                a = m
            else:
                b = m
        return 0.5 * (a + b)

    out = []
    start = domain[0] if neg[0] else None
    for i in range(1, n):
        if neg[i] and not neg[i - 1]:
            start = edge(x[i - 1], x[i], False)
        elif neg[i - 1] and not neg[i]:
            out.append((start, edge(x[i - 1], x[i], True)))
            start = None
    if start is not None:
        out.append((start, domain[1]))
    return out


# --------------------------------------------------------------- resolvent


def _scalar_monotone_root(h: Callable[[float], tuple[float, float]], guess: float,
                          tol: float, max_iter: int) -> float:
    """Root of a nondecreasing scalar function by Newton with a bisection guard."""
    x = guess
    hx, dh = h(x)
    if abs(hx) <= tol:
        return x
    # bracket
    step = max(1.0, abs(x))
    lo = hi = x
    if hx > 0:
        hi_val = hx
        while True:
            lo = x - step
            hl, _ = h(lo)
            if hl <= 0:
                break
            step *= 2
            if step > 1e300:
                raise NonConvergenceError("no bracket", residual=hl)
        lo_val = hl
    else:
        lo_val = hx
        while True:
            hi = x + step
            hh, _ = h(hi)
            if hh >= 0:
                break
            step *= 2
            if step > 1e300:
                raise NonConvergenceError("no bracket", residual=hh)
        hi_val = hh
    if lo_val == 0:
        return lo
    if hi_val == 0:
        return hi
    for _ in range(max_iter):
        if dh > 0:
            xn = x - hx / dh
            if not (lo < xn < hi):
                xn = 0.5 * (lo + hi)
        else:
            xn = 0.5 * (lo + hi)
        x = xn
        hx, dh = h(x)
        prec = 4 * np.spacing(max(abs(x), 1.0))
        if abs(hx) <= tol or hi - lo <= prec:
            return x
        if hx > 0:
            hi = x
        else:
            lo = x
    raise NonConvergenceError(f"scalar solve did not converge, residual {hx:g}", residual=hx)


def resolvent(op: Operator, alpha: float, target: Signal, v_rest: float = 0.0,
              tol: float = 1e-10, max_iter: int = 10_000) -> Signal:
    """Solve ``x + alpha * op(x) = target`` for the signal ``x``.

    Static kinds are solved independently per sample; dynamic kinds and sums
    are solved step by step, each step being a scalar monotone equation in
    the current sample.
    """
    if not alpha > 0:
        raise ConfigError("alpha must be positive")
    t = target.samples
    x = np.empty(len(t))
    st = op.stepper(target.dt, v_rest)
    for n, tn in enumerate(t):
        def h(v, tn=tn):
            y, dy = st.output(v)
            return v + alpha * y - tn, 1.0 + alpha * dy
        xn = _scalar_monotone_root(h, x[n - 1] if n else tn, tol, max_iter)
        st.commit(xn)
        x[n] = xn
    return target.with_samples(x)


# ------------------------------------------------------ amplifier algebra


@dataclass(frozen=True)
class AmplifierSolution:
    values: tuple
    degenerate: bool = False

    def __len__(self):
        return len(self.values)


def _sign(sign) -> float:
    if sign in ("positive", "+", 1, +1.0):
        return 1.0
    if sign in ("negative", "-", -1, -1.0):
        return -1.0
    raise ValueError(f"sign must be 'positive' or 'negative', got {sign!r}")


def mixed_amplifier_characteristic(g: float, k: float, sign, u: float) -> AmplifierSolution:
    """All solutions ``y`` in [0, 1] of ``y = sat_g(+-k y + u)``.

    Enumerated exactly over the three pieces of the saturation.  For the
    critical positive gain ``k = 1/g`` at ``u = 0`` every ``y`` in [0, 1]
    solves the relation; the endpoints are returned with ``degenerate=True``.
    """
    if not g > 0 or k < 0:
        raise ValueError("need g > 0 and k >= 0")
    s = _sign(sign)
    sols = []
    if u <= 0:                      # lower flat piece: argument u <= 0
        sols.append(0.0)
    if s * k + u >= 1.0 / g:        # upper flat piece: argument >= 1/g
        sols.append(1.0)
    denom = 1.0 - g * s * k
    degenerate = False
    if denom != 0.0:
        y = g * u / denom
        if 0.0 <= y <= 1.0:
            sols.append(y)
    elif u == 0.0:
        degenerate = True
        sols.extend([0.0, 1.0])
    uniq = []
    for y in sorted(sols):
        if not uniq or abs(y - uniq[-1]) > 1e-12:
            uniq.append(y)
    return AmplifierSolution(tuple(uniq), degenerate)


def closed_loop_gain(g: float, k: float, sign) -> float:
    """Slope of the closed-loop characteristic on its linear range."""
    return g / (1.0 - _sign(sign) * g * k)


def linear_range(g: float, k: float, sign) -> tuple[float, float] | None:
    """Input interval traversed by the middle branch while 0 <= y <= 1."""
    s = _sign(sign)
    denom = 1.0 - g * s * k
    if denom == 0.0:
        return None
    ends = sorted((0.0, denom / g))
    return ends[0], ends[1]


def multivalued_interval(g: float, k: float, sign) -> tuple[float, float] | None:
    """Inputs with more than one solution, from the branch validity bounds.

    The lower piece is valid for ``u <= 0`` and the upper piece for
    ``u >= 1/g - s k``; they overlap only under positive feedback with
    ``k > 1/g``.
    """
    s = _sign(sign)
    lo, hi = 1.0 / g - s * k, 0.0
    if lo < hi:
        return lo, hi
    return None


def hysteresis_trace(g: float, k: float, sign, u_sweep: Signal) -> Signal:
    """Single-valued output obtained by staying on the current outer branch.

    The output jumps only when its branch ceases to exist: up at ``u > 0`` and
    down at ``u < 1/g - k``.
    """
    s = _sign(sign)
    if s < 0 or k <= 1.0 / g:
        raise NoHysteresisError("hysteresis needs positive feedback with k > 1/g")
    y = np.empty(len(u_sweep))
    current = None
    for n, u in enumerate(u_sweep.samples):
        sols = mixed_amplifier_characteristic(g, k, sign, u).values
        outer = [v for v in sols if v in (0.0, 1.0)]
        if current in outer:
            y[n] = current
            continue
        current = outer[0] if outer else sols[0]
        y[n] = current
    return u_sweep.with_samples(y, unit=Unit.DIMENSIONLESS, name="y")


def jump_points(u_sweep: Signal, trace: Signal) -> list[tuple[float, str]]:
    """Input values at which the trace jumps, with direction 'up' or 'down'."""
    y = trace.samples
    out = []
    for n in range(1, len(y)):
        if y[n] != y[n - 1]:
            out.append((float(u_sweep.samples[n]), "up" if y[n] > y[n - 1] else "down"))
    return out
