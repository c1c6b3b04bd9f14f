"""Uniformly sampled signals and the discrete L2 inner product.

Every operator in the package consumes and produces :class:`Signal` values.
The inner product is the left-endpoint Riemann sum ``sum(a_i * b_i) * dt``,
which is what the simulator's fixed step integrates exactly.
"""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np


class Unit(str, enum.Enum):
    VOLT = "V"
    AMPERE = "A"
    DIMENSIONLESS = "1"


class ShapeError(ValueError):
    """Signals are not conformable (length or time step mismatch)."""


class UnitError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Signal:
    """A finite-horizon trajectory sampled every ``dt`` seconds.

    Samples are stored in a read-only float64 array, so a Signal can be
    shared between workers without copying.
    """

    samples: np.ndarray
    dt: float
    unit: Unit = Unit.DIMENSIONLESS
    name: str = field(default="x", compare=False)

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float).reshape(-1)
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("signal samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "unit", Unit(self.unit))

    # construction helpers

    @classmethod
    def constant(cls, value, n, dt, unit=Unit.DIMENSIONLESS, name="x"):
        return cls(np.full(n, float(value)), dt, unit, name)

    @classmethod
    def zeros(cls, n, dt, unit=Unit.DIMENSIONLESS, name="x"):
        return cls(np.zeros(n), dt, unit, name)

    @classmethod
    def from_function(cls, fn, n, dt, unit=Unit.DIMENSIONLESS, name="x"):
        t = np.arange(n) * dt
        return cls(np.asarray(fn(t), dtype=float) * np.ones(n), dt, unit, name)

    def __len__(self):
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.dt

    @property
    def horizon(self) -> float:
        return self.samples.size * self.dt

    def with_samples(self, samples, unit=None, name=None) -> "Signal":
        return Signal(samples, self.dt, self.unit if unit is None else unit,
                      self.name if name is None else name)

    def conformable(self, other: "Signal") -> bool:
        return len(self) == len(other) and self.dt == other.dt

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return (self.conformable(other) and self.unit == other.unit
                and np.array_equal(self.samples, other.samples))

    __hash__ = None

    # arithmetic keeps the unit of the left operand

    def _coerce(self, other):
        if isinstance(other, Signal):
            check_conformable(self, other)
            return other.samples
        return other

    def __add__(self, other):
        return self.with_samples(self.samples + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_samples(self.samples - self._coerce(other))

    def __rsub__(self, other):
        return self.with_samples(self._coerce(other) - self.samples)

    def __mul__(self, scalar):
        if isinstance(scalar, Signal):
            raise TypeError("use inner_product for signal pairing")
        return self.with_samples(self.samples * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_samples(-self.samples)

    # CSV: header ``t,<name>``; time column is index*dt

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"t,{self.name}\n")
        for i, x in enumerate(self.samples):
            buf.write(f"{i * self.dt:.17g},{x:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, unit=Unit.DIMENSIONLESS) -> "Signal":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        header = lines[0].split(",")
        if len(header) != 2 or header[0] != "t":
            raise ValueError(f"bad signal CSV header: {lines[0]!r}")
        rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
        dt = rows[1, 0] if len(rows) > 1 else 1.0
        return cls(rows[:, 1], dt, unit, header[1])


def check_conformable(a: Signal, b: Signal) -> None:
    if len(a) != len(b) or a.dt != b.dt:
        raise ShapeError(
            f"signals not conformable: len {len(a)} vs {len(b)}, dt {a.dt} vs {b.dt}")


_POWER = {Unit.VOLT, Unit.AMPERE}


def _check_pairing(a: Signal, b: Signal) -> None:
    if a.unit == b.unit:
        return
    if {a.unit, b.unit} == _POWER:
        return
    raise UnitError(f"cannot pair {a.unit.name} with {b.unit.name}")


def inner_product(a: Signal, b: Signal) -> float:
    """Left Riemann sum of ``a(t) b(t)`` over the horizon."""
    check_conformable(a, b)
    _check_pairing(a, b)
    return float(np.dot(a.samples, b.samples) * a.dt)


def norm(a: Signal) -> float:
    return math.sqrt(max(inner_product(a, a), 0.0))


def increment_pair(x1: Signal, x2: Signal) -> Signal:
    """Pointwise increment ``x1 - x2``; both signals must carry the same unit."""
    check_conformable(x1, x2)
    if x1.unit != x2.unit:
        raise UnitError(f"increments need equal units, got {x1.unit.name}, {x2.unit.name}")
    return x1.with_samples(x1.samples - x2.samples)
