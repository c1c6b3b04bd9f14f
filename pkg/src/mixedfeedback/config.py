"""Declarative scenario files (YAML, ``schema_version: 1``).

A scenario has the top-level keys ``schema_version``, ``seed``, ``circuit``,
``input``, ``solver``, ``experiment`` and ``outputs``.  Every section maps
onto a dataclass; unknown keys and mistyped scalars are rejected with the
section name in the message.  ``experiment.kind`` selects the dataclass
that validates the remaining experiment keys.
"""
from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    def __init__(self, message, section=None, path=None):
        self.message = message
        self.section = section
        self.path = path
        where = ", ".join(x for x in (f"file {path}" if path else "",
                                      f"section {section!r}" if section else "") if x)
        super().__init__(f"{where}: {message}" if where else message)


# ------------------------------------------------------------- sections


@dataclass(frozen=True)
class CircuitSection:
    """``builder`` is one of BUILDERS; ``None`` picks the experiment's default cell."""

    builder: str | None = None
    params: dict = field(default_factory=dict)
    explicit: dict | None = None


@dataclass(frozen=True)
class InputSection:
    kind: str = "constant"
    level: float = 0.0
    baseline: float = 0.0
    t_on: float = 0.0
    t_off: float | None = None
    low: float = -1.0
    high: float = 1.0
    ou_tau: float = 1.0
    ou_std: float = 0.0
    per_node: list | None = None


@dataclass(frozen=True)
class SolverSection:
    dt: float = 0.01
    horizon: float = 100.0
    method: str = "semi_implicit_euler"
    noise_std: float = 0.0
    initial_state: dict | None = None
    outer_tol: float = 1e-8
    inner_tol: float = 1e-10
    max_outer: int = 500
    damping: float = 0.5
    continuation_steps: int = 10


@dataclass(frozen=True)
class SimulateOptions:
    kind: str = "simulate"
    threshold: float | None = None
    refractory: float = 0.2
    transient: float = 0.0


@dataclass(frozen=True)
class DCSolveOptions:
    kind: str = "dc-solve"
    k_target: float | None = None
    require_convergence: bool = False


@dataclass(frozen=True)
class ReliabilityOptions:
    kind: str = "reliability"
    n_trials: int = 25
    step_level: float = 0.5
    ou_std: float = 1.0
    ou_tau: float = 2.0
    trial_noise: float = 0.005
    v_init_jitter: float = 0.3
    alignment_window: float = 3.0
    threshold: float | None = -0.3
    refractory: float = 2.0


@dataclass(frozen=True)
class SweepOptions:
    kind: str = "sweep"
    params: list = field(default_factory=list)
    drive: float | list = 0.0
    threshold: float | None = None
    refractory: float = 0.2
    transient: float = 0.25


@dataclass(frozen=True)
class EstimateOptions:
    kind: str = "estimate"
    unknown: list = field(default_factory=list)
    forgetting: float = 1.0
    cov_scale: float = 100.0
    theta_init: list = field(default_factory=list)
    derivative_filter_tau: float | None = None
    observer_gain: float | None = None
    observer_initial_state: dict | None = None


@dataclass(frozen=True)
class AmplifierOptions:
    kind: str = "amplifier"
    g: float = 2.0
    k: float = 1.0
    sign: str = "positive"
    u_low: float = -1.0
    u_high: float = 1.0
    n_samples: int = 2001


@dataclass(frozen=True)
class MotorOptions:
    kind: str = "motor"
    references: list = field(default_factory=lambda: [0.0, 0.02, 0.3])
    J: float = 50.0
    b: float = 0.2
    k_t: float = 1.0
    c: float = 0.3
    bias: float = -0.8
    gain: float = 50.0
    input_max: float = 2.0
    threshold: float = -0.3
    pulse_amplitude: float = 1.0
    pulse_width: float = 4.0
    Kp: float = 5.0
    window: float = 0.5


EXPERIMENTS = {
    "simulate": SimulateOptions, "dc-solve": DCSolveOptions, "reliability": ReliabilityOptions,
    "sweep": SweepOptions, "estimate": EstimateOptions, "amplifier": AmplifierOptions,
    "motor": MotorOptions,
}


@dataclass(frozen=True)
class OutputsSection:
    dir: str = "out"
    prefix: str = "run"
    svg: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    experiment: object
    circuit: CircuitSection = CircuitSection()
    input: InputSection = InputSection()
    solver: SolverSection = SolverSection()
    outputs: OutputsSection = OutputsSection()
    seed: int = 0
    schema_version: int = SCHEMA_VERSION

    @property
    def kind(self) -> str:
        return self.experiment.kind

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "circuit": dataclasses.asdict(self.circuit),
            "input": dataclasses.asdict(self.input),
            "solver": dataclasses.asdict(self.solver),
            "experiment": dataclasses.asdict(self.experiment),
            "outputs": dataclasses.asdict(self.outputs),
        }

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def with_overrides(self, seed=None, out_dir=None) -> "ScenarioConfig":
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, seed=int(seed))
        if out_dir is not None:
            cfg = dataclasses.replace(cfg, outputs=dataclasses.replace(cfg.outputs, dir=str(out_dir)))
        return cfg


# --------------------------------------------------------------- parsing


def _accepts(tp, value) -> bool:
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        return any(_accepts(a, value) for a in typing.get_args(tp))
    if tp is type(None):
        return value is None
    if tp is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if tp is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if tp is bool:
        return isinstance(value, bool)
    if tp is str:
        return isinstance(value, str)
    if tp is dict or origin is dict:
        return isinstance(value, dict)
    if tp is list or origin is list:
        return isinstance(value, list)
    return True


def _coerce(tp, value):
    args = typing.get_args(tp) if typing.get_origin(tp) in (typing.Union, types.UnionType) else (tp,)
    if float in args and isinstance(value, int) and not isinstance(value, bool) \
            and int not in args:
        return float(value)
    return value


def parse_section(cls, data, section):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError(f"expected a mapping, got {type(data).__name__}", section)
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ScenarioError(f"unknown keys {unknown}", section)
    kwargs = {}
    for key, value in data.items():
        if not _accepts(hints[key], value):
            raise ScenarioError(f"key {key!r}: {value!r} is not a valid {hints[key]}", section)
        kwargs[key] = _coerce(hints[key], value)
    return cls(**kwargs)


TOP_LEVEL = {"schema_version", "seed", "circuit", "input", "solver", "experiment", "outputs"}


def from_dict(doc: dict, path=None) -> ScenarioConfig:
    try:
        if not isinstance(doc, dict):
            raise ScenarioError("scenario must be a mapping")
        unknown = sorted(set(doc) - TOP_LEVEL)
        if unknown:
            raise ScenarioError(f"unknown top-level keys {unknown}")
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ScenarioError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
        seed = doc.get("seed", 0)
        if not (isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2 ** 64):
            raise ScenarioError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
        exp = doc.get("experiment")
        if not isinstance(exp, dict) or exp.get("kind") not in EXPERIMENTS:
            raise ScenarioError(f"experiment.kind must be one of {sorted(EXPERIMENTS)}",
                                "experiment")
        return ScenarioConfig(
            experiment=parse_section(EXPERIMENTS[exp["kind"]], exp, "experiment"),
            circuit=parse_section(CircuitSection, doc.get("circuit"), "circuit"),
            input=parse_section(InputSection, doc.get("input"), "input"),
            solver=parse_section(SolverSection, doc.get("solver"), "solver"),
            outputs=parse_section(OutputsSection, doc.get("outputs"), "outputs"),
            seed=seed, schema_version=version)
    except ScenarioError as exc:
        if path is not None and exc.path is None:
            raise ScenarioError(exc.message, exc.section, path) from None
        raise


def loads(text: str, path=None) -> ScenarioConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"not valid YAML: {exc}", path=path) from None
    return from_dict(doc, path)


def load(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read: {exc}", path=str(p)) from None
    return loads(text, str(p))
