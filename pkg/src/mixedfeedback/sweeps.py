"""Behavior maps over circuit parameters (neuromodulation experiments)."""
from __future__ import annotations

import hashlib
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .analysis import Behavior, classify_behavior, detect_spikes, phase_difference
from .circuits import as_network, circuit_to_dict, get_parameter, set_parameter
from .operators import ConfigError
from .solvers import BlowUpError, SimConfig, simulate
from .stimuli import constant

FAILED = "failed"


@dataclass(frozen=True)
class ClassifierSettings:
    threshold: float | None = None
    refractory: float = 0.2
    transient: float = 0.25


@dataclass(frozen=True)
class SweepSpec:
    """Grid of parameter values applied to a circuit template.

    ``params`` is a sequence of ``(path, values)`` with dotted paths as
    understood by ``circuits.set_parameter``.  ``drive`` is a constant level
    shared by all nodes or one level per node.  ``transient`` is the
    fraction of the horizon discarded before classification.
    """

    template: object
    params: tuple
    sim: SimConfig = SimConfig(0.01, 4000.0)
    drive: float | tuple = 0.0
    classifier: ClassifierSettings = ClassifierSettings()

    def __post_init__(self):
        params = tuple((str(p), tuple(float(v) for v in vals)) for p, vals in self.params)
        object.__setattr__(self, "params", params)
        for path, vals in params:
            if not vals or not all(math.isfinite(v) for v in vals):
                raise ConfigError(f"grid for {path!r} must be nonempty and finite")
            try:
                get_parameter(self.template, path)
            except (KeyError, AttributeError, IndexError, ValueError) as exc:
                raise ConfigError(f"parameter path {path!r} does not resolve: {exc}") from exc

    @property
    def grid(self):
        return list(itertools.product(*(vals for _, vals in self.params)))

    def to_dict(self):
        sim = self.sim
        return {
            "template": circuit_to_dict(self.template),
            "params": [[p, list(v)] for p, v in self.params],
            "sim": {"dt": sim.dt, "horizon": sim.horizon, "method": sim.method.value,
                    "noise": None if sim.noise is None else
                    {"std": sim.noise.std, "seed": sim.noise.seed}},
            "drive": list(self.drive) if isinstance(self.drive, tuple) else self.drive,
            "classifier": {"threshold": self.classifier.threshold,
                           "refractory": self.classifier.refractory,
                           "transient": self.classifier.transient},
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class Cell:
    coords: tuple
    node_classes: tuple
    network_class: str
    failed: bool = False
    detail: str = ""


@dataclass
class BehaviorMap:
    param_names: tuple
    node_names: tuple
    cells: list
    seed: int | None
    config_hash: str
    meta: dict = field(default_factory=dict)

    def __getitem__(self, coords) -> Cell:
        coords = tuple(float(c) for c in coords)
        for c in self.cells:
            if c.coords == coords:
                return c
        raise KeyError(coords)

    def to_csv(self) -> str:
        buf = io.StringIO()
        header = list(self.param_names) + [f"class_{n}" for n in self.node_names]
        buf.write(",".join(header + ["network_class", "failed"]) + "\n")
        for c in self.cells:
            row = [f"{v:.12g}" for v in c.coords] + list(c.node_classes)
            row += [c.network_class, "1" if c.failed else "0"]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def hash(self) -> str:
        return hashlib.sha256(self.to_csv().encode()).hexdigest()

    def to_svg(self, cell_size=24) -> str:
        """Heat map of the network class over the first one or two parameters."""
        colors = {"quiescent": "#dddddd", "spiking": "#6baed6", "bursting": "#e6550d",
                  "antiphase": "#31a354", "in-phase": "#756bb1", "locked": "#fdae6b",
                  "partial": "#9e9ac8", FAILED: "#000000"}
        xs = sorted({c.coords[0] for c in self.cells})
        ys = sorted({c.coords[1] for c in self.cells}) if len(self.param_names) > 1 else [0.0]
        w, h = cell_size * len(xs) + 20, cell_size * len(ys) + 40
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">']
        for c in self.cells:
            i = xs.index(c.coords[0])
            j = ys.index(c.coords[1]) if len(self.param_names) > 1 else 0
            fill = colors.get(c.network_class, "#ffffff")
            out.append(f'<rect x="{10 + i * cell_size}" y="{10 + j * cell_size}" '
                       f'width="{cell_size}" height="{cell_size}" fill="{fill}">'
                       f"<title>{c.coords}: {c.network_class}</title></rect>")
        out.append(f'<text x="10" y="{h - 8}" font-size="11">{self.param_names[0]}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _network_class(classes, trains):
    active = [c not in (Behavior.QUIESCENT.value,) for c in classes]
    if not any(active):
        return Behavior.QUIESCENT.value
    if len(classes) == 1:
        return classes[0]
    if not all(active):
        return "partial"
    if len(classes) == 2:
        try:
            phi = phase_difference(trains[0], trains[1])
        except ValueError:
            return "partial"
        if abs(phi - math.pi) < 0.5:
            return "antiphase"
        if min(phi, 2 * math.pi - phi) < 0.5:
            return "in-phase"
        return "locked"
    return "active"


def _drives(spec, n_nodes, N, dt):
    levels = spec.drive if isinstance(spec.drive, tuple) else (spec.drive,) * n_nodes
    if len(levels) != n_nodes:
        raise ConfigError(f"drive has {len(levels)} levels for {n_nodes} nodes")
    return [constant(x, N, dt) for x in levels]


def run_cell(spec: SweepSpec, coords) -> Cell:
    """Simulate and classify one grid point (independent of every other cell)."""
    circuit = spec.template
    for (path, _), v in zip(spec.params, coords):
        circuit = set_parameter(circuit, path, float(v))
    net = as_network(circuit)
    names = [c.name for c in net.nodes]
    cfg = spec.sim
    N = cfg.n_steps
    coords = tuple(float(c) for c in coords)
    try:
        rep = simulate(circuit, _drives(spec, len(names), N, cfg.dt), cfg)
    except BlowUpError as exc:
        return Cell(coords, (FAILED,) * len(names), FAILED, True, str(exc))
    start = int(spec.classifier.transient * N)
    single = len(names) == 1
    trains, classes = [], []
    for name in names:
        V = rep["V" if single else f"{name}.V"]
        tail = V.with_samples(V.samples[start:])
        tr = detect_spikes(tail, spec.classifier.threshold, spec.classifier.refractory,
                           t_offset=start * cfg.dt)
        trains.append(tr)
        classes.append(classify_behavior(tr).label.value)
    return Cell(coords, tuple(classes), _network_class(classes, trains))


def run_sweep(spec: SweepSpec, threads: int = 1) -> BehaviorMap:
    """Evaluate every grid point; rows follow grid order whatever the thread count."""
    grid = spec.grid
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(lambda c: run_cell(spec, c), grid))
    else:
        cells = [run_cell(spec, c) for c in grid]
    names = tuple(c.name for c in as_network(spec.template).nodes)
    seed = spec.sim.noise.seed if spec.sim.noise is not None else None
    return BehaviorMap(tuple(p for p, _ in spec.params), names, cells, seed, spec.config_hash(),
                       {"n_cells": len(cells), "n_failed": sum(c.failed for c in cells)})


def transition_points(bmap: BehaviorMap, node: int = 0):
    """Consecutive grid points (first parameter) where a node's class changes."""
    out = []
    for a, b in zip(bmap.cells[:-1], bmap.cells[1:]):
        if a.node_classes[node] != b.node_classes[node]:
            out.append((a.coords[0], b.coords[0], a.node_classes[node], b.node_classes[node]))
    return out
