"""``mixedfeedback`` command line: run declarative scenarios.

Exit status: 0 success, 2 invalid scenario, 3 required convergence not
reached, 4 runtime failure.  Outputs are written only after the experiment
has finished, each through a temporary file renamed into place.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import config as C
from . import stimuli
from .analysis import classify_behavior, detect_spikes, raster_csv, raster_svg
from .circuits import (BursterParams, HCOParams, NetworkCircuit, ParameterError, as_network,
                       build_burster, build_fhn, build_hco, build_rc_network, build_spiker,
                       circuit_from_dict, decompose)
from .estimation import ConductanceModel, ObserverConfig, contracting_observer, rls_estimate
from .experiments import ReliabilityConfig, reliability_experiment
from .motor import MotorPlant, SpikingController, motor_demo, proportional_baseline
from .operators import (ConfigError, NonConvergenceError, hysteresis_trace, jump_points,
                        mixed_amplifier_characteristic, multivalued_interval)
from .solvers import (BlowUpError, DCSolveConfig, NoiseConfig, SimConfig, continuation_solve,
                      dc_solve, fhn_splitting, format_summary, simulate)
from .sweeps import ClassifierSettings, SweepSpec, run_sweep, transition_points

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_RUNTIME = 0, 2, 3, 4

DEFAULT_CELL = {"simulate": "fhn", "dc-solve": "fhn", "reliability": "spiker", "sweep": "hco",
                "estimate": "spiker", "amplifier": None, "motor": "spiker"}

INVALID = (C.ScenarioError, ConfigError, ParameterError)


class NotConverged(Exception):
    def __init__(self, message, files, summary):
        super().__init__(message)
        self.files, self.summary = files, summary


# ------------------------------------------------------------- building


def _strict(cls, params, what):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(params) - names)
    if unknown:
        raise C.ScenarioError(f"unknown {what} parameters {unknown}", "circuit")
    return cls(**params)


def build_circuit(sec: C.CircuitSection, kind: str):
    builder = sec.builder or DEFAULT_CELL[kind]
    p = dict(sec.params)
    if builder != "explicit" and sec.explicit is not None:
        raise C.ScenarioError("'explicit' is only read with builder: explicit", "circuit")
    try:
        if builder == "fhn":
            allowed = {"C", "L", "R", "k", "V_init"}
            if set(p) - allowed:
                raise C.ScenarioError(f"unknown fhn parameters {sorted(set(p) - allowed)}",
                                      "circuit")
            return build_fhn(**p)
        if builder in ("burster", "spiker"):
            params = _strict(BursterParams, p, builder)
            return (build_burster if builder == "burster" else build_spiker)(params)
        if builder == "hco":
            a = _strict(BursterParams, p.pop("a", {}), "hco node 'a'")
            b = _strict(BursterParams, p.pop("b", {}), "hco node 'b'")
            hp = _strict(HCOParams, p, "hco")
            return build_hco(build_burster(a, name="A", V_init=hp.V_init_a),
                             build_burster(b, name="B", V_init=hp.V_init_b), params=hp)
        if builder == "rc_network":
            allowed = {"n", "C", "g_leak", "V_leak", "gap_junctions"}
            if set(p) - allowed or "n" not in p:
                raise C.ScenarioError("rc_network takes n (required), C, g_leak, V_leak, "
                                      "gap_junctions", "circuit")
            return build_rc_network(**p)
        if builder == "explicit":
            if sec.explicit is None or p:
                raise C.ScenarioError("builder explicit needs 'explicit' and no 'params'",
                                      "circuit")
            return circuit_from_dict(sec.explicit)
    except (TypeError, KeyError, ValueError) as exc:
        if isinstance(exc, C.ScenarioError):
            raise
        raise C.ScenarioError(f"cannot build {builder!r}: {exc}", "circuit") from exc
    raise C.ScenarioError(f"unknown builder {builder!r}", "circuit")


def build_input(sec: C.InputSection, n_nodes: int, N: int, dt: float, seed: int):
    levels = sec.per_node if sec.per_node is not None else [sec.level] * n_nodes
    if len(levels) != n_nodes:
        raise C.ScenarioError(f"per_node has {len(levels)} levels for {n_nodes} nodes", "input")

    def one(level):
        if sec.kind == "none":
            return stimuli.constant(0.0, N, dt)
        if sec.kind == "constant":
            return stimuli.constant(level, N, dt)
        if sec.kind == "step":
            return stimuli.step(level, N, dt, sec.t_on, sec.baseline, sec.t_off)
        if sec.kind == "triangle":
            return stimuli.triangle(sec.low, sec.high, N, dt, name="I_ext")
        if sec.kind == "ou":
            return stimuli.ornstein_uhlenbeck(N, dt, sec.ou_tau, sec.ou_std, seed, mean=level,
                                              name="I_ext")
        raise C.ScenarioError(f"unknown input kind {sec.kind!r}", "input")

    signals = [one(x) for x in levels]
    return signals[0] if n_nodes == 1 else signals


def sim_config(cfg: C.ScenarioConfig) -> SimConfig:
    s = cfg.solver
    try:
        noise = NoiseConfig(s.noise_std, cfg.seed) if s.noise_std > 0 else None
        return SimConfig(s.dt, s.horizon, s.method, noise, s.initial_state)
    except ValueError as exc:
        raise C.ScenarioError(str(exc), "solver") from exc


def dc_config(cfg: C.ScenarioConfig, require: bool) -> DCSolveConfig:
    s = cfg.solver
    try:
        return DCSolveConfig(s.outer_tol, s.inner_tol, s.max_outer, s.damping,
                             s.continuation_steps, require)
    except ValueError as exc:
        raise C.ScenarioError(str(exc), "solver") from exc


# ---------------------------------------------------------- experiments
# Each prepare_* validates everything and returns a thunk that runs the
# experiment and returns (files, summary).


def _node_names(circuit):
    return [n.name for n in as_network(circuit).nodes]


def prepare_simulate(cfg, threads):
    ex = cfg.experiment
    circuit = build_circuit(cfg.circuit, "simulate")
    sim = sim_config(cfg)
    names = _node_names(circuit)
    I = build_input(cfg.input, len(names), sim.n_steps, sim.dt, cfg.seed)

    def go():
        rep = simulate(circuit, I, sim)
        summary = {"experiment": "simulate", "n_samples": sim.n_steps,
                   "stiff": rep.diagnostics["stiff"]}
        start = int(ex.transient * sim.n_steps)
        for name in names:
            key = "V" if len(names) == 1 else f"{name}.V"
            V = rep[key]
            tr = detect_spikes(V.with_samples(V.samples[start:]), ex.threshold, ex.refractory,
                               t_offset=start * sim.dt)
            tag = "" if len(names) == 1 else f"{name}."
            summary[f"{tag}n_spikes"] = len(tr)
            summary[f"{tag}behavior"] = classify_behavior(tr).label.value
            if len(tr) >= 2:
                summary[f"{tag}mean_period"] = float(np.mean(tr.isi))
        return {"trajectory.csv": rep.to_csv()}, summary

    return go


def prepare_dc_solve(cfg, threads):
    ex = cfg.experiment
    circuit = build_circuit(cfg.circuit, "dc-solve")
    if isinstance(circuit, NetworkCircuit):
        raise C.ScenarioError("dc-solve works on one-port circuits", "circuit")
    sim = sim_config(cfg)
    dcc = dc_config(cfg, False)  # exit 3 is decided below, after outputs are written
    I = build_input(cfg.input, 1, sim.n_steps, sim.dt, cfg.seed)
    names = {b.name for b in circuit.branches}
    if {"cubic", "I_L"} <= names:
        P, C1, C2_at_k = fhn_splitting(circuit)
        k_circuit = circuit.branch("cubic").element.k
    else:
        if ex.k_target is not None:
            raise C.ScenarioError("k_target applies to FitzHugh-Nagumo circuits only",
                                  "experiment")
        P, mixed = decompose(circuit)
        C1, C2_at_k, k_circuit = mixed.positive, (lambda k: mixed.negative), None

    def go():
        if ex.k_target is not None:
            rep = continuation_solve(P, C1, C2_at_k, I, ex.k_target, dcc)
        else:
            rep = dc_solve(P, C1, C2_at_k(k_circuit), I, None, dcc)
        hist = "iteration,gap\n" + "".join(f"{i + 1},{g:.12g}\n"
                                           for i, g in enumerate(rep.residual_history))
        summary = {"experiment": "dc-solve", **rep.summary()}
        files = {"trajectory.csv": rep.to_csv(), "residuals.csv": hist}
        if ex.require_convergence and not rep.converged:
            raise NotConverged("dc-solve did not converge", files, summary)
        return files, summary

    return go


def prepare_reliability(cfg, threads):
    ex = cfg.experiment
    cell = build_circuit(cfg.circuit, "reliability")
    if isinstance(cell, NetworkCircuit):
        raise C.ScenarioError("reliability runs on a one-port cell", "circuit")
    opts = {f.name: getattr(ex, f.name) for f in dataclasses.fields(ex) if f.name != "kind"}
    try:
        rc = ReliabilityConfig(dt=cfg.solver.dt, horizon=cfg.solver.horizon, seed=cfg.seed, **opts)
    except ValueError as exc:
        raise C.ScenarioError(str(exc), "experiment") from exc
    if rc.n_trials < 2:
        raise C.ScenarioError("reliability needs n_trials >= 2", "experiment")

    def go():
        res = reliability_experiment(rc, cell)
        files = {"raster_step.csv": raster_csv(res.rasters["step"]),
                 "raster_frozen.csv": raster_csv(res.rasters["frozen"])}
        if cfg.outputs.svg:
            for block in ("step", "frozen"):
                files[f"raster_{block}.svg"] = raster_svg(res.rasters[block], rc.horizon,
                                                          title=block)
        return files, {"experiment": "reliability", **res.summary()}

    return go


def _grid(entry):
    if not isinstance(entry, dict) or "path" not in entry:
        raise C.ScenarioError("each sweep parameter needs 'path' and 'values' (or start, stop, "
                              "num)", "experiment")
    extra = set(entry) - {"path", "values", "start", "stop", "num"}
    if extra:
        raise C.ScenarioError(f"unknown sweep parameter keys {sorted(extra)}", "experiment")
    if "values" in entry:
        return entry["path"], list(entry["values"])
    try:
        return entry["path"], list(np.linspace(entry["start"], entry["stop"], int(entry["num"])))
    except KeyError as exc:
        raise C.ScenarioError(f"sweep parameter missing {exc}", "experiment") from None


def prepare_sweep(cfg, threads):
    ex = cfg.experiment
    template = build_circuit(cfg.circuit, "sweep")
    if not ex.params:
        raise C.ScenarioError("sweep needs at least one parameter", "experiment")
    drive = tuple(ex.drive) if isinstance(ex.drive, list) else ex.drive
    try:
        spec = SweepSpec(template, tuple(_grid(e) for e in ex.params), sim_config(cfg), drive,
                         ClassifierSettings(ex.threshold, ex.refractory, ex.transient))
    except ValueError as exc:
        if isinstance(exc, C.ScenarioError):
            raise
        raise C.ScenarioError(str(exc), "experiment") from exc

    def go():
        bmap = run_sweep(spec, threads)
        files = {"behavior_map.csv": bmap.to_csv()}
        if cfg.outputs.svg:
            files["behavior_map.svg"] = bmap.to_svg()
        summary = {"experiment": "sweep", "n_cells": len(bmap.cells),
                   "n_failed": bmap.meta["n_failed"], "config_hash": bmap.config_hash,
                   "map_hash": bmap.hash()}
        for i, name in enumerate(bmap.node_names):
            summary[f"{name}.transitions"] = ";".join(
                f"{a:g}->{b:g}:{ca}->{cb}" for a, b, ca, cb in transition_points(bmap, i))
        return files, summary

    return go


def prepare_estimate(cfg, threads):
    ex = cfg.experiment
    circuit = build_circuit(cfg.circuit, "estimate")
    if isinstance(circuit, NetworkCircuit):
        raise C.ScenarioError("estimate runs on a one-port cell", "circuit")
    sim = sim_config(cfg)
    unknown = ex.unknown or [b.name for b in circuit.branches][:2]
    try:
        model = ConductanceModel(circuit, tuple(unknown))
        oc = ObserverConfig(0.0 if ex.observer_gain is None else ex.observer_gain,
                            ex.forgetting, ex.cov_scale, tuple(ex.theta_init),
                            ex.derivative_filter_tau)
    except (KeyError, ValueError) as exc:
        raise C.ScenarioError(str(exc), "experiment") from exc
    I = build_input(cfg.input, 1, sim.n_steps, sim.dt, cfg.seed)

    def go():
        V = simulate(circuit, I, sim).V
        rep = rls_estimate(model, I, V, oc)
        summary = {"experiment": "estimate", "unknown": ";".join(model.unknown),
                   **rep.summary()}
        if ex.observer_gain is not None:
            V_hat = contracting_observer(circuit, I, V, ex.observer_gain,
                                         ex.observer_initial_state)
            span = float(np.ptp(V.samples)) or 1.0
            summary["observer_terminal_error"] = abs(V_hat.samples[-1] - V.samples[-1]) / span
        return {"estimate.csv": rep.to_csv()}, summary

    return go


def prepare_amplifier(cfg, threads):
    ex = cfg.experiment
    if ex.n_samples < 3 or not ex.g > 0:
        raise C.ScenarioError("amplifier needs g > 0 and n_samples >= 3", "experiment")
    if ex.sign not in ("positive", "negative"):
        raise C.ScenarioError("sign must be 'positive' or 'negative'", "experiment")
    sweep = stimuli.triangle(ex.u_low, ex.u_high, ex.n_samples, 1.0)
    u = sweep.samples

    def go():
        interval = multivalued_interval(ex.g, ex.k, ex.sign)
        summary = {"experiment": "amplifier", "g": ex.g, "k": ex.k, "sign": ex.sign,
                   "hysteresis": interval is not None}
        if interval is None:
            y = np.array([mixed_amplifier_characteristic(ex.g, ex.k, ex.sign, x).values[0]
                          for x in u])
        else:
            y = hysteresis_trace(ex.g, ex.k, ex.sign, sweep).samples
            summary["interval_low"], summary["interval_high"] = interval
            jumps = jump_points(sweep, sweep.with_samples(y))
            summary["jumps"] = ";".join(f"{d}@{x:.6g}" for x, d in jumps)
        csv = "u,y\n" + "".join(f"{a:.12g},{b:.12g}\n" for a, b in zip(u, y))
        return {"trace.csv": csv}, summary

    return go


def prepare_motor(cfg, threads):
    ex = cfg.experiment
    cell = build_circuit(cfg.circuit, "motor")
    if isinstance(cell, NetworkCircuit):
        raise C.ScenarioError("the motor controller is a one-port cell", "circuit")
    if any((not isinstance(r, (int, float))) or r < 0 for r in ex.references):
        raise C.ScenarioError("references must be nonnegative numbers", "experiment")
    try:
        plant = MotorPlant(ex.J, ex.b, ex.k_t, ex.c)
        ctrl = SpikingController(cell, ex.bias, ex.gain, ex.input_max, ex.threshold,
                                 ex.pulse_amplitude, ex.pulse_width)
        sim = SimConfig(cfg.solver.dt, cfg.solver.horizon)
    except ValueError as exc:
        raise C.ScenarioError(str(exc), "experiment") from exc

    def go():
        rows = ["reference,mean_speed,spike_rate,stalled,tracking_error,"
                "baseline_mean_speed,baseline_stalled"]
        summary = {"experiment": "motor"}
        for r in ex.references:
            s = motor_demo(float(r), ctrl, plant, sim, ex.window)
            b = proportional_baseline(float(r), ex.Kp, plant, sim, ex.window)
            rows.append(f"{r:.12g},{s.mean_speed:.12g},{s.spike_rate:.12g},{int(s.stalled)},"
                        f"{s.tracking_error:.12g},{b.mean_speed:.12g},{int(b.stalled)}")
            tag = f"ref_{r:g}"
            summary.update({f"{tag}.mean_speed": s.mean_speed, f"{tag}.spike_rate": s.spike_rate,
                            f"{tag}.stalled": s.stalled, f"{tag}.baseline_stalled": b.stalled})
        return {"motor.csv": "\n".join(rows) + "\n"}, summary

    return go


PREPARE = {"simulate": prepare_simulate, "dc-solve": prepare_dc_solve,
           "reliability": prepare_reliability, "sweep": prepare_sweep,
           "estimate": prepare_estimate, "amplifier": prepare_amplifier, "motor": prepare_motor}


# ---------------------------------------------------------------- output


def write_atomic(out_dir: Path, files: dict):
    """Write every file to a temporary sibling, then rename them all into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.", suffix=".tmp")
            staged.append((tmp, out_dir / name))
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, dest in staged:
        os.replace(tmp, dest)
    return [dest for _, dest in staged]


def _emit(cfg, files, summary, out=sys.stdout):
    prefix = cfg.outputs.prefix
    named = {f"{prefix}_{k}": v for k, v in files.items()}
    named[f"{prefix}_summary.txt"] = format_summary(summary)
    named[f"{prefix}_scenario.yaml"] = cfg.dumps()
    written = write_atomic(Path(cfg.outputs.dir), named)
    summary = dict(summary, outputs=";".join(str(p) for p in written))
    out.write(format_summary(summary))


def _fail(code, path, section, exc, err=sys.stderr):
    if isinstance(exc, C.ScenarioError):
        section, exc = exc.section or section, exc.message
    err.write(f"error: {C.ScenarioError(str(exc), section or 'scenario', path)}\n")
    return code


def run(config_path, command=None, out_dir=None, seed=None, threads=1,
        out=None, err=None) -> int:
    """Validate, execute and write one scenario; returns the exit status."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        cfg = C.load(config_path)
        if seed is not None and not 0 <= seed < 2 ** 64:
            raise C.ScenarioError(f"seed must be an unsigned 64-bit integer, got {seed}")
        cfg = cfg.with_overrides(seed, out_dir)
        if command not in (None, "validate") and command != cfg.kind:
            raise C.ScenarioError(f"scenario is a {cfg.kind!r} experiment, not {command!r}",
                                  "experiment")
        if threads < 1:
            raise C.ScenarioError("--threads must be >= 1")
        go = PREPARE[cfg.kind](cfg, threads)
    except INVALID as exc:
        return _fail(EXIT_INVALID, config_path, getattr(exc, "section", None), exc, err)
    if command == "validate":
        out.write(format_summary({"valid": True, "experiment": cfg.kind}))
        return EXIT_OK
    try:
        files, summary = go()
    except NotConverged as exc:
        _emit(cfg, exc.files, dict(exc.summary, status="not_converged"), out)
        return _fail(EXIT_NONCONVERGED, config_path, "solver", exc, err)
    except NonConvergenceError as exc:
        return _fail(EXIT_NONCONVERGED, config_path, "solver", exc, err)
    except INVALID as exc:
        return _fail(EXIT_INVALID, config_path, getattr(exc, "section", None) or "experiment",
                     exc, err)
    except (BlowUpError, ArithmeticError, RuntimeError, ValueError) as exc:
        return _fail(EXIT_RUNTIME, config_path, "experiment", exc, err)
    try:
        _emit(cfg, files, summary, out)
    except OSError as exc:
        return _fail(EXIT_RUNTIME, config_path, "outputs", exc, err)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mixedfeedback", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(PREPARE) + ["validate"]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--out-dir", help="overrides outputs.dir")
        p.add_argument("--seed", type=int, help="overrides the scenario seed")
        p.add_argument("--threads", type=int, default=1, help="workers for sweeps")
    args = parser.parse_args(argv)
    return run(args.config, args.command, args.out_dir, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
