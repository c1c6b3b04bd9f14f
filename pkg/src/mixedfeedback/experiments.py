"""Scenario drivers built from the engines: spike-timing reliability."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import stimuli
from .analysis import ReliabilityMetrics, detect_spikes, reliability_metrics
from .circuits import OnePortCircuit, build_spiker
from .solvers import NoiseConfig, SimConfig, simulate


@dataclass(frozen=True)
class ReliabilityConfig:
    """Repeated trials of one cell under a step and under a frozen OU current.

    Trial-to-trial variability: independent additive current noise of
    intensity ``trial_noise`` and a uniform initial-voltage perturbation of
    half-width ``v_init_jitter``.  The OU current is the same in every trial.
    ``threshold=None`` uses one threshold per block: the midpoint of the
    median and the maximum of all its voltage traces pooled.
    """

    n_trials: int = 25
    dt: float = 0.01
    horizon: float = 300.0
    step_level: float = 0.5
    ou_std: float = 1.0
    ou_tau: float = 2.0
    trial_noise: float = 0.005
    v_init_jitter: float = 0.3
    alignment_window: float = 3.0
    threshold: float | None = -0.3
    refractory: float = 2.0
    seed: int = 0


@dataclass
class ReliabilityResult:
    step: ReliabilityMetrics
    frozen: ReliabilityMetrics
    rasters: dict = field(repr=False)

    @property
    def jitter_ratio(self) -> float:
        return self.frozen.jitter / self.step.jitter

    def summary(self) -> dict:
        out = {f"step_{k}": v for k, v in self.step.summary().items()}
        out.update({f"frozen_{k}": v for k, v in self.frozen.summary().items()})
        out["jitter_ratio"] = self.jitter_ratio
        return out


def _trial_seeds(seed, n):
    ss = np.random.SeedSequence(seed)
    ou, init, *trials = ss.spawn(n + 2)
    return (int(ou.generate_state(1)[0]),
            np.random.default_rng(init),
            [int(s.generate_state(1)[0]) for s in trials])


def run_trials(cell: OnePortCircuit, I_ext, cfg: ReliabilityConfig, seeds, v_offsets):
    traces = []
    for s, dv in zip(seeds, v_offsets):
        sim = SimConfig(cfg.dt, cfg.horizon, noise=NoiseConfig(cfg.trial_noise, s),
                        initial_state={"V": cell.v0 + float(dv)})
        traces.append(simulate(cell, I_ext, sim).V)
    thr = cfg.threshold
    if thr is None:
        pooled = np.concatenate([V.samples for V in traces])
        thr = 0.5 * (float(np.median(pooled)) + float(pooled.max()))
    return [detect_spikes(V, thr, cfg.refractory) for V in traces]


def reliability_experiment(cfg: ReliabilityConfig = ReliabilityConfig(),
                           cell: OnePortCircuit | None = None) -> ReliabilityResult:
    """Step block and frozen-noise block with identical trial variability.

    Both blocks reuse the same per-trial noise seeds and initial perturbations,
    so the only difference between them is the input waveform.
    """
    cell = cell or build_spiker()
    n = int(round(cfg.horizon / cfg.dt))
    ou_seed, init_rng, seeds = _trial_seeds(cfg.seed, cfg.n_trials)
    offsets = cfg.v_init_jitter * init_rng.uniform(-1, 1, cfg.n_trials)
    step = stimuli.constant(cfg.step_level, n, cfg.dt)
    frozen = step + stimuli.ornstein_uhlenbeck(n, cfg.dt, cfg.ou_tau, cfg.ou_std, ou_seed).samples
    ra = run_trials(cell, step, cfg, seeds, offsets)
    rb = run_trials(cell, frozen, cfg, seeds, offsets)
    return ReliabilityResult(reliability_metrics(ra, cfg.alignment_window),
                             reliability_metrics(rb, cfg.alignment_window),
                             {"step": ra, "frozen": rb})
