"""Spike readout, rhythm classification, phase and reliability measures."""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .signals import Signal


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpikeTrain:
    times: np.ndarray
    horizon: float
    dt: float = 0.0

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        if t.size and (np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] > self.horizon):
            raise ValueError("spike times must be strictly increasing within [0, horizon]")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    def __len__(self):
        return self.times.size

    @property
    def isi(self) -> np.ndarray:
        return np.diff(self.times)

    def rescaled(self, factor) -> "SpikeTrain":
        return SpikeTrain(self.times * factor, self.horizon * factor, self.dt * factor)

    def window(self, t0, t1) -> "SpikeTrain":
        t = self.times
        return SpikeTrain(t[(t >= t0) & (t <= t1)], self.horizon, self.dt)


class Behavior(str, enum.Enum):
    QUIESCENT = "quiescent"
    SPIKING = "spiking"
    BURSTING = "bursting"


@dataclass(frozen=True)
class BehaviorClass:
    label: Behavior
    evidence: dict = field(default_factory=dict, compare=False)

    def __eq__(self, other):
        if isinstance(other, (Behavior, str)):
            return self.label == Behavior(other)
        if isinstance(other, BehaviorClass):
            return self.label == other.label
        return NotImplemented

    def __hash__(self):
        return hash(self.label)

    def __str__(self):
        return self.label.value


def default_threshold(V: Signal) -> float:
    """Midpoint between the resting level (median) and the maximum."""
    v = V.samples
    return 0.5 * (float(np.median(v)) + float(v.max()))


def detect_spikes(V: Signal, threshold: float | None = None, refractory: float = 0.0,
                  t_offset: float = 0.0) -> SpikeTrain:
    """Upward threshold crossings, linearly interpolated between samples.

    A crossing within ``refractory`` of the previous accepted spike is
    dropped.  ``t_offset`` is the time of the first sample.
    """
    if refractory < 0:
        raise ValueError("refractory must be nonnegative")
    thr = default_threshold(V) if threshold is None else threshold
    v = V.samples
    horizon = t_offset + (len(v) - 1) * V.dt if len(v) else t_offset
    idx = np.nonzero((v[:-1] < thr) & (v[1:] >= thr))[0]
    frac = (thr - v[idx]) / (v[idx + 1] - v[idx])
    cand = t_offset + (idx + frac) * V.dt
    out = []
    for t in cand:
        if not out or t - out[-1] >= refractory and t > out[-1]:
            out.append(t)
    return SpikeTrain(np.array(out), horizon, V.dt)


def segment_bursts(train: SpikeTrain, factor: float = 3.0) -> list[np.ndarray]:
    """Split spikes into bursts: an ISI longer than ``factor`` times the running
    median of the current burst's ISIs (the global median for the first ISI of a
    burst) starts a new burst.
    """
    t = train.times
    if t.size == 0:
        return []
    isi = np.diff(t)
    ref_global = float(np.median(isi)) if isi.size else 0.0
    bursts, current, current_isi = [], [t[0]], []
    for k, d in enumerate(isi):
        ref = float(np.median(current_isi)) if current_isi else ref_global
        if d > factor * ref:
            bursts.append(np.array(current))
            current, current_isi = [t[k + 1]], []
        else:
            current.append(t[k + 1])
            current_isi.append(d)
    bursts.append(np.array(current))
    return bursts


def classify_behavior(train: SpikeTrain, horizon: float | None = None) -> BehaviorClass:
    """Quiescent below 3 spikes; Bursting for a bimodal ISI distribution
    (max/min > 5, inter-burst gaps all longer than intra-burst ISIs) with at
    least two multi-spike bursts; Spiking otherwise.
    """
    n = len(train)
    ev = {"n_spikes": n, "horizon": train.horizon if horizon is None else horizon}
    if n < 3:
        return BehaviorClass(Behavior.QUIESCENT, ev)
    isi = train.isi
    bursts = segment_bursts(train)
    multi = [b for b in bursts if b.size >= 2]
    intra = np.concatenate([np.diff(b) for b in bursts if b.size >= 2]) if multi else np.array([])
    inter = np.array([b2[0] - b1[-1] for b1, b2 in zip(bursts[:-1], bursts[1:])])
    ratio = float(isi.max() / isi.min())
    ev.update(isi_min=float(isi.min()), isi_max=float(isi.max()), isi_ratio=ratio,
              n_bursts=len(multi),
              spikes_per_burst=float(np.mean([b.size for b in multi])) if multi else 0.0)
    bimodal = bool(inter.size and intra.size and inter.min() > intra.max())
    ev["bimodal"] = bimodal
    if len(multi) >= 2 and ratio > 5 and bimodal:
        return BehaviorClass(Behavior.BURSTING, ev)
    return BehaviorClass(Behavior.SPIKING, ev)


def burst_onsets(train: SpikeTrain) -> np.ndarray:
    """First spike of every multi-spike burst for bursting trains, else all spikes."""
    if classify_behavior(train).label == Behavior.BURSTING:
        return np.array([b[0] for b in segment_bursts(train) if b.size >= 2])
    return train.times.copy()


def phase_difference(train_a: SpikeTrain, train_b: SpikeTrain,
                     period_estimate: float | None = None) -> float:
    """Circular mean of onset offsets of ``b`` relative to the nearest onset of ``a``."""
    if len(train_a) == 0 or len(train_b) == 0:
        raise InsufficientDataError("phase needs two nonempty trains")
    oa, ob = burst_onsets(train_a), burst_onsets(train_b)
    if period_estimate is None:
        if oa.size < 2:
            raise InsufficientDataError("period estimate needs two onsets in train_a")
        period_estimate = float(np.median(np.diff(oa)))
    j = np.clip(np.searchsorted(oa, ob), 1, max(oa.size - 1, 1))
    left = oa[j - 1]
    right = oa[np.minimum(j, oa.size - 1)]
    nearest = np.where(np.abs(ob - left) <= np.abs(right - ob), left, right)
    ang = 2 * math.pi * (ob - nearest) / period_estimate
    mean = math.atan2(np.sin(ang).mean(), np.cos(ang).mean())
    phase = mean % (2 * math.pi)
    return 0.0 if math.isclose(phase, 2 * math.pi) else phase


@dataclass(frozen=True)
class ReliabilityMetrics:
    jitter: float
    event_count_consistency: float
    n_events: int
    n_consensus: int
    n_trials: int

    def summary(self) -> dict:
        return {"jitter": self.jitter, "event_count_consistency": self.event_count_consistency,
                "n_events": self.n_events, "n_consensus_events": self.n_consensus,
                "n_trials": self.n_trials}


def _events(rasters, window):
    pooled = sorted((t, k) for k, tr in enumerate(rasters) for t in tr.times)
    events, cur, start = [], {}, None
    for t, k in pooled:
        if start is not None and (t - start > window or k in cur):
            events.append(cur)
            cur, start = {}, None
        if start is None:
            start = t
        cur[k] = t
    if cur:
        events.append(cur)
    return events


def reliability_metrics(rasters, alignment_window: float) -> ReliabilityMetrics:
    """Spike-timing precision across repeated trials.

    Pooled spikes are swept in time order and grouped greedily: an event
    collects at most one spike per trial within ``alignment_window`` of its
    first spike.  Events present in at least half the trials are consensus
    events; jitter is the mean over them of the spread (population standard
    deviation) of their spike times, and consistency is the fraction of trials
    taking part in every consensus event.
    """
    rasters = list(rasters)
    n = len(rasters)
    if n < 2:
        raise InsufficientDataError("reliability needs at least two trials")
    events = _events(rasters, alignment_window)
    consensus = [e for e in events if len(e) >= math.ceil(n / 2)]
    if not consensus:
        return ReliabilityMetrics(math.inf, 0.0, len(events), 0, n)
    jitter = float(np.mean([np.std(list(e.values())) for e in consensus]))
    full = sum(all(k in e for e in consensus) for k in range(n))
    return ReliabilityMetrics(jitter, full / n, len(events), len(consensus), n)


# ------------------------------------------------------------------ output


def raster_csv(rasters) -> str:
    buf = io.StringIO()
    buf.write("trial,spike_time\n")
    for k, tr in enumerate(rasters):
        for t in tr.times:
            buf.write(f"{k},{t:.12g}\n")
    return buf.getvalue()


def raster_from_csv(text: str, horizon: float) -> list[SpikeTrain]:
    rows = [ln.split(",") for ln in text.strip().splitlines()[1:] if ln.strip()]
    n = 1 + max((int(k) for k, _ in rows), default=-1)
    times = [[] for _ in range(n)]
    for k, t in rows:
        times[int(k)].append(float(t))
    return [SpikeTrain(np.array(t), horizon) for t in times]


def raster_svg(rasters, horizon: float, width=800, row_height=8, title="") -> str:
    """One row per trial, one tick per spike."""
    rows = list(rasters)
    h = row_height * len(rows) + 30
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{h}">',
             f'<text x="4" y="14" font-size="12">{title}</text>']
    scale = (width - 20) / horizon
    for k, tr in enumerate(rows):
        y0 = 22 + k * row_height
        for t in tr.times:
            x = 10 + t * scale
            parts.append(f'<line x1="{x:.2f}" y1="{y0}" x2="{x:.2f}" y2="{y0 + row_height - 2}" '
                         'stroke="black" stroke-width="1"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
