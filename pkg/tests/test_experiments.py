import numpy as np
import pytest

from mixedfeedback.analysis import raster_csv
from mixedfeedback.experiments import ReliabilityConfig, _trial_seeds, reliability_experiment
from mixedfeedback.stimuli import constant, ornstein_uhlenbeck, step, triangle

SMALL = ReliabilityConfig(n_trials=6, horizon=100.0)


def test_reliability_is_deterministic():
    a = reliability_experiment(SMALL)
    b = reliability_experiment(SMALL)
    for block in ("step", "frozen"):
        assert raster_csv(a.rasters[block]) == raster_csv(b.rasters[block])
    assert a.summary() == b.summary()


def test_seed_changes_trial_noise():
    from dataclasses import replace
    a = reliability_experiment(SMALL)
    b = reliability_experiment(replace(SMALL, seed=1))
    assert raster_csv(a.rasters["step"]) != raster_csv(b.rasters["step"])


def test_trial_seeds_are_distinct_streams():
    ou, init, seeds = _trial_seeds(0, 25)
    assert len(set(seeds)) == 25 and ou not in seeds


def test_result_summary_keys():
    res = reliability_experiment(SMALL)
    s = res.summary()
    assert s["step_n_trials"] == 6 and s["frozen_n_trials"] == 6
    assert s["jitter_ratio"] == pytest.approx(res.frozen.jitter / res.step.jitter)


def test_pooled_threshold_option():
    from dataclasses import replace
    res = reliability_experiment(replace(SMALL, threshold=None))
    assert all(len(tr) > 0 for tr in res.rasters["step"])


# stimuli


def test_step_and_constant():
    s = step(2.0, 10, 0.5, t_on=1.0, baseline=-1.0, t_off=3.0)
    assert list(s.samples) == [-1, -1, 2, 2, 2, 2, -1, -1, -1, -1]
    assert np.all(constant(0.3, 5, 0.1).samples == 0.3)


def test_triangle_endpoints():
    u = triangle(-1.0, 1.0, 11, 1.0).samples
    assert u[0] == -1.0 and u[5] == 1.0 and u[-1] == -1.0


def test_ou_statistics():
    # exact discretization: stationary std and lag-one correlation exp(-dt/tau)
    x = ornstein_uhlenbeck(400000, 0.01, 2.0, 1.5, seed=1).samples
    assert np.std(x) == pytest.approx(1.5, rel=0.05)
    rho = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert rho == pytest.approx(np.exp(-0.01 / 2.0), abs=1e-3)
    assert np.array_equal(x, ornstein_uhlenbeck(400000, 0.01, 2.0, 1.5, seed=1).samples)


def test_ou_validation():
    with pytest.raises(ValueError):
        ornstein_uhlenbeck(10, 0.1, 0.0, 1.0, 0)
