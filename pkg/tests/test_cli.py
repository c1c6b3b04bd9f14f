import io
import os
import shutil
from pathlib import Path

import numpy as np
import pytest
import yaml

from mixedfeedback import cli

CONFIGS = Path(__file__).parent.parent / "configs"


def scenario(tmp_path, name, **sections):
    """Copy a shipped config with section-level overrides, outputs under tmp_path."""
    d = yaml.safe_load((CONFIGS / name).read_text())
    for sec, vals in sections.items():
        if isinstance(vals, dict) and isinstance(d.get(sec), dict):
            d[sec] = {**d[sec], **vals}
        else:
            d[sec] = vals
    d["outputs"] = {**d.get("outputs", {}), "dir": str(tmp_path / "out")}
    path = tmp_path / f"s_{name}"
    path.write_text(yaml.safe_dump(d))
    return path


def call(path, command, **kw):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(path, command, out=out, err=err, **kw)
    return code, out.getvalue(), err.getvalue()


def parse(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def test_simulate_writes_trajectory(tmp_path):
    path = scenario(tmp_path, "fhn_simulate.yaml", solver={"horizon": 400.0})
    code, out, err = call(path, "simulate")
    assert code == 0, err
    summary = parse(out)
    traj = tmp_path / "out" / "fhn_trajectory.csv"
    assert traj.read_text().splitlines()[0] == "t,V,I_L"
    data = np.loadtxt(traj, delimiter=",", skiprows=1)
    assert data.shape == (40000, 3)
    assert summary["experiment"] == "simulate" and int(summary["n_spikes"]) >= 1
    assert (tmp_path / "out" / "fhn_summary.txt").exists()
    assert yaml.safe_load((tmp_path / "out" / "fhn_scenario.yaml").read_text())["seed"] == 0


def test_unknown_key_exits_2_and_writes_nothing(tmp_path):
    path = scenario(tmp_path, "fhn_simulate.yaml", solver={"tolerance": 3})
    code, out, err = call(path, "simulate")
    assert code == 2 and out == ""
    assert str(path) in err and "section 'solver'" in err and "tolerance" in err
    assert not (tmp_path / "out").exists()


def test_bad_builder_param_names_circuit(tmp_path):
    path = scenario(tmp_path, "fhn_simulate.yaml", circuit={"builder": "fhn", "params": {"q": 1}})
    code, _, err = call(path, "simulate")
    assert code == 2 and "section 'circuit'" in err


def test_kind_mismatch_exits_2(tmp_path):
    path = scenario(tmp_path, "fhn_simulate.yaml")
    code, _, err = call(path, "sweep")
    assert code == 2 and "section 'experiment'" in err


def test_validate_writes_nothing(tmp_path):
    path = scenario(tmp_path, "reliability.yaml")
    code, out, _ = call(path, "validate")
    assert code == 0 and parse(out) == {"valid": "true", "experiment": "reliability"}
    assert not (tmp_path / "out").exists()


def test_reliability_rerun_is_byte_identical(tmp_path):
    path = scenario(tmp_path, "reliability.yaml", solver={"horizon": 120.0},
                    experiment={"n_trials": 8})
    outs = []
    for _ in range(2):
        code, _, err = call(path, "reliability")
        assert code == 0, err
        outs.append({p.name: p.read_bytes() for p in (tmp_path / "out").iterdir()})
    assert outs[0] == outs[1]
    assert {"rel_raster_step.csv", "rel_raster_frozen.csv", "rel_raster_step.svg"} <= set(outs[0])


def test_seed_override(tmp_path):
    path = scenario(tmp_path, "reliability.yaml", solver={"horizon": 120.0},
                    experiment={"n_trials": 4})
    call(path, "reliability", out_dir=str(tmp_path / "s0"))
    call(path, "reliability", out_dir=str(tmp_path / "s5"), seed=5)
    a = (tmp_path / "s0" / "rel_raster_step.csv").read_text()
    b = (tmp_path / "s5" / "rel_raster_step.csv").read_text()
    assert a != b
    assert yaml.safe_load((tmp_path / "s5" / "rel_scenario.yaml").read_text())["seed"] == 5


@pytest.mark.parametrize("seed", [-1, 2 ** 64])
def test_out_of_range_seed(tmp_path, seed):
    code, _, err = call(scenario(tmp_path, "fhn_simulate.yaml"), "simulate", seed=seed)
    assert code == 2 and "seed" in err


def test_threads_must_be_positive(tmp_path):
    code, _, _ = call(scenario(tmp_path, "burster_sweep.yaml"), "sweep", threads=0)
    assert code == 2


def test_nonconvergence_exits_3(tmp_path):
    path = scenario(tmp_path, "fhn_dc_solve.yaml", solver={"max_outer": 2, "horizon": 20.0})
    code, out, err = call(path, "dc-solve")
    assert code == 3
    assert "section 'solver'" in err
    assert parse(out)["status"] == "not_converged"
    assert (tmp_path / "out" / "fhn_dc_residuals.csv").exists()


def test_dc_solve_converges(tmp_path):
    path = scenario(tmp_path, "fhn_dc_solve.yaml", solver={"horizon": 20.0})
    code, out, err = call(path, "dc-solve")
    assert code == 0, err
    assert parse(out)["converged"] == "true"


def test_blow_up_exits_4(tmp_path):
    explicit = {"one_port": {"C": 1.0, "g_leak": 0.0, "V_leak": 0.0, "V_init": 1.0,
                             "name": "cell", "branches": [{"name": "neg", "role": "negative",
                                                           "element": {"type": "linear",
                                                                       "slope": -5.0}}]}}
    path = scenario(tmp_path, "fhn_simulate.yaml", solver={"horizon": 50.0},
                    circuit={"builder": "explicit", "params": {}, "explicit": explicit})
    code, _, err = call(path, "simulate")
    assert code == 4 and "section 'experiment'" in err
    assert not (tmp_path / "out").exists()


@pytest.mark.parametrize("name,command,expected", [
    ("amplifier.yaml", "amplifier", "amp_trace.csv"),
    ("burster_sweep.yaml", "sweep", "burster_behavior_map.csv"),
    ("estimate.yaml", "estimate", "est_estimate.csv"),
])
def test_other_experiments(tmp_path, name, command, expected):
    over = {}
    if command == "sweep":
        over = {"experiment": {"params": [{"path": "branches.slow_mixed.g_max",
                                           "values": [0.0, 1.0]}]},
                "solver": {"horizon": 1500.0}}
    path = scenario(tmp_path, name, **over)
    code, out, err = call(path, command)
    assert code == 0, err
    names = {p.name for p in (tmp_path / "out").iterdir()}
    assert any(n.endswith(expected.split("_", 1)[1]) for n in names), names


def test_write_atomic_leaves_no_temporaries(tmp_path, monkeypatch):
    written = cli.write_atomic(tmp_path, {"a.txt": "1", "b.txt": "2"})
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.txt", "b.txt"] == \
        sorted(p.name for p in written)

    calls = {"n": 0}
    real = os.fdopen

    def flaky(fd, *a, **k):
        calls["n"] += 1
        if calls["n"] == 2:
            os.close(fd)
            raise OSError("disk full")
        return real(fd, *a, **k)

    target = tmp_path / "second"
    monkeypatch.setattr(cli.os, "fdopen", flaky)
    with pytest.raises(OSError):
        cli.write_atomic(target, {"a.txt": "1", "b.txt": "2"})
    assert list(target.iterdir()) == []
    assert not (target / "a.txt").exists()


def test_main_argparse(tmp_path, capsys):
    path = scenario(tmp_path, "amplifier.yaml")
    assert cli.main(["validate", "--config", str(path)]) == 0
    assert "valid=true" in capsys.readouterr().out
    with pytest.raises(SystemExit):
        cli.main(["simulate"])


@pytest.mark.skipif(shutil.which("mixedfeedback") is None, reason="console script not installed")
def test_console_script(tmp_path):
    import subprocess
    path = scenario(tmp_path, "amplifier.yaml")
    res = subprocess.run(["mixedfeedback", "amplifier", "--config", str(path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "outputs=" in res.stdout
