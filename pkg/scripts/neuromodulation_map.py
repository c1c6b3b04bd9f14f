"""Two-parameter behavior map of the isolated burster.

Sweeps the slow mixed and ultraslow conductances and prints the class grid.
"""
import argparse
from pathlib import Path

import numpy as np

from mixedfeedback.circuits import build_burster
from mixedfeedback.solvers import SimConfig
from mixedfeedback.sweeps import SweepSpec, run_sweep

ABBREV = {"quiescent": ".", "spiking": "s", "bursting": "B", "failed": "x"}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--horizon", type=float, default=3000.0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("out/neuromodulation_map"))
    args = ap.parse_args()
    slow = tuple(np.round(np.linspace(0.0, 1.4, args.n), 4))
    ultra = tuple(np.round(np.linspace(0.5, 2.5, args.n), 4))
    spec = SweepSpec(build_burster(), (("branches.slow_mixed.g_max", slow),
                                       ("branches.ultraslow_positive.g_max", ultra)),
                     SimConfig(0.01, args.horizon), -1.5)
    bmap = run_sweep(spec, args.threads)
    print("ultraslow g \\ slow mixed g  " + " ".join(f"{v:5.2f}" for v in slow))
    for j, u in enumerate(ultra):
        row = [ABBREV.get(bmap[(s, u)].network_class, "?") for s in slow]
        print(f"{u:26.2f}  " + " ".join(f"{c:>5}" for c in row))
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "map.csv").write_text(bmap.to_csv())
    (args.out / "map.svg").write_text(bmap.to_svg())
    print(f"hash {bmap.hash()[:16]}")


if __name__ == "__main__":
    main()
