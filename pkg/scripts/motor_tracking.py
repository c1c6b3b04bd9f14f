"""Spiking speed control against a proportional controller across references."""
import argparse

from mixedfeedback.motor import motor_demo, proportional_baseline
from mixedfeedback.solvers import SimConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--refs", type=float, nargs="+", default=[0.0, 0.01, 0.02, 0.05, 0.1, 0.2,
                                                              0.3, 0.5])
    ap.add_argument("--horizon", type=float, default=3000.0)
    args = ap.parse_args()
    cfg = SimConfig(0.01, args.horizon)
    print(f"{'ref':>6} {'spk speed':>10} {'rate':>8} {'P speed':>10} {'P stalled':>10}")
    for ref in args.refs:
        s = motor_demo(ref, cfg=cfg)
        p = proportional_baseline(ref, cfg=cfg)
        print(f"{ref:6.3f} {s.mean_speed:10.4f} {s.spike_rate:8.4f} {p.mean_speed:10.4f} "
              f"{str(p.stalled):>10}")


if __name__ == "__main__":
    main()
