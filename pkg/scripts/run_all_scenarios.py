"""Run every scenario in configs/ through the CLI entry point.

    python scripts/run_all_scenarios.py [--out-root out] [--threads 2]
"""
import argparse
import sys
from pathlib import Path

from mixedfeedback import cli
from mixedfeedback.config import load

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--configs", default=ROOT / "configs", type=Path)
    ap.add_argument("--out-root", default="out", type=Path)
    ap.add_argument("--threads", default=1, type=int)
    args = ap.parse_args()
    failures = 0
    for path in sorted(args.configs.glob("*.yaml")):
        kind = load(path).kind
        print(f"== {path.name} ({kind})", flush=True)
        code = cli.run(path, kind, out_dir=args.out_root / path.stem, threads=args.threads)
        if code != 0:
            failures += 1
            print(f"   exit status {code}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
