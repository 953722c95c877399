"""Run every bundled experiment config in sequence.

Usage: python3 scripts/run_full_suite.py [--configs DIR] [--out DIR] [--seed N]

Each experiment writes <out>/<name>.jsonl, .csv and a manifest; the script
stops at the first failing experiment and exits with its code.
"""
import argparse
import sys
import time
from pathlib import Path

from wnilab.cli import EXPERIMENTS, main as cli_main


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs", default="configs", help="directory of per-experiment JSON configs")
    ap.add_argument("--out", default=None, help="override the output directory")
    ap.add_argument("--seed", type=int, default=None, help="override every config's seed")
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)

    cfg_dir = Path(args.configs)
    t0 = time.perf_counter()
    for name in EXPERIMENTS:
        cfg = cfg_dir / f"{name}.json"
        if not cfg.exists():
            print(f"skipping {name}: no {cfg}", file=sys.stderr)
            continue
        argv = [name, "--config", str(cfg)]
        if args.out is not None:
            argv += ["--out", args.out]
        if args.seed is not None:
            argv += ["--seed", str(args.seed)]
        if args.threads is not None:
            argv += ["--threads", str(args.threads)]
        print(f"--- {name}")
        code = cli_main(argv)
        if code != 0:
            print(f"{name} failed with exit code {code}", file=sys.stderr)
            return code
    print(f"full suite finished in {time.perf_counter() - t0:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
