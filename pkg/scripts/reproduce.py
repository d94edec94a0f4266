#!/usr/bin/env python3
"""Run the bundled experiment configs and write their CSVs (and gnuplot scripts).

    python3 scripts/reproduce.py                       # every config, full size
    python3 scripts/reproduce.py fig1a fig3b --repetitions 1
    python3 scripts/reproduce.py --corpus /data/movie  # real data instead of the synthetic stand-in
"""
import argparse
import sys
import time
from pathlib import Path

from robust_gefl.cli import main as cli_main

CONFIGS = Path(__file__).resolve().parent / "configs"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("names", nargs="*", help="config names without .cfg (default: all)")
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--repetitions", type=int, help="override the repetition count of every config")
    parser.add_argument("--corpus", help="corpus path used instead of the synthetic stand-in")
    args = parser.parse_args(argv)

    available = {p.stem: p for p in sorted(CONFIGS.glob("*.cfg"))}
    names = args.names or list(available)
    unknown = [n for n in names if n not in available]
    if unknown:
        parser.error(f"unknown config(s) {', '.join(unknown)}; choose from {', '.join(available)}")
    for name in names:
        cmd = ["sweep", "--spec", str(available[name]), "--out-dir", args.out_dir, "--gnuplot"]
        if args.repetitions:
            cmd += ["--set", f"repetitions={args.repetitions}"]
        if args.corpus:
            cmd += ["--set", f"corpus={args.corpus}"]
        start = time.perf_counter()
        code = cli_main(cmd)
        print(f"{name}: exit {code} in {time.perf_counter() - start:.0f}s", file=sys.stderr)
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
