#!/usr/bin/env python3
"""Run the reference experiment end to end into a results directory.

Reproduces the full pipeline at the reference settings: the 120-case
parametric study, a 5-run optimization campaign with 35 particles over 1000
iterations, the exact-oracle gap report, and the post-hoc analysis artifacts
(learning-curve envelope and proximity map of the best run's ledger).

Usage: python scripts/run_full_campaign.py [--out runs/full] [--seed 0]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from rampopt.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/full")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    t0 = time.time()
    rc = cli_main(["parametric", "--out", str(out / "parametric"), "--seed", str(args.seed)])
    if rc:
        return rc
    print(f"parametric study done in {time.time() - t0:.1f}s")

    t0 = time.time()
    rc = cli_main([
        "optimize", "--out", str(out / "campaign"), "--seed", str(args.seed),
        "--runs", "5", "--iterations", "1000", "--particles", "35", "--oracle",
    ])
    if rc:
        return rc
    print(f"campaign done in {time.time() - t0:.1f}s")

    rc = cli_main(["analyze", "--run-dir", str(out / "campaign"),
                   "--out", str(out / "analysis")])
    if rc:
        return rc
    print(f"artifacts in {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
