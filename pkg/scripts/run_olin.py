#!/usr/bin/env python3
"""Run the bundled one-week, ten-mote scenario and print where the
artifacts landed. Equivalent to: soilnet simulate scenarios/olin.cfg."""
from __future__ import annotations

import argparse
from pathlib import Path

from soilnet.scenario import run_scenario

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=None, help="artifact directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    args = parser.parse_args()
    out = run_scenario(ROOT / "scenarios" / "olin.cfg", out_dir=args.out, seed=args.seed)
    print(f"artifacts in {out}")
    for sub in ("level0", "store", "reports"):
        for p in sorted((out / sub).iterdir()):
            print(f"  {p.relative_to(out)}")


if __name__ == "__main__":
    main()
