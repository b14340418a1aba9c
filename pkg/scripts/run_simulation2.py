#!/usr/bin/env python3
"""Multi-model dynamics experiment: Monte-Carlo tracking metrics.

Writes results/simulation2/{metrics.csv,summary.json}.
"""

import sys
from pathlib import Path

from randkf.cli import main

ROOT = Path(__file__).resolve().parent.parent
CONFIG = ROOT / "configs" / "simulation2.yaml"
OUT = ROOT / "results" / "simulation2"

if __name__ == "__main__":
    sys.exit(main(["montecarlo", "--config", str(CONFIG), "--out", str(OUT),
                   *sys.argv[1:]]))
