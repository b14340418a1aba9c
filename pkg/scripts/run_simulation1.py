#!/usr/bin/env python3
"""Dropout-tracking experiment: Monte-Carlo metrics plus arrival-rate sweep.

Writes results/simulation1/{metrics.csv,summary.json,sweep.csv}.
"""

import sys
from pathlib import Path

from randkf.cli import main

ROOT = Path(__file__).resolve().parent.parent
CONFIG = ROOT / "configs" / "simulation1.yaml"
OUT = ROOT / "results" / "simulation1"

if __name__ == "__main__":
    extra = sys.argv[1:]
    rc = main(["montecarlo", "--config", str(CONFIG), "--out", str(OUT),
               *extra])
    rc = rc or main(["sweep", "--config", str(CONFIG), "--out", str(OUT)])
    sys.exit(rc)
