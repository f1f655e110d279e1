#!/usr/bin/env python3
"""Iteration statistics for the three decentralized modes over seeded
realizations (boxplot analogue of the convergence-speed comparison)."""

import sys

from msfedl.cli import main

if __name__ == "__main__":
    reps = sys.argv[1] if len(sys.argv) > 1 else "100"
    out = sys.argv[2] if len(sys.argv) > 2 else "results"
    main(["convergence-study", "--seed", "1", "--ues", "20",
          "--reps", reps, "--workers", "4", "--out", out],
         standalone_mode=True)
