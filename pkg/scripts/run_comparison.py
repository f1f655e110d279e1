#!/usr/bin/env python3
"""Solver-vs-heuristic comparison on the default evaluation scale
(N = 50 UEs, 3 services).  Writes comparison_seed<seed>.{csv,svg}."""

import sys

from msfedl.cli import main

if __name__ == "__main__":
    seed = sys.argv[1] if len(sys.argv) > 1 else "1"
    out = sys.argv[2] if len(sys.argv) > 2 else "results"
    main(["compare", "--seed", seed, "--ues", "50", "--out", out],
         standalone_mode=True)
