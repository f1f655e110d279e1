#!/usr/bin/env python3
"""Time/energy trade-off sweep over the Service-3 weight kappa_3."""

import sys

from msfedl.cli import main

if __name__ == "__main__":
    seed = sys.argv[1] if len(sys.argv) > 1 else "1"
    out = sys.argv[2] if len(sys.argv) > 2 else "results"
    main(["sweep-kappa", "--seed", seed, "--ues", "50", "--out", out],
         standalone_mode=True)
