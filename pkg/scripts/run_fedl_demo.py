#!/usr/bin/env python3
"""Synthetic federated training demo: loss-gap traces across a
hyper-learning-rate grid with the contraction envelope overlay."""

import sys

from msfedl.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "results"
    main(["fedl-demo", "--out", out], standalone_mode=True)
