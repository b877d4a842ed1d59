#!/usr/bin/env python3
"""Finite- versus infinite-speed comparison: profile CSVs plus a plot script.

Thin wrapper over ``kacfc figure1``; every flag is forwarded, so e.g.

    python3 scripts/make_figure1.py --n 1024 --times 0.0,0.05,0.2 --out fig1

writes heat/kinetic/step profiles, the entropy-dissipation report of the
mollified point-mass run, and plot_figure1.py (matplotlib) into fig1/.
"""

import sys

from kacfc import cli

if __name__ == "__main__":
    raise SystemExit(cli.main(["figure1", *sys.argv[1:]]))
