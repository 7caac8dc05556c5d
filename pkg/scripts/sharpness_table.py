"""Tabulate omega1, omega2 and the flip point over s for several (N, p, alpha).

    python3 scripts/sharpness_table.py --out out/sharpness --points 40
"""

import argparse
import math
from pathlib import Path

import numpy as np

from fracgrid.exponents import SharpnessCase, sharpness_exponents, sharpness_flip, sharpness_window
from fracgrid.report import write_csv

CASES = [(1, 2.0, 0.5), (2, 2.0, 0.6), (3, 2.0, 0.9), (4, 3.0, 0.6), (5, 4.0, 0.8), (3, 2.5, 0.9)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("out/sharpness"))
    ap.add_argument("--points", type=int, default=40)
    args = ap.parse_args(argv)

    rows, flips = [], []
    for N, p, a in CASES:
        win = sharpness_window(N, p, a)
        if win is None:
            print(f"N={N} p={p:g} alpha={a:g}: no window")
            continue
        lo, hi = win
        hi = hi if math.isfinite(hi) else 3.0 * (N / p + 1.0 / a)
        for s in np.linspace(lo, hi, args.points + 2)[1:-1]:
            c = sharpness_exponents(SharpnessCase(N, p, a, float(s)))
            rows.append((N, p, a, float(s), c.omega1, c.omega2, c.verdict))
        flip = sharpness_flip(N, p, a)
        flips.append((N, p, a, flip, N / p + 1.0 / a))
        print(f"N={N} p={p:g} alpha={a:g}: flip at s={flip:.12f}, N/p+1/alpha={N / p + 1 / a:.12f}")
    write_csv(args.out / "sharpness_table.csv", ("N", "p", "alpha", "s", "omega1", "omega2", "omega2_gt_omega1"), rows)
    write_csv(args.out / "sharpness_flips.csv", ("N", "p", "alpha", "flip", "N_over_p_plus_1_over_alpha"), flips)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
