"""Time refinement of the fractional ODE and the heat limit.

Writes ``refinement_ode.csv`` (alpha, mu, M, u_M, relative error) and
``refinement_heat.csv`` (axis, size, error) and prints the fitted orders.

    python3 scripts/refinement_study.py --out out/refinement
"""

import argparse
import math
from pathlib import Path

import mpmath

from fracgrid.kernels import FracParams, TimeGrid, pc_pair
from fracgrid.report import write_csv
from fracgrid.solver import fractional_ode, heat_mode_error, refinement_order


def integral_of_l(a: float, mu: float, T: float) -> float:
    """``int_0^T l`` for the tempered pair: the exact solution with ``f = 1``."""
    g = lambda s: s ** (a - 1) * mpmath.exp(-mu * s) / mpmath.gamma(a)
    return float(mpmath.quad(g, [0, T]) + mu * mpmath.quad(lambda s: (T - s) * g(s), [0, T]))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("out/refinement"))
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.3, 0.5, 0.7])
    ap.add_argument("--mus", type=float, nargs="+", default=[0.0, 1.0])
    ap.add_argument("--steps", type=int, nargs="+", default=[125, 250, 500, 1000, 2000])
    args = ap.parse_args(argv)

    rows = []
    for a in args.alphas:
        for mu in args.mus:
            exact = integral_of_l(a, mu, 1.0)
            errs = []
            for M in args.steps:
                u = fractional_ode(pc_pair(FracParams(a, mu), TimeGrid(1.0, M)).k, 1.0)[-1]
                errs.append(abs(u - exact) / exact)
                rows.append((a, mu, M, u, errs[-1]))
            order = refinement_order([1 / M for M in args.steps], errs)
            print(f"alpha={a:g} mu={mu:g}: error at M={args.steps[-1]} {errs[-1]:.2e}, order {order:.2f}")
    write_csv(args.out / "refinement_ode.csv", ("alpha", "mu", "steps", "u_T", "rel_error"), rows)

    heat = []
    t_steps = (20, 40, 80, 160)
    t_err = [heat_mode_error(401, M) for M in t_steps]
    x_cells = (6, 11, 21, 41)
    x_err = [heat_mode_error(n, 4000) for n in x_cells]
    heat += [("time", M, e) for M, e in zip(t_steps, t_err)]
    heat += [("space", n, e) for n, e in zip(x_cells, x_err)]
    write_csv(args.out / "refinement_heat.csv", ("axis", "size", "max_error"), heat)
    ot = refinement_order([0.1 / M for M in t_steps], t_err)
    ox = refinement_order([1 / (n - 1) for n in x_cells], x_err)
    print(f"heat limit: time order {ot:.3f}, space order {ox:.3f}")
    return 0 if math.isfinite(ot + ox) else 1


if __name__ == "__main__":
    raise SystemExit(main())
