"""Command line entry point: ``fracgrid <command> --config FILE [--out DIR] [--seed N]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import exponents as ex
from .config import ConfigError, load_config
from .report import Report, append_report, write_csv, write_json
from .scenarios import run_scenario
from .solver import SolverError, solve

VERIFY_TARGETS = {
    "max-principle": "maxPrinciple",
    "energy": "energyEstimate",
    "bound": "aprioriBound",
    "lemmas": "lemmas",
    "embedding": "embedding",
    "fractional-ode": "fractionalODE",
    "natural-growth": "naturalGrowth",
    "classical-limit": "classicalLimit",
}


def _finish(rep: Report, out: Path) -> int:
    append_report(rep, out)
    verdict = "PASS" if rep.passed else "FAIL"
    print(f"{rep.scenario}: {verdict} ({rep.wall_clock:.2f} s)")
    for name, ok in rep.verdicts.items():
        print(f"  [{'pass' if ok else 'FAIL'}] {name}")
    return 0 if rep.passed else 1


def cmd_kernels(args) -> int:
    exp = load_config(args.config)
    return _finish(run_scenario("kernelDiagnostics", exp, args.seed, args.out), args.out)


def cmd_exponents(args) -> int:
    exp = load_config(args.config)
    if exp.structure is None:
        raise ConfigError("exponents needs a [structure] section")
    e = ex.derive_exponents(exp.structure)
    path = write_json(args.out / "exponents.json", e.as_dict())
    print(json.dumps(json.loads(path.read_text()), indent=2))
    rep = Report(
        "exponents",
        args.seed,
        {"structure": vars(exp.structure)},
        measured=e.as_dict(),
        verdicts={"gammaAdmissible": e.gamma_admissible, "sAdmissible": e.s_admissible},
        artifacts=[path.name],
    )
    return _finish(rep, args.out)


def cmd_sharpness(args) -> int:
    exp = load_config(args.config)
    return _finish(run_scenario("sharpnessSweep", exp, args.seed, args.out), args.out)


def cmd_verify(args) -> int:
    exp = load_config(args.config)
    return _finish(run_scenario(VERIFY_TARGETS[args.target], exp, args.seed, args.out), args.out)


def cmd_solve(args) -> int:
    exp = load_config(args.config)
    cfg = exp.solve_config(args.seed)
    t0 = time.perf_counter()
    res = solve(cfg)
    seconds = time.perf_counter() - t0
    out = args.out
    values = res.field.values
    if args.format == "binary":
        data = out / "solution.bin"
        data.parent.mkdir(parents=True, exist_ok=True)
        values.astype("<f8").tofile(data)
        write_json(out / "solution.json", {"shape": list(values.shape), "dtype": "float64", "order": "C"})
        artifacts = [data.name, "solution.json"]
    else:
        flat = values.reshape(values.shape[0], -1)
        rows = ((m, c, flat[m, c]) for m in range(flat.shape[0]) for c in range(flat.shape[1]))
        artifacts = [write_csv(out / "solution.csv", ("m", "cell", "value"), rows).name]
    diag = dict(res.diagnostics)
    diag.update(
        {
            "shape": list(values.shape),
            "max": float(values.max()),
            "min": float(values.min()),
            "converged": True,
        }
    )
    artifacts.append(write_json(out / "diagnostics.json", diag).name)
    rep = Report(
        "solve",
        args.seed,
        {"cells": exp.domain.cells, "steps": exp.time.steps, "kind": exp.nonlinearity.kind},
        measured={"max": diag["max"], "min": diag["min"], "innerIterations": int(np.sum(diag["inner_iterations"]))},
        verdicts={"converged": True},
        wall_clock=seconds,
        artifacts=artifacts,
    )
    return _finish(rep, out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracgrid", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=Path("out"))
        p.add_argument("--seed", type=int, default=0)

    common(sub.add_parser("kernels", help="kernel pair, resolvent and Yosida diagnostics"))
    common(sub.add_parser("exponents", help="structural exponents as JSON"))
    common(sub.add_parser("sharpness", help="omega1/omega2 sweep over s"))
    p = sub.add_parser("solve", help="run the solver and write the field")
    common(p)
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    p = sub.add_parser("verify", help="run a verification scenario")
    p.add_argument("target", choices=sorted(VERIFY_TARGETS))
    common(p)
    return ap


COMMANDS = {
    "kernels": cmd_kernels,
    "exponents": cmd_exponents,
    "sharpness": cmd_sharpness,
    "solve": cmd_solve,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, SolverError, ValueError) as err:
        print(f"fracgrid: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
