"""Scenario reports and plain-text artifacts (CSV, JSON, gnuplot columns)."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

REPORT_LOG = "reports.jsonl"


@dataclass
class Report:
    """Result of one scenario.  ``verdicts`` maps check names to booleans.

    ``series`` holds named ``(x, y)`` columns for ``emit_plotdata``; it is not
    part of the serialized report.
    """

    scenario: str
    seed: int
    parameters: dict
    measured: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    anchor: str = ""
    criterion: str = ""
    wall_clock: float = 0.0
    artifacts: list = field(default_factory=list)
    series: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        # a report without verdicts is invalid, never a pass
        return bool(self.verdicts) and all(bool(v) for v in self.verdicts.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("series")
        d["passed"] = self.passed
        return _jsonable(d)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        # JSON has no inf/nan; keep them readable
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, Path):
        return str(x)
    return x


def write_json(path: Path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return v


def append_report(report: Report, out: Path) -> Path:
    """Append the report as one JSON line to ``out/reports.jsonl``; never rewrites."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / REPORT_LOG
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")
    return path


def read_reports(out: Path) -> list[dict]:
    path = Path(out) / REPORT_LOG
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]


def emit_plotdata(report: Report, out: Path) -> Path:
    """Write each series as a two-column ``.dat`` file plus ``<scenario>_plots.json``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"scenario": report.scenario, "seed": report.seed, "files": []}
    for name, (xs, ys, labels) in sorted(report.series.items()):
        path = out / f"{report.scenario}_{name}.dat"
        with path.open("w", encoding="utf-8") as fh:
            fh.write(f"# {labels[0]} {labels[1]}\n")
            for x, y in zip(np.asarray(xs, float), np.asarray(ys, float)):
                fh.write(f"{float(x)!r} {float(y)!r}\n")
        manifest["files"].append({"name": name, "path": path.name, "columns": list(labels)})
    mpath = write_json(out / f"{report.scenario}_plots.json", manifest)
    report.artifacts.extend(str(Path(f["path"])) for f in manifest["files"])
    report.artifacts.append(mpath.name)
    return mpath
