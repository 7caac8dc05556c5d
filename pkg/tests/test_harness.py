import json
import math
from pathlib import Path

import numpy as np
import pytest

from fracgrid.cli import main
from fracgrid.config import ConfigError, DataSpec, load_config, loads_config, parse_data, realize
from fracgrid.grid import DomainGrid
from fracgrid.kernels import FracParams, KernelGrid, TimeGrid
from fracgrid.report import Report, append_report, emit_plotdata, read_reports, write_csv, write_json

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = """
[kernel]
alpha = 0.6
mu = 0.5

[domain]
dim = 1
extents = 1.0
cells = 17

[time]
horizon = 0.5
steps = 10

[nonlinearity]
kind = pLaplaceLowerOrder
p = 3
gamma = 1.5
c2 = 0.25      ; inline comment
C0 = 2

[data]
u0 = random:0,1
boundary = 0
f = constant:1

[inner]
tol = 1e-9
maxIter = 150
method = newton

[structure]
q = 2
s = inf
gamma = 1.5

[sweep]
p = 1.5, 2, 3
"""


def write_cfg(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def test_parse_full_config():
    exp = loads_config(SMALL)
    assert exp.kernel == FracParams(0.6, 0.5)
    assert exp.alpha == 0.6
    assert exp.domain.cells == (17,) and exp.time.steps == 10
    nl = exp.nonlinearity
    assert (nl.kind, nl.p, nl.gamma, nl.c2, nl.C0) == ("pLaplaceLowerOrder", 3.0, 1.5, 0.25, 2.0)
    assert exp.u0 == DataSpec("random", (0.0, 1.0))
    assert exp.boundary == DataSpec("constant", (0.0,))
    assert exp.tol == 1e-9 and exp.max_iter == 150
    assert exp.structure.N == 1 and exp.structure.p == 3.0 and math.isinf(exp.structure.s)
    assert exp.sweep_values("p", None) == (1.5, 2.0, 3.0)
    assert exp.sweep_values("missing", (7,)) == (7,)


@pytest.mark.parametrize(
    "text,spec",
    [
        ("2.5", DataSpec("constant", (2.5,))),
        ("constant:3", DataSpec("constant", (3.0,))),
        ("bump:1,0.1", DataSpec("bump", (1.0, 0.1))),
        ("random:0,1", DataSpec("random", (0.0, 1.0))),
    ],
)
def test_parse_data(text, spec):
    assert parse_data(text, "u0", Path(".")) == spec


@pytest.mark.parametrize(
    "text,role", [("bump:1", "u0"), ("powerlaw:1,2", "u0"), ("random:0,1", "boundary"), ("oops", "f")]
)
def test_parse_data_errors(text, role):
    with pytest.raises(ConfigError):
        parse_data(text, role, Path("."))


def test_realize_kinds(tmp_path):
    dom = DomainGrid((1.0,), (11,))
    tg = TimeGrid(1.0, 2)
    rng = np.random.default_rng(0)
    b = realize(DataSpec("bump", (2.0, 0.1)), dom, tg, rng)
    assert b[5] == pytest.approx(2.0) and b[0] < 1e-4
    r = realize(DataSpec("random", (0.0, 1.0)), dom, tg, rng)
    assert r[0] == r[-1] == 0.0 and np.all((r >= 0) & (r <= 1))
    pw = realize(DataSpec("powerlaw", (1.0, 0.5)), dom, tg, rng)
    assert pw[5] == pytest.approx(0.05**-0.5) and pw[0] == pytest.approx(0.5**-0.5)
    np.savetxt(tmp_path / "one.txt", np.arange(11.0))
    np.savetxt(tmp_path / "all.txt", np.arange(33.0))
    assert realize(DataSpec("file", path=tmp_path / "one.txt"), dom, tg, rng).shape == (11,)
    assert realize(DataSpec("file", path=tmp_path / "all.txt"), dom, tg, rng).shape == (3, 11)
    np.savetxt(tmp_path / "bad.txt", np.arange(5.0))
    with pytest.raises(ConfigError):
        realize(DataSpec("file", path=tmp_path / "bad.txt"), dom, tg, rng)


def test_kernel_grid_file(tmp_path):
    np.savetxt(tmp_path / "k.txt", np.full(10, 0.05))
    text = SMALL.replace("alpha = 0.6\nmu = 0.5", "grid = k.txt")
    exp = load_config(write_cfg(tmp_path, text))
    assert isinstance(exp.kernel, KernelGrid) and exp.alpha is None
    assert np.allclose(exp.kernel.cells, 0.05)


@pytest.mark.parametrize(
    "old,new",
    [
        ("kind = pLaplaceLowerOrder", "kind = porous"),
        ("cells = 17", "cells = 2"),
        ("steps = 10", "steps = ten"),
        ("alpha = 0.6", "alpha = 1.5"),
        ("[inner]", "[bogus]\nx = 1\n[inner]"),
    ],
)
def test_bad_configs_rejected(old, new):
    with pytest.raises(ConfigError):
        loads_config(SMALL.replace(old, new))


def test_every_shipped_config_parses():
    paths = sorted(CONFIGS.glob("*.ini"))
    assert len(paths) >= 10
    for p in paths:
        load_config(p)


def test_solve_config_is_seeded():
    exp = loads_config(SMALL)
    a, b, c = exp.solve_config(1), exp.solve_config(1), exp.solve_config(2)
    assert np.array_equal(a.u0, b.u0) and not np.array_equal(a.u0, c.u0)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def test_report_without_verdicts_is_not_a_pass():
    assert not Report("x", 0, {}).passed
    assert Report("x", 0, {}, verdicts={"a": True}).passed
    assert not Report("x", 0, {}, verdicts={"a": True, "b": False}).passed


def test_report_serialization_handles_nonfinite(tmp_path):
    rep = Report("x", 3, {"s": math.inf}, measured={"v": np.float64(math.nan), "arr": np.arange(2)}, verdicts={"ok": np.bool_(True)})
    d = rep.to_dict()
    assert d["parameters"]["s"] == "inf" and d["measured"]["v"] == "nan"
    assert d["measured"]["arr"] == [0, 1] and d["passed"] is True
    json.dumps(d)
    write_json(tmp_path / "r.json", d)
    assert json.loads((tmp_path / "r.json").read_text())["seed"] == 3


def test_reports_log_is_append_only(tmp_path):
    append_report(Report("a", 0, {}, verdicts={"v": True}), tmp_path)
    first = (tmp_path / "reports.jsonl").read_text()
    append_report(Report("b", 1, {}, verdicts={"v": False}), tmp_path)
    text = (tmp_path / "reports.jsonl").read_text()
    assert text.startswith(first)
    assert [r["scenario"] for r in read_reports(tmp_path)] == ["a", "b"]
    assert read_reports(tmp_path / "nowhere") == []


def test_csv_formatting(tmp_path):
    path = write_csv(tmp_path / "t.csv", ("a", "b", "c"), [(1, 0.1, True), (2, math.inf, False)])
    assert path.read_text() == "a,b,c\n1,0.1,true\n2,inf,false\n"


def test_emit_plotdata(tmp_path):
    rep = Report("demo", 0, {}, verdicts={"v": True})
    rep.series["decay"] = ([0.0, 1.0], [1.0, 0.5], ("t", "max"))
    manifest = json.loads(emit_plotdata(rep, tmp_path).read_text())
    assert manifest["files"] == [{"name": "decay", "path": "demo_decay.dat", "columns": ["t", "max"]}]
    data = np.loadtxt(tmp_path / "demo_decay.dat")
    assert np.array_equal(data, [[0.0, 1.0], [1.0, 0.5]])
    assert "demo_plots.json" in rep.artifacts


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def test_cli_solve_csv_is_deterministic(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    for run in ("a", "b"):
        assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / run), "--seed", "5"]) == 0
    a = (tmp_path / "a" / "solution.csv").read_bytes()
    assert a == (tmp_path / "b" / "solution.csv").read_bytes()
    rows = a.decode().splitlines()
    assert rows[0] == "m,cell,value" and len(rows) == 1 + 11 * 17
    diag = json.loads((tmp_path / "a" / "diagnostics.json").read_text())
    assert diag["shape"] == [11, 17] and diag["converged"] is True
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "6"]) == 0
    assert (tmp_path / "c" / "solution.csv").read_bytes() != a


def test_cli_solve_binary(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path), "--format", "binary"]) == 0
    meta = json.loads((tmp_path / "solution.json").read_text())
    vals = np.fromfile(tmp_path / "solution.bin", dtype="<f8").reshape(meta["shape"])
    assert vals.shape == (11, 17)
    assert np.all(vals[:, 0] == 0.0)


def test_cli_exponents(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["exponents", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "exponents.json").read_text())
    assert data["r"] == pytest.approx(json.loads(capsys.readouterr().out.split("\nexponents:")[0])["r"])
    assert read_reports(tmp_path)[-1]["scenario"] == "exponents"


def test_cli_verify_writes_report(tmp_path, capsys):
    code = main(["verify", "lemmas", "--config", str(CONFIGS / "lemmas.ini"), "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("lemmas: PASS")
    rep = read_reports(tmp_path)[-1]
    assert rep["passed"] and rep["seed"] == 0 and rep["wall_clock"] >= 0
    assert (tmp_path / "lemmas.csv").exists()


def test_cli_verify_csv_byte_identical(tmp_path):
    for run in ("a", "b"):
        main(["verify", "embedding", "--config", str(CONFIGS / "embedding.ini"), "--out", str(tmp_path / run), "--seed", "9"])
    for a in sorted((tmp_path / "a").glob("*.csv")):
        assert a.read_bytes() == (tmp_path / "b" / a.name).read_bytes()


def test_cli_errors_exit_2(tmp_path, capsys):
    bad = write_cfg(tmp_path, SMALL.replace("p = 3", "p = 0.5"))
    assert main(["solve", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err
    nostruct = write_cfg(tmp_path, SMALL.split("[structure]")[0], "ns.ini")
    assert main(["exponents", "--config", str(nostruct), "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        main(["verify", "nonsense", "--config", str(bad)])


def test_cli_failing_scenario_exits_1(tmp_path):
    text = """
[kernel]
alpha = 0.5
[time]
horizon = 1.0
steps = 50
[sweep]
alpha = 0.5
n = 1, 4
"""
    cfg = write_cfg(tmp_path, text)
    assert main(["kernels", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert (tmp_path / "kernel_summary.json").exists()
