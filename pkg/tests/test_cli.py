import json
import subprocess
import sys

import numpy as np
import pytest

from factorstrength import io as fio
from factorstrength.cli import main
from factorstrength.core import MatrixPanel, VectorPanel
from factorstrength.harness import MCTable, reference_tables


def run(*argv):
    return main([str(a) for a in argv])


def test_simulate_vector(tmp_path, capsys):
    out = tmp_path / "sim"
    assert run("simulate", "--model", "vector", "--setting", "I", "--d", 100, "--T", 200, "--seed", 7,
               "--out", out) == 0
    assert {p.name for p in out.iterdir()} == {"panel.csv", "panel.meta.json", "truth.json"}
    truth = json.loads((out / "truth.json").read_text())
    np.testing.assert_allclose(truth["realized_alpha"][0], [1.0, 0.6], atol=0.06)
    assert truth["target_alpha"][0] == pytest.approx([1.0, 0.6])
    panel = fio.read_panel(out / "panel.csv")
    assert (panel.T, panel.d) == (200, 100)
    assert "realized strengths" in capsys.readouterr().out


def test_simulate_delta_defaults_to_two(tmp_path):
    run("simulate", "--model", "vector", "--d", 20, "--T", 10, "--out", tmp_path / "a")
    run("simulate", "--model", "vector", "--d", 20, "--T", 10, "--delta", 2, "--out", tmp_path / "b")
    spec = json.loads((tmp_path / "a" / "truth.json").read_text())["spec"]
    assert spec["noise"]["delta"] == 2.0
    assert (tmp_path / "a" / "panel.csv").read_bytes() == (tmp_path / "b" / "panel.csv").read_bytes()


@pytest.mark.parametrize("model,dims", [("vector", ["--d", 30]), ("matrix", ["--d1", 6, "--d2", 5])])
def test_simulate_is_byte_identical(tmp_path, model, dims):
    args = ["simulate", "--model", model, "--setting", "II", *dims, "--T", 25, "--seed", 3]
    run(*args, "--out", tmp_path / "one")
    run(*args, "--out", tmp_path / "two")
    for name in ("panel.csv", "panel.meta.json", "truth.json"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--model", "vector", "--T", 10, "--out", "x"],                 # missing --d
        ["simulate", "--model", "matrix", "--d1", 4, "--T", 10, "--out", "x"],      # missing --d2
        ["simulate", "--model", "tensor", "--d", 4, "--T", 10, "--out", "x"],
        ["simulate", "--model", "vector", "--d", 4, "--T", 1, "--out", "x"],
        ["simulate", "--model", "vector", "--d", 10, "--T", 10, "--delta", -1, "--out", "x"],
        ["estimate", "--model", "vector", "--input", "p.csv"],                      # missing --out
        ["frobnicate"],
    ],
)
def test_invalid_flags_exit_two(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as err:
        run(*argv)
    assert err.value.code == 2


def test_estimate_recovers_large_vector_panel(tmp_path):
    run("simulate", "--model", "vector", "--setting", "I", "--d", 800, "--T", 800, "--seed", 1,
        "--format", "stacked_csv", "--out", tmp_path / "sim")
    assert run("estimate", "--model", "vector", "--r", 2, "--input", tmp_path / "sim" / "panel.csv",
               "--out", tmp_path / "est") == 0
    reports, meta = fio.read_report(tmp_path / "est" / "report.json")
    np.testing.assert_allclose(reports[0].alpha_hat, [1.0, 0.6], atol=0.05)
    assert meta["estimator"] == "pca"
    assert meta["config"]["r"] == 2
    lines = (tmp_path / "est" / "loadings.csv").read_text().splitlines()
    assert lines[0] == "series,factor_1,factor_2" and len(lines) == 801


def test_estimate_matrix_writes_both_modes(tmp_path, capsys):
    run("simulate", "--model", "matrix", "--d1", 12, "--d2", 10, "--T", 60, "--out", tmp_path / "sim")
    assert run("estimate", "--model", "matrix", "--r1", 2, "--r2", 2, "--input", tmp_path / "sim" / "panel.csv",
               "--out", tmp_path / "est") == 0
    reports, meta = fio.read_report(tmp_path / "est" / "report.json")
    assert [r.mode for r in reports] == ["matrix-mode-1", "matrix-mode-2"]
    assert meta["metadata"]["g1_hat"] * meta["metadata"]["g2_hat"] == pytest.approx(
        (reports[0].diagnostics["trace_S"] + reports[1].diagnostics["trace_S"]) / 2, rel=1e-10)
    assert (tmp_path / "est" / "loadings_mode1.csv").exists()
    assert (tmp_path / "est" / "loadings_mode2.csv").exists()
    assert "matrix-mode-2: alpha_hat" in capsys.readouterr().out


def test_zero_matrix_panel_exits_four(tmp_path, capsys):
    fio.write_panel(MatrixPanel(np.zeros((6, 4, 3))), tmp_path / "z.csv")
    code = run("estimate", "--model", "matrix", "--r1", 1, "--r2", 1, "--input", tmp_path / "z.csv",
               "--out", tmp_path / "est")
    assert code == 4
    assert "degenerate" in capsys.readouterr().err


def test_zero_diagonal_names_factor(tmp_path, capsys):
    # third series is identically zero, so the third projected diagonal is exactly 0
    x = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [1.0, 1.0, 0.0]])
    fio.write_panel(VectorPanel(x), tmp_path / "p.csv")
    code = run("estimate", "--model", "vector", "--r", 3, "--input", tmp_path / "p.csv", "--out", tmp_path / "e")
    assert code == 4
    assert "factor 3" in capsys.readouterr().err


def test_unparseable_panel_exits_three(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,i,value\n0,0,1\n0,0,2\n")
    assert run("estimate", "--model", "vector", "--r", 1, "--input", bad, "--out", tmp_path / "o") == 3
    assert run("estimate", "--model", "vector", "--r", 1, "--input", tmp_path / "nope.csv",
               "--out", tmp_path / "o") == 3
    assert "cannot parse" in capsys.readouterr().err


def test_model_mismatch_exits_three(tmp_path):
    run("simulate", "--model", "matrix", "--d1", 4, "--d2", 3, "--T", 8, "--out", tmp_path / "sim")
    assert run("estimate", "--model", "vector", "--r", 1, "--input", tmp_path / "sim" / "panel.csv",
               "--out", tmp_path / "o") == 3


def test_labelled_square_panel(tmp_path):
    rng = np.random.default_rng(69)
    zones = [f"zone{i:02d}" for i in range(69)]
    A = rng.standard_normal((69, 3))
    F = rng.standard_normal((40, 3, 3))
    data = A @ F @ A.T + 0.5 * rng.standard_normal((40, 69, 69))
    fio.write_panel(MatrixPanel(data, row_labels=zones, col_labels=zones), tmp_path / "taxi.csv",
                    fmt="stacked_csv")
    assert run("estimate", "--model", "matrix", "--r1", 3, "--r2", 3, "--demean",
               "--input", tmp_path / "taxi.csv", "--out", tmp_path / "est") == 0
    reports, _ = fio.read_report(tmp_path / "est" / "report.json")
    assert [len(r.alpha_hat) for r in reports] == [3, 3]
    for name, label in (("loadings_mode1.csv", "row"), ("loadings_mode2.csv", "column")):
        lines = (tmp_path / "est" / name).read_text().splitlines()
        assert lines[0] == f"{label},factor_1,factor_2,factor_3"
        assert [ln.split(",")[0] for ln in lines[1:]] == zones


def _config(tmp_path, **over):
    cfg = {"model": "vector", "setting": "I", "grid": [[40, 30]], "reps": 5, "base_seed": 1}
    cfg.update(over)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_montecarlo_smoke(tmp_path):
    out = tmp_path / "mc" / "table.csv"
    assert run("montecarlo", "--config", _config(tmp_path), "--out", out) == 0
    table = fio.read_mc_table(out)
    assert len(table.rows) == 2 and {r.d1 for r in table.rows} == {40}
    assert fio.read_mc_table(out.with_suffix(".json")) == table


def test_montecarlo_builtin_reference_check(tmp_path, capsys):
    cfg = _config(tmp_path, grid=[[50, 50], [100, 200], [200, 200]], reps=500, base_seed=0)
    assert run("montecarlo", "--config", cfg, "--out", tmp_path / "t1.csv", "--reference", "builtin",
               "--check") == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 6


def test_montecarlo_corrupted_reference_exits_five(tmp_path):
    cfg = _config(tmp_path)
    run("montecarlo", "--config", cfg, "--out", tmp_path / "t.csv")
    table = fio.read_mc_table(tmp_path / "t.csv")
    corrupted = MCTable(tuple(type(r)(**{**vars(r), "mean": r.mean + 0.5}) for r in table.rows))
    (tmp_path / "ref.csv").write_text(corrupted.to_csv())
    assert run("montecarlo", "--config", cfg, "--out", tmp_path / "t2.csv", "--reference", tmp_path / "ref.csv",
               "--check") == 5
    # the same comparison without --check reports but succeeds
    assert run("montecarlo", "--config", cfg, "--out", tmp_path / "t3.csv", "--reference", tmp_path / "ref.csv") == 0


def test_montecarlo_reference_missing_cell_exits_five(tmp_path):
    cfg = _config(tmp_path, grid=[[41, 30]])
    assert run("montecarlo", "--config", cfg, "--out", tmp_path / "t.csv", "--reference", "builtin",
               "--check") == 5


def test_montecarlo_bad_config_exits_three(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("montecarlo", "--config", bad, "--out", tmp_path / "t.csv") == 3
    bad.write_text(json.dumps({"model": "vector", "setting": "IV", "grid": [[5, 5]]}))
    assert run("montecarlo", "--config", bad, "--out", tmp_path / "t.csv") == 3


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "factorstrength", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "montecarlo" in proc.stdout


def test_builtin_reference_is_loadable():
    assert len(reference_tables().rows) == 300
