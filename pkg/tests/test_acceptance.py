"""Acceptance gate.

Each test appends one PASS/FAIL line to the terminal summary before
asserting, so a full run prints the status of every criterion.
"""

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from factorstrength.core import VectorPanel, realized_strengths
from factorstrength.dgp import matrix_setting, simulate_matrix, simulate_vector, vector_setting
from factorstrength.estimators import sample_cov_vector
from factorstrength.harness import MCConfig, compare_reference, mean_abs_error, reference_tables, run_grid
from factorstrength.strength import estimate_matrix, estimate_vector

from conftest import ACCEPTANCE_LINES


def record(number, title, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
    return ok


def timed_grid(config):
    start = time.perf_counter()
    table = run_grid(config)
    return table, time.perf_counter() - start


def check_means(table, expected, tol):
    got = [row.mean for row in table.rows]
    worst = max(abs(g - e) for g, e in zip(got, expected))
    return got, worst, worst <= tol


def test_01_vector_setting_one_table():
    config = MCConfig(model="vector", setting="I", grid=[[50, 50], [100, 200], [200, 200]], reps=500)
    table, secs = timed_grid(config)
    report = compare_reference(table, reference_tables(), mean_tol=0.03, sd_factor=2.0)
    ok = report.passed and secs < 180
    cells = ", ".join(f"{v.mean:.3f}/{v.ref_mean:.2f} sd {v.sd:.3f}/{v.ref_sd:.2f}" for v in report.verdicts)
    record(1, "vector setting I, three cells, 500 reps", ok, f"{cells}; {secs:.1f}s")
    assert report.passed, "\n".join(report.lines())
    assert secs < 180


def test_02_vector_setting_two_cell():
    config = MCConfig(model="vector", setting="II", grid=[[100, 200]], reps=500)
    table, secs = timed_grid(config)
    got, worst, ok = check_means(table, [0.80, 0.59], 0.03)
    record(2, "vector setting II, d=100 T=200", ok and secs < 60,
           f"means {got[0]:.3f}, {got[1]:.3f}; max dev {worst:.3f}; {secs:.1f}s")
    assert ok and secs < 60


def test_03_matrix_setting_one_cell():
    config = MCConfig(model="matrix", setting="I", grid=[[[50, 50], 200]], reps=100)
    table, secs = timed_grid(config)
    got, worst, ok = check_means(table, [1.00, 0.59, 1.00, 0.58], 0.04)
    record(3, "matrix setting I, (50,50) T=200", ok and secs < 300,
           f"means {', '.join(f'{g:.3f}' for g in got)}; max dev {worst:.3f}; {secs:.1f}s")
    assert ok and secs < 300


def test_04_matrix_setting_two_cell():
    config = MCConfig(model="matrix", setting="II", grid=[[[50, 100], 200]], reps=100)
    table, secs = timed_grid(config)
    got, worst, ok = check_means(table, [0.78, 0.57, 0.82, 0.61], 0.04)
    record(4, "matrix setting II, (50,100) T=200", ok and secs < 480,
           f"means {', '.join(f'{g:.3f}' for g in got)}; max dev {worst:.3f}; {secs:.1f}s")
    assert ok and secs < 480


def test_05_error_shrinks_along_diagonal():
    sizes = [50, 100, 200, 400]
    config = MCConfig(model="vector", setting="I", grid=[[n, n] for n in sizes], reps=500)
    _, cells = run_grid(config, return_cells=True)
    mae = np.array([mean_abs_error(config, c) for c in cells])      # sizes x factors
    steps = np.diff(mae, axis=0)
    ok = bool(np.all(steps <= 0.01))
    detail = "; ".join(f"j={j + 1}: " + " ".join(f"{v:.4f}" for v in mae[:, j]) for j in range(mae.shape[1]))
    record(5, "mean |alpha_hat - alpha| non-increasing in d=T (slack 0.01)", ok, detail)
    assert ok, detail


def test_06_noiseless_exactness():
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        d, T = (60, 150, 400)[seed % 3], (80, 300, 1000)[seed % 3]
        alpha = np.sort(rng.uniform(0.2, 1.0, 3))[::-1]
        Q, _ = np.linalg.qr(rng.uniform(-math.sqrt(3), math.sqrt(3), (d, 3)))
        A = Q * np.sqrt(float(d) ** alpha)
        Fq, _ = np.linalg.qr(rng.standard_normal((T, 3)))
        F = math.sqrt(T) * Fq
        fit = estimate_vector(VectorPanel(F @ A.T), 3, Q=Q)
        worst = max(worst, float(np.max(np.abs(fit.report.alpha_hat - realized_strengths(A)))))
    ok = worst <= 1e-10
    record(6, "noiseless exactness with supplied loading basis", ok, f"max |alpha_hat - alpha_tilde| = {worst:.2e}")
    assert ok


def test_07_identifiability_identities():
    worst_prod = worst_ratio = 0.0
    runs = [("I", 25, 25, 50), ("II", 50, 100, 200), ("I", 10, 40, 30), ("II", 30, 8, 60)]
    for k, (setting, d1, d2, T) in enumerate(runs):
        panel, _ = simulate_matrix(matrix_setting(setting, d1, d2, T, seed=100 + k))
        for estimator in ("iterative_projection", "pca"):
            fit = estimate_matrix(panel, 2, 2, estimator=estimator)
            tr = fit.traces
            avg = (tr.trS1 + tr.trS2) / 2
            worst_prod = max(worst_prod, abs(tr.g1_hat * tr.g2_hat - avg) / avg)
            a, b = tr.g1_hat / (2 * d1), tr.g2_hat / (2 * d2)
            worst_ratio = max(worst_ratio, abs(a - b) / abs(b))
    ok = worst_prod <= 1e-10 and worst_ratio <= 1e-10
    record(7, "trace-split identities", ok, f"product rel err {worst_prod:.1e}, ratio rel err {worst_ratio:.1e}")
    assert ok


def test_08_transpose_symmetry():
    mismatches = 0
    for seed, (setting, d1, d2) in enumerate([("I", 20, 30), ("II", 50, 100), ("I", 25, 25)]):
        panel, _ = simulate_matrix(matrix_setting(setting, d1, d2, 80, seed=seed))
        fit = estimate_matrix(panel, 2, 2)
        flip = estimate_matrix(panel.transposed(), 2, 2)
        for a, b in ((fit.reports[0], flip.reports[1]), (fit.reports[1], flip.reports[0])):
            same = (a.alpha_hat.tobytes() == b.alpha_hat.tobytes() and a.d_hat.tobytes() == b.d_hat.tobytes()
                    and a.dimension == b.dimension)
            mismatches += not same
    ok = mismatches == 0
    record(8, "slab transposition swaps mode reports bitwise", ok, f"{mismatches} mismatched reports out of 6")
    assert ok


def test_09_pca_diagonal_identity():
    worst_off = worst_eig = 0.0
    for seed, (setting, d, T) in enumerate([("I", 50, 50), ("II", 100, 200), ("I", 200, 100), ("II", 30, 400)]):
        panel, _ = simulate_vector(vector_setting(setting, d, T, seed=seed))
        fit = estimate_vector(panel, 2, estimator="pca")
        worst_off = max(worst_off, fit.report.diagnostics["offdiag_mass"])
        top = np.sort(np.linalg.eigvalsh(sample_cov_vector(panel).S))[::-1][:2]
        worst_eig = max(worst_eig, float(np.max(np.abs(fit.report.d_hat - top) / top)))
    ok = worst_off <= 1e-8 and worst_eig <= 1e-8
    record(9, "PCA projected matrix is diagonal and reproduces eigenvalues", ok,
           f"off-diagonal mass {worst_off:.1e}, eigenvalue rel err {worst_eig:.1e}")
    assert ok


def test_10_montecarlo_thread_determinism(tmp_path):
    config = {"model": "matrix", "setting": "II", "grid": [[[10, 15], 40], [[20, 10], 30]], "reps": 24,
              "base_seed": 12345}
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    outputs = {}
    for threads in ("1", "8"):
        out = tmp_path / f"table_{threads}.csv"
        env = {**os.environ, "FSL_THREADS": threads}
        proc = subprocess.run([sys.executable, "-m", "factorstrength", "montecarlo", "--config", str(cfg_path),
                               "--out", str(out)], env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outputs[threads] = out.read_bytes()
    ok = outputs["1"] == outputs["8"]
    record(10, "montecarlo CSV identical at FSL_THREADS=1 and 8", ok,
           f"{len(outputs['1'])} bytes, {'identical' if ok else 'different'}")
    assert ok
