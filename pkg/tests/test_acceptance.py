"""Acceptance suite: one test per criterion, each printing a PASS/FAIL/SKIP line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in an
"acceptance criteria" section at the end of the pytest output.

Criteria 11 and 12 need curated field-trial data that is not shipped with
the package.  Point ``ALFALFA_YIELD_EXTERNAL_CONFIG`` at a run config (YAML,
see ``alfalfa_yield.config``) whose inputs cover GA, KY, MS and WI to run
them; otherwise they are skipped.
"""

import csv
import dataclasses
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from alfalfa_yield.config import load_config, load_dataset
from alfalfa_yield.experiments import run_pooled, run_tda
from alfalfa_yield.models import GRIDS, BayesianRidge, DecisionTreeRegressor, KNeighborsRegressor, LinearRegression
from alfalfa_yield.models.mlp import MLPRegressor, loss_and_grad
from alfalfa_yield.models.svr import kernel_matrix, kkt_residuals, solve_dual
from alfalfa_yield.selection import FitAudit
from alfalfa_yield.stats import mae, pearson_r, percent_error, r2, t_two_sided_p, ttest_unpaired
from alfalfa_yield.synth import SynthConfig, generate
from oracles import (
    knn_oracle,
    log_evidence_oracle,
    mlp_fd_grad,
    ols_oracle,
    svr_dual_oracle,
    t_pvalue_oracle,
    tree_oracle,
    trees_equal,
)

EXTERNAL = os.environ.get("ALFALFA_YIELD_EXTERNAL_CONFIG")


def _cli(*args, cwd=None):
    cmd = [sys.executable, "-m", "alfalfa_yield", *map(str, args)]
    return subprocess.run(cmd, capture_output=True, text=True, cwd=cwd)


def _finish(verdict, number, ok, detail):
    verdict(number, "PASS" if ok else "FAIL", detail)
    assert ok, detail


def test_criterion_01_tree_oracle(verdict):
    t0 = time.perf_counter()
    mismatches = 0
    for i in range(200):
        rng = np.random.default_rng(1000 + i)
        n = int(rng.integers(1, 31))
        if i % 2:
            X = rng.integers(0, 4, size=(n, 5)).astype(float)
            y = rng.integers(0, 6, size=n).astype(float)
        else:
            X = rng.normal(size=(n, 5))
            y = rng.normal(size=n)
        depth = int(rng.integers(0, 8))
        tree = DecisionTreeRegressor(max_depth=depth).fit(X, y)
        mismatches += not trees_equal(tree.to_nested(), tree_oracle(X, y, depth))
    elapsed = time.perf_counter() - t0
    _finish(verdict, 1, mismatches == 0 and elapsed < 30,
            f"tree vs exhaustive oracle: {200 - mismatches}/200 identical, {elapsed:.1f}s (limit 30s)")


def test_criterion_02_knn_oracle(verdict):
    grid = GRIDS["knn"]
    bad = checked = 0
    for i in range(100):
        rng = np.random.default_rng(2000 + i)
        n = int(rng.integers(10, 80))
        X = rng.integers(0, 3, size=(n, 5)).astype(float) if i % 3 == 0 else rng.normal(size=(n, 5))
        y = rng.normal(size=n)
        Q = np.vstack([rng.normal(size=(6, 5)), X[:4]])
        for k in grid["n_neighbors"]:
            for w in grid["weights"]:
                ref = knn_oracle(X, y, Q, k, w)
                for leaf in grid["leaf_size"]:
                    got = KNeighborsRegressor(k, w, leaf).fit(X, y).predict(Q)
                    bad += not np.array_equal(got, ref)
                    checked += 1
    _finish(verdict, 2, bad == 0, f"KNN vs brute force: {checked - bad}/{checked} exact (100 datasets x full grid)")


def test_criterion_03_svr_dual(verdict):
    kernels = ("linear", "poly", "rbf")
    worst_obj = worst_kkt = 0.0
    for i in range(50):
        rng = np.random.default_rng(3000 + i)
        n = int(rng.integers(2, 11))
        X = rng.normal(size=(n, 5))
        y = rng.normal(size=n)
        kernel = kernels[i % 3]
        C = float(rng.choice(GRIDS["svm"]["C"]))
        K = kernel_matrix(X, X, kernel, 1.0 / (5 * X.var()), int(rng.choice(GRIDS["svm"]["degree"])))
        sol = solve_dual(K, y, C, 0.1)
        ref, _ = svr_dual_oracle(K, y, C, 0.1)
        worst_obj = max(worst_obj, abs(sol["objective"] - ref))
        worst_kkt = max(worst_kkt, float(kkt_residuals(K, y, sol["alpha"], sol["bias"], C, 0.1).max()))
    _finish(verdict, 3, worst_obj < 1e-3 and worst_kkt < 1e-3,
            f"SVR dual vs QP on 50 instances: max |obj gap| {worst_obj:.2e}, max KKT residual {worst_kkt:.2e}")


def test_criterion_04_ols(verdict):
    worst_orth = worst_coef = 0.0
    ok = True
    for i in range(100):
        rng = np.random.default_rng(4000 + i)
        n = int(rng.integers(10, 200))
        X = rng.normal(size=(n, 5))
        y = X @ rng.normal(size=5) + rng.normal(size=n) + float(rng.normal())
        m = LinearRegression().fit(X, y)
        b0, b = ols_oracle(X, y)
        coef_err = max(abs(m.intercept_ - b0), float(np.max(np.abs(m.coef_ - b))))
        A = np.hstack([np.ones((n, 1)), X])
        orth = float(np.max(np.abs(A.T @ (y - m.predict(X)))))
        ok &= coef_err < 1e-8 and orth < 1e-6 * n
        worst_coef = max(worst_coef, coef_err)
        worst_orth = max(worst_orth, orth / n)
    _finish(verdict, 4, ok, f"OLS on 100 instances: max coef error {worst_coef:.1e}, "
                            f"max |r'x_j|/n {worst_orth:.1e}")


def test_criterion_05_mlp_gradient(verdict):
    sizes = GRIDS["nn"]["hidden_layer_sizes"]
    worst = 0.0
    for i in range(20):
        rng = np.random.default_rng(5000 + i)
        hidden = sizes[int(rng.integers(0, len(sizes)))]
        batch = int(rng.integers(1, 33))
        m = MLPRegressor(hidden_layer_sizes=hidden)
        m.initialize(5, rng)
        X = rng.normal(size=(batch, 5))
        y = rng.normal(size=batch)
        _, gW, gb = loss_and_grad(m.coefs_, m.intercepts_, X, y)
        fW, fb = mlp_fd_grad(m.coefs_, m.intercepts_, X, y)
        for a, b in zip(gW + gb, fW + fb):
            # relative to the larger of the two magnitudes, floored so exact zeros compare sensibly
            rel = np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-7)
            worst = max(worst, float(rel.max()))
    _finish(verdict, 5, worst < 1e-4, f"MLP backprop vs finite differences, 20 pairs: max relative error {worst:.1e}")


def test_criterion_06_bayesian_ridge(verdict):
    monotone = True
    worst_drop = 0.0
    worst_rec = 0.0
    for i in range(20):
        rng = np.random.default_rng(6000 + i)
        n = int(rng.integers(15, 120))
        X = rng.normal(size=(n, 5))
        w = rng.normal(size=5)
        y = X @ w + rng.normal(scale=float(rng.uniform(0.1, 2.0)), size=n)
        m = BayesianRidge(n_iter=300).fit(X, y)
        d = np.diff(m.scores_)
        drop = float(-d.min()) if d.size else 0.0
        worst_drop = max(worst_drop, drop)
        monotone &= drop <= 1e-9 * float(np.abs(m.scores_).max())
        # the stored score is the log evidence at the current hyperparameters (flat hyperpriors)
        if i == 0:
            flat = BayesianRidge(n_iter=3, alpha_1=0, alpha_2=0, lambda_1=0, lambda_2=0).fit(X, y)
            Xc, yc = X - X.mean(0), y - y.mean()
            ev = log_evidence_oracle(Xc, yc, flat.alpha_, flat.lambda_)
            monotone &= math.isclose(flat.scores_[-1], ev, rel_tol=1e-9)
        y0 = X @ w + 0.7
        rec = float(np.max(np.abs(BayesianRidge().fit(X, y0).coef_ - LinearRegression().fit(X, y0).coef_)))
        worst_rec = max(worst_rec, rec)
    _finish(verdict, 6, monotone and worst_rec < 1e-3,
            f"BRR on 20 instances: evidence monotone={monotone} (largest step down {worst_drop:.1e}), "
            f"noiseless max |coef - OLS| {worst_rec:.1e}")


def test_criterion_07_stats(verdict):
    checks = [
        mae([1, 2, 3], [1, 2, 3]) == 0,
        abs(mae([1, 2, 3], [1, 2, 2]) - 1 / 3) < 1e-4,
        abs(mae([0], [5]) - 5) < 1e-4,
        abs(pearson_r([1, 2, 3], [1, 2, 3]) - 1) < 1e-4 and abs(r2([1, 2, 3], [1, 2, 3]) - 1) < 1e-4,
        abs(pearson_r([1, 2, 3], [3, 2, 1]) + 1) < 1e-4 and abs(r2([1, 2, 3], [3, 2, 1]) + 3) < 1e-4,
        abs(pearson_r([1, 2, 3], [1, 2, 2]) - math.sqrt(3) / 2) < 1e-4,
        abs(r2([1, 2, 3], [1, 2, 2]) - 0.5) < 1e-4,
        percent_error([1, 2], [1, 2]) == 0,
        abs(percent_error([2], [1]) - 50) < 1e-4,
        abs(percent_error([4, 2], [2, 1]) - 50) < 1e-4,
    ]
    t = ttest_unpaired([0.9, 0.92, 0.94], [0.9, 0.92, 0.94])
    checks.append(t.t == 0 and t.p == 1)
    t = ttest_unpaired([1, 2, 3], [2, 3, 4])
    checks.append(abs(t.t + 1.2247) < 1e-4 and abs(t.df - 4) < 1e-4 and abs(t.p - 0.2879) < 1e-4)
    t = ttest_unpaired([2, 2, 2], [2, 2])
    checks.append(t.t == 0 and t.p == 1)
    worst = 0.0
    for df in (1, 1.5, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 200):
        for tv in (0.0, 0.05, 0.5, 1.0, 1.96, 3.0, 5.0, 10.0):
            worst = max(worst, abs(t_two_sided_p(tv, df) - t_pvalue_oracle(tv, df)))
    ok = all(checks) and worst < 1e-6
    _finish(verdict, 7, ok, f"stats examples {sum(checks)}/{len(checks)} within 1e-4; "
                            f"p-value vs quadrature max error {worst:.1e} (df 1..200)")


@pytest.mark.slow
def test_criterion_08_synthetic_end_to_end(verdict, tmp_path):
    t0 = time.perf_counter()
    res = _cli("synth", "--seed", 42, "--out", tmp_path / "corpus", "--n-states", 2, "--samples-per-state", 250,
               "--noise-sd", 0)
    assert res.returncode == 0, res.stderr
    res = _cli("cv", "--config", tmp_path / "corpus" / "run.yaml", "--seed", 42, "--out", tmp_path / "cv",
               "--families", "dt,rf,knn,brr,lr")
    elapsed = time.perf_counter() - t0
    assert res.returncode == 0, res.stderr
    with open(tmp_path / "cv" / "pooled_report.csv", newline="") as fh:
        means = {r["family"]: float(r["r2"]) for r in csv.DictReader(fh) if r["fold"] == "mean"}
    strong = min(means["dt"], means["rf"], means["knn"])
    weak = max(means["brr"], means["lr"])
    ok = strong >= 0.9 and weak < strong and elapsed < 300
    detail = ", ".join(f"{k.upper()} {v:.3f}" for k, v in means.items())
    _finish(verdict, 8, ok, f"synthetic cv mean R2: {detail}; {elapsed:.0f}s (limit 300s)")


def _small_grids():
    return {
        "dt": {"max_depth": [2, 5]},
        "rf": {"n_estimators": [3], "max_depth": [3, 5]},
        "knn": {"n_neighbors": [2, 5], "weights": ["uniform", "distance"]},
        "svm": {"kernel": ["rbf", "linear"], "C": [1.0]},
        "nn": {"hidden_layer_sizes": [(3,)], "solver": ["adam", "sgd"], "max_epochs": [20]},
        "brr": {"n_iter": [50], "alpha_1": [1e-6, 1.0]},
    }


def test_criterion_09_leakage(verdict, tmp_path):
    cfg = SynthConfig(seed=9, n_states=3, samples_per_state=25, state_codes=("GA", "KY", "WI"))
    data = generate(cfg, tmp_path).expected
    fams = ["dt", "rf", "knn", "svm", "nn", "brr", "lr"]
    grids = _small_grids()

    audit = FitAudit()
    run_pooled(data, fams, seed=1, outer_k=5, inner_k=3, grids=grids, audit=audit)
    leaks = 0
    tested = []
    for i in range(5):
        test = audit.rows("evaluate", outer=i, family="dt")
        tested.extend(test)
        leaks += len(test & (audit.rows("scaler_fit", outer=i) | audit.rows("model_fit", outer=i)))
        for inner in range(3):
            fitted = audit.rows("model_fit", outer=i, inner=inner)
            scaled = audit.rows("scaler_fit", outer=i, inner=inner)
            leaks += len(scaled - fitted)  # inner scalers see exactly the inner training rows
    pooled_ok = leaks == 0 and sorted(tested) == list(range(len(data)))

    audit = FitAudit()
    run_tda(data, ["KY", "WI"], "GA", fams, seed=1, inner_k=3, grids=grids, audit=audit)
    target = set(np.flatnonzero(data.states == "GA").tolist())
    tda_leaks = len(target & (audit.rows("scaler_fit") | audit.rows("model_fit")))
    tda_ok = tda_leaks == 0 and audit.rows("evaluate") == target and bool(audit.rows("model_fit"))
    _finish(verdict, 9, pooled_ok and tda_ok,
            f"leakage audit over {len(fams)} families: pooled {leaks} leaked rows, TDA {tda_leaks} leaked rows")


def test_criterion_10_determinism(verdict, tmp_path):
    res = _cli("synth", "--seed", 7, "--out", tmp_path / "corpus", "--samples-per-state", 40)
    assert res.returncode == 0, res.stderr
    outs = []
    for name in ("a", "b"):
        res = _cli("cv", "--config", tmp_path / "corpus" / "run.yaml", "--seed", 42, "--out", tmp_path / name,
                   "--families", "dt,rf,knn,svm,nn,brr,lr", "--outer-k", 5, "--inner-k", 3)
        assert res.returncode == 0, res.stderr
        outs.append(tmp_path / name)
    files = ("pooled_report.csv", "ttest_matrix.csv", "summary.txt")
    same = [f for f in files if (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()]
    _finish(verdict, 10, len(same) == len(files), f"cv --seed 42 twice: {len(same)}/{len(files)} report files "
                                                   f"byte-identical (all seven families)")


def _external_data(verdict, number):
    if not EXTERNAL:
        reason = "external curated field-trial data not supplied (set ALFALFA_YIELD_EXTERNAL_CONFIG)"
        verdict(number, "SKIP", reason)
        pytest.skip(reason)
    cfg = load_config(Path(EXTERNAL))
    if cfg.seed is None:
        cfg = dataclasses.replace(cfg, seed=42)
    data, _ = load_dataset(cfg)
    return cfg, data


@pytest.mark.slow
def test_criterion_11_external_pooled(verdict):
    cfg, data = _external_data(verdict, 11)
    data = data.select_states(["GA", "KY"])
    fams = ["rf", "dt", "knn", "svm", "brr", "lr"]
    res = run_pooled(data, fams, seed=cfg.seed)
    mean = {f: res.reports[f].mean("r2") for f in fams}
    best = res.reports["rf"].best_fold
    advisory = 0.89 <= best.metrics.r2 <= 0.99 and abs(best.metrics.mae - 0.081) <= 0.05
    ordering = min(mean["rf"], mean["dt"], mean["knn"]) > mean["svm"] > max(mean["brr"], mean["lr"])
    detail = (f"ordering RF/DT/KNN > SVM > BRR/LR by mean R2: {ordering} "
              f"({', '.join(f'{k.upper()} {v:.3f}' for k, v in mean.items())}); advisory RF best fold "
              f"R2 {best.metrics.r2:.3f}, MAE {best.metrics.mae:.3f} {'within' if advisory else 'outside'} range")
    _finish(verdict, 11, ordering, detail)


@pytest.mark.slow
def test_criterion_12_external_tda(verdict):
    cfg, data = _external_data(verdict, 12)
    data = data.select_states(["GA", "KY", "MS", "WI"])
    fams = list(cfg.families)
    pooled = run_pooled(data, fams, seed=cfg.seed)
    tda = run_tda(data, ["KY", "MS", "WI"], "GA", fams, seed=cfg.seed)
    below = {f: tda.results[f].metrics.r2 < pooled.reports[f].mean("r2") for f in fams}
    detail = ", ".join(f"{f.upper()} TDA {tda.results[f].metrics.r2:.3f} vs pooled {pooled.reports[f].mean('r2'):.3f}"
                       for f in fams)
    _finish(verdict, 12, all(below.values()), f"TDA {{KY,MS,WI}}->GA below pooled: {detail}")
