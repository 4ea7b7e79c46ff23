"""Acceptance gates for the whole pipeline, one test per numbered criterion.

Each test measures its quantity end to end and funnels the verdict through
``_verdict``, which prints one ``[criterion N] PASS/FAIL`` line with the
observed numbers (visible with ``pytest -s`` and in failure output) before
asserting.  Thresholds are pinned in the tests themselves.
"""

import json
import os
import subprocess
import sys
import time

import numpy as np

from sortad.classifier import init_model, loss_and_gradients
from sortad.data import RobustScaler, pad_even, stratified_split
from sortad.detector import SortadDetector
from sortad.errors import TransformOverflowError
from sortad.evaluation import evaluate, roc_auc
from sortad.scoring import (
    DirichletModel,
    dirichlet_scores,
    dirichlet_term,
    fit_dirichlet,
    fit_dirichlet_model,
    modified_scores,
    summation_scores,
)
from sortad.synthetic import gaussian_with_outliers, thyroid_like, to_csv
from sortad.transforms import forward, forward_batch, generate_spec, invert


def _verdict(number, passed, detail):
    print(f"\n[criterion {number}] {'PASS' if passed else 'FAIL'} {detail}")
    assert passed, f"criterion {number}: {detail}"


def test_criterion_01_invertibility():
    rng = np.random.default_rng(314)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        dim = 2 * int(rng.integers(1, 17))  # even widths 2..32
        spec = generate_spec(rng, dim)
        x = rng.uniform(-3.0, 3.0, size=dim)
        back = invert(spec, forward(spec, x))
        rel = np.abs(back - x) / np.maximum(np.abs(x), 1e-12)
        worst = max(worst, float(rel.max()))
    elapsed = time.perf_counter() - t0
    _verdict(
        1,
        worst <= 1e-8 and elapsed < 10.0,
        f"1000 round trips, max rel err {worst:.3e} (bar 1e-08) in {elapsed:.1f}s (bar 10s)",
    )


def test_criterion_02_numerical_stability():
    # normal bulk plus 1% Cauchy-tailed rows: after robust scaling the worst
    # rows sit thousands of IQRs out, which the divide factor must absorb
    rng = np.random.default_rng(2024)
    n, dim = 100_000, 8
    raw = rng.normal(size=(n, dim))
    outlier_rows = rng.choice(n, size=n // 100, replace=False)
    raw[outlier_rows] += rng.standard_t(df=1, size=(len(outlier_rows), dim))
    scaled = pad_even(RobustScaler().fit(raw).transform(raw))

    spec_rng = np.random.default_rng(909)
    t0 = time.perf_counter()
    failure = None
    try:
        with np.errstate(over="raise", under="raise", invalid="raise"):
            for i in range(22):
                spec = generate_spec(spec_rng, scaled.shape[1], spec_id=i)
                assert np.isfinite(forward_batch(spec, scaled)).all()
    except (FloatingPointError, TransformOverflowError) as exc:
        failure = str(exc)
    elapsed = time.perf_counter() - t0
    _verdict(
        2,
        failure is None and elapsed < 60.0,
        f"22 transformations x {n} samples (|x| up to {np.abs(scaled).max():.0f}) "
        f"in {elapsed:.1f}s (bar 60s)" + (f"; float error: {failure}" if failure else ""),
    )


def _clears_relu_kinks(model, batch, margin=1e-3):
    # a central difference is meaningless when a pre-activation sits within
    # the probe step of a kink, so candidate nets must clear every kink
    acts = batch
    for k in range(len(model.weights) - 1):
        pre = acts @ model.weights[k] + model.biases[k]
        if np.abs(pre).min() < margin:
            return False
        acts = np.maximum(pre, 0.0)
    return True


def test_criterion_03_gradient_check():
    rng = np.random.default_rng(5)
    step = 1e-5
    worst = 0.0
    for _ in range(20):
        while True:
            in_dim = int(rng.integers(2, 9))
            n_classes = int(rng.integers(2, 6))
            model = init_model(in_dim, n_classes, seed=int(rng.integers(10_000)))
            batch = rng.normal(size=(12, in_dim))
            if _clears_relu_kinks(model, batch):
                break
        labels = rng.integers(0, n_classes, size=12)
        _, (grad_w, grad_b) = loss_and_gradients(model, batch, labels)
        for params, grads in ((model.weights, grad_w), (model.biases, grad_b)):
            for arr, grad in zip(params, grads):
                flat, gflat = arr.ravel(), grad.ravel()
                for idx in range(flat.size):
                    keep = flat[idx]
                    flat[idx] = keep + step
                    up = loss_and_gradients(model, batch, labels)[0]
                    flat[idx] = keep - step
                    down = loss_and_gradients(model, batch, labels)[0]
                    flat[idx] = keep
                    numeric = (up - down) / (2 * step)
                    rel = abs(gflat[idx] - numeric) / max(abs(gflat[idx]) + abs(numeric), 1e-8)
                    worst = max(worst, rel)
    _verdict(
        3,
        worst <= 1e-4,
        f"20 nets, every parameter probed, max rel err {worst:.3e} (bar 1e-04)",
    )


def test_criterion_04_dirichlet_recovery():
    rng = np.random.default_rng(1848)
    true = np.array([5.0, 2.0, 1.0])
    fitted = fit_dirichlet(rng.dirichlet(true, size=10_000))
    errors = np.abs(fitted - true) / true
    _verdict(
        4,
        errors.max() <= 0.15,
        f"alpha {np.round(fitted, 3)} vs {true}, per-component errors "
        f"{np.round(errors, 4)} (bar 0.15)",
    )


def test_criterion_05_score_identities():
    flat = dirichlet_term(np.ones(4), np.array([0.4, 0.3, 0.2, 0.1]))

    rng = np.random.default_rng(7)
    dm = DirichletModel(
        alphas=rng.uniform(1.0, 6.0, size=(4, 4)),
        train_means=rng.normal(size=4),
        r=3.0,
        epsilon=1e-12,
    )
    stack = rng.dirichlet(np.ones(4), size=(4, 50))
    collapses = np.array_equal(modified_scores(dm, stack), dirichlet_scores(dm, stack))

    half = dirichlet_term(np.array([2.0, 1.0]), np.array([0.5, 0.5]))
    third = dirichlet_term(np.array([2.0, 1.0, 1.0]), np.full(3, 1.0 / 3.0))
    err_half = abs(half - (-0.6931471805599453))
    err_third = abs(third - (-1.0986122886681098))
    _verdict(
        5,
        flat == 0.0 and collapses and err_half <= 1e-12 and err_third <= 1e-12,
        f"flat-alpha term {flat}, modified==dirichlet for alpha>=1: {collapses}, "
        f"log example errors {err_half:.2e}, {err_third:.2e} (bar 1e-12)",
    )


def _prediction_stack(rng, n_rows, n_transformations, own, other, confident=None):
    # row block m holds class probabilities under transformation m; training
    # and normal rows are moderately confident draws, anomalous rows are
    # near-one-hot on the producing transformation
    stack = np.empty((n_transformations, n_rows, n_transformations))
    for m in range(n_transformations):
        if confident is None:
            alpha = np.full(n_transformations, other)
            alpha[m] = own
            stack[m] = rng.dirichlet(alpha, size=n_rows)
        else:
            row = np.full(n_transformations, (1.0 - confident) / (n_transformations - 1))
            row[m] = confident
            stack[m] = np.tile(row, (n_rows, 1))
    return stack


def test_criterion_06_easy_detection_ranks():
    rng = np.random.default_rng(42)
    m = 6
    train = _prediction_stack(rng, 500, m, own=6.0, other=0.7)
    dm = fit_dirichlet_model(train)
    normals = _prediction_stack(rng, 120, m, own=6.0, other=0.7)
    anomalies = _prediction_stack(rng, 30, m, own=6.0, other=0.7, confident=0.999)

    # the mock must land in the regime the anchored cases exist for
    assert dm.alphas.min() < 1.0

    sum_gap = summation_scores(anomalies).min() - summation_scores(normals).max()
    mod_gap = modified_scores(dm, normals).min() - modified_scores(dm, anomalies).max()
    _verdict(
        6,
        sum_gap > 0.0 and mod_gap > 0.0,
        f"summation puts all anomalies above normals by {sum_gap:.3f}, "
        f"modified puts all anomalies below normals by {mod_gap:.3f}",
    )


def _pairwise_auc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for a in pos:
        for b in neg:
            if a < b:
                wins += 1.0
            elif a == b:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def test_criterion_07_metric_oracles():
    rng = np.random.default_rng(2718)
    scores = np.round(rng.normal(size=200), 2)  # coarse grid forces ties
    labels = (rng.uniform(size=200) < 0.3).astype(int)
    auc_err = abs(roc_auc(scores, labels) - _pairwise_auc(scores, labels))

    train = rng.uniform(size=10_000)
    test = rng.uniform(size=10_000)
    rand_labels = (rng.uniform(size=10_000) < 0.05).astype(int)
    metrics = evaluate(train, test, rand_labels, [0.03]).thresholds[0]
    q = metrics.actual_alert_fraction
    sigma = np.sqrt(q * (1.0 - q) / rand_labels.sum()) / q
    rand_dev = abs(metrics.vs_random - 1.0)

    worked_train = np.arange(1.0, 101.0)
    worked_test = np.concatenate([np.arange(1.0, 11.0), np.arange(20.0, 110.0)])
    worked_labels = np.zeros(100, dtype=int)
    worked_labels[:5] = 1  # the five lowest-scoring samples are the anomalies
    wm = evaluate(worked_train, worked_test, worked_labels, [0.10]).thresholds[0]
    worked_ok = (wm.actual_alert_fraction, wm.non_adjusted_recall, wm.vs_random) == (
        0.10,
        1.0,
        10.0,
    )

    _verdict(
        7,
        auc_err <= 1e-12 and rand_dev <= 3.0 * sigma and worked_ok,
        f"AUC vs pairwise oracle err {auc_err:.2e} (bar 1e-12); random scorer "
        f"vs_random off by {rand_dev:.3f} (3-sigma {3.0 * sigma:.3f}); worked example "
        f"({wm.actual_alert_fraction}, {wm.non_adjusted_recall}, {wm.vs_random})",
    )


def test_criterion_08_threshold_transfer_grid():
    t0 = time.perf_counter()
    data = thyroid_like()
    train, validation, test = stratified_split(data, (1 / 3, 1 / 3, 1 / 3), seed=77)
    seeds = (1235, 7234, 3553)
    results = {}
    for n_transformations in (5, 10, 15, 22):
        for epochs in (1, 50):
            rows = []
            for seed in seeds:
                det = SortadDetector(
                    n_transformations=n_transformations, epochs=epochs, seed=seed
                ).fit(train.features)
                val = evaluate(
                    det.train_scores_,
                    det.score_samples(validation.features),
                    validation.labels,
                    [0.03],
                )
                tst = evaluate(
                    det.train_scores_, det.score_samples(test.features), test.labels, [0.03]
                )
                rows.append(
                    (val.thresholds[0].vs_random, val.roc_auc, tst.roc_auc, tst.thresholds[0].vs_random)
                )
            results[(n_transformations, epochs)] = tuple(np.mean(rows, axis=0))

    # pick the config by validation vs-random (ties by validation AUC),
    # then hold the bars against its test-set numbers
    selected = max(results, key=lambda key: (results[key][0], results[key][1]))
    _, _, test_auc, test_vsr = results[selected]
    elapsed = time.perf_counter() - t0
    _verdict(
        8,
        test_auc >= 0.93 and test_vsr >= 15.0 and elapsed < 1800.0,
        f"selected M={selected[0]} epochs={selected[1]} of 8 configs x 3 seeds: "
        f"test AUC {test_auc:.4f} (bar 0.93), VS-Random@3% {test_vsr:.2f} (bar 15), "
        f"{elapsed:.0f}s (bar 1800s)",
    )


def test_criterion_09_selection_benefit():
    data = gaussian_with_outliers(
        n_normal=3000, n_anomaly=120, dim=6, seed=0, shift=3.0, correlation=0.9
    )
    train, _, test = stratified_split(data, (1 / 3, 1 / 3, 1 / 3), seed=77)
    means = {}
    for n_candidates in (20, 1):
        vsr = []
        for seed in range(8):
            det = SortadDetector(
                n_transformations=12, n_candidates=n_candidates, epochs=5, seed=seed
            ).fit(train.features)
            report = evaluate(
                det.train_scores_, det.score_samples(test.features), test.labels, [0.03]
            )
            vsr.append(report.thresholds[0].vs_random)
        means[n_candidates] = float(np.mean(vsr))
    _verdict(
        9,
        means[20] >= means[1],
        f"mean VS-Random@3% over 8 seeds: K=20 {means[20]:.2f} vs K=1 {means[1]:.2f}",
    )


def test_criterion_10_determinism(tmp_path):
    data = gaussian_with_outliers(n_normal=300, n_anomaly=20, dim=4, seed=3)
    csv_path = tmp_path / "data.csv"
    to_csv(data, csv_path)
    base = {
        "data": str(csv_path),
        "seeds": [1235],
        "n_transformations": [3],
        "epochs": [2],
        "n_candidates": 4,
    }
    artifacts = []
    for name, threads in (("run_a", "1"), ("run_b", "1"), ("run_c", "4")):
        out = tmp_path / name
        cfg_path = tmp_path / f"{name}.json"
        cfg_path.write_text(json.dumps({**base, "out": str(out)}))
        env = dict(
            os.environ,
            OPENBLAS_NUM_THREADS=threads,
            OMP_NUM_THREADS=threads,
            MKL_NUM_THREADS=threads,
        )
        model_path = out / "models" / "model_M3_E2_s1235.sortad"
        for argv in (
            ["train", "--config", str(cfg_path)],
            ["score", "--config", str(cfg_path), "--model", str(model_path)],
        ):
            proc = subprocess.run(
                [sys.executable, "-m", "sortad", *argv],
                env=env,
                capture_output=True,
                text=True,
            )
            assert proc.returncode == 0, proc.stderr
        artifacts.append(
            (model_path.read_bytes(), (out / "scores_model_M3_E2_s1235_data.csv").read_bytes())
        )
    same_model = artifacts[0][0] == artifacts[1][0] == artifacts[2][0]
    same_scores = artifacts[0][1] == artifacts[1][1] == artifacts[2][1]
    _verdict(
        10,
        same_model and same_scores,
        "model and score files byte-identical across reruns and 1-vs-4 thread runs"
        if same_model and same_scores
        else f"model identical: {same_model}, scores identical: {same_scores}",
    )
