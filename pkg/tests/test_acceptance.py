"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
The training smoke criterion launches the CLI in subprocesses so the
single-threaded bit-reproducibility contract holds regardless of how the
host test process configured its math libraries.
"""

import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from gcart import evalreport, fdcheck, hypernet
from gcart.classical import hist_equalize
from gcart.corruptions import (BRIGHTNESS_ADD, CONTRAST_SCALE, DARKEN_SCALE,
                               corrupt_brightness, corrupt_contrast,
                               corrupt_darken)
from gcart.engine import Tape, Tensor
from gcart.softhist import HistogramConfig, soft_histogram, soft_histogram_rows
from gcart.tonecurve import (curve_eval, curve_rows, effective_params,
                             effective_params_rows, mono_penalty_from_samples)
from gcart.trainer import gcart_enhance


def _gate(num, name, ok):
    print(f"\n[criterion {num:02d}] {name}: {'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {num} ({name}) failed"


def test_criterion_01_endpoint_pinning():
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    n = 100_000
    raw = np.column_stack([rng.uniform(-5.0, 5.0, size=n),
                           rng.uniform(-10.0, 10.0, size=n),
                           rng.uniform(-10.0, 10.0, size=n)])
    a, b, d, e = effective_params_rows(Tensor(raw))
    grid = np.tile(np.array([0.0, 1.0]), (n, 1))
    f = curve_rows(Tensor(grid), a, b, d, e).data
    elapsed = time.perf_counter() - start
    ok = (np.max(np.abs(f[:, 0])) <= 1e-12
          and np.max(np.abs(f[:, 1] - 1.0)) <= 1e-9
          and elapsed < 1.0)
    _gate(1, f"endpoint pinning over {n} draws in {elapsed:.2f}s", ok)


def test_criterion_02_near_identity_initialization():
    start = time.perf_counter()
    w = hypernet.init_weights(np.random.default_rng(42))
    assert np.all(w.w2 == 0.0) and np.array_equal(w.b2, [0.0, -5.0, -5.0])
    img = np.random.default_rng(1).uniform(0.0, 1.0, size=(32, 32, 3))
    hists = soft_histogram(img)
    worst = 0.0
    x = np.linspace(0.0, 1.0, 1001)
    for c in range(3):
        p = effective_params(hypernet.predict_raw_params(hists[c], w))
        worst = max(worst, float(np.max(np.abs(curve_eval(p, x) - x))))
    elapsed = time.perf_counter() - start
    ok = worst <= 0.01 and elapsed < 1.0
    _gate(2, f"init curve within {worst:.4f} of identity in {elapsed:.2f}s", ok)


def test_criterion_03_parameter_count():
    count = hypernet.param_count(hypernet.init_weights(np.random.default_rng(0)))
    _gate(3, f"hypernetwork parameter count {count}", count == 643)


def test_criterion_04_full_pipeline_gradcheck():
    start = time.perf_counter()
    result = fdcheck.check_pipeline(seed=0, n_images=2, side=16, hidden=8,
                                    h=1e-5, rtol=1e-4)
    elapsed = time.perf_counter() - start
    ok = result["ok"] and elapsed < 60.0
    _gate(4, f"gradcheck of {result['n_params']} params, max rel err "
             f"{result['max_rel_err']:.2e} in {elapsed:.1f}s", ok)


def test_criterion_05_monotonicity_penalty():
    rng = np.random.default_rng(2)
    zero_ok = all(
        mono_penalty_from_samples(np.cumsum(rng.uniform(0.0, 0.1, size=32))) == 0.0
        for _ in range(1000))
    hand = mono_penalty_from_samples(np.array([0.0, 0.5, 0.25, 1.0]))
    hand_ok = abs(hand - 0.25 / 3.0) <= 1e-12
    _gate(5, f"mono penalty: 1000 monotone curves -> 0, hand vector -> {hand:.9f}",
          zero_ok and hand_ok)


def test_criterion_06_flops_calibration():
    totals = {m: evalreport.count_flops(m, 32, 32).total for m in ("gcart", "he", "gamma")}
    preds = [evalreport.count_flops("gcart", s, s).param_prediction_flops
             for s in (32, 64, 128)]
    pix32 = evalreport.count_flops("gcart", 32, 32).pixel_flops
    linear = all(evalreport.count_flops("gcart", s, s).pixel_flops
                 == pix32 * (s * s) // (32 * 32) for s in (64, 128))
    ok = (totals == {"gcart": 269_088, "he": 19_200, "gamma": 6_144}
          and len(set(preds)) == 1 and linear)
    _gate(6, f"flops totals {totals}, resolution-independent prediction {preds[0]}", ok)


def test_criterion_07_histogram_properties():
    rng = np.random.default_rng(3)
    img = rng.uniform(0.0, 1.0, size=(32, 32, 3))
    h, w, c = img.shape
    perm = rng.permutation(h * w)
    shuffled = img.reshape(h * w, c)[perm].reshape(h, w, c)
    perm_ok = np.array_equal(soft_histogram(img), soft_histogram(shuffled))

    cfg = HistogramConfig()
    rows = rng.uniform(0.0, 1.0, size=(1, 64))
    x = Tensor(rows, requires_grad=True)
    probe = np.zeros((1, cfg.bins))
    probe[0, 7] = 1.0
    from gcart import engine

    with Tape() as tape:
        loss = engine.sum(engine.mul(soft_histogram_rows(x, cfg), Tensor(probe)))
    tape.backward(loss)
    diff = rows - cfg.centers[7]
    analytic = -2.0 * diff / cfg.gamma * np.exp(-diff * diff / cfg.gamma) / rows.shape[1]
    rel = np.max(np.abs(tape.grad(x) - analytic) / np.maximum(np.abs(analytic), 1e-300))
    _gate(7, f"histogram shuffle bit-exact and pixel gradient rel err {rel:.2e}",
          perm_ok and rel <= 1e-8)


def test_criterion_08_he_monotone_transform_invariance():
    rng = np.random.default_rng(4)
    ok = True
    for _ in range(1000):
        levels = rng.integers(0, 64, size=(8, 8, 1)) * 4  # at most 64 occupied
        img = levels.astype(np.float64) / 255.0
        occupied = np.unique(levels)
        remap = np.zeros(256, dtype=np.int64)
        remap[occupied] = np.sort(rng.choice(256, size=occupied.size, replace=False))
        img2 = remap[levels].astype(np.float64) / 255.0
        if not np.array_equal(hist_equalize(img), hist_equalize(img2)):
            ok = False
            break
    _gate(8, "HE bit-identical under 1000 strictly increasing level remaps", ok)


def test_criterion_09_corruption_identities():
    rng = np.random.default_rng(5)
    img = rng.uniform(0.0, 1.0, size=(16, 16, 3))
    contrast_ok = np.array_equal(corrupt_contrast(img, 1.0), img)
    darken_ok = np.array_equal(corrupt_darken(img, 1.0), img)
    bright_gap = np.max(np.abs(corrupt_brightness(img, 0.0) - img))
    tables_ok = (BRIGHTNESS_ADD == (0.1, 0.2, 0.3, 0.4, 0.5)
                 and CONTRAST_SCALE == (0.4, 0.3, 0.2, 0.1, 0.05)
                 and DARKEN_SCALE == (0.8, 0.6, 0.4, 0.25, 0.1))
    _gate(9, f"corruption identities (HSV roundtrip gap {bright_gap:.1e}) and tables",
          contrast_ok and darken_ok and bright_gap <= 1e-12 and tables_ok)


@pytest.mark.slow
def test_criterion_10_training_smoke_and_reproducibility(cifar_dir, tmp_path):
    start = time.perf_counter()

    def run(out):
        cmd = [sys.executable, "-m", "gcart.cli", "train",
               "--data", str(cifar_dir), "--out", str(out), "--seed", "42",
               "--epochs", "5", "--batch-size", "128", "--subset", "2000",
               "--eval-subset", "500", "--enhancer", "gcart"]
        proc = subprocess.run(cmd, capture_output=True, text=True,
                              env=dict(os.environ))
        assert proc.returncode == 0, proc.stderr
        return (out / "seed42.json").read_bytes()

    blob1 = run(tmp_path / "run1")
    blob2 = run(tmp_path / "run2")
    report = json.loads(blob1)
    losses = [e["loss"] for e in report["train_log"]]
    elapsed = time.perf_counter() - start
    decreased = losses[-1] < losses[0]
    ok = decreased and blob1 == blob2 and elapsed < 600.0
    _gate(10, f"train loss {losses[0]:.4f} -> {losses[-1]:.4f}, rerun byte-identical, "
              f"{elapsed:.0f}s for both runs", ok)


def test_criterion_11_edge_preservation():
    rng = np.random.default_rng(6)
    w = hypernet.init_weights(np.random.default_rng(42))
    ok = True
    for _ in range(100):
        img = rng.uniform(0.0, 1.0, size=(16, 16, 3))
        i, j, c = rng.integers(0, 16), rng.integers(0, 16), rng.integers(0, 3)
        bumped = img.copy()
        bumped[i, j, c] = (bumped[i, j, c] + 0.37) % 1.0
        delta = gcart_enhance(bumped, w) != gcart_enhance(img, w)
        if set(zip(*np.nonzero(delta))) != {(i, j, c)}:
            ok = False
            break
    _gate(11, "single-pixel perturbations change exactly that output pixel", ok)
