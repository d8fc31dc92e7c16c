#!/usr/bin/env python3
"""Timing comparison of the compiled kernel core against the numpy fallback.

Measures the two hot kernels (soft histogram and rational curve, forward and
backward) at training-batch shapes, plus one full training step per backend.

Usage: python benchmarks/bench_kernels.py [--batch 128] [--repeats 5]
"""

import argparse
import time

import numpy as np

from gcart import kernels


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(batch):
    rng = np.random.default_rng(0)
    n = batch * 3          # one row per image-channel pair
    p = 32 * 32
    k = 16
    x = rng.uniform(0.0, 1.0, size=(n, p))
    xs = np.sort(x, axis=1)
    centers = np.linspace(0.0, 1.0, k)
    gout = rng.normal(size=(n, k))
    a = rng.normal(size=n) * 0.5
    d = rng.uniform(0.01, 1.0, size=n)
    e = rng.uniform(0.01, 1.0, size=n)
    b = d + e + 1.0 - a
    gy = rng.normal(size=(n, p))
    return {
        "hist_forward": lambda m: m.hist_forward(xs, centers, 0.01),
        "hist_backward": lambda m: m.hist_backward(x, centers, 0.01, gout),
        "curve_forward": lambda m: m.curve_forward(x, a, b, d, e),
        "curve_backward": lambda m: m.curve_backward(x, a, b, d, e, gy),
    }


def train_step_time(backend, batch, repeats):
    from gcart.engine import Tape
    from gcart.trainer import TrainConfig, build_model

    kernels.set_backend(backend)
    rng = np.random.default_rng(1)
    imgs = rng.uniform(0.0, 1.0, size=(batch, 32, 32, 3))
    labels = rng.integers(0, 10, size=batch)
    model = build_model(TrainConfig(seed=0), input_dim=3072)

    def step():
        with Tape() as tape:
            loss, _, _ = model.loss_tape(imgs, labels, 10.0)
        tape.backward(loss)

    step()  # warm up
    return best_of(step, repeats)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=128)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("note: compiled extension not built; timing numpy fallback only")

    cases = kernel_cases(args.batch)
    original = kernels.backend()
    print(f"batch {args.batch} (rows {args.batch * 3} x 1024, 16 bins), "
          f"best of {args.repeats}\n")
    print(f"{'kernel':<16}" + "".join(f"{name:>12}" for name in backends)
          + ("     speedup" if len(backends) == 2 else ""))
    try:
        for name, call in cases.items():
            row = []
            for backend in backends:
                mod = kernels.set_backend(backend)
                row.append(best_of(lambda: call(mod), args.repeats))
            line = f"{name:<16}" + "".join(f"{t * 1e3:>10.2f}ms" for t in row)
            if len(row) == 2:
                line += f"{row[0] / row[1]:>11.2f}x"
            print(line)

        print()
        steps = [train_step_time(b, args.batch, args.repeats) for b in backends]
        line = f"{'full train step':<16}" + "".join(f"{t * 1e3:>10.2f}ms" for t in steps)
        if len(steps) == 2:
            line += f"{steps[0] / steps[1]:>11.2f}x"
        print(line)
    finally:
        kernels.set_backend(original)


if __name__ == "__main__":
    main()
