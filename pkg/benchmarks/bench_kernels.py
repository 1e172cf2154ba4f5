"""Compare the compiled and numpy descent kernels on a desk-sized batch.

    python3 benchmarks/bench_kernels.py [--rows 500] [--steps 100] [--hidden 64,32,8]

Prints time per row-step for each backend and checks both produce the
same perturbations.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from flipattack import Model, ModelSpec, generate_synthetic, kernels, predict


def bench(backend, model, X, y, step, steps, repeats):
    impl = kernels.get_backend(backend)
    net = kernels.pack(model, backend)
    best, delta = np.inf, None
    for _ in range(repeats):
        delta = np.zeros_like(X)
        alive = np.ones(X.shape[0], dtype=bool)
        t0 = time.perf_counter()
        impl.descend(net, X, y, delta, alive, step, steps)
        best = min(best, time.perf_counter() - t0)
    return best, delta


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=500)
    p.add_argument("--dims", type=int, default=87)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--hidden", default="64,32,8")
    p.add_argument("--activation", choices=("relu", "tanh"), default="relu")
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args(argv)

    hidden = tuple(int(h) for h in args.hidden.split(",") if h)
    data = generate_synthetic(args.rows, args.dims, seed=0)
    model = Model.random(ModelSpec(args.dims, hidden, args.activation), np.random.default_rng(0))
    X = data.features
    y = predict(model, X)
    step = 1.0 / (args.rows * args.dims)

    print(f"rows={args.rows} dims={args.dims} hidden={hidden} {args.activation} steps={args.steps}")
    results = {}
    for name in sorted(kernels.available_backends()):
        secs, delta = bench(name, model, X, y, step, args.steps, args.repeats)
        results[name] = (secs, delta)
        per = secs / (args.rows * args.steps) * 1e6
        print(f"  {name:7s} {secs:8.3f} s   {per:7.3f} us/row-step")
    if len(results) == 2:
        (tc, dc), (tp, dp) = results["cython"], results["python"]
        print(f"  speedup cython/python: {tp / tc:.2f}x, max |delta diff| {np.max(np.abs(dc - dp)):.2e}")
    else:
        print("  compiled extension not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
