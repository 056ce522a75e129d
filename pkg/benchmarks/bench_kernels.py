"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from fairgap.kernels import available_backends


def cases(rng):
    n = 200_000
    cell = rng.integers(0, 640, n)
    w = np.ones(n)
    v = (rng.random(n) < 0.4).astype(float)
    yield "cell_tallies n=2e5", lambda impl: impl.cell_tallies(cell, w, v, 640)

    X = rng.normal(size=(4096, 16))
    y = (rng.random(4096) < 0.3).astype(float)
    yield "prox_grad n=4096 d=16 (500 it)", lambda impl: impl.prox_grad_logistic(X, y, 0.5, 1e-3, 500, 1e-12, 50)

    X = np.eye(8)[rng.integers(0, 8, 512)]
    y = (rng.random(512) < 0.5).astype(float)
    yield "prox_grad n=512 one-hot (2000 it)", lambda impl: impl.prox_grad_logistic(X, y, 2.0, 0.0, 2000, 1e-12, 50)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = available_backends()
    names = sorted(backends)
    print(f"{'case':36s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for label, fn in cases(np.random.default_rng(0)):
        times = {n: min(timeit.repeat(lambda: fn(backends[n]), number=1, repeat=args.repeat)) for n in names}
        row = f"{label:36s}" + "".join(f"{times[n] * 1e3:10.2f}ms" for n in names)
        if len(names) == 2:
            row += f"{times['python'] / times['compiled']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
