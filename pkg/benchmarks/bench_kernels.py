"""Time the compiled and numpy kernels on full-size layer shapes.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from bcnn import _backend


def cases(rng):
    def padded(c, h, w):
        out = np.zeros((c, h + 8, w + 8))
        out[:, 4:-4, 4:-4] = rng.standard_normal((c, h, w))
        return out

    x1, w1, b1 = padded(3, 80, 100), rng.standard_normal((32, 3, 9, 9)), rng.standard_normal(32)
    x2, w2, b2 = padded(32, 40, 50), rng.standard_normal((64, 32, 9, 9)), rng.standard_normal(64)
    g2 = rng.standard_normal((64, 40, 50))
    a1 = rng.standard_normal((32, 80, 100))
    xd, wd, bd = rng.standard_normal(32000), rng.standard_normal((64, 32000)), rng.standard_normal(64)
    return {
        "conv1 forward 3->32 @80x100": lambda k: k.conv2d_forward(x1, w1, b1),
        "conv2 forward 32->64 @40x50": lambda k: k.conv2d_forward(x2, w2, b2),
        "conv2 grad-input 64->32 @40x50": lambda k: k.conv2d_backward_input(g2, w2),
        "maxpool 32x80x100": lambda k: k.maxpool_forward(a1),
        "dense 32000->64": lambda k: k.dense_forward(xd, wd, bd),
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = _backend.available()
    kernels = {n: _backend.load(n) for n in names}
    print(f"{'kernel':<34s}" + "".join(f"{n:>12s}" for n in names) +
          ("     speedup" if len(names) == 2 else ""))
    for label, fn in cases(np.random.default_rng(0)).items():
        t = {n: best_of(lambda: fn(kernels[n]), args.repeat) for n in names}
        row = f"{label:<34s}" + "".join(f"{t[n] * 1e3:>10.2f}ms" for n in names)
        if len(names) == 2:
            row += f"{t['python'] / t['cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
