"""Compare the numba and numpy kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from layergauge import _accel, nn_core, svm
from layergauge.nn_core import ConvParams


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compile
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(rng):
    x1 = rng.uniform(0, 1, (227, 227, 3)).astype(np.float32)
    w1 = rng.normal(0, 0.01, (96, 11, 11, 3)).astype(np.float32)
    x2 = rng.uniform(0, 1, (27, 27, 96)).astype(np.float32)
    w2 = rng.normal(0, 0.01, (256, 5, 5, 48)).astype(np.float32)
    act = rng.uniform(0, 4, (55, 55, 96)).astype(np.float32)
    feats = rng.normal(size=(400, 2000)).astype(np.float32)
    labels = np.where(rng.random(400) < 0.5, 1.0, -1.0)
    return {
        "conv1 227x227x3 -> 55x55x96": lambda be: nn_core.conv2d(x1, w1, np.zeros(96), ConvParams(4, 0, 1), be),
        "conv2 27x27x96 -> 27x27x256, 2 groups": lambda be: nn_core.conv2d(x2, w2, np.zeros(256), ConvParams(1, 2, 2), be),
        "lrn 55x55x96": lambda be: nn_core.lrn(act, backend=be),
        "maxpool 3/2 on 55x55x96": lambda be: nn_core.maxpool(act, 3, 2, be),
        "svm dual CD 400x2000, 20 sweeps": lambda be: svm.fit_binary(feats, labels, 1.0, 20, 0.0, backend=be),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    backends = ["numba", "numpy"] if _accel.HAS_NUMBA else ["numpy"]
    print(f"{'kernel':42s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in cases(np.random.default_rng(0)).items():
        times = [best_of(lambda: fn(be), args.repeat) for be in backends]
        row = f"{name:42s}" + "".join(f"{t * 1e3:10.1f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[1] / times[0]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
