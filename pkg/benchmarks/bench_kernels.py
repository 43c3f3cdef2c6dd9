"""Compare the compiled and pure-Python kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--size 256] [--repeat 5]

Prints the best-of-``repeat`` wall time per kernel and backend, the speedup
of the compiled backend, and the maximum absolute difference between the
two backends' outputs.
"""

import argparse
import time

import numpy as np

from turbmit.charts import textured_checkerboard
from turbmit.kernels import available_backends
from turbmit.registration import FlowParams, estimate_flow


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def cases(size):
    rng = np.random.default_rng(0)
    img = textured_checkerboard(size, size // 8, seed=1)
    mov = np.roll(img, 2, axis=1)
    dx, dy = rng.normal(0, 1.5, (2, size, size))
    ix, iy, it = rng.normal(size=(3, size, size))

    def lk(k):
        fx = np.zeros_like(img)
        fy = np.zeros_like(img)
        k.lk_level(mov, img, fx, fy, 10, 7, 1e-4, size / 4, 3)
        return fx

    return {
        "warp_bilinear": lambda k: k.warp_bilinear(img, dx, dy),
        "box_mean r=7": lambda k: k.box_mean(img, 7),
        "min_filter r=16": lambda k: k.min_filter(img, 16),
        "max_filter r=16": lambda k: k.max_filter(img, 16),
        "lk_solve r=7": lambda k: k.lk_solve(ix, iy, it, 7, 1e-4)[0],
        "lk_level 10 it": lk,
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=256)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    backends = available_backends()
    names = sorted(backends)
    print(f"image {args.size}x{args.size}, best of {args.repeat}; backends: {', '.join(names)}")
    header = f"{'kernel':<18}" + "".join(f"{n + ' ms':>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}{'max diff':>12}"
    print(header)
    for label, fn in cases(args.size).items():
        times, outs = {}, {}
        for n in names:
            times[n], outs[n] = best_time(lambda: fn(backends[n]), args.repeat)
        line = f"{label:<18}" + "".join(f"{1e3 * times[n]:>12.2f}" for n in names)
        if len(names) == 2:
            diff = float(np.max(np.abs(outs["cython"] - outs["python"])))
            line += f"{times['python'] / times['cython']:>9.1f}x{diff:>12.1e}"
        print(line)

    # end to end: one full pyramidal flow estimate through the selected backend
    img = textured_checkerboard(args.size, args.size // 8, seed=1)
    mov = np.roll(img, 2, axis=1)
    t, _ = best_time(lambda: estimate_flow(mov, img, FlowParams()), args.repeat)
    print(f"estimate_flow (active backend): {1e3 * t:.1f} ms")


if __name__ == "__main__":
    main()
