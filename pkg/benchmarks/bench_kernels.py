"""Time the compiled kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Prints one line per kernel with the best wall time of each backend and
the speed-up.  Exits with an error if the compiled extension is missing.
"""

import argparse
import timeit

import numpy as np

from pnpda import _pykernels as py

try:
    from pnpda import _ckernels as cy
except ImportError:
    cy = None


def cases(rng):
    x63 = rng.standard_normal((1, 3))
    x96 = rng.standard_normal((20, 40))
    s2 = rng.standard_normal((1, 8 + 256))
    u = 0.1 * rng.standard_normal((8, 128))
    C = rng.random((128, 128))
    return {
        "l63_run 2000 steps": lambda m: m.l63_run(x63, 10.0, 28.0, 8 / 3, 0.01, np.zeros((2000, 1, 3))),
        "l96_run 20x40, 500 steps": lambda m: m.l96_run(x96, 8.0, 0.01, np.zeros((500, 20, 40))),
        "l96_two_scale_run 500 steps": lambda m: m.l96_two_scale_run(s2, 8, 32, 20.0, 1.0, 10.0, 10.0, 0.005, 500),
        "ks_run 8x128, 250 substeps": lambda m: m.ks_run(u, 1.0, 0.3, 1e-3, 250, np.zeros((1, 8, 128))),
        "linear_assignment 128": lambda m: m.linear_assignment(C),
        "sinkhorn_log 128, 200 iter": lambda m: m.sinkhorn_log(C, 50.0, 200),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if cy is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'python [s]':>11s} {'cython [s]':>11s} {'speed-up':>9s}")
    for name, fn in cases(rng).items():
        tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat))
        tc = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat))
        print(f"{name:32s} {tp:11.4f} {tc:11.4f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
