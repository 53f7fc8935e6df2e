"""Compiled vs pure-numpy kernels: timing and bit-identity.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from viscsol import _kernels_py as pure

try:
    from viscsol import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def _time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.shape == b.shape and np.array_equal(a.view(np.uint8), np.asarray(b).view(np.uint8))
    return a == b


def cases(rng):
    x = np.linspace(-1, 1, 301)[:, None]
    u = 1.0 - x[:, 0] ** 2
    v = np.abs(x[:, 0])
    vals = np.round(rng.standard_normal((64, 401)) * 2**20) / 2**20
    g = np.linspace(-1.2, 1.2, 201)
    X, Y = np.meshgrid(g, g, indexing="ij")
    psi2 = np.sqrt(X**2 + Y**2) - 0.8
    g3 = np.linspace(-1, 1, 41)
    X3, Y3, Z3 = np.meshgrid(g3, g3, g3, indexing="ij")
    psi3 = np.sqrt(X3**2 + Y3**2 + Z3**2) - 0.6
    h2, h3 = g[1] - g[0], g3[1] - g3[0]
    return {
        "pair_candidates 301x301": lambda k: k.pair_candidates(u, v, x, x, 8.0, 1e-12),
        "sup_conv_1d 64x401 K=40": lambda k: k.sup_conv_1d(vals, 2.0**-12, 40),
        "mcf_step_2d 201^2": lambda k: k.mcf_step_2d(psi2, h2, 0.125 * h2 * h2, 1e-10),
        "mcf_step_3d 41^3": lambda k: k.mcf_step_3d(psi3, h3, 0.0625 * h3 * h3, 1e-10),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':28s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}  identical")
    for name, fn in cases(rng).items():
        tp, op = _time(lambda: fn(pure), args.repeat)
        if compiled is None:
            print(f"{name:28s} {1e3 * tp:12.3f} {'n/a':>12s} {'':>8s}  n/a")
            continue
        tc, oc = _time(lambda: fn(compiled), args.repeat)
        print(f"{name:28s} {1e3 * tp:12.3f} {1e3 * tc:12.3f} {tp / tc:8.2f}  {_same(op, oc)}")


if __name__ == "__main__":
    main()
