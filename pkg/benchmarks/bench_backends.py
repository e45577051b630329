"""Time the compiled and numpy implementations of the inner kernel loops.

Usage::

    python3 benchmarks/bench_backends.py [--repeat 5] [--json out.json]

Both backends are called directly on identical inputs, so the numbers
compare only the loop implementations. Results are checked for agreement
before timing.
"""
import argparse
import json
import sys
import timeit

import numpy as np

from ridgekern import _pykernels
from ridgekern.kernels import BaseKernel

try:
    from ridgekern import _ckernels
except ImportError:
    _ckernels = None


def _inputs(n, m, d, seed=0):
    rng = np.random.default_rng(seed)
    return (rng.uniform(-0.5, 0.5, (n, d)), rng.uniform(-0.5, 0.5, n), rng.uniform(-1, 1, n),
            rng.uniform(-1, 1, (m, d)), rng.normal(size=n))


def cases():
    g = BaseKernel.gaussian(1.0).packed
    lap = BaseKernel.laplace(1.0).packed
    A, b, t, X, w = _inputs(1024, 1681, 2)
    yield "ridge_features gaussian 1681x1024", lambda mod: mod.ridge_features(*g, A, b, t, X)
    yield "ridge_features laplace 1681x1024", lambda mod: mod.ridge_features(*lap, A, b, t, X)
    A2, b2, t2, X2, w2 = _inputs(32 ** 4, 441, 2, seed=1)
    yield "ridge_apply gaussian 441 pts x 1M nodes", \
        lambda mod: mod.ridge_apply(*g, A2, b2, t2, X2, w2)
    P = np.random.default_rng(2).uniform(-1, 1, (4096, 2))
    yield "farthest_point_net 4096 pts eps=0.05", lambda mod: mod.farthest_point_net(P, 0.05)


def _same(a, b):
    a = a[0] if isinstance(a, tuple) else a
    b = b[0] if isinstance(b, tuple) else b
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-10, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", metavar="PATH")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the numpy backend is available", file=sys.stderr)
    rows = []
    print(f"{'case':42s} {'numpy s':>10s} {'compiled s':>11s} {'speedup':>8s}")
    for name, fn in cases():
        t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat))
        t_c = speed = None
        if _ckernels is not None:
            if not _same(fn(_ckernels), fn(_pykernels)):
                raise SystemExit(f"backends disagree on {name}")
            t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat))
            speed = t_py / t_c
        rows.append({"case": name, "numpy_seconds": t_py, "compiled_seconds": t_c,
                     "speedup": speed})
        print(f"{name:42s} {t_py:10.4f} "
              + (f"{t_c:11.4f} {speed:7.2f}x" if t_c is not None else f"{'n/a':>11s}"))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
