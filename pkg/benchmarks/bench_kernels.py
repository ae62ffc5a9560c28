"""Compare the compiled and numpy kernels on fixed explicit-step workloads.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.
"""
import argparse
import time

import numpy as np

from trudlab import _pykernels
from trudlab.grid import build_interval, build_rectangle

try:
    from trudlab import _ckernels
except ImportError:  # extension not built
    _ckernels = None

CASES = [
    ("1d p=2 n=256", lambda: build_interval(0.0, 1.0, 256), 2.0, 2000),
    ("1d p=3 n=256", lambda: build_interval(0.0, 1.0, 256), 3.0, 2000),
    ("1d p=1.5 n=256", lambda: build_interval(0.0, 1.0, 256), 1.5, 2000),
    ("2d p=2 n=64", lambda: build_rectangle(0.0, 1.0, 0.0, 1.0, 64), 2.0, 200),
    ("2d p=3 n=64", lambda: build_rectangle(0.0, 1.0, 0.0, 1.0, 64), 3.0, 200),
]


def _initial(d, p):
    vals = np.ones(d.shape)
    for c in d.coords():
        vals = vals * np.sin(np.pi * c)
    v = np.where(d.interior_mask, np.maximum(vals, 0.0), 0.0)[None].copy()
    return np.ascontiguousarray(v ** (p - 1.0)), v


def _run(mod, d, p, steps):
    w, v = _initial(d, p)
    adv = mod.explicit_advance_1d if d.dim == 1 else mod.explicit_advance_2d
    eps = d.h if p < 2 else 0.0
    t0 = time.perf_counter()
    out = adv(w, v, d.interior_mask, p, eps, d.h, 0.9, 1.0, d.h * d.h, 0.0, 10.0, steps)
    return time.perf_counter() - t0, out[1], v


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    print(f"{'case':<16} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8} {'max diff':>10}")
    for name, make, p, steps in CASES:
        d = make()
        py = min(_run(_pykernels, d, p, steps)[0] for _ in range(args.repeat))
        _, _, vp = _run(_pykernels, d, p, steps)
        if _ckernels is None:
            print(f"{name:<16} {py:11.4f} {'n/a':>11}")
            continue
        cy = min(_run(_ckernels, d, p, steps)[0] for _ in range(args.repeat))
        _, _, vc = _run(_ckernels, d, p, steps)
        print(f"{name:<16} {py:11.4f} {cy:11.4f} {py / cy:8.1f} {np.abs(vp - vc).max():10.2e}")


if __name__ == "__main__":
    main()
