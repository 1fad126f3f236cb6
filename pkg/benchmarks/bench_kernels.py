"""Time each compiled kernel against its plain-Python reference.

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

Both paths run in the same process: ``kernel`` is the numba function and
``kernel.py_func`` the original Python. The first compiled call is timed
separately as compile/cache-load time. Outputs of the two paths are
checked for agreement before timing is reported.
"""
import argparse
import time

import numpy as np

from ftnpl import NUMBA_ENABLED, kernels
from ftnpl.games import PENNIES_A


def _cases(scale):
    n_rep = int(50_000 * scale)
    n_mw = int(10_000 * scale)
    n_ftrl = int(10_000 * scale)
    n_ftpl = int(2_000 * scale)
    rng = np.random.default_rng(0)
    A = PENNIES_A
    x0 = np.array([0.5, -0.5])
    noise = rng.exponential(size=(2, n_ftpl, 2)) * np.sqrt(n_ftpl) * rng.choice([-1.0, 1.0], size=(2, n_ftpl, 2))
    return [
        ("replicator_rk4_bimatrix", kernels.replicator_rk4_bimatrix,
         (A, -A, np.array([0.9, 0.1]), np.array([0.2, 0.8]), 1e-3, n_rep)),
        ("mw_selfplay", kernels.mw_selfplay,
         (A, -A, np.array([0.9, 0.1]), np.array([0.2, 0.8]), 0.02, n_mw)),
        ("ftrl_pennies_run[ex1]", kernels.ftrl_pennies_run, (A, x0, x0, 0.01, n_ftrl, False)),
        ("ftrl_pennies_run[ex2]", kernels.ftrl_pennies_run, (A, x0, x0, 0.01, n_ftrl, True)),
        ("ftpl_pennies_run[ex2]", kernels.ftpl_pennies_run, (A, x0, x0, noise[0], noise[1], 5.0, 50, True)),
    ]


def _best(fn, args, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _flatten(out):
    parts = out if isinstance(out, tuple) else (out,)
    return np.concatenate([np.ravel(np.asarray(p, dtype=float)) for p in parts])


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--scale", type=float, default=1.0, help="multiplier on every kernel's step count")
    args = p.parse_args(argv)
    if not NUMBA_ENABLED:
        print("numba disabled (FTNPL_NO_NUMBA set or numba missing): both columns are the Python path")
    print(f"{'kernel':26s} {'compile s':>10s} {'numba s':>10s} {'python s':>10s} {'speedup':>9s}  agree")
    for name, fn, fargs in _cases(args.scale):
        t0 = time.perf_counter()
        fn(*fargs)
        first = time.perf_counter() - t0
        t_jit, out_jit = _best(fn, fargs, args.repeat)
        t_py, out_py = _best(fn.py_func, fargs, 1)
        a, b = _flatten(out_jit), _flatten(out_py)
        agree = bool(np.allclose(a, b, rtol=1e-9, atol=1e-12, equal_nan=True))
        print(f"{name:26s} {max(first - t_jit, 0.0):10.3f} {t_jit:10.4f} {t_py:10.3f} {t_py / t_jit:9.1f}x  {agree}")


if __name__ == "__main__":
    main()
