"""Time the numba kernels against their numpy twins.

Run ``python benchmarks/bench_jit.py``.  Compilation is excluded: each
numba kernel is called once before timing.
"""

import argparse
import timeit

import numpy as np

from l1forms import _jit
from l1forms.exterior import basis, raising_table


def cone_args(n=3, h=1, N=24, P=400, samples=8, seed=0):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(len(basis(n, h)),) + (N,) * n)
    spacing = 2.0 / N
    points = rng.uniform(-0.6, 0.6, size=(P, n))
    ys = rng.uniform(-0.4, 0.4, size=(samples, n))
    yw = np.full(samples, 1.0 / samples)
    tn, tw = np.polynomial.legendre.leggauss(8)
    table = np.array(raising_table(n, h - 1), dtype=np.int64)
    return (data, -1.0 + spacing / 2, spacing, points, ys, yw, (tn + 1) / 2, tw / 2, table,
            len(basis(n, h - 1)), h)


def convolve_args(N=8, n=3, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(2 * N,) * n)
    u = rng.normal(size=(N,) * n)
    return w, u.reshape(-1), N, n


def best_of(fn, args, repeat):
    fn(*args)
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    if not _jit.HAVE_NUMBA:
        print("numba backend disabled; nothing to compare")
        return 0
    cases = [
        ("direct_convolve N=8", _jit._direct_convolve_numpy, _jit._direct_convolve_numba, convolve_args(8)),
        ("direct_convolve N=12", _jit._direct_convolve_numpy, _jit._direct_convolve_numba, convolve_args(12)),
        ("cone h=1 P=400", _jit._cone_numpy, _jit._cone_numba3, cone_args(h=1)),
        ("cone h=2 P=400", _jit._cone_numpy, _jit._cone_numba3, cone_args(h=2)),
    ]
    print(f"{'kernel':<24}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}")
    for name, slow, fast, a in cases:
        t_np, t_nb = best_of(slow, a, args.repeat), best_of(fast, a, args.repeat)
        print(f"{name:<24}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
