"""Time the compiled queue kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--n 1000000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from dfrcount import _pykernels

try:
    from dfrcount import _ckernels
except ImportError:
    _ckernels = None


def workload(n, seed=0):
    rng = np.random.default_rng(seed)
    service = rng.exponential(1.0, n)
    gaps = rng.exponential(2.0, n)
    w = _pykernels.lindley(service, gaps)
    arrivals = np.concatenate([[0.0], np.cumsum(gaps[:-1])])
    deps = np.sort(arrivals + w + service)
    edges = np.linspace(arrivals[n // 100], arrivals[-1], 101)
    return service, gaps, arrivals, deps, edges


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    service, gaps, arrivals, deps, edges = workload(args.n)
    impls = {"numpy": _pykernels}
    if _ckernels is not None:
        impls["cython"] = _ckernels
    else:
        print("compiled extension not built; timing numpy only")
    rows = []
    for name, mod in impls.items():
        t_l = best(lambda: mod.lindley(service, gaps), args.repeat)
        t_d = best(lambda: mod.level_durations(arrivals, deps, edges, 60), args.repeat)
        rows.append((name, t_l, t_d))
    print(f"n = {args.n:,}, best of {args.repeat}")
    print(f"{'backend':<8} {'lindley [ms]':>14} {'level sweep [ms]':>18}")
    for name, t_l, t_d in rows:
        print(f"{name:<8} {1e3 * t_l:14.2f} {1e3 * t_d:18.2f}")
    if len(rows) == 2:
        (_, a, b), (_, c, d) = rows
        print(f"speedup  {a / c:14.1f}x {b / d:17.1f}x")


if __name__ == "__main__":
    main()
