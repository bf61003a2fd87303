"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on the same inputs under both backends; the results are
also checked for bit equality.
"""

import argparse
import timeit

import numpy as np

from tradeplex import _kernels


def cases(rng):
    a = np.sort(rng.normal(size=5000))
    b = np.sort(rng.normal(0.1, size=4000))
    rows = np.sort(rng.normal(size=(500, 200)), axis=1)
    X = rng.normal(size=(40, 20000))
    X -= X.mean(axis=1, keepdims=True)
    n, m = 5000, 20000
    src, dst = rng.integers(0, n, m), rng.integers(0, n, m)
    C = 97
    D = rng.random((C, C))
    D = np.triu(D, 1)
    D = D + D.T
    rank = rng.permutation(C).astype(np.int64)
    return {
        "ks2_stat": (a, b),
        "normal_gap_rows": (rows, rows.mean(axis=1), rows.std(axis=1, ddof=1)),
        "neumaier_gram": (X,),
        "union_find_labels": (n, src.astype(np.int64), dst.astype(np.int64)),
        "complete_linkage_merges": (D, rank),
    }


def _bytes(result):
    if isinstance(result, tuple):
        return b"".join(np.asarray(r).tobytes() for r in result)
    return np.asarray(result).tobytes()


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = {name: _kernels.load(name) for name in _kernels.available()}
    if "cython" not in backends:
        print("compiled kernels not built; timing the fallback only")
    inputs = cases(np.random.default_rng(0))
    names = list(backends)
    print(f"{'kernel':<26}" + "".join(f"{n + ' (ms)':>16}" for n in names) + f"{'speedup':>10}  identical")
    for kernel, kargs in inputs.items():
        times, outs = {}, {}
        for name, mod in backends.items():
            fn = getattr(mod, kernel)
            outs[name] = _bytes(fn(*kargs))
            times[name] = min(timeit.repeat(lambda: fn(*kargs), number=1, repeat=args.repeat)) * 1e3
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        same = len(set(outs.values())) == 1
        print(f"{kernel:<26}" + "".join(f"{times[n]:>16.2f}" for n in names) + f"{speed:>10.1f}  {same}")


if __name__ == "__main__":
    main()
