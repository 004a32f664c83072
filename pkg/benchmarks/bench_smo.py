"""Time the compiled SMO solver against the numpy fallback.

    python benchmarks/bench_smo.py [--sizes 100 290 600] [--repeat 3]

Both backends run the same dual on the same kernel matrix; the script also
checks that they return identical coefficients.
"""
import argparse
import timeit

import numpy as np

from weldparams._smo_backend import available_backends
from weldparams.dataset import synthesize
from weldparams.linear_model import standardize_stats
from weldparams.svr import SvrHyperParams, rbf_gram


def problem(n: int, seed: int = 0):
    ds = synthesize(n, seed=seed)
    mean, scale = standardize_stats(ds.X)
    Z = (ds.X - mean) / scale
    y = ds.Y[:, 0]
    y = (y - y.mean()) / y.std()
    hp = SvrHyperParams()
    return rbf_gram(Z, Z, hp.gamma), y, hp


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 290, 600])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the python backend is available")
    print(f"{'n':>6} {'backend':>8} {'iters':>7} {'best s':>10} {'speedup':>8}")
    for n in args.sizes:
        K, y, hp = problem(n)
        results, times = {}, {}
        for name, solve in backends.items():
            def run():
                return solve(K, y, hp.c, hp.epsilon, hp.kkt_tol, hp.max_passes, False)
            results[name] = run()
            times[name] = min(timeit.repeat(run, number=1, repeat=args.repeat))
        for name in backends:
            speed = times["python"] / times[name]
            print(f"{n:>6} {name:>8} {results[name][2]:>7} {times[name]:>10.4f} {speed:>7.1f}x")
        if len(results) == 2:
            same = np.array_equal(results["python"][0], results["cython"][0])
            print(f"{'':>6} identical coefficients: {same}")


if __name__ == "__main__":
    main()
