"""Compare the compiled and pure-Python SVM kernels.

    python3 benchmarks/bench_kernels.py [--n 2000] [--dim 5000] [--nnz 30] [--epochs 5]

Times one dual coordinate descent epoch and one sparse matrix-vector
product on a random n-gram-like problem, and checks both backends return
the same bits.
"""

import argparse
import importlib
import time

import numpy as np

from mmsarc import _kernels_py


def make_problem(n, dim, nnz, seed=0):
    rng = np.random.default_rng(seed)
    indptr = np.arange(0, (n + 1) * (nnz + 1), nnz + 1, dtype=np.int64)
    indices = np.empty(n * (nnz + 1), dtype=np.int64)
    for i in range(n):
        row = np.sort(rng.choice(dim, nnz, replace=False))
        indices[i * (nnz + 1) : (i + 1) * (nnz + 1)] = np.append(row, dim)  # bias column last
    data = np.ones(len(indices))
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    sqnorm = np.full(n, float(nnz + 1))
    return indptr, indices, data, y, sqnorm, dim + 1


def bench(mod, prob, epochs):
    indptr, indices, data, y, sqnorm, d = prob
    alpha, w = np.zeros(len(y)), np.zeros(d)
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    for _ in range(epochs):
        mod.dcd_epoch(indptr, indices, data, y, alpha, w, sqnorm, rng.permutation(len(y)).astype(np.int64), 1.0)
    t_epoch = (time.perf_counter() - t0) / epochs
    out = np.empty(len(y))
    t0 = time.perf_counter()
    for _ in range(epochs):
        mod.csr_dot(indptr, indices, data, w, out)
    t_dot = (time.perf_counter() - t0) / epochs
    return t_epoch, t_dot, w


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--dim", type=int, default=5000)
    ap.add_argument("--nnz", type=int, default=30)
    ap.add_argument("--epochs", type=int, default=5)
    args = ap.parse_args()

    prob = make_problem(args.n, args.dim, args.nnz)
    backends = {"python": _kernels_py}
    try:
        backends["cython"] = importlib.import_module("mmsarc._kernels")
    except ImportError:
        print("compiled extension not built; timing the Python fallback only")

    print(f"n={args.n} dim={args.dim} nnz/row={args.nnz} epochs={args.epochs}")
    print(f"{'backend':<8} {'dcd epoch (ms)':>15} {'csr dot (ms)':>13}")
    results = {}
    for name, mod in backends.items():
        t_epoch, t_dot, w = bench(mod, prob, args.epochs)
        results[name] = (t_epoch, t_dot, w)
        print(f"{name:<8} {1e3 * t_epoch:15.2f} {1e3 * t_dot:13.3f}")
    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        print(f"speedup: dcd x{py[0] / cy[0]:.0f}, dot x{py[1] / cy[1]:.0f}")
        print("identical weights:", py[2].tobytes() == cy[2].tobytes())


if __name__ == "__main__":
    main()
