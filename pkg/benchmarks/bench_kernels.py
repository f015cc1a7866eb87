"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per (kernel, size) with the best-of-N time of each backend,
the speedup and whether both agree (identical greedy output; FISTA final
objective within 1e-9 relative).
"""
import argparse
import time

import numpy as np

from dass import kernels


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def greedy_case(N, K, M, seed=0):
    rng = np.random.default_rng(seed)
    basis = np.linalg.qr(rng.standard_normal((N, K)))[0]
    gram = basis @ basis.T
    G2 = np.ascontiguousarray(gram * gram)
    rowsum = G2.sum(axis=1)
    sqnorm = np.ascontiguousarray(np.diag(gram))

    def run(impl):
        return lambda: impl.greedy_eliminate(G2, rowsum.copy(), sqnorm, float(rowsum.sum()),
                                             float(sqnorm.sum()), M, 2, 2)
    return run


def fista_case(M, K, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((M, K))
    b = rng.standard_normal(M)
    Q = np.ascontiguousarray(A.T @ A)
    q = np.ascontiguousarray(A.T @ b)
    lip = 1.1 * float(np.linalg.eigvalsh(Q)[-1])
    mu = 0.05 * float(np.abs(q).max())

    def run(impl):
        return lambda: impl.fista_lasso(Q, q, float(b @ b), mu, lip, np.zeros(K), 2000, 1e-10)
    return run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    try:
        fast = kernels.get_backend("cython")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return
    slow = kernels.get_backend("python")
    cases = [(f"greedy_eliminate N={N} M={M}", greedy_case(N, K, M))
             for N, K, M in [(144, 8, 14), (432, 20, 43), (864, 30, 86)]]
    cases += [(f"fista_lasso M={M} K={K}", fista_case(M, K)) for M, K in [(14, 14), (43, 43), (86, 86)]]
    print(f"{'kernel':36s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}  same")
    for name, run in cases:
        tf, of = _best(run(fast), args.repeat)
        ts, os_ = _best(run(slow), args.repeat)
        if name.startswith("greedy"):
            same = all(np.array_equal(a, b) for a, b in zip(of, os_))
        else:
            # final objective values; iterates may differ in the last bits
            fa, fb = float(np.asarray(of[3])[-1]), float(np.asarray(os_[3])[-1])
            same = abs(fa - fb) <= 1e-9 * max(abs(fa), 1.0)
        print(f"{name:36s} {tf:10.5f} {ts:10.5f} {ts / tf:8.1f}  {same}")


if __name__ == "__main__":
    main()
