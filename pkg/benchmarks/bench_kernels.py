"""Compare the JIT-compiled kernels against the pure NumPy/Python
fallback on representative workloads.

Run:  python benchmarks/bench_kernels.py
The same numbers drive the backend default: the compiled path is used
unless RETAINEX_BACKEND=numpy is set.
"""

import time

import numpy as np

from retainex import kernels
from retainex.numerics import make_rng


def timeit(fn, *args, repeat=5, number=10):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / number)
    return best


def gru_workload(T=20, m=64, d=67, seed=0):
    rng = make_rng(seed)
    V = rng.standard_normal((T, d))
    weights = [rng.uniform(-0.2, 0.2, size=s)
               for s in [(m, d)] * 3 + [(m, m)] * 3 + [(m,)] * 3]
    return V, weights


def tsne_workload(n=300, seed=0):
    rng = make_rng(seed)
    X = rng.standard_normal((n, 8))
    sq = (X * X).sum(axis=1)
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2 * (X @ X.T), 0.0)
    P = rng.random((n, n))
    P = 0.5 * (P + P.T)
    np.fill_diagonal(P, 0.0)
    P /= P.sum()
    Y = rng.standard_normal((n, 2))
    return D2, P, Y


def main():
    if kernels.BACKEND != "numba":
        print("warning: numba backend unavailable; timing the fallback against itself")
    V, weights = gru_workload()
    dH = make_rng(1).standard_normal((V.shape[0], 64))

    fwd_nb = kernels.gru_seq_forward
    fwd_py = kernels.PY_KERNELS["gru_seq_forward"]
    bwd_nb = kernels.gru_seq_backward
    bwd_py = kernels.PY_KERNELS["gru_seq_backward"]

    H, Z, R, C = fwd_nb(V, *weights)  # warm-up / compile
    bwd_nb(V, H, Z, R, C, dH, *weights[:6])

    rows = []
    t_py = timeit(fwd_py, V, *weights)
    t_nb = timeit(fwd_nb, V, *weights)
    rows.append(("gru_seq_forward (T=20, m=64)", t_py, t_nb))

    t_py = timeit(bwd_py, V, H, Z, R, C, dH, *weights[:6])
    t_nb = timeit(bwd_nb, V, H, Z, R, C, dH, *weights[:6])
    rows.append(("gru_seq_backward (T=20, m=64)", t_py, t_nb))

    D2, P, Y = tsne_workload()
    aff_nb = kernels.binary_search_affinities
    aff_py = kernels.PY_KERNELS["binary_search_affinities"]
    aff_nb(D2, np.log(30.0), 1e-5, 100)
    t_py = timeit(aff_py, D2, np.log(30.0), 1e-5, 100, repeat=2, number=1)
    t_nb = timeit(aff_nb, D2, np.log(30.0), 1e-5, 100, repeat=2, number=1)
    rows.append(("tsne affinities (N=300)", t_py, t_nb))

    forces_nb = kernels.tsne_forces
    forces_py = kernels.PY_KERNELS["tsne_forces"]
    forces_nb(P, Y, True)
    t_py = timeit(forces_py, P, Y, True, repeat=2, number=1)
    t_nb = timeit(forces_nb, P, Y, True, repeat=2, number=1)
    rows.append(("tsne forces (N=300)", t_py, t_nb))

    print(f"backend: {kernels.BACKEND}")
    print(f"{'kernel':<34} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for name, t_py, t_nb in rows:
        print(f"{name:<34} {t_py*1e3:>10.3f}ms {t_nb*1e3:>10.3f}ms {t_py/t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
