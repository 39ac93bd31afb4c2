"""Compare the numba kernels with their pure-numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--repeat 5] [--n 8]
Set BIRKLAB_NUMBA=0 to see the fallback timed on both columns.
"""

import argparse
import time
from itertools import permutations

import numpy as np

from birklab import _kernels as K


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n, seed):
    rng = np.random.default_rng(seed)
    G = (rng.random((n, n)) < 0.35).astype(np.int64)
    np.fill_diagonal(G, 0)
    m = max(3, n // 2)
    S = np.ones((m, m), dtype=np.int64) - np.eye(m, dtype=np.int64)  # clique pattern, usually absent
    order = np.arange(m, dtype=np.int64)
    cand = np.ones((m, n), dtype=bool)
    perms = np.array(list(permutations(range(min(n, 8)))), dtype=np.int64)[:, :m]
    Gp = G[: min(n, 8), : min(n, 8)]
    V = rng.integers(-3, 4, size=(400, 120)).astype(np.int64)
    return {
        "embed_search": (lambda: K._embed_search_nb(G, S, order, cand, K.COVER),
                         lambda: K._embed_search_py(G, S, order, cand, K.COVER)),
        "perm_mask": (lambda: K._perm_mask_nb(Gp, S, perms, K.COVER),
                      lambda: K._perm_mask_np(Gp, S, perms, K.COVER)),
        "lex_basis(k=6)": (lambda: K._lex_perm_basis_nb(6, K.MODP, 1_000_000, 25),
                           lambda: K._lex_perm_basis_py(6, K.MODP, 1_000_000, 25)),
        "modp_select": (lambda: K._modp_select_nb(V, K.MODP),
                        lambda: K._modp_select_py(V, K.MODP)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    print(f"numba active: {K.HAVE_NUMBA}")
    print(f"{'kernel':>16} {'numba s':>10} {'numpy s':>10} {'speedup':>8}")
    for name, (fast, slow) in cases(args.n, args.seed).items():
        a, b = fast(), slow()  # warm-up (jit compile) and agreement check
        if isinstance(a, tuple):
            assert all(np.array_equal(x, y) for x, y in zip(a, b)), name
        else:
            assert np.array_equal(a, b), name
        t_fast = best_of(fast, args.repeat)
        t_slow = best_of(slow, args.repeat)
        print(f"{name:>16} {t_fast:10.5f} {t_slow:10.5f} {t_slow / max(t_fast, 1e-9):8.1f}")


if __name__ == "__main__":
    main()
