"""Time the numba and pure-numpy kernel paths on one random graph.

    python benchmarks/bench_kernels.py [--nodes N] [--edges-per-node K] [--repeat R]

The numba functions are warmed up once before timing, so compile time
is excluded.  Both paths are also checked for identical output.
"""
import argparse
import time

import numpy as np

from indexkit import _kernels as K


def random_dag_csr(n, k, seed):
    rng = np.random.default_rng(seed)
    child = np.repeat(np.arange(1, n), k)
    parent = (rng.random(child.size) * child).astype(np.int64)  # parents have lower index
    # CSR of the narrower direction (parent -> children), as used for level BFS
    order = np.lexsort((child, parent))
    src, dst = parent[order], child[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    return np.cumsum(indptr), dst


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=200_000)
    ap.add_argument("--edges-per-node", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not K.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")

    n = args.nodes
    indptr, indices = random_dag_csr(n, args.edges_per_node, args.seed)
    rows = np.sort(np.random.default_rng(args.seed).integers(0, n, (n // 4, 5)), axis=1)
    r_ptr = np.arange(0, rows.size + 1, 5, dtype=np.int64)
    r_idx = rows.ravel()
    cases = {
        "bfs_levels": (lambda f: f(indptr, indices, np.array([0]), n), K.bfs_levels_numpy, K.bfs_levels_jit),
        "reach": (lambda f: f(indptr, indices, 0), K.reach_numpy, K.reach_jit),
        "scc_labels": (lambda f: f(indptr, indices, n), K.scc_labels_numpy, K.scc_labels_jit),
        "pair_codes": (lambda f: np.sort(f(r_ptr, r_idx, n)), K.pair_codes_numpy, K.pair_codes_jit),
    }
    print(f"graph: {n} nodes, {indices.size} edges; best of {args.repeat}")
    print(f"{'kernel':<12} {'numpy s':>10} {'numba s':>10} {'speedup':>8}  same")
    for name, (call, fnp, fjit) in cases.items():
        call(fjit)  # compile or load from cache
        t_np, a = best_of(lambda: call(fnp), args.repeat)
        t_jit, b = best_of(lambda: call(fjit), args.repeat)
        print(f"{name:<12} {t_np:>10.4f} {t_jit:>10.4f} {t_np / t_jit:>7.1f}x  {np.array_equal(a, b)}")


if __name__ == "__main__":
    main()
