"""Hot graph kernels over CSR adjacency arrays.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy
version.  The dispatch names (``bfs_levels``, ``reach``, ``scc_labels``,
``pair_codes``) point at the numba versions unless numba is missing or the
environment sets ``INDEXKIT_NUMBA=0``.  Both paths return identical arrays.
"""
from __future__ import annotations

import os

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_AVAILABLE = numba is not None
NUMBA_ENABLED = NUMBA_AVAILABLE and os.environ.get("INDEXKIT_NUMBA", "1") not in ("0", "false", "no", "off")


def _gather(indptr, indices, nodes):
    """Concatenate the adjacency lists of ``nodes``."""
    starts = indptr[nodes]
    lens = indptr[nodes + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=indices.dtype)
    offs = np.repeat(starts - np.cumsum(lens) + lens, lens)
    return indices[offs + np.arange(total)]


# -- multi-source BFS -----------------------------------------------------

def bfs_levels_numpy(indptr, indices, sources, n):
    level = np.full(n, -1, dtype=np.int64)
    frontier = np.unique(np.asarray(sources, dtype=np.int64))
    level[frontier] = 0
    depth = 0
    while frontier.size:
        depth += 1
        nxt = _gather(indptr, indices, frontier)
        nxt = np.unique(nxt[level[nxt] < 0])
        level[nxt] = depth
        frontier = nxt
    return level


def reach_numpy(indptr, indices, source):
    seen = np.zeros(indptr.shape[0] - 1, dtype=np.bool_)
    frontier = np.array([source], dtype=np.int64)
    seen[source] = True
    while frontier.size:
        nxt = _gather(indptr, indices, frontier)
        nxt = np.unique(nxt[~seen[nxt]])
        seen[nxt] = True
        frontier = nxt
    seen[source] = False
    return np.flatnonzero(seen)


def scc_labels_numpy(indptr, indices, n):
    if n == 0:
        return np.empty(0, dtype=np.int64)
    g = csr_matrix((np.ones(indices.shape[0], dtype=np.int8), indices, indptr), shape=(n, n))
    _, labels = connected_components(g, directed=True, connection="strong")
    return _canonical_labels(labels.astype(np.int64))


def pair_codes_numpy(indptr, indices, n):
    chunks = []
    for r in range(indptr.shape[0] - 1):
        row = np.sort(indices[indptr[r]:indptr[r + 1]]).astype(np.int64)
        k = row.shape[0]
        if k < 2:
            continue
        i, j = np.triu_indices(k, 1)
        chunks.append(row[i] * n + row[j])
    if not chunks:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(chunks)


def _canonical_labels(labels):
    # relabel components by first appearance so both paths agree exactly
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(order.shape[0], dtype=np.int64)
    remap[order] = np.arange(order.shape[0])
    uniq = np.unique(labels)
    return remap[np.searchsorted(uniq, labels)]


# -- numba versions -------------------------------------------------------

if NUMBA_AVAILABLE:

    @numba.njit(cache=True)
    def bfs_levels_jit(indptr, indices, sources, n):
        level = np.full(n, -1, dtype=np.int64)
        queue = np.empty(n, dtype=np.int64)
        head = 0
        tail = 0
        for s in sources:
            if level[s] < 0:
                level[s] = 0
                queue[tail] = s
                tail += 1
        while head < tail:
            v = queue[head]
            head += 1
            for k in range(indptr[v], indptr[v + 1]):
                w = indices[k]
                if level[w] < 0:
                    level[w] = level[v] + 1
                    queue[tail] = w
                    tail += 1
        return level

    @numba.njit(cache=True)
    def _reach_mask_jit(indptr, indices, source):
        n = indptr.shape[0] - 1
        seen = np.zeros(n, dtype=np.bool_)
        stack = np.empty(n, dtype=np.int64)
        top = 0
        stack[0] = source
        top = 1
        seen[source] = True
        while top > 0:
            top -= 1
            v = stack[top]
            for k in range(indptr[v], indptr[v + 1]):
                w = indices[k]
                if not seen[w]:
                    seen[w] = True
                    stack[top] = w
                    top += 1
        seen[source] = False
        return seen

    def reach_jit(indptr, indices, source):
        return np.flatnonzero(_reach_mask_jit(indptr, indices, np.int64(source)))

    @numba.njit(cache=True)
    def _tarjan_jit(indptr, indices, n):
        index = np.full(n, -1, dtype=np.int64)
        low = np.zeros(n, dtype=np.int64)
        onstack = np.zeros(n, dtype=np.bool_)
        stack = np.empty(n, dtype=np.int64)
        sp = 0
        comp = np.full(n, -1, dtype=np.int64)
        # explicit call stack: node and next edge offset
        cs_node = np.empty(n, dtype=np.int64)
        cs_edge = np.empty(n, dtype=np.int64)
        counter = 0
        ncomp = 0
        for root in range(n):
            if index[root] >= 0:
                continue
            csp = 0
            cs_node[0] = root
            cs_edge[0] = indptr[root]
            index[root] = counter
            low[root] = counter
            counter += 1
            stack[sp] = root
            sp += 1
            onstack[root] = True
            csp = 1
            while csp > 0:
                v = cs_node[csp - 1]
                e = cs_edge[csp - 1]
                if e < indptr[v + 1]:
                    cs_edge[csp - 1] = e + 1
                    w = indices[e]
                    if index[w] < 0:
                        index[w] = counter
                        low[w] = counter
                        counter += 1
                        stack[sp] = w
                        sp += 1
                        onstack[w] = True
                        cs_node[csp] = w
                        cs_edge[csp] = indptr[w]
                        csp += 1
                    elif onstack[w]:
                        if index[w] < low[v]:
                            low[v] = index[w]
                else:
                    if low[v] == index[v]:
                        while True:
                            sp -= 1
                            w = stack[sp]
                            onstack[w] = False
                            comp[w] = ncomp
                            if w == v:
                                break
                        ncomp += 1
                    csp -= 1
                    if csp > 0:
                        u = cs_node[csp - 1]
                        if low[v] < low[u]:
                            low[u] = low[v]
        return comp

    def scc_labels_jit(indptr, indices, n):
        if n == 0:
            return np.empty(0, dtype=np.int64)
        return _canonical_labels(_tarjan_jit(indptr, indices, n))

    @numba.njit(cache=True)
    def pair_codes_jit(indptr, indices, n):
        total = 0
        for r in range(indptr.shape[0] - 1):
            k = indptr[r + 1] - indptr[r]
            total += k * (k - 1) // 2
        out = np.empty(total, dtype=np.int64)
        pos = 0
        for r in range(indptr.shape[0] - 1):
            row = np.sort(indices[indptr[r]:indptr[r + 1]].astype(np.int64))
            k = row.shape[0]
            for i in range(k):
                for j in range(i + 1, k):
                    out[pos] = row[i] * n + row[j]
                    pos += 1
        return out

else:  # pragma: no cover
    bfs_levels_jit = reach_jit = scc_labels_jit = pair_codes_jit = None


if NUMBA_ENABLED:
    bfs_levels = bfs_levels_jit
    reach = reach_jit
    scc_labels = scc_labels_jit
    pair_codes = pair_codes_jit
else:
    bfs_levels = bfs_levels_numpy
    reach = reach_numpy
    scc_labels = scc_labels_numpy
    pair_codes = pair_codes_numpy


def backend():
    return "numba" if NUMBA_ENABLED else "numpy"
