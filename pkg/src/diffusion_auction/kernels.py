"""Graph kernels on CSR adjacency: dominators and node-removal reachability.

Two backends share one interface:

* ``numba``: compiled loops (Cooper-Harvey-Kennedy dominators, BFS per removed node).
* ``numpy``: vectorised fallback (iterative boolean dataflow dominators,
  frontier expansion on a dense adjacency matrix).

The backend is chosen at import from ``DIFFUSION_AUCTION_BACKEND``
(``numba`` or ``numpy``); the default is ``numba`` when it imports.
Node 0 is conventionally the root (the seller).
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_requested = os.environ.get("DIFFUSION_AUCTION_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ImportError(f"unknown DIFFUSION_AUCTION_BACKEND={_requested!r}")
BACKEND = "numpy" if _requested == "numpy" or not HAVE_NUMBA else "numba"


def to_csr(n: int, src, dst):
    """CSR arrays (indptr, indices) for the directed edges src[k] -> dst[k]."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst.copy()


# ---------------------------------------------------------------- numpy backend


def _dense(indptr, indices):
    n = len(indptr) - 1
    adj = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    adj[rows, indices] = True
    return adj


def _reachable_np(adj, root, removed):
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    if root == removed:
        return seen
    seen[root] = True
    frontier = seen.copy()
    while frontier.any():
        nxt = adj[frontier].any(axis=0) & ~seen
        if removed >= 0:
            nxt[removed] = False
        seen |= nxt
        frontier = nxt
    return seen


def idom_numpy(indptr, indices, root=0):
    adj = _dense(indptr, indices)
    n = adj.shape[0]
    idom = np.full(n, -1, dtype=np.int64)
    reach = _reachable_np(adj, root, -1)
    nodes = np.flatnonzero(reach)
    m = len(nodes)
    pos = np.full(n, -1, dtype=np.int64)
    pos[nodes] = np.arange(m)
    sub = adj[np.ix_(nodes, nodes)]
    r = pos[root]
    dom = np.ones((m, m), dtype=bool)
    dom[r] = False
    dom[r, r] = True
    eye = np.eye(m, dtype=bool)
    preds = [np.flatnonzero(sub[:, v]) for v in range(m)]
    changed = True
    while changed:
        changed = False
        for v in range(m):
            if v == r:
                continue
            new = np.logical_and.reduce(dom[preds[v]], axis=0) | eye[v]
            if not np.array_equal(new, dom[v]):
                dom[v] = new
                changed = True
    depth = dom.sum(axis=1)
    for v in range(m):
        if v == r:
            idom[root] = root
            continue
        strict = np.flatnonzero(dom[v] & ~eye[v])
        idom[nodes[v]] = nodes[strict[np.argmax(depth[strict])]]
    return idom


def removal_reach_numpy(indptr, indices, root=0):
    adj = _dense(indptr, indices)
    n = adj.shape[0]
    out = np.zeros((n, n), dtype=bool)
    for j in range(n):
        out[j] = _reachable_np(adj, root, j)
    return out


# ---------------------------------------------------------------- numba backend


def _idom_loops(indptr, indices, root):
    n = len(indptr) - 1
    # iterative DFS for a postorder numbering
    post = np.full(n, -1, np.int64)
    order = np.empty(n, np.int64)
    visited = np.zeros(n, np.bool_)
    stack_v = np.empty(n, np.int64)
    stack_e = np.empty(n, np.int64)
    top = 0
    stack_v[0] = root
    stack_e[0] = indptr[root]
    visited[root] = True
    top = 1
    counter = 0
    while top > 0:
        v = stack_v[top - 1]
        e = stack_e[top - 1]
        if e < indptr[v + 1]:
            stack_e[top - 1] = e + 1
            w = indices[e]
            if not visited[w]:
                visited[w] = True
                stack_v[top] = w
                stack_e[top] = indptr[w]
                top += 1
        else:
            post[v] = counter
            order[counter] = v
            counter += 1
            top -= 1
    # predecessors restricted to reachable nodes
    pcount = np.zeros(n + 1, np.int64)
    for v in range(n):
        if visited[v]:
            for e in range(indptr[v], indptr[v + 1]):
                pcount[indices[e] + 1] += 1
    for v in range(n):
        pcount[v + 1] += pcount[v]
    fill = pcount[:-1].copy()
    preds = np.empty(pcount[n], np.int64)
    for v in range(n):
        if visited[v]:
            for e in range(indptr[v], indptr[v + 1]):
                w = indices[e]
                preds[fill[w]] = v
                fill[w] += 1
    idom = np.full(n, -1, np.int64)
    idom[root] = root
    changed = True
    while changed:
        changed = False
        for k in range(counter - 2, -1, -1):  # reverse postorder, root excluded
            v = order[k]
            new = -1
            for e in range(pcount[v], pcount[v + 1]):
                p = preds[e]
                if idom[p] == -1:
                    continue
                if new == -1:
                    new = p
                else:
                    a = p
                    b = new
                    while a != b:
                        while post[a] < post[b]:
                            a = idom[a]
                        while post[b] < post[a]:
                            b = idom[b]
                    new = a
            if idom[v] != new:
                idom[v] = new
                changed = True
    return idom


def _removal_loops(indptr, indices, root):
    n = len(indptr) - 1
    out = np.zeros((n, n), np.bool_)
    queue = np.empty(n, np.int64)
    for j in range(n):
        if j == root:
            continue
        seen = out[j]
        seen[root] = True
        queue[0] = root
        head = 0
        tail = 1
        while head < tail:
            v = queue[head]
            head += 1
            for e in range(indptr[v], indptr[v + 1]):
                w = indices[e]
                if w != j and not seen[w]:
                    seen[w] = True
                    queue[tail] = w
                    tail += 1
    return out


if HAVE_NUMBA:
    _idom_nb = njit(cache=True)(_idom_loops)
    _removal_nb = njit(cache=True)(_removal_loops)

    def idom_numba(indptr, indices, root=0):
        return _idom_nb(indptr, indices, root)

    def removal_reach_numba(indptr, indices, root=0):
        return _removal_nb(indptr, indices, root)


def immediate_dominators(indptr, indices, root=0, backend=None):
    """idom[v] for every node; ``idom[root] == root`` and -1 marks unreachable nodes."""
    if (backend or BACKEND) == "numba":
        return idom_numba(indptr, indices, root)
    return idom_numpy(indptr, indices, root)


def removal_reachability(indptr, indices, root=0, backend=None):
    """Boolean matrix R with R[j, v] true iff v is reachable from root once j is deleted.

    Row ``root`` is all false.
    """
    if (backend or BACKEND) == "numba":
        return removal_reach_numba(indptr, indices, root)
    return removal_reach_numpy(indptr, indices, root)


def warmup() -> None:
    """Trigger JIT compilation on a tiny graph."""
    indptr, indices = to_csr(3, [0, 1], [1, 2])
    immediate_dominators(indptr, indices)
    removal_reachability(indptr, indices)
