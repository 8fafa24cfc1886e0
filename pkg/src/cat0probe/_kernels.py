"""Compiled inner loops."""

import heapq

import numpy as np
from numba import njit


@njit(cache=True)
def propagate_labels(indptr, indices, data, dist, order, seed_label, rel_tol):
    """Carry the smallest source label down a multi-source shortest-path DAG.

    ``dist`` holds multi-source distances and ``order`` sorts them ascending.
    Vertices with ``seed_label >= 0`` and zero distance are sources.  Every
    other vertex receives the minimum label over its DAG predecessors, which
    is the minimum label over all nearest sources.  Unreached vertices get -1.
    """
    n = dist.shape[0]
    out = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        v = order[k]
        dv = dist[v]
        if not np.isfinite(dv):
            break
        if dv == 0.0 and seed_label[v] >= 0:
            out[v] = seed_label[v]
            continue
        tol = rel_tol * max(1.0, dv)
        best = -1
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            if out[u] >= 0 and dist[u] + data[e] <= dv + tol:
                if best < 0 or out[u] < best:
                    best = out[u]
        out[v] = best
    return out


@njit(cache=True)
def ball_dijkstra(indptr, indices, data, src, limit, dist):
    """Dijkstra from ``src`` restricted to vertices at distance < ``limit``.

    ``dist`` is a caller-owned scratch array filled with ``inf``; it is
    restored before returning.  Returns the reached vertices and distances.
    """
    heap = [(0.0, np.int64(src))]
    dist[src] = 0.0
    touched = [np.int64(src)]
    while len(heap) > 0:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for e in range(indptr[v], indptr[v + 1]):
            u = np.int64(indices[e])
            nd = d + data[e]
            if nd < limit and nd < dist[u]:
                if dist[u] == np.inf:
                    touched.append(u)
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    n = len(touched)
    verts = np.empty(n, dtype=np.int64)
    dists = np.empty(n)
    for i in range(n):
        verts[i] = touched[i]
        dists[i] = dist[touched[i]]
        dist[touched[i]] = np.inf
    return verts, dists
