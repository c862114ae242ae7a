"""Compiled inner loops. Every kernel is pure and releases the GIL."""

import heapq

import numpy as np
from numba import njit, types
from numba.typed import Dict, List

_i8 = types.int64


@njit(cache=True, nogil=True)
def triangle_counts(indptr, indices):
    n = len(indptr) - 1
    mark = np.zeros(n, dtype=np.bool_)
    tri = np.zeros(n, dtype=np.int64)
    for v in range(n):
        for p in range(indptr[v], indptr[v + 1]):
            mark[indices[p]] = True
        t = 0
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            for q in range(indptr[u], indptr[u + 1]):
                if mark[indices[q]]:
                    t += 1
        tri[v] = t // 2
        for p in range(indptr[v], indptr[v + 1]):
            mark[indices[p]] = False
    return tri


@njit(cache=True, nogil=True)
def agglomerate(k, esrc, edst, min_density):
    """Average-linkage agglomeration of ``k`` vertices joined by local edges.

    Repeatedly merges the cluster pair of highest edge density
    ``e(A, B) / (|A| |B|)`` while it is ``>= min_density``; ties go to the pair
    whose smaller minimum member is smallest, then the other minimum. Returns a
    cluster label per vertex equal to the cluster's smallest member.
    """
    size = np.ones(k, dtype=np.int64)
    minid = np.arange(k)
    alive = np.ones(k, dtype=np.bool_)
    version = np.zeros(k, dtype=np.int64)
    nbrs = List()
    for _ in range(k):
        nbrs.append(Dict.empty(key_type=_i8, value_type=_i8))
    for e in range(len(esrc)):
        a = esrc[e]
        b = edst[e]
        nbrs[a][b] = 1
        nbrs[b][a] = 1
    heap = [(0.0, 0, 0, 0, 0, 0, 0)]
    heap.pop()
    for e in range(len(esrc)):
        a = esrc[e]
        b = edst[e]
        heap.append((-1.0, min(a, b), max(a, b), a, b, 0, 0))
    heapq.heapify(heap)
    # members list per cluster, chained
    nxt = np.full(k, -1, dtype=np.int64)
    tail = np.arange(k)
    while len(heap) > 0:
        item = heapq.heappop(heap)
        a = item[3]
        b = item[4]
        if not alive[a] or not alive[b]:
            continue
        if version[a] != item[5] or version[b] != item[6]:
            continue
        keep, gone = a, b
        if len(nbrs[b]) > len(nbrs[a]):
            keep, gone = b, a
        dk = nbrs[keep]
        for c, cnt in nbrs[gone].items():
            if c == keep:
                continue
            dk[c] = dk.get(c, 0) + cnt
            dc = nbrs[c]
            dc[keep] = dk[c]
            dc.pop(gone)
        dk.pop(gone)
        nbrs[gone] = Dict.empty(key_type=_i8, value_type=_i8)
        size[keep] += size[gone]
        minid[keep] = min(minid[keep], minid[gone])
        alive[gone] = False
        version[keep] += 1
        nxt[tail[keep]] = gone
        tail[keep] = tail[gone]
        sk = size[keep]
        for c, cnt in dk.items():
            d = cnt / (sk * size[c])
            if d >= min_density:
                lo = min(minid[keep], minid[c])
                hi = max(minid[keep], minid[c])
                heapq.heappush(heap, (-d, lo, hi, keep, c, version[keep], version[c]))
    labels = np.empty(k, dtype=np.int64)
    for c in range(k):
        if alive[c]:
            x = c
            while x != -1:
                labels[x] = minid[c]
                x = nxt[x]
    return labels


@njit(cache=True, nogil=True)
def ego_partials(indptr, indices, vertices, n, s_min, min_density):
    """Partial communities of the ego networks of ``vertices``.

    Returns ``(egos, offsets, members)``: partial ``i`` belongs to ego
    ``egos[i]`` and has sorted members ``members[offsets[i]:offsets[i+1]]``
    (ego included). Partials of one ego are ordered by their first member.
    Agglomeration ties go to the cluster pair holding the best-connected vertex
    of the ego subgraph (highest internal degree, then lowest vertex id).
    """
    pos = np.full(n, -1, dtype=np.int64)
    out_ego = List.empty_list(_i8)
    out_off = List.empty_list(_i8)
    out_mem = List.empty_list(_i8)
    out_off.append(0)
    min_cluster = s_min - 1
    for vi in range(len(vertices)):
        v = vertices[vi]
        lo = indptr[v]
        hi = indptr[v + 1]
        k = hi - lo
        if k < min_cluster or k == 0:
            continue
        for i in range(k):
            pos[indices[lo + i]] = i
        es = List.empty_list(_i8)
        ed = List.empty_list(_i8)
        for i in range(k):
            u = indices[lo + i]
            for q in range(indptr[u], indptr[u + 1]):
                w = indices[q]
                if w > u and pos[w] >= 0:
                    es.append(i)
                    ed.append(pos[w])
        for i in range(k):
            pos[indices[lo + i]] = -1
        ne = len(es)
        if ne == 0:
            continue
        # local ids rank ego-subgraph vertices by internal degree (descending), so
        # tie-breaking on the smallest id grows clusters from their best-connected vertices
        deg = np.zeros(k, dtype=np.int64)
        for e in range(ne):
            deg[es[e]] += 1
            deg[ed[e]] += 1
        order = np.argsort(-deg, kind="mergesort")
        rank = np.empty(k, dtype=np.int64)
        for r in range(k):
            rank[order[r]] = r
        esrc = np.empty(ne, dtype=np.int64)
        edst = np.empty(ne, dtype=np.int64)
        for e in range(ne):
            esrc[e] = rank[es[e]]
            edst[e] = rank[ed[e]]
        labels = agglomerate(k, esrc, edst, min_density)
        counts = np.zeros(k, dtype=np.int64)
        for r in range(k):
            counts[labels[r]] += 1
        done = np.zeros(k, dtype=np.bool_)
        # emit clusters in order of their smallest vertex id, members ascending
        for i0 in range(k):
            root = labels[rank[i0]]
            if done[root]:
                continue
            done[root] = True
            if counts[root] < max(min_cluster, 1):
                continue
            placed = False
            for i in range(i0, k):
                if labels[rank[i]] != root:
                    continue
                u = indices[lo + i]
                if not placed and v < u:
                    out_mem.append(v)
                    placed = True
                out_mem.append(u)
            if not placed:
                out_mem.append(v)
            out_ego.append(v)
            out_off.append(len(out_mem))
    egos = np.empty(len(out_ego), dtype=np.int64)
    for i in range(len(out_ego)):
        egos[i] = out_ego[i]
    offsets = np.empty(len(out_off), dtype=np.int64)
    for i in range(len(out_off)):
        offsets[i] = out_off[i]
    members = np.empty(len(out_mem), dtype=np.int64)
    for i in range(len(out_mem)):
        members[i] = out_mem[i]
    return egos, offsets, members


@njit(cache=True, nogil=True)
def mergeable_pairs(pptr, pmem, vptr, vpart, lo, hi, k_min, s_sim):
    """Pairs ``(i, j)``, ``lo <= i < hi``, ``i < j``, whose overlap is mergeable."""
    P = len(pptr) - 1
    cnt = np.zeros(P, dtype=np.int64)
    touched = np.empty(P, dtype=np.int64)
    out_a = List.empty_list(_i8)
    out_b = List.empty_list(_i8)
    for i in range(lo, hi):
        nt = 0
        for p in range(pptr[i], pptr[i + 1]):
            v = pmem[p]
            a = vptr[v]
            b = vptr[v + 1]
            start = a + np.searchsorted(vpart[a:b], i + 1)
            for q in range(start, b):
                j = vpart[q]
                if cnt[j] == 0:
                    touched[nt] = j
                    nt += 1
                cnt[j] += 1
        si = pptr[i + 1] - pptr[i]
        tsort = np.sort(touched[:nt])
        for t in range(nt):
            j = tsort[t]
            c = cnt[j]
            cnt[j] = 0
            if c < k_min:
                continue
            sj = pptr[j + 1] - pptr[j]
            if c / min(si, sj) >= s_sim:
                out_a.append(i)
                out_b.append(j)
    ra = np.empty(len(out_a), dtype=np.int64)
    rb = np.empty(len(out_b), dtype=np.int64)
    for t in range(len(out_a)):
        ra[t] = out_a[t]
        rb[t] = out_b[t]
    return ra, rb


@njit(cache=True)
def union_components(P, ea, eb):
    """Connected-component label per node; label = smallest node id in component."""
    parent = np.arange(P)
    for e in range(len(ea)):
        x = ea[e]
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        y = eb[e]
        while parent[y] != y:
            parent[y] = parent[parent[y]]
            y = parent[y]
        if x != y:
            if x < y:
                parent[y] = x
            else:
                parent[x] = y
    out = np.empty(P, dtype=np.int64)
    for i in range(P):
        x = i
        while parent[x] != x:
            x = parent[x]
        out[i] = x
    return out


def warmup() -> None:
    """Compile every kernel on a tiny input."""
    indptr = np.array([0, 2, 4, 6], dtype=np.int64)
    indices = np.array([1, 2, 0, 2, 0, 1], dtype=np.int64)
    triangle_counts(indptr, indices)
    e, o, m = ego_partials(indptr, indices, np.arange(3, dtype=np.int64), 3, 3, 0.5)
    vptr = np.array([0, 1, 1, 1], dtype=np.int64)
    mergeable_pairs(o, m, vptr, np.zeros(1, np.int64), 0, len(o) - 1, 3, 0.5)
    union_components(2, np.zeros(0, np.int64), np.zeros(0, np.int64))

