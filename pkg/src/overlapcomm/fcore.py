"""f-cores: connected vertex sets in which every member is adjacent to at least
a fraction ``f`` of the other members.

``verify`` checks the pointwise condition and connectivity, ``peel`` shrinks a
seed set to a feasible subset, and ``brute_force_fcores`` enumerates the
maximal feasible sets of a small graph exhaustively.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from overlapcomm.graph import Graph

BRUTE_FORCE_LIMIT = 16


@dataclass(frozen=True)
class FCoreParams:
    f: float = 0.5

    def __post_init__(self):
        if not 0 < self.f <= 1:
            raise ValueError(f"f must lie in (0, 1], got {self.f}")


def _check_f(f: float) -> None:
    FCoreParams(f)


def _as_set(g: Graph, s: Iterable[int]) -> np.ndarray:
    arr = np.unique(np.asarray(list(s) if not isinstance(s, np.ndarray) else s, dtype=np.int64))
    if len(arr) and (arr[0] < 0 or arr[-1] >= g.n):
        raise IndexError("vertex set holds ids outside the graph")
    return arr


def _internal_degrees(g: Graph, s: np.ndarray) -> np.ndarray:
    inside = np.zeros(g.n, dtype=bool)
    inside[s] = True
    return np.array([int(inside[g.neighbors(v)].sum()) for v in s.tolist()], dtype=np.int64)


def _components(g: Graph, s: np.ndarray) -> list[np.ndarray]:
    """Connected components of the subgraph induced by ``s``, each sorted."""
    inside = np.zeros(g.n, dtype=bool)
    inside[s] = True
    seen = np.zeros(g.n, dtype=bool)
    comps = []
    for root in s.tolist():
        if seen[root]:
            continue
        seen[root] = True
        stack, comp = [root], [root]
        while stack:
            v = stack.pop()
            for w in g.neighbors(v).tolist():
                if inside[w] and not seen[w]:
                    seen[w] = True
                    stack.append(w)
                    comp.append(w)
        comps.append(np.sort(np.array(comp, dtype=np.int64)))
    return comps


def is_connected(g: Graph, s: Iterable[int]) -> bool:
    s = _as_set(g, s)
    return len(s) > 0 and len(_components(g, s)) == 1


def verify(g: Graph, s: Iterable[int], f: float) -> bool:
    """True iff ``s`` induces a connected subgraph and every member has b >= f."""
    _check_f(f)
    s = _as_set(g, s)
    if len(s) < 2:
        raise ValueError("an f-core needs at least two vertices")
    b = _internal_degrees(g, s) / (len(s) - 1)
    return bool((b >= f).all()) and len(_components(g, s)) == 1


def peel(g: Graph, seed: Iterable[int], f: float) -> np.ndarray:
    """Feasible subset of ``seed`` obtained by greedy lowest-belongingness removal.

    Removed vertices are never re-admitted, so the result need not be maximal.
    Returns an empty array when fewer than two vertices survive.
    """
    _check_f(f)
    s = _as_set(g, seed)
    while len(s) >= 2:
        kint = dict(zip(s.tolist(), _internal_degrees(g, s).tolist()))
        heap = [(k, v) for v, k in kint.items()]
        heapq.heapify(heap)
        alive = len(kint)
        while alive >= 2:
            k, v = heap[0]
            if v not in kint or kint[v] != k:
                heapq.heappop(heap)
                continue
            if k / (alive - 1) >= f:
                break
            heapq.heappop(heap)
            del kint[v]
            alive -= 1
            for w in g.neighbors(v).tolist():
                if w in kint:
                    kint[w] -= 1
                    heapq.heappush(heap, (kint[w], w))
        if alive < 2:
            break
        s = np.array(sorted(kint), dtype=np.int64)
        comps = _components(g, s)
        if len(comps) == 1:
            return s
        # largest component; on ties the one holding the smallest id (components come in id order)
        s = max(comps, key=len)
    return np.zeros(0, dtype=np.int64)


def boundary_vertices(g: Graph, s: Iterable[int], f: float) -> np.ndarray:
    """Outside vertices adjacent to at least a fraction ``f`` of ``s``.

    Each would meet the threshold itself if added, although adding it can push
    existing members below ``f``; such vertices are reported, not admitted.
    """
    _check_f(f)
    s = _as_set(g, s)
    if len(s) == 0:
        return np.zeros(0, dtype=np.int64)
    nbrs = np.concatenate([g.neighbors(v) for v in s.tolist()]).astype(np.int64)
    counts = np.bincount(nbrs, minlength=g.n)
    counts[s] = 0
    return np.flatnonzero(counts / len(s) >= f).astype(np.int64)


# -- exhaustive oracle --------------------------------------------------------

_POP16 = np.array([bin(i).count("1") for i in range(1 << 16)], dtype=np.int64)


def _adjacency_masks(g: Graph) -> np.ndarray:
    adj = np.zeros(g.n, dtype=np.int64)
    for v in range(g.n):
        for w in g.neighbors(v).tolist():
            adj[v] |= 1 << w
    return adj


def feasible_masks(g: Graph, f: float) -> np.ndarray:
    """Boolean table over all vertex subsets (bitmask index) of the f-core conditions."""
    _check_f(f)
    n = g.n
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"exhaustive search refused for n = {n} > {BRUTE_FORCE_LIMIT}")
    masks = np.arange(1 << n, dtype=np.int64)
    size = _POP16[masks]
    adj = _adjacency_masks(g)
    ok = size >= 2
    denom = np.maximum(size - 1, 1)
    for v in range(n):
        has_v = (masks >> v) & 1 == 1
        b = _POP16[adj[v] & masks] / denom
        ok &= ~has_v | (b >= f)
    # connectivity: grow the reach of the lowest member until it stops changing
    reach = masks & -masks
    for _ in range(n):
        grown = reach.copy()
        for v in range(n):
            grown |= np.where((reach >> v) & 1 == 1, adj[v], 0)
        grown &= masks
        if np.array_equal(grown, reach):
            break
        reach = grown
    return ok & (reach == masks)


def brute_force_fcores(g: Graph, f: float) -> list[np.ndarray]:
    """All feasible vertex sets with no feasible strict superset, in bitmask order."""
    feas = feasible_masks(g, f)
    n = g.n
    # count of feasible supersets of every mask
    sup = feas.astype(np.int64)
    for i in range(n):
        view = sup.reshape(-1, 2, 1 << i)
        view[:, 0, :] += view[:, 1, :]
    maximal = feas & (sup == 1)
    out = []
    for m in np.flatnonzero(maximal).tolist():
        out.append(np.array([v for v in range(n) if (m >> v) & 1], dtype=np.int64))
    return out
