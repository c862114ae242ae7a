"""Community covers: membership index, overlap enumeration, cover file format."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from overlapcomm import __version__
from overlapcomm.graph import Graph

EDGE_CHUNK = 1 << 18


@dataclass(frozen=True, eq=False)
class Community:
    """A sorted, duplicate-free member list.

    ``l`` is the number of partial communities merged into it (0 when the
    community did not come out of detection) and ``g`` its internal edge density.
    """

    id: int
    members: np.ndarray
    l: int = 0
    g: float = 0.0

    def __post_init__(self):
        mem = np.unique(np.asarray(self.members, dtype=np.int64))
        if len(mem) == 0:
            raise ValueError(f"community {self.id} is empty")
        mem.flags.writeable = False
        object.__setattr__(self, "members", mem)

    @property
    def n_C(self) -> int:
        return len(self.members)

    def __contains__(self, v) -> bool:
        i = np.searchsorted(self.members, v)
        return bool(i < len(self.members) and self.members[i] == v)

    def __eq__(self, other):
        if not isinstance(other, Community):
            return NotImplemented
        return (
            self.id == other.id
            and self.l == other.l
            and self.g == other.g
            and np.array_equal(self.members, other.members)
        )

    __hash__ = None


@dataclass(frozen=True)
class OverlapRecord:
    id_a: int
    id_b: int
    shared: tuple[int, ...]
    e2_count: int

    @property
    def size(self) -> int:
        return len(self.shared)


@dataclass(eq=False)
class Cover:
    """Communities plus the vertex -> community incidence index.

    Incidences are held as CSR over ``n`` vertices: the communities of vertex
    ``v`` are positions ``vcomm[vptr[v]:vptr[v+1]]`` (ascending) into
    ``communities``. Vertices outside every community have an empty row.
    """

    communities: list[Community]
    n: int
    vptr: np.ndarray = field(repr=False)
    vcomm: np.ndarray = field(repr=False)
    _pos: dict = field(repr=False)

    @property
    def ids(self) -> list[int]:
        return [c.id for c in self.communities]

    def __len__(self) -> int:
        return len(self.communities)

    def __iter__(self):
        return iter(self.communities)

    def position(self, cid: int) -> int:
        try:
            return self._pos[cid]
        except KeyError:
            raise KeyError(f"unknown community id {cid}") from None

    def get(self, cid: int) -> Community:
        return self.communities[self.position(cid)]

    def membership(self, v: int) -> list[int]:
        """Sorted ids of the communities containing ``v``."""
        if not 0 <= v < self.n:
            return []
        return sorted(self.communities[p].id for p in self.vcomm[self.vptr[v]:self.vptr[v + 1]])

    def m(self, v: int | None = None):
        """Membership count of one vertex, or the array over all vertices."""
        counts = np.diff(self.vptr)
        if v is None:
            return counts
        return int(counts[v]) if 0 <= v < self.n else 0

    def positions_of(self, v: int) -> np.ndarray:
        return self.vcomm[self.vptr[v]:self.vptr[v + 1]]

    def incidence_keys(self) -> np.ndarray:
        """Sorted ``vertex * len(self) + position`` keys of all incidences."""
        C = max(len(self), 1)
        v = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.vptr))
        return v * C + self.vcomm

    def with_n(self, n: int) -> "Cover":
        if n < self.n:
            raise ValueError("cannot shrink the vertex universe")
        return build(self.communities, n)


def build(communities: Iterable[Community], n: int | None = None) -> Cover:
    comms = list(communities)
    pos: dict[int, int] = {}
    for i, c in enumerate(comms):
        if c.id in pos:
            raise ValueError(f"duplicate community id {c.id}")
        pos[c.id] = i
    sizes = np.array([c.n_C for c in comms], dtype=np.int64)
    if comms:
        verts = np.concatenate([c.members for c in comms])
        owner = np.repeat(np.arange(len(comms), dtype=np.int64), sizes)
    else:
        verts = owner = np.zeros(0, np.int64)
    if len(verts) and verts.min() < 0:
        raise ValueError("negative vertex id in cover")
    top = int(verts.max()) + 1 if len(verts) else 0
    if n is None:
        n = top
    elif top > n:
        raise ValueError(f"cover references vertex {top - 1} outside universe of {n}")
    order = np.lexsort((owner, verts))
    vptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(verts, minlength=n), out=vptr[1:])
    return Cover(comms, n, vptr, owner[order], pos)


def from_member_lists(lists: Sequence[Iterable[int]], n: int | None = None) -> Cover:
    return build([Community(i, np.fromiter(mem, dtype=np.int64)) for i, mem in enumerate(lists)], n)


def overlap_pairs(cov: Cover) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Overlapping position pairs via per-vertex bucketing.

    Returns ``(pa, pb, ptr, shared)`` with ``pa < pb`` sorted lexicographically;
    the shared vertices of pair ``i`` are ``shared[ptr[i]:ptr[i+1]]`` (ascending).
    """
    C = len(cov)
    mv = np.diff(cov.vptr)
    multi = np.flatnonzero(mv >= 2)
    keys, verts = [], []
    for k in np.unique(mv[multi]):
        vs = multi[mv[multi] == k]
        rows = cov.vcomm[cov.vptr[vs][:, None] + np.arange(k)]
        iu, ju = np.triu_indices(k, 1)
        keys.append((rows[:, iu] * np.int64(C) + rows[:, ju]).ravel())
        verts.append(np.repeat(vs, len(iu)))
    if not keys:
        z = np.zeros(0, np.int64)
        return z, z, np.zeros(1, np.int64), z
    keys = np.concatenate(keys)
    verts = np.concatenate(verts)
    order = np.lexsort((verts, keys))
    keys, verts = keys[order], verts[order]
    uk, start = np.unique(keys, return_index=True)
    ptr = np.append(start, len(keys)).astype(np.int64)
    return uk // C, uk % C, ptr, verts


def _expand_edge_pairs(cov: Cover, u: np.ndarray, w: np.ndarray):
    """All (A, B) position pairs with A containing u and B containing w, per edge."""
    mu = cov.vptr[u + 1] - cov.vptr[u]
    mw = cov.vptr[w + 1] - cov.vptr[w]
    reps = mu * mw
    eidx = np.repeat(np.arange(len(u)), reps)
    if len(eidx) == 0:
        z = np.zeros(0, np.int64)
        return z, z, z
    within = np.arange(len(eidx)) - np.repeat(np.cumsum(reps) - reps, reps)
    ia = within // mw[eidx]
    ib = within % mw[eidx]
    A = cov.vcomm[cov.vptr[u[eidx]] + ia]
    B = cov.vcomm[cov.vptr[w[eidx]] + ib]
    return eidx, A, B


def _contains(sorted_keys: np.ndarray, keys: np.ndarray) -> np.ndarray:
    if len(sorted_keys) == 0:
        return np.zeros(len(keys), dtype=bool)
    i = np.minimum(np.searchsorted(sorted_keys, keys), len(sorted_keys) - 1)
    return sorted_keys[i] == keys


def e2_counts(cov: Cover, g: Graph, pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """Edges between A-only and B-only vertices for each overlapping pair (A, B)."""
    C = max(len(cov), 1)
    pair_keys = pa * np.int64(C) + pb
    out = np.zeros(len(pa), dtype=np.int64)
    if len(pa) == 0:
        return out
    inc = cov.incidence_keys()
    su, sw = g.edges()
    for s in range(0, len(su), EDGE_CHUNK):
        u, w = su[s:s + EDGE_CHUNK], sw[s:s + EDGE_CHUNK]
        eidx, A, B = _expand_edge_pairs(cov, u, w)
        ok = A != B
        ok &= ~_contains(inc, w[eidx] * C + A)
        ok &= ~_contains(inc, u[eidx] * C + B)
        lo, hi = np.minimum(A[ok], B[ok]), np.maximum(A[ok], B[ok])
        k = lo * np.int64(C) + hi
        hit = _contains(pair_keys, k)
        np.add.at(out, np.searchsorted(pair_keys, k[hit]), 1)
    return out


def overlaps(cov: Cover, g: Graph) -> list[OverlapRecord]:
    """One record per overlapping community pair, ordered by (id_a, id_b)."""
    if cov.n > g.n:
        raise ValueError("cover references vertices outside the graph")
    pa, pb, ptr, shared = overlap_pairs(cov)
    e2 = e2_counts(cov, g, pa, pb)
    ids = np.array(cov.ids, dtype=np.int64)
    recs = []
    for i in range(len(pa)):
        a, b = int(ids[pa[i]]), int(ids[pb[i]])
        if a > b:
            a, b = b, a
        recs.append(OverlapRecord(a, b, tuple(shared[ptr[i]:ptr[i + 1]].tolist()), int(e2[i])))
    recs.sort(key=lambda r: (r.id_a, r.id_b))
    return recs


def neighbor_counts(cov: Cover) -> np.ndarray:
    """d_C for every community position."""
    pa, pb, _, _ = overlap_pairs(cov)
    return np.bincount(np.concatenate([pa, pb]), minlength=len(cov)).astype(np.int64)


def neighbor_positions(cov: Cover, pos: int) -> np.ndarray:
    mem = cov.communities[pos].members
    mem = mem[mem < cov.n]
    rows = [cov.positions_of(v) for v in mem]
    if not rows:
        return np.zeros(0, np.int64)
    out = np.unique(np.concatenate(rows))
    return out[out != pos]


def neighbor_count(cov: Cover, cid: int) -> int:
    return len(neighbor_positions(cov, cov.position(cid)))


def internal_density(g: Graph, members: np.ndarray) -> float:
    n = len(members)
    if n < 2:
        return 0.0
    k = sum(len(np.intersect1d(g.neighbors(v), members, assume_unique=True)) for v in members)
    return k / (n * (n - 1))


# -- cover file -------------------------------------------------------------

COVER_HEADER = "community_id l g n_C: members"


def format_cover(cov: Cover, labels: np.ndarray | None = None) -> str:
    lines = [f"# overlapcomm {__version__} cover: {COVER_HEADER}\n"]
    for c in cov.communities:
        mem = labels[c.members] if labels is not None else c.members
        lines.append(f"{c.id} {c.l} {float(c.g)!r} {c.n_C}: {' '.join(map(str, mem.tolist()))}\n")
    return "".join(lines)


def write_cover(cov: Cover, target, graph: Graph | None = None) -> None:
    data = format_cover(cov, graph.labels if graph is not None else None)
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(data)
    else:
        target.write(data)


class CoverFormatError(ValueError):
    pass


def parse_cover_records(text: str) -> list[tuple[int, int, float, np.ndarray]]:
    """``(id, l, g, members)`` per community line, members in file ids."""
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        head, sep, tail = s.partition(":")
        parts = head.split()
        if not sep or len(parts) != 4:
            raise CoverFormatError(f"line {lineno}: expected 'id l g n_C: members'")
        try:
            cid, l, g, nc = int(parts[0]), int(parts[1]), float(parts[2]), int(parts[3])
            mem = np.array([int(x) for x in tail.split()], dtype=np.int64)
        except ValueError as exc:
            raise CoverFormatError(f"line {lineno}: {exc}") from None
        if len(mem) != nc or len(np.unique(mem)) != nc:
            raise CoverFormatError(f"line {lineno}: n_C={nc} but {len(mem)} members")
        if nc == 0:
            raise CoverFormatError(f"line {lineno}: empty community")
        out.append((cid, l, g, mem))
    return out


def parse_cover(text: str, graph: Graph | None = None) -> Cover:
    """Parse a cover file; with ``graph``, member ids are mapped to dense ids."""
    comms = []
    for cid, l, g, mem in parse_cover_records(text):
        if graph is not None:
            try:
                mem = graph.dense_ids(mem)
            except KeyError as exc:
                raise CoverFormatError(f"community {cid}: {exc.args[0]}") from None
        if len(mem) and mem.min() < 0:
            raise CoverFormatError(f"community {cid}: negative vertex id")
        comms.append(Community(cid, mem, l, g))
    try:
        return build(comms, graph.n if graph is not None else None)
    except ValueError as exc:
        raise CoverFormatError(str(exc)) from None


def read_cover(path, graph: Graph | None = None) -> Cover:
    with open(path, encoding="utf-8") as fh:
        return parse_cover(fh.read(), graph)


def overlap_rows(records: Iterable[OverlapRecord]) -> list[tuple[int, int, int, int]]:
    return [(r.id_a, r.id_b, r.size, r.e2_count) for r in records]


OVERLAP_COLUMNS = ("id_a", "id_b", "overlap_size", "e2_count")
