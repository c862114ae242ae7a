"""Overlap statistics, edge classification and community quality measures."""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from overlapcomm.cover import (
    Community,
    Cover,
    OverlapRecord,
    _contains,
    _expand_edge_pairs,
    neighbor_counts,
    neighbor_positions,
    overlap_pairs,
)
from overlapcomm.graph import Graph

E1, E2, E3 = 1, 2, 3
BELONGINGNESS_BINS = 50  # width 0.02


@dataclass(frozen=True)
class MembershipDistributions:
    """``p_m`` over covered vertices and ``P_m`` over (vertex, community) slots.

    The exact rationals are kept alongside the float views so that ``P_m``
    compares exactly with direct slot counting.
    """

    p_exact: dict[int, Fraction]
    P_exact: dict[int, Fraction]
    mean_m: float
    mean_m_sq: float
    mean_m_C: float
    vertices: dict[int, int] = field(default_factory=dict)

    @property
    def p(self) -> dict[int, float]:
        return {m: float(x) for m, x in self.p_exact.items()}

    @property
    def P(self) -> dict[int, float]:
        return {m: float(x) for m, x in self.P_exact.items()}


@dataclass(frozen=True)
class OutboundSplit:
    e1: float
    e2: float
    e3: float
    counts: tuple[int, int, int]
    zero_kout: bool


@dataclass(frozen=True)
class CommunityEdgeProfile:
    community_id: int
    n_C: int
    k_int: int
    k_out: int
    delta_int: float
    delta_out: float
    conductance: float
    fitness: float
    weak: bool
    alpha: float
    undefined: bool
    e1: float | None = None
    e2: float | None = None
    e3: float | None = None
    zero_kout: bool | None = None
    d_C: int | None = None


@dataclass(frozen=True)
class EdgeTypeTally:
    type_counts: tuple[int, int, int, int, int]
    vertices_m_pos: int
    vertices_m_zero: int

    @property
    def m(self) -> int:
        return sum(self.type_counts)

    @property
    def n(self) -> int:
        return self.vertices_m_pos + self.vertices_m_zero

    def to_dict(self) -> dict:
        m, n = self.m, self.n
        out = {
            "vertices_m_pos": {"count": self.vertices_m_pos, "share": self.vertices_m_pos / n if n else 0.0},
            "vertices_m_zero": {"count": self.vertices_m_zero, "share": self.vertices_m_zero / n if n else 0.0},
        }
        for t, c in enumerate(self.type_counts, start=1):
            out[f"edge_type_{t}"] = {"count": c, "share": c / m if m else 0.0}
        return out


@dataclass(frozen=True)
class NonDuplicateRate:
    value: float
    raw: float
    out_of_range: bool


@dataclass(frozen=True)
class OverlapStats:
    total: int
    size_shares: dict[str, float]
    e2_shares: dict[str, float]
    mean_e2: float


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple]


# -- per-member counts --------------------------------------------------------


def _member_adjacency(g: Graph, members: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(member index, neighbor) for every adjacency entry of every member."""
    starts = g.indptr[members]
    deg = g.indptr[members + 1] - starts
    owner = np.repeat(np.arange(len(members)), deg)
    offs = np.arange(deg.sum()) - np.repeat(np.cumsum(deg) - deg, deg)
    nbr = g.indices[np.repeat(starts, deg) + offs].astype(np.int64)
    return owner, nbr


def member_counts(g: Graph, members: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-member internal and outbound degree with respect to ``members``."""
    members = np.asarray(members, dtype=np.int64)
    owner, nbr = _member_adjacency(g, members)
    inside = _contains(members, nbr)
    k_int = np.bincount(owner[inside], minlength=len(members))
    k_out = np.bincount(owner[~inside], minlength=len(members))
    return k_int.astype(np.int64), k_out.astype(np.int64)


def belongingness(g: Graph, c: Community, v: int) -> float:
    if v not in c:
        raise ValueError(f"vertex {v} is not a member of community {c.id}")
    if c.n_C < 2:
        raise ValueError("belongingness needs a community of at least two members")
    k = len(np.intersect1d(g.neighbors(v), c.members, assume_unique=True))
    return k / (c.n_C - 1)


def belongingness_all(g: Graph, c: Community) -> np.ndarray:
    if c.n_C < 2:
        raise ValueError("belongingness needs a community of at least two members")
    k_int, _ = member_counts(g, c.members)
    return k_int / (c.n_C - 1)


def edge_counts(g: Graph, c: Community) -> tuple[int, int]:
    k_int, k_out = member_counts(g, c.members)
    return int(k_int.sum()), int(k_out.sum())


# -- membership ---------------------------------------------------------------


def membership_distributions(cov: Cover) -> MembershipDistributions:
    if len(cov) == 0:
        raise ValueError("membership distributions need at least one community")
    mv = cov.m()
    mv = mv[mv > 0]
    counts = Counter(mv.tolist())
    N = len(mv)
    S = int(mv.sum())
    mean = Fraction(S, N)
    p = {m: Fraction(c, N) for m, c in sorted(counts.items())}
    P = {m: p[m] * m / mean for m in p}
    mean_sq = sum(p[m] * m * m for m in p)
    return MembershipDistributions(
        p_exact=p,
        P_exact=P,
        mean_m=float(mean),
        mean_m_sq=float(mean_sq),
        mean_m_C=float(mean_sq / mean),
        vertices=dict(sorted(counts.items())),
    )


def slot_fractions(cov: Cover) -> dict[int, Fraction]:
    """Fraction of (vertex, community) incidences whose vertex has m memberships."""
    mv = cov.m()
    per_slot = Counter()
    for c in cov.communities:
        per_slot.update(mv[c.members].tolist())
    total = sum(per_slot.values())
    return {m: Fraction(k, total) for m, k in sorted(per_slot.items())}


# -- outbound categories ------------------------------------------------------


def _outbound_edges(g: Graph, members: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    owner, nbr = _member_adjacency(g, members)
    out = ~_contains(members, nbr)
    return members[owner[out]], nbr[out]


def _outbound_labels(cov: Cover, pos: int, v: np.ndarray, w: np.ndarray,
                     inc: np.ndarray, nbrs: np.ndarray) -> np.ndarray:
    C = max(len(cov), 1)
    labels = np.full(len(v), E3, dtype=np.int8)
    if len(v) == 0:
        return labels
    # E1: another community holds both ends
    mv = cov.vptr[v + 1] - cov.vptr[v]
    eidx = np.repeat(np.arange(len(v)), mv)
    offs = np.arange(len(eidx)) - np.repeat(np.cumsum(mv) - mv, mv)
    D = cov.vcomm[cov.vptr[v[eidx]] + offs]
    hit = (D != pos) & _contains(inc, w[eidx] * C + D)
    e1 = np.zeros(len(v), dtype=bool)
    e1[eidx[hit]] = True
    # E2: the far end lies in a neighbor community
    mw = cov.vptr[w + 1] - cov.vptr[w]
    eidx = np.repeat(np.arange(len(w)), mw)
    offs = np.arange(len(eidx)) - np.repeat(np.cumsum(mw) - mw, mw)
    D = cov.vcomm[cov.vptr[w[eidx]] + offs]
    e2 = np.zeros(len(v), dtype=bool)
    e2[eidx[_contains(nbrs, D)]] = True
    labels[e2] = E2
    labels[e1] = E1
    return labels


def outbound_edge_labels(g: Graph, cov: Cover, c: Community) -> list[tuple[int, int, int]]:
    """``(member, outside vertex, category)`` for every outbound edge of ``c``."""
    cv = cov.with_n(g.n) if cov.n < g.n else cov
    pos = cv.position(c.id)
    v, w = _outbound_edges(g, c.members)
    lab = _outbound_labels(cv, pos, v, w, cv.incidence_keys(), neighbor_positions(cv, pos))
    return list(zip(v.tolist(), w.tolist(), lab.tolist()))


def _split(labels: np.ndarray) -> OutboundSplit:
    counts = tuple(int((labels == e).sum()) for e in (E1, E2, E3))
    k = sum(counts)
    if k == 0:
        return OutboundSplit(0.0, 0.0, 0.0, counts, True)
    return OutboundSplit(counts[0] / k, counts[1] / k, counts[2] / k, counts, False)


def classify_outbound(g: Graph, cov: Cover, c: Community) -> OutboundSplit:
    lab = np.array([t for _, _, t in outbound_edge_labels(g, cov, c)], dtype=np.int8)
    return _split(lab)


# -- network edge types -------------------------------------------------------


def edge_types(g: Graph, cov: Cover) -> np.ndarray:
    """Type 1..5 of every edge, aligned with ``g.edges()``."""
    u, w = g.edges()
    types = np.empty(len(u), dtype=np.int8)
    if len(u) == 0:
        return types
    C = max(len(cov), 1)
    cv = cov.with_n(g.n) if cov.n < g.n else cov
    pa, pb, _, _ = overlap_pairs(cv)
    pair_keys = pa * np.int64(C) + pb
    mv = cv.m()
    eidx, A, B = _expand_edge_pairs(cv, u, w)
    t1 = np.zeros(len(u), dtype=bool)
    t1[eidx[A == B]] = True
    lo, hi = np.minimum(A, B), np.maximum(A, B)
    t2 = np.zeros(len(u), dtype=bool)
    t2[eidx[(A != B) & _contains(pair_keys, lo * np.int64(C) + hi)]] = True
    covered = (mv[u] > 0).astype(np.int8) + (mv[w] > 0).astype(np.int8)
    types[:] = np.where(covered == 2, 3, np.where(covered == 1, 4, 5))
    types[t2] = 2
    types[t1] = 1
    return types


def classify_network_edges(g: Graph, cov: Cover) -> EdgeTypeTally:
    types = edge_types(g, cov)
    counts = np.bincount(types, minlength=6)[1:6]
    cv = cov.with_n(g.n) if cov.n < g.n else cov
    pos = int((cv.m() > 0).sum())
    return EdgeTypeTally(tuple(int(x) for x in counts), pos, g.n - pos)


# -- neighbor-count model -----------------------------------------------------


def _mean_m_C(mdist) -> float:
    return mdist.mean_m_C if isinstance(mdist, MembershipDistributions) else float(mdist)


def expected_neighbors(n_C: int, mdist, r_nd: float) -> float:
    if n_C < 1:
        raise ValueError("n_C must be at least 1")
    if not 0 < r_nd <= 1:
        raise ValueError("r_nd must lie in (0, 1]")
    return (_mean_m_C(mdist) - 1.0) * n_C * r_nd


def nonduplicate_rate(d_C: int, n_C: int, mdist) -> NonDuplicateRate:
    denom = (_mean_m_C(mdist) - 1.0) * n_C
    if denom <= 0:
        if d_C > 0:
            raise ValueError("neighbor communities observed although <m>_C = 1")
        return NonDuplicateRate(1.0, math.nan, True)
    raw = d_C / denom
    return NonDuplicateRate(min(raw, 1.0), raw, not 0 < raw <= 1)


# -- quality measures ---------------------------------------------------------


def _profile(cid: int, n_C: int, k_int: int, k_out: int, n: int, alpha: float) -> CommunityEdgeProfile:
    total = k_int + k_out
    undefined = total == 0
    conductance = k_out / total if total else math.nan
    fitness = k_int / total ** alpha if total else math.nan
    d_int = k_int / (n_C * (n_C - 1)) if n_C > 1 else math.nan
    d_out = k_out / (n_C * (n - n_C)) if n > n_C else math.nan
    return CommunityEdgeProfile(cid, n_C, k_int, k_out, d_int, d_out, conductance, fitness,
                                k_int > k_out, alpha, undefined)


def quality(g: Graph, c: Community, n: int | None = None, alpha: float = 1.0,
            cover: Cover | None = None) -> CommunityEdgeProfile:
    n = g.n if n is None else n
    if not n >= c.n_C >= 2:
        raise ValueError("quality needs n >= n_C >= 2")
    k_int, k_out = edge_counts(g, c)
    prof = _profile(c.id, c.n_C, k_int, k_out, n, alpha)
    if cover is None:
        return prof
    split = classify_outbound(g, cover, c)
    return _with_split(prof, split, neighbor_positions(cover, cover.position(c.id)).size)


def _with_split(prof: CommunityEdgeProfile, split: OutboundSplit, d_C: int) -> CommunityEdgeProfile:
    return CommunityEdgeProfile(**{**prof.__dict__, "e1": split.e1, "e2": split.e2, "e3": split.e3,
                                   "zero_kout": split.zero_kout, "d_C": d_C})


def community_profiles(g: Graph, cov: Cover, alpha: float = 1.0, workers: int = 1) -> list[CommunityEdgeProfile]:
    """Edge profile with outbound split for every community, in cover order."""
    cv = cov.with_n(g.n) if cov.n < g.n else cov
    inc = cv.incidence_keys()
    pa, pb, _, _ = overlap_pairs(cv)
    # skeleton adjacency in CSR
    C = len(cv)
    a = np.concatenate([pa, pb])
    b = np.concatenate([pb, pa])
    order = np.lexsort((b, a))
    a, b = a[order], b[order]
    sptr = np.zeros(C + 1, dtype=np.int64)
    np.cumsum(np.bincount(a, minlength=C), out=sptr[1:])

    def one(pos: int) -> CommunityEdgeProfile:
        c = cv.communities[pos]
        k_int, k_out = member_counts(g, c.members)
        prof = _profile(c.id, c.n_C, int(k_int.sum()), int(k_out.sum()), g.n, alpha)
        v, w = _outbound_edges(g, c.members)
        nb = b[sptr[pos]:sptr[pos + 1]]
        split = _split(_outbound_labels(cv, pos, v, w, inc, nb))
        return _with_split(prof, split, len(nb))

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(one, range(C)))
    return [one(p) for p in range(C)]


# -- overlap statistics -------------------------------------------------------

SIZE_BUCKETS = ("1", "2", "3", "4", "ge5")
E2_BUCKETS = ("0", "1", "2", "le5", "gt5")


def overlap_stats(records: Sequence[OverlapRecord]) -> OverlapStats:
    """Shares of overlap sizes and of E2 edges per overlap.

    ``le5`` is cumulative (0..5 E2 edges) and ``gt5`` its complement.
    """
    N = len(records)
    if N == 0:
        return OverlapStats(0, {}, {}, 0.0)
    sizes = np.array([r.size for r in records])
    e2 = np.array([r.e2_count for r in records])
    size_shares = {k: float((sizes == i + 1).sum() / N) for i, k in enumerate(SIZE_BUCKETS[:4])}
    size_shares["ge5"] = float((sizes >= 5).sum() / N)
    e2_shares = {
        "0": float((e2 == 0).sum() / N),
        "1": float((e2 == 1).sum() / N),
        "2": float((e2 == 2).sum() / N),
        "le5": float((e2 <= 5).sum() / N),
        "gt5": float((e2 > 5).sum() / N),
    }
    return OverlapStats(N, size_shares, e2_shares, float(e2.mean()))


# -- histograms ---------------------------------------------------------------


def _hist2d(x: np.ndarray, y: np.ndarray, nx: int, ny: int, xmax: float, ymax: float):
    xmax = xmax if xmax > 0 else 1.0
    ymax = ymax if ymax > 0 else 1.0
    ix = np.minimum((x / xmax * nx).astype(np.int64), nx - 1)
    iy = np.minimum((y / ymax * ny).astype(np.int64), ny - 1)
    keys, counts = np.unique(ix * ny + iy, return_counts=True)
    return keys // ny, keys % ny, counts, xmax / nx, ymax / ny


def _column_rescaled(xs: np.ndarray, ybin: np.ndarray) -> list[tuple[int, int, int, float]]:
    rows = []
    keys, counts = np.unique(np.stack([xs, ybin]), axis=1, return_counts=True)
    colmax: dict[int, int] = {}
    for (x, _), c in zip(keys.T.tolist(), counts.tolist()):
        colmax[x] = max(colmax.get(x, 0), c)
    for (x, yb), c in zip(keys.T.tolist(), counts.tolist()):
        rows.append((x, yb, c, c / colmax[x]))
    return rows


def histograms(g: Graph, cov: Cover, profiles: Sequence[CommunityEdgeProfile] | None = None,
               alpha: float = 1.0, workers: int = 1) -> dict[str, Table]:
    cv = cov.with_n(g.n) if cov.n < g.n else cov
    if profiles is None:
        profiles = community_profiles(g, cv, alpha, workers)
    tables: dict[str, Table] = {}
    mv = cv.m()

    # belongingness per membership count, exact bins of width 0.02
    bins_by_m: dict[int, np.ndarray] = {}
    for c in cv.communities:
        if c.n_C < 2:
            continue
        k_int, _ = member_counts(g, c.members)
        b = np.minimum(k_int * BELONGINGNESS_BINS // (c.n_C - 1), BELONGINGNESS_BINS - 1)
        ms = mv[c.members]
        for m in np.unique(ms):
            arr = bins_by_m.setdefault(int(m), np.zeros(BELONGINGNESS_BINS, np.int64))
            arr += np.bincount(b[ms == m], minlength=BELONGINGNESS_BINS)
    rows = []
    for m in sorted(bins_by_m):
        arr = bins_by_m[m]
        tot = arr.sum()
        for i, k in enumerate(arr.tolist()):
            rows.append((m, i / BELONGINGNESS_BINS, (i + 1) / BELONGINGNESS_BINS, k, k / tot if tot else 0.0))
    tables["belongingness_by_m"] = Table("belongingness_by_m", ("m", "b_lo", "b_hi", "count", "fraction"), rows)

    # p_m and P_m
    if len(cv):
        md = membership_distributions(cv)
        slots = slot_fractions(cv)
        rows = [(m, md.vertices[m], float(md.p_exact[m]), float(md.P_exact[m]), float(slots[m]))
                for m in md.p_exact]
    else:
        rows = []
    tables["membership"] = Table("membership", ("m", "vertices", "p_m", "P_m", "slot_fraction"), rows)

    sizes = np.array([p.n_C for p in profiles], dtype=np.int64)
    d = neighbor_counts(cv) if len(cv) else np.zeros(0, np.int64)

    # neighbor count versus size, columns rescaled to unit maximum
    rows = _column_rescaled(sizes, d) if len(sizes) else []
    tables["neighbors_vs_size"] = Table("neighbors_vs_size", ("n_C", "d_C", "count", "rescaled"), rows)
    rows = []
    for s in np.unique(sizes):
        ds = d[sizes == s].astype(np.float64)
        rows.append((int(s), len(ds), float(ds.mean()), float(ds.std())))
    tables["neighbors_by_size"] = Table("neighbors_by_size", ("n_C", "communities", "mean_d_C", "std_d_C"), rows)

    # per-member internal vs outbound edges
    N = len(profiles)
    if N:
        x = np.array([p.k_int / p.n_C for p in profiles])
        y = np.array([p.k_out / p.n_C for p in profiles])
        ix, iy, cnt, wx, wy = _hist2d(x, y, 200, 400, float(x.max()), float(y.max()))
        rows = [(i * wx, (i + 1) * wx, j * wy, (j + 1) * wy, int(k), k / (N * wx * wy))
                for i, j, k in zip(ix.tolist(), iy.tolist(), cnt.tolist())]
    else:
        rows = []
    tables["edges_per_member"] = Table(
        "edges_per_member", ("kint_lo", "kint_hi", "kout_lo", "kout_hi", "count", "density"), rows)

    # e1 versus e2 over communities with outbound edges
    live = [p for p in profiles if not p.zero_kout]
    if live:
        x = np.array([p.e1 for p in live])
        y = np.array([p.e2 for p in live])
        ix, iy, cnt, wx, wy = _hist2d(x, y, 400, 200, 1.0, 1.0)
        rows = [(i * wx, (i + 1) * wx, j * wy, (j + 1) * wy, int(k), k / len(live))
                for i, j, k in zip(ix.tolist(), iy.tolist(), cnt.tolist())]
    else:
        rows = []
    tables["e1_e2"] = Table("e1_e2", ("e1_lo", "e1_hi", "e2_lo", "e2_hi", "count", "fraction"), rows)

    # size distribution and size versus internal density
    rows = []
    if N:
        us, uc = np.unique(sizes, return_counts=True)
        rows = [(int(s), int(c), c / N) for s, c in zip(us, uc)]
    tables["community_size"] = Table("community_size", ("n_C", "count", "fraction"), rows)
    if N:
        kint = np.array([p.k_int for p in profiles], dtype=np.int64)
        denom = np.maximum(sizes * (sizes - 1), 1)
        dbin = np.minimum(kint * BELONGINGNESS_BINS // denom, BELONGINGNESS_BINS - 1)
        rows = [(s, bi / BELONGINGNESS_BINS, k, r) for s, bi, k, r in _column_rescaled(sizes, dbin)]
    else:
        rows = []
    tables["size_vs_density"] = Table("size_vs_density", ("n_C", "delta_lo", "count", "rescaled"), rows)
    return tables


def profile_rows(profiles: Iterable[CommunityEdgeProfile]) -> list[tuple]:
    return [
        (p.community_id, p.n_C, p.d_C, p.k_int, p.k_out, p.e1, p.e2, p.e3, int(bool(p.zero_kout)),
         p.delta_int, p.delta_out, p.conductance, p.fitness, int(p.weak))
        for p in profiles
    ]


PROFILE_COLUMNS = ("community_id", "n_C", "d_C", "k_int", "k_out", "e1", "e2", "e3", "zero_kout",
                   "delta_int", "delta_out", "conductance", "fitness", "weak")
