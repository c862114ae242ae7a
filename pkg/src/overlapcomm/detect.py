"""Bottom-up overlapping community detection by merging ego-network partial communities.

Three stages: every vertex's ego network is clustered into partial communities;
partials sharing enough vertices are merged transitively; each merged group is
cleaned of weakly attached members and accepted or rejected on its merge
support ``l`` and internal density ``g``.
"""

from __future__ import annotations

import heapq
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from overlapcomm import _kernels
from overlapcomm.cover import Community, Cover, build
from overlapcomm.graph import Graph
from overlapcomm.metrics import member_counts

log = logging.getLogger(__name__)

EGO_CHUNK = 4096
MERGE_CHUNK = 2048

LOW_SUPPORT = "low_support"
LOW_DENSITY = "low_density"
TOO_SMALL = "too_small"
LOW_BELONGINGNESS = "low_belongingness"
REASONS = (LOW_SUPPORT, LOW_DENSITY, TOO_SMALL, LOW_BELONGINGNESS)


@dataclass(frozen=True)
class DetectParams:
    s_min: int = 3
    k_min: int = 3
    s_sim: float = 0.5
    b_min: float = 0.3
    n_min: int = 6
    l_strict: int = 10
    l_soft_low: int = 6
    g_coeff: float = 3.0
    # ego clustering: minimum inter-cluster edge density for a merge
    ego_density: float = 0.5
    # final deduplication threshold on Jaccard similarity
    dedup_jaccard: float = 0.9

    def __post_init__(self):
        if not 0 < self.s_sim <= 1:
            raise ValueError("s_sim must lie in (0, 1]")
        if not 0 <= self.b_min < 1:
            raise ValueError("b_min must lie in [0, 1)")
        if self.l_soft_low > self.l_strict:
            raise ValueError("l_soft_low must not exceed l_strict")
        if self.s_min < 2 or self.k_min < 1 or self.n_min < 2:
            raise ValueError("s_min >= 2, k_min >= 1 and n_min >= 2 are required")
        if not 0 < self.ego_density <= 1 or not 0 < self.dedup_jaccard <= 1:
            raise ValueError("ego_density and dedup_jaccard must lie in (0, 1]")

    @classmethod
    def from_mapping(cls, values: dict) -> "DetectParams":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            name = key.strip().replace("-", "_")
            if name not in types:
                raise ValueError(f"unknown detection parameter {key!r}")
            kwargs[name] = int(raw) if types[name] in ("int", int) else float(raw)
        return cls(**kwargs)

    @classmethod
    def from_config(cls, text: str, base: "DetectParams | None" = None) -> "DetectParams":
        """Parse ``key=value`` lines; ``#`` starts a comment."""
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValueError(f"config line {lineno}: expected key=value")
            values[key.strip()] = val.strip()
        parsed = cls.from_mapping(values)
        if base is None:
            return parsed
        explicit = {k.strip().replace("-", "_") for k in values}
        return replace(base, **{k: getattr(parsed, k) for k in explicit})


@dataclass(frozen=True)
class PartialCommunity:
    ego: int
    members: tuple[int, ...]

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True, eq=False)
class MergedCommunity:
    """Union of merged partials: ``support[i]`` partials contain ``members[i]``."""

    members: np.ndarray
    support: np.ndarray
    l: int

    def support_of(self) -> dict[int, int]:
        return dict(zip(self.members.tolist(), self.support.tolist()))


@dataclass(frozen=True)
class Rejection:
    reason: str
    l: int
    size: int


@dataclass
class DetectionResult:
    cover: Cover
    rejections: Counter = field(default_factory=Counter)
    partials: int = 0
    merged: int = 0
    duplicates: int = 0

    def summary(self) -> dict:
        return {
            "partials": self.partials,
            "merged": self.merged,
            "accepted": len(self.cover) + self.duplicates,
            "duplicates_removed": self.duplicates,
            "communities": len(self.cover),
            "rejections": {r: self.rejections.get(r, 0) for r in REASONS},
        }


# -- stage 1 ------------------------------------------------------------------


def _indices64(g: Graph) -> np.ndarray:
    return g.indices.astype(np.int64, copy=False)


def ego_partition(g: Graph, v: int, p: DetectParams = DetectParams()) -> list[PartialCommunity]:
    if not 0 <= v < g.n:
        raise IndexError(f"vertex {v} out of range")
    egos, off, mem = _kernels.ego_partials(
        g.indptr, _indices64(g), np.array([v], dtype=np.int64), g.n, p.s_min, p.ego_density)
    return [PartialCommunity(v, tuple(mem[off[i]:off[i + 1]].tolist())) for i in range(len(egos))]


def _chunks(total: int, size: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + size, total)) for lo in range(0, total, size)]


def all_partials(g: Graph, p: DetectParams, workers: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Partials of every ego network, ordered by ego id then first member."""
    indices = _indices64(g)
    verts = np.arange(g.n, dtype=np.int64)

    def run(span):
        lo, hi = span
        return _kernels.ego_partials(g.indptr, indices, verts[lo:hi], g.n, p.s_min, p.ego_density)

    spans = _chunks(g.n, EGO_CHUNK)
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, spans))
    else:
        parts = [run(s) for s in spans]
    if not parts:
        z = np.zeros(0, np.int64)
        return z, np.zeros(1, np.int64), z
    egos = np.concatenate([e for e, _, _ in parts])
    members = np.concatenate([m for _, _, m in parts])
    sizes = np.concatenate([np.diff(o) for _, o, _ in parts])
    offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    return egos, offsets, members


# -- stage 2 ------------------------------------------------------------------


def similarity(a: PartialCommunity | Iterable[int], b: PartialCommunity | Iterable[int],
               p: DetectParams = DetectParams()) -> tuple[float, bool]:
    """Overlap relative to the smaller partial, and whether the pair may merge.

    Overlaps below ``k_min`` vertices never merge, whatever their relative size:
    a pair of distinct communities typically shares a single vertex.
    """
    sa = set(a.members if isinstance(a, PartialCommunity) else a)
    sb = set(b.members if isinstance(b, PartialCommunity) else b)
    if not sa or not sb:
        return 0.0, False
    shared = len(sa & sb)
    score = shared / min(len(sa), len(sb))
    return score, shared >= p.k_min and score >= p.s_sim


def _canonical(partials: Sequence[PartialCommunity]) -> tuple[np.ndarray, np.ndarray]:
    ordered = sorted(partials, key=lambda q: (q.ego, q.members))
    sizes = np.array([len(q.members) for q in ordered], dtype=np.int64)
    offsets = np.zeros(len(ordered) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    members = (np.concatenate([np.asarray(q.members, dtype=np.int64) for q in ordered])
               if ordered else np.zeros(0, np.int64))
    return offsets, members


def merge_arrays(offsets: np.ndarray, members: np.ndarray, p: DetectParams,
                 workers: int = 1) -> list[MergedCommunity]:
    """Transitive closure of mergeable partial pairs over a partial CSR."""
    P = len(offsets) - 1
    if P == 0:
        return []
    sizes = np.diff(offsets)
    owner = np.repeat(np.arange(P, dtype=np.int64), sizes)
    nv = int(members.max()) + 1
    order = np.lexsort((owner, members))
    vpart = owner[order]
    vptr = np.zeros(nv + 1, dtype=np.int64)
    np.cumsum(np.bincount(members, minlength=nv), out=vptr[1:])

    def run(span):
        return _kernels.mergeable_pairs(offsets, members, vptr, vpart, span[0], span[1], p.k_min, p.s_sim)

    spans = _chunks(P, MERGE_CHUNK)
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, spans))
    else:
        parts = [run(s) for s in spans]
    ea = np.concatenate([a for a, _ in parts])
    eb = np.concatenate([b for _, b in parts])
    label = _kernels.union_components(P, ea, eb)

    comp = label[owner]
    keys, counts = np.unique(comp * np.int64(nv) + members, return_counts=True)
    kc, kv = keys // nv, keys % nv
    roots, starts = np.unique(kc, return_index=True)
    ends = np.append(starts[1:], len(kc))
    ls = np.bincount(label, minlength=P)
    return [MergedCommunity(kv[s:e], counts[s:e], int(ls[r])) for r, s, e in zip(roots, starts, ends)]


def merge_pass(partials: Sequence[PartialCommunity], p: DetectParams = DetectParams(),
               workers: int = 1) -> list[MergedCommunity]:
    offsets, members = _canonical(partials)
    return merge_arrays(offsets, members, p, workers)


# -- stage 3 ------------------------------------------------------------------


def _peel(g: Graph, members: np.ndarray, b_min: float) -> tuple[np.ndarray, int]:
    """Drop the lowest-belongingness member (lowest id on ties) while any is below ``b_min``.

    Returns the surviving members and their summed internal degree.
    """
    k_int, _ = member_counts(g, members)
    kint = dict(zip(members.tolist(), k_int.tolist()))
    alive = set(kint)
    heap = [(k, v) for v, k in kint.items()]
    heapq.heapify(heap)
    while len(alive) >= 2 and heap:
        k, v = heap[0]
        if v not in alive or kint[v] != k:
            heapq.heappop(heap)
            continue
        if k / (len(alive) - 1) >= b_min:
            break
        heapq.heappop(heap)
        alive.remove(v)
        for w in g.neighbors(v).tolist():
            if w in alive:
                kint[w] -= 1
                heapq.heappush(heap, (kint[w], w))
    kept = np.array(sorted(alive), dtype=np.int64)
    return kept, sum(kint[v] for v in alive)


def cleanup(mc: MergedCommunity, g: Graph, p: DetectParams = DetectParams()) -> Community | Rejection:
    if mc.l < p.l_soft_low:
        return Rejection(LOW_SUPPORT, mc.l, len(mc.members))
    members = mc.members
    if mc.l >= 4:
        members = members[mc.support >= 2]
    before = len(members)
    if before < p.n_min:
        return Rejection(TOO_SMALL, mc.l, before)
    kept, k_int = _peel(g, members, p.b_min)
    n = len(kept)
    if n < p.n_min:
        return Rejection(LOW_BELONGINGNESS, mc.l, n)
    density = k_int / (n * (n - 1))
    if mc.l >= p.l_strict or density > p.g_coeff / mc.l:
        return Community(-1, kept, mc.l, density)
    return Rejection(LOW_DENSITY, mc.l, n)


def _dedup(accepted: list[Community], threshold: float) -> tuple[list[Community], int]:
    ranked = sorted(accepted, key=lambda c: (-c.l, -c.n_C, tuple(c.members.tolist())))
    kept: list[Community] = []
    index: dict[int, list[int]] = {}
    dropped = 0
    for c in ranked:
        shared = Counter()
        for v in c.members.tolist():
            for j in index.get(v, ()):
                shared[j] += 1
        dup = False
        for j, s in shared.items():
            union = c.n_C + kept[j].n_C - s
            if s / union >= threshold:
                dup = True
                break
        if dup:
            dropped += 1
            continue
        for v in c.members.tolist():
            index.setdefault(v, []).append(len(kept))
        kept.append(c)
    return kept, dropped


def run_detection(g: Graph, p: DetectParams = DetectParams(), workers: int = 1) -> DetectionResult:
    egos, offsets, members = all_partials(g, p, workers)
    log.info("ego phase: %d partial communities", len(egos))
    merged = merge_arrays(offsets, members, p, workers)
    log.info("merge phase: %d merged communities", len(merged))
    rejections: Counter = Counter()
    accepted = []
    for mc in merged:
        res = cleanup(mc, g, p)
        if isinstance(res, Rejection):
            rejections[res.reason] += 1
        else:
            accepted.append(res)
    kept, dropped = _dedup(accepted, p.dedup_jaccard)
    kept.sort(key=lambda c: tuple(c.members.tolist()))
    comms = [Community(i, c.members, c.l, c.g) for i, c in enumerate(kept)]
    return DetectionResult(build(comms, g.n), rejections, len(egos), len(merged), dropped)


def detect(g: Graph, p: DetectParams = DetectParams(), workers: int = 1) -> Cover:
    return run_detection(g, p, workers).cover
