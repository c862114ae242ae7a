"""Synthetic graphs with planted, significantly overlapping communities, and cover scoring.

Multi-membership vertices are planted in *groups*: ``s`` vertices that all join
the same ``m`` communities. Every pair of those communities then overlaps in
``s`` vertices, so group sizes follow the target overlap-size distribution and
vertex memberships follow the target ``p_m``. Since a community's summed
excess membership splits over its neighbors in overlaps of mean size
``1 / r_nd``, the overlap tail is sized so that mean equals the requested
non-duplicate rate.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import numpy as np

from overlapcomm.cover import Community, Cover, OverlapRecord, build
from overlapcomm.graph import Graph


class SpecError(ValueError):
    """Infeasible or inconsistent planted spec."""


@dataclass(frozen=True)
class PlantedSpec:
    community_count: int = 500
    size_min: int = 6
    size_max: int = 50
    # share of covered vertices with m > 1; m - 2 is geometric with this ratio
    multi_fraction: float = 0.5
    membership_ratio: float = 0.1
    m_max: int = 20
    # overlap sizes 1..4; the remainder is a tail of sizes >= 5
    overlap_shares: tuple[float, ...] = (0.845, 0.083, 0.026, 0.013)
    r_nd: float = 0.7
    # an overlap may hold at most this fraction of the smaller community
    overlap_cap: float = 0.25
    p_in: float = 0.7
    # realized mean E2 edges per overlap, counting those that shared memberships create
    e2_mean: float = 1.6
    # share of all vertices that belong to no community
    background_share: float = 0.55
    # mean number of uniformly random extra edges per vertex
    background_degree: float = 18.0
    seed: int = 42

    @classmethod
    def from_dict(cls, data: dict) -> "PlantedSpec":
        known = {f.name for f in fields(cls)}
        bad = set(data) - known
        if bad:
            raise SpecError(f"unknown spec fields: {sorted(bad)}")
        data = dict(data)
        if "overlap_shares" in data:
            data["overlap_shares"] = tuple(float(x) for x in data["overlap_shares"])
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "PlantedSpec":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["overlap_shares"] = list(self.overlap_shares)
        return d

    # -- derived targets ----------------------------------------------------

    def membership_distribution(self) -> dict[int, float]:
        """Target p_m over covered vertices."""
        if self.multi_fraction == 0:
            return {1: 1.0}
        tail = np.array([self.membership_ratio ** (m - 2) for m in range(2, self.m_max + 1)])
        tail = tail / tail.sum() * self.multi_fraction
        out = {1: 1.0 - self.multi_fraction} if self.multi_fraction < 1 else {}
        out.update({m: float(t) for m, t in zip(range(2, self.m_max + 1), tail)})
        return out

    def target_P1(self) -> float:
        p = self.membership_distribution()
        mean = sum(m * x for m, x in p.items())
        return p.get(1, 0.0) / mean

    def mean_m_C(self) -> float:
        p = self.membership_distribution()
        return sum(m * m * x for m, x in p.items()) / sum(m * x for m, x in p.items())

    @property
    def tail_share(self) -> float:
        return max(0.0, 1.0 - sum(self.overlap_shares))

    def tail_mean(self) -> float:
        """Mean size of overlaps in the >= 5 tail that yields mean overlap 1/r_nd."""
        head = sum((i + 1) * s for i, s in enumerate(self.overlap_shares))
        if self.tail_share <= 1e-12:
            return 0.0
        return (1.0 / self.r_nd - head) / self.tail_share

    def target_overlap_shares(self) -> dict[str, float]:
        keys = ("1", "2", "3", "4")
        out = {k: 0.0 for k in keys}
        total = sum(self.overlap_shares) + self.tail_share
        for k, s in zip(keys, self.overlap_shares):
            out[k] = s / total
        out["ge5"] = self.tail_share / total
        return out

    def validate(self) -> None:
        if self.community_count < 1:
            raise SpecError("community_count must be positive")
        if not 2 <= self.size_min <= self.size_max:
            raise SpecError("need 2 <= size_min <= size_max")
        if not 0.5 < self.p_in <= 1:
            raise SpecError("p_in must lie in (0.5, 1]")
        if not 0 <= self.multi_fraction <= 1:
            raise SpecError("multi_fraction must lie in [0, 1]")
        if self.multi_fraction > 0:
            if self.m_max < 2:
                raise SpecError("m_max must be at least 2 when multi-membership is requested")
            if self.m_max > self.community_count:
                raise SpecError("m_max exceeds the number of communities")
            if not 0 <= self.membership_ratio < 1:
                raise SpecError("membership_ratio must lie in [0, 1)")
        if len(self.overlap_shares) > 4 or any(s < 0 for s in self.overlap_shares):
            raise SpecError("overlap_shares lists non-negative shares for sizes 1..4")
        if sum(self.overlap_shares) > 1 + 1e-9:
            raise SpecError("overlap_shares sum above 1")
        if self.multi_fraction > 0 and sum(self.overlap_shares) + self.tail_share <= 0:
            raise SpecError("no overlap sizes available")
        if not 0 < self.r_nd <= 1:
            raise SpecError("r_nd must lie in (0, 1]")
        if not 0 < self.overlap_cap <= 1:
            raise SpecError("overlap_cap must lie in (0, 1]")
        biggest_cap = max(1, math.floor(self.size_max * self.overlap_cap))
        largest = max([i + 1 for i, s in enumerate(self.overlap_shares) if s > 0], default=1)
        if self.tail_share > 1e-12:
            if self.tail_mean() < 5:
                raise SpecError("r_nd is too high for the requested overlap-size shares")
            largest = max(largest, 5)
        if self.multi_fraction > 0 and largest > biggest_cap:
            raise SpecError(f"overlaps of {largest} vertices exceed community capacity "
                            f"(at most {biggest_cap} for size {self.size_max})")
        if not 0 <= self.background_share < 1:
            raise SpecError("background_share must lie in [0, 1)")
        if self.background_degree < 0 or self.e2_mean < 0:
            raise SpecError("background_degree and e2_mean must be non-negative")


class Benchmark(NamedTuple):
    graph: Graph
    truth: Cover
    overlaps: list[OverlapRecord] | None
    neighbor_counts: np.ndarray


def _sample_overlap_size(rng: np.random.Generator, spec: PlantedSpec) -> int:
    probs = list(spec.overlap_shares) + [spec.tail_share]
    probs = np.array(probs) / sum(probs)
    k = int(rng.choice(len(probs), p=probs))
    if k < len(spec.overlap_shares):
        return k + 1
    extra = spec.tail_mean() - 5
    if extra <= 0:
        return 5
    return 5 + int(rng.geometric(1.0 / (1.0 + extra))) - 1


def _plant_groups(rng, spec: PlantedSpec, sizes: np.ndarray):
    c = len(sizes)
    free = sizes.astype(np.int64).copy()
    caps = np.maximum(1, np.floor(sizes * spec.overlap_cap).astype(np.int64))
    pair_ov: list[dict[int, int]] = [dict() for _ in range(c)]
    groups: list[tuple[int, list[int]]] = []
    if spec.multi_fraction == 0:
        return free, groups, pair_ov
    pdist = spec.membership_distribution()
    tail_m = np.array([m for m in pdist if m >= 2])
    tail_p = np.array([pdist[m] for m in tail_m])
    tail_p = tail_p / tail_p.sum()
    target = round(int(sizes.sum()) * (1.0 - spec.target_P1()))
    assigned = 0
    failures = 0
    while assigned < target and failures < 1000:
        m = int(rng.choice(tail_m, p=tail_p))
        s = _sample_overlap_size(rng, spec)
        mask = (free >= s) & (caps >= s)
        if mask.sum() < m and s > 1:
            s = 1
            mask = free >= 1
        if mask.sum() < 2:
            break
        chosen: list[int] = []
        # fresh: candidates not yet overlapping any chosen community
        fresh = mask.copy()
        for _ in range(m):
            pool = fresh if fresh.any() else mask
            if not pool.any():
                break
            w = free * pool
            pick = int(rng.choice(c, p=w / w.sum()))
            chosen.append(pick)
            mask[pick] = fresh[pick] = False
            for d, ov in pair_ov[pick].items():
                fresh[d] = False
                if ov + s > min(caps[pick], caps[d]):
                    mask[d] = False
        if len(chosen) < 2:
            failures += 1
            continue
        for i, a in enumerate(chosen):
            for b in chosen[i + 1:]:
                pair_ov[a][b] = pair_ov[a].get(b, 0) + s
                pair_ov[b][a] = pair_ov[b].get(a, 0) + s
        free[chosen] -= s
        assigned += s * len(chosen)
        groups.append((s, sorted(chosen)))
    return free, groups, pair_ov


def _e2_ground_truth(g: Graph, members: list[np.ndarray], pairs: list[tuple[int, int]]) -> list[int]:
    out = []
    for a, b in pairs:
        xa = np.setdiff1d(members[a], members[b], assume_unique=True)
        yb = np.setdiff1d(members[b], members[a], assume_unique=True)
        if len(xa) == 0 or len(yb) == 0:
            out.append(0)
            continue
        nbrs = np.concatenate([g.neighbors(x) for x in xa])
        out.append(int(np.isin(nbrs, yb, assume_unique=False).sum()))
    return out


def generate(spec: PlantedSpec = PlantedSpec(), with_overlaps: bool = True) -> Benchmark:
    """Planted benchmark graph with its exact ground truth."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    c = spec.community_count
    sizes = rng.integers(spec.size_min, spec.size_max + 1, size=c)
    free, groups, _ = _plant_groups(rng, spec, sizes)

    # construction ids: group vertices first, then single-membership fillers
    member_lists: list[list[int]] = [[] for _ in range(c)]
    nxt = 0
    for s, chosen in groups:
        for a in chosen:
            member_lists[a].extend(range(nxt, nxt + s))
        nxt += s
    for a in range(c):
        k = int(free[a])
        member_lists[a].extend(range(nxt, nxt + k))
        nxt += k
    background = round(nxt * spec.background_share / (1.0 - spec.background_share))
    return plant(member_lists, background, p_in=spec.p_in, e2_mean=spec.e2_mean,
                 background_degree=spec.background_degree, rng=rng,
                 with_overlaps=with_overlaps)


def _shared_bookkeeping(members: list[np.ndarray]) -> dict[tuple[int, int], list[int]]:
    """Shared vertices of every overlapping community pair, read off the memberships."""
    of: dict[int, list[int]] = {}
    for a, mem in enumerate(members):
        for v in mem.tolist():
            of.setdefault(v, []).append(a)
    pairs: dict[tuple[int, int], list[int]] = {}
    for v in sorted(of):
        cs = of[v]
        for i, a in enumerate(cs):
            for b in cs[i + 1:]:
                pairs.setdefault((a, b), []).append(v)
    return pairs


def plant(member_lists, background: int = 0, *, p_in: float = 0.7, e2_mean: float = 1.6,
          background_degree: float = 0.0, rng: np.random.Generator | int = 0,
          with_overlaps: bool = True) -> Benchmark:
    """Realize a graph around explicit memberships over vertices 0..k-1.

    Vertex ids are shuffled together with ``background`` extra vertices, so
    the ground truth is reported in the shuffled ids.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    lists = [np.unique(np.asarray(list(ml), dtype=np.int64)) for ml in member_lists]
    covered = max((int(l[-1]) + 1 for l in lists if len(l)), default=0)
    n = covered + int(background)
    perm = rng.permutation(n).astype(np.int64)
    members = [np.sort(perm[l]) for l in lists]

    src, dst = [], []
    for mem in members:
        iu, ju = np.triu_indices(len(mem), 1)
        keep = rng.random(len(iu)) < p_in
        src.append(mem[iu[keep]])
        dst.append(mem[ju[keep]])
    nbg = round(n * background_degree / 2.0)
    if nbg:
        ends = rng.integers(0, n, size=(nbg, 2))
        src.append(ends[:, 0])
        dst.append(ends[:, 1])
    shared_by_pair = _shared_bookkeeping(members)
    pairs = sorted(shared_by_pair)
    if e2_mean > 0 and pairs:
        # shared memberships and background edges already put E2 edges between
        # overlapping pairs; top up so the realized mean per overlap reaches e2_mean
        base = Graph.from_edges(n, np.concatenate(src), np.concatenate(dst))
        extra = e2_mean - float(np.mean(_e2_ground_truth(base, members, pairs)))
        if extra > 0:
            q = 1.0 / (1.0 + extra)
            for a, b in pairs:
                k = int(rng.geometric(q)) - 1
                if k == 0:
                    continue
                xa = np.setdiff1d(members[a], members[b], assume_unique=True)
                yb = np.setdiff1d(members[b], members[a], assume_unique=True)
                if len(xa) == 0 or len(yb) == 0:
                    continue
                src.append(rng.choice(xa, size=k))
                dst.append(rng.choice(yb, size=k))
    s_all = np.concatenate(src) if src else np.zeros(0, np.int64)
    d_all = np.concatenate(dst) if dst else np.zeros(0, np.int64)
    graph = Graph.from_edges(n, s_all, d_all)

    comms = [Community(i, mem, 0, _density(graph, mem)) for i, mem in enumerate(members) if len(mem)]
    truth = build(comms, n)
    nbr = np.zeros(len(members), dtype=np.int64)
    for a, b in pairs:
        nbr[a] += 1
        nbr[b] += 1
    nbr = nbr[[i for i, mem in enumerate(members) if len(mem)]]
    records = None
    if with_overlaps:
        e2 = _e2_ground_truth(graph, members, pairs)
        records = [OverlapRecord(a, b, tuple(shared_by_pair[a, b]), k)
                   for (a, b), k in zip(pairs, e2)]
    return Benchmark(graph, truth, records, nbr)


def _density(g: Graph, mem: np.ndarray) -> float:
    n = len(mem)
    if n < 2:
        return 0.0
    nbrs = np.concatenate([g.neighbors(v) for v in mem])
    return float(np.isin(nbrs, mem).sum()) / (n * (n - 1))


# -- scoring ------------------------------------------------------------------


@dataclass(frozen=True)
class ScoreReport:
    threshold: float
    truth_count: int
    detected_count: int
    recovery_rate: float
    mean_jaccard: float
    mean_f1: float
    f1: tuple[float, ...]
    missed: int
    spurious: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["f1"] = list(self.f1)
        return d


def _member_sets(cov) -> list[np.ndarray]:
    if isinstance(cov, Cover):
        return [c.members for c in cov.communities]
    return [np.unique(np.asarray(list(m), dtype=np.int64)) for m in cov]


def score(detected, truth, jaccard_threshold: float = 0.8) -> ScoreReport:
    """Greedy one-to-one matching by descending Jaccard similarity."""
    det = _member_sets(detected)
    tru = _member_sets(truth)
    index: dict[int, list[int]] = {}
    for t, mem in enumerate(tru):
        for v in mem.tolist():
            index.setdefault(v, []).append(t)
    cands = []
    for d, mem in enumerate(det):
        shared: dict[int, int] = {}
        for v in mem.tolist():
            for t in index.get(v, ()):
                shared[t] = shared.get(t, 0) + 1
        for t, s in shared.items():
            j = s / (len(mem) + len(tru[t]) - s)
            cands.append((-j, t, d, s))
    cands.sort()
    t_match: dict[int, tuple[int, float, int]] = {}
    used_d: set[int] = set()
    for negj, t, d, s in cands:
        if t in t_match or d in used_d:
            continue
        t_match[t] = (d, -negj, s)
        used_d.add(d)
    f1s, jac = [], []
    matched_t = 0
    matched_d = set()
    for t, mem in enumerate(tru):
        if t not in t_match:
            f1s.append(0.0)
            jac.append(0.0)
            continue
        d, j, s = t_match[t]
        prec, rec = s / len(det[d]), s / len(mem)
        f1s.append(2 * prec * rec / (prec + rec))
        jac.append(j)
        if j >= jaccard_threshold:
            matched_t += 1
            matched_d.add(d)
    T = len(tru)
    return ScoreReport(
        threshold=jaccard_threshold,
        truth_count=T,
        detected_count=len(det),
        recovery_rate=matched_t / T if T else 0.0,
        mean_jaccard=float(np.mean(jac)) if T else 0.0,
        mean_f1=float(np.mean(f1s)) if T else 0.0,
        f1=tuple(f1s),
        missed=T - matched_t,
        spurious=len(det) - len(matched_d),
    )
