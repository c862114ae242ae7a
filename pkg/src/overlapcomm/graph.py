"""Undirected simple graphs in CSR form, edge-list ingestion and basic statistics."""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable

import numpy as np

from overlapcomm import _kernels

CACHE_MAGIC = b"OVCGRAPH"
CACHE_VERSION = 1


class EdgeListError(ValueError):
    """Malformed edge-list input."""

    def __init__(self, lineno: int, line: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {line!r}")
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph.

    ``indices[indptr[v]:indptr[v + 1]]`` is the strictly increasing neighbor list
    of dense vertex ``v``. ``labels[v]`` is the original id of ``v``.
    """

    indptr: np.ndarray
    indices: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        for arr in (self.indptr, self.indices, self.labels):
            arr.flags.writeable = False

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    @property
    def m(self) -> int:
        return int(self.indptr[-1]) // 2

    def degree(self, v: int | None = None):
        if v is None:
            return np.diff(self.indptr)
        return int(self.indptr[v + 1] - self.indptr[v])

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < len(nb) and nb[i] == v)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Both endpoint arrays of every edge once, with ``u < v``, in sorted order."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        dst = self.indices.astype(np.int64)
        keep = src < dst
        return src[keep], dst[keep]

    def dense_ids(self, original: Iterable[int]) -> np.ndarray:
        """Translate original vertex ids to dense ids; unknown ids raise KeyError."""
        orig = np.asarray(list(original), dtype=np.int64)
        pos = np.searchsorted(self.labels, orig)
        pos_c = np.minimum(pos, max(self.n - 1, 0))
        if self.n == 0 or np.any(self.labels[pos_c] != orig):
            missing = orig[(self.n == 0) | (self.labels[pos_c] != orig)] if self.n else orig
            raise KeyError(f"vertex ids not in graph: {missing[:5].tolist()}")
        return pos.astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None

    @classmethod
    def from_edges(cls, n: int, src, dst, labels=None) -> "Graph":
        """Build from dense endpoint arrays; drops self-loops and duplicates."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.shape != dst.shape:
            raise ValueError("endpoint arrays differ in length")
        if len(src) and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError("edge endpoint out of range")
        keep = src != dst
        a = np.concatenate([src[keep], dst[keep]])
        b = np.concatenate([dst[keep], src[keep]])
        keys = np.unique(a * np.int64(n) + b) if len(a) else np.zeros(0, np.int64)
        rows = keys // n if n else keys
        cols = keys % n if n else keys
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        idx_dtype = np.int32 if n < 2**31 else np.int64
        if labels is None:
            labels = np.arange(n, dtype=np.int64)
        return cls(indptr, cols.astype(idx_dtype), np.asarray(labels, dtype=np.int64))


@dataclass(frozen=True)
class GraphStats:
    n: int
    m: int
    mean_degree: float
    mean_local_clustering: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "mean_degree": self.mean_degree,
            "mean_local_clustering": self.mean_local_clustering,
        }


@dataclass(frozen=True)
class EgoView:
    """Induced subgraph on N(v); ``local_to_global[i]`` is the dense id of local vertex i."""

    ego: int
    graph: Graph
    local_to_global: np.ndarray

    def global_id(self, i: int) -> int:
        return int(self.local_to_global[i])

    def local_id(self, v: int) -> int:
        i = int(np.searchsorted(self.local_to_global, v))
        if i >= len(self.local_to_global) or self.local_to_global[i] != v:
            raise KeyError(v)
        return i


def _open_bytes(source) -> BinaryIO:
    if isinstance(source, (str, os.PathLike)):
        return open(source, "rb")
    if isinstance(source, bytes):
        return io.BytesIO(source)
    return source


def _parse_pairs(stream: BinaryIO) -> tuple[np.ndarray, np.ndarray]:
    src: list[int] = []
    dst: list[int] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith(b"#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListError(lineno, raw.decode("utf-8", "replace").rstrip("\r\n"),
                                "expected two integer tokens")
        try:
            src.append(int(parts[0]))
            dst.append(int(parts[1]))
        except ValueError:
            raise EdgeListError(lineno, raw.decode("utf-8", "replace").rstrip("\r\n"),
                                "non-integer vertex id") from None
    return np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64)


def load_edge_list(source, mutual_only: bool = False) -> Graph:
    """Read a SNAP-style edge list (path, bytes or binary stream).

    Every id mentioned on a data line becomes a vertex, even when all of its
    lines are self-loops or non-reciprocated arcs. Ids are densified in
    ascending order of the original ids.
    """
    stream = _open_bytes(source)
    try:
        src, dst = _parse_pairs(stream)
    finally:
        if stream is not source:
            stream.close()
    labels = np.unique(np.concatenate([src, dst]))
    n = len(labels)
    s = np.searchsorted(labels, src)
    d = np.searchsorted(labels, dst)
    if mutual_only:
        keep = s != d
        s, d = s[keep], d[keep]
        fwd = np.unique(s * np.int64(n) + d)
        rev = d * np.int64(n) + s
        both = np.isin(rev, fwd) & (s < d)
        s, d = s[both], d[both]
    return Graph.from_edges(n, s, d, labels)


def write_edge_list(g: Graph, target, header: str | None = None) -> None:
    """Write ``g`` as ``u v`` lines of original ids, each edge once, sorted."""
    u, v = g.edges()
    lines = []
    if header:
        lines.append(f"# {header}\n")
    lu, lv = g.labels[u], g.labels[v]
    lines.extend(f"{a} {b}\n" for a, b in zip(lu.tolist(), lv.tolist()))
    data = "".join(lines).encode("utf-8")
    if isinstance(target, (str, os.PathLike)):
        with open(target, "wb") as fh:
            fh.write(data)
    else:
        target.write(data)


def save_cache(g: Graph, path) -> None:
    """Binary cache: magic, version, sizes, then labels / indptr / indices."""
    wide = g.indices.dtype == np.int64
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<IIQQ", CACHE_VERSION, int(wide), g.n, len(g.indices)))
        fh.write(g.labels.astype("<i8").tobytes())
        fh.write(g.indptr.astype("<i8").tobytes())
        fh.write(g.indices.astype("<i8" if wide else "<i4").tobytes())


def load_cache(path) -> Graph:
    with open(path, "rb") as fh:
        magic = fh.read(len(CACHE_MAGIC))
        if magic != CACHE_MAGIC:
            raise ValueError(f"{path}: not a graph cache")
        version, wide, n, nnz = struct.unpack("<IIQQ", fh.read(24))
        if version != CACHE_VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        labels = np.frombuffer(fh.read(8 * n), dtype="<i8").astype(np.int64)
        indptr = np.frombuffer(fh.read(8 * (n + 1)), dtype="<i8").astype(np.int64)
        idt = "<i8" if wide else "<i4"
        indices = np.frombuffer(fh.read(np.dtype(idt).itemsize * nnz), dtype=idt)
        indices = indices.astype(np.int64 if wide else np.int32)
    if len(indices) != nnz or len(indptr) != n + 1:
        raise ValueError(f"{path}: truncated graph cache")
    return Graph(indptr, indices, labels)


def is_cache(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(len(CACHE_MAGIC)) == CACHE_MAGIC


def load_graph(path, mutual_only: bool = False) -> Graph:
    """Load either a binary cache or a text edge list."""
    if is_cache(path):
        return load_cache(path)
    return load_edge_list(path, mutual_only=mutual_only)


def triangles(g: Graph) -> np.ndarray:
    """Number of triangles through each vertex."""
    return _kernels.triangle_counts(g.indptr, g.indices.astype(np.int64))


def local_clustering(g: Graph) -> np.ndarray:
    deg = g.degree().astype(np.float64)
    tri = triangles(g).astype(np.float64)
    out = np.zeros(g.n)
    ok = deg >= 2
    out[ok] = 2.0 * tri[ok] / (deg[ok] * (deg[ok] - 1.0))
    return out


def stats(g: Graph) -> GraphStats:
    n, m = g.n, g.m
    if n == 0:
        return GraphStats(0, 0, 0.0, 0.0)
    return GraphStats(n, m, 2.0 * m / n, float(local_clustering(g).mean()))


def ego_subgraph(g: Graph, v: int) -> EgoView:
    if not 0 <= v < g.n:
        raise IndexError(f"vertex {v} out of range for n={g.n}")
    nb = g.neighbors(v).astype(np.int64)
    k = len(nb)
    src, dst = [], []
    for i, u in enumerate(nb):
        common = np.intersect1d(g.neighbors(u), nb, assume_unique=True)
        common = common[common > u]
        src.append(np.full(len(common), i, dtype=np.int64))
        dst.append(np.searchsorted(nb, common))
    if src:
        s, d = np.concatenate(src), np.concatenate(dst)
    else:
        s = d = np.zeros(0, np.int64)
    return EgoView(v, Graph.from_edges(k, s, d, labels=g.labels[nb]), nb)
