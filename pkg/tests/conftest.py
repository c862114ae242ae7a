from __future__ import annotations

import sys
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from overlapcomm import synth  # noqa: E402
from overlapcomm.cover import Community, build  # noqa: E402
from overlapcomm.graph import Graph  # noqa: E402

SEEDS = range(20)

# one PASS/FAIL line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


@dataclass
class Instance:
    graph: Graph
    cover: object
    adj: list
    comms: list


def graph_from_edges(n, edges) -> Graph:
    edges = list(edges)
    src = [u for u, _ in edges]
    dst = [w for _, w in edges]
    return Graph.from_edges(n, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64))


def clique_edges(vertices):
    vs = list(vertices)
    return [(a, b) for i, a in enumerate(vs) for b in vs[i + 1:]]


def random_instance(seed: int, n_max: int = 60) -> Instance:
    """Random graph on at most ``n_max`` vertices with a random overlapping cover.

    Communities are seeded around random vertices so that covered vertices,
    overlaps and uncovered vertices all occur.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(12, n_max + 1))
    p = float(rng.uniform(0.05, 0.3))
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    adj = oracles.adjacency(n, edges)
    comms = []
    for _ in range(int(rng.integers(2, 9))):
        size = int(rng.integers(2, max(3, n // 3)))
        comms.append(set(rng.choice(n, size=size, replace=False).tolist()))
    cov = build([Community(i, sorted(c)) for i, c in enumerate(comms)], n)
    return Instance(graph_from_edges(n, edges), cov, adj, comms)


@pytest.fixture(params=list(SEEDS), ids=lambda s: f"seed{s}")
def instance(request) -> Instance:
    return random_instance(request.param)


@lru_cache(maxsize=1)
def planted_default():
    return synth.generate(synth.PlantedSpec())


@lru_cache(maxsize=1)
def planted_detection():
    from overlapcomm.detect import run_detection
    return run_detection(planted_default().graph)


@pytest.fixture(scope="session")
def planted():
    return planted_default()
