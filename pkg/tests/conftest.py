import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from citemap.graph import WeightedGraph
from citemap.ingest import CitationRecord


def random_bipartite_records(rng, n_pages=20, n_dois=20, p=0.15, dup_rate=0.1):
    """Random citation records including occasional duplicates."""
    records = []
    for i in range(n_pages):
        for j in range(n_dois):
            if rng.random() < p:
                rec = CitationRecord(f"p{i:03d}", f"Page {i}", f"10.1000/d{j:03d}")
                records.append(rec)
                if rng.random() < dup_rate:
                    records.append(rec)
    return records


def random_weighted_graph(seed, max_nodes=200, max_weight=10):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_nodes))
    m = int(rng.integers(0, n * 3))
    ea = rng.integers(0, n, m)
    eb = rng.integers(0, n, m)
    keep = ea != eb
    ea, eb = ea[keep], eb[keep]
    lo, hi = np.minimum(ea, eb), np.maximum(ea, eb)
    uniq = np.unique(lo * n + hi)
    lo, hi = uniq // n, uniq % n
    w = rng.integers(1, max_weight, len(lo)).astype(np.int64)
    return WeightedGraph(
        kind="generic",
        nodes=[f"n{i:04d}" for i in range(n)],
        edge_a=lo.astype(np.int64),
        edge_b=hi.astype(np.int64),
        edge_w=w,
    )


def two_cliques_graph(k=5):
    """Two k-cliques joined by a single edge."""
    edges = []
    for base in (0, k):
        for i in range(k):
            for j in range(i + 1, k):
                edges.append((base + i, base + j))
    edges.append((0, k))
    a = np.array([e[0] for e in edges], dtype=np.int64)
    b = np.array([e[1] for e in edges], dtype=np.int64)
    return WeightedGraph(
        kind="generic",
        nodes=[f"n{i:02d}" for i in range(2 * k)],
        edge_a=a,
        edge_b=b,
        edge_w=np.ones(len(edges), dtype=np.int64),
    )


def planted_blocks_graph(seed, blocks=4, size=25, p_in=0.3, p_out=0.01):
    rng = np.random.default_rng(seed)
    n = blocks * size
    truth = np.repeat(np.arange(blocks), size)
    ea, eb = [], []
    for i in range(n):
        for j in range(i + 1, n):
            p = p_in if truth[i] == truth[j] else p_out
            if rng.random() < p:
                ea.append(i)
                eb.append(j)
    g = WeightedGraph(
        kind="generic",
        nodes=[f"n{i:03d}" for i in range(n)],
        edge_a=np.array(ea, dtype=np.int64),
        edge_b=np.array(eb, dtype=np.int64),
        edge_w=np.ones(len(ea), dtype=np.int64),
    )
    return g, truth


@pytest.fixture
def rng():
    import random

    return random.Random(12345)
