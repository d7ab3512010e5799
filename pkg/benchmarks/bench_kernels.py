#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the two hot paths on synthetic corpora of increasing size: bipartite
pair-counting projection and full Leiden clustering. Results must be
identical between backends (asserted here); only the wall time differs.

    python benchmarks/bench_kernels.py [--sizes 2000 10000 50000]
"""

import argparse
import sys
import time

import numpy as np

import citemap._core as core
from citemap.cluster import leiden_labels
from citemap.graph import build_bipartite, project_coupling
from citemap.ingest import CitationRecord


def synthetic_records(n_citations: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    n_pages = max(2, n_citations // 5)
    n_works = max(2, n_citations // 4)
    blocks = 8
    records = []
    for _ in range(n_citations):
        page = int(rng.integers(0, n_pages))
        block = page * blocks // n_pages
        lo = block * n_works // blocks
        hi = (block + 1) * n_works // blocks
        if rng.random() < 0.85:
            work = int(rng.integers(lo, max(lo + 1, hi)))
        else:
            work = int(rng.integers(0, n_works))
        records.append(
            CitationRecord(f"p{page:07d}", f"Page {page}", f"10.5000/w{work:07d}")
        )
    return records


def time_backend(name: str, fn):
    core.set_backend(name)
    start = time.perf_counter()
    result = fn()
    return time.perf_counter() - start, result


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[2000, 10000, 50000])
    ap.add_argument("--gamma", type=float, default=0.05)
    args = ap.parse_args(argv)

    backends = core.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; run `pip install -e .` first", file=sys.stderr)

    header = f"{'citations':>10} {'task':<12}" + "".join(
        f"{name:>12}" for name in backends
    )
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)

    for size in args.sizes:
        records = synthetic_records(size)
        bip = build_bipartite(records)

        times = {}
        projections = {}
        for name in backends:
            times[name], projections[name] = time_backend(
                name, lambda: project_coupling(bip)
            )
        first = projections[backends[0]]
        for name in backends[1:]:
            assert np.array_equal(first.edge_w, projections[name].edge_w)
        row = f"{size:>10} {'projection':<12}" + "".join(
            f"{times[name]:>11.3f}s" for name in backends
        )
        if len(backends) == 2:
            row += f"{times['python'] / max(times['cython'], 1e-9):>9.1f}x"
        print(row)

        graph = first
        times = {}
        labels = {}
        for name in backends:
            times[name], labels[name] = time_backend(
                name,
                lambda: leiden_labels(
                    graph.num_nodes, graph.edge_a, graph.edge_b, graph.edge_w,
                    args.gamma, "cpm", seed=0,
                ),
            )
        for name in backends[1:]:
            assert np.array_equal(labels[backends[0]], labels[name])
        row = f"{size:>10} {'leiden':<12}" + "".join(
            f"{times[name]:>11.3f}s" for name in backends
        )
        if len(backends) == 2:
            row += f"{times['python'] / max(times['cython'], 1e-9):>9.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
