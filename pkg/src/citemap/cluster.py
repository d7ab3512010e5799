"""Leiden community detection with CPM / resolution-scaled modularity,
resolution sweeps, and elbow-based resolution selection.

The algorithm is the three-phase loop (queue-based local moving, refinement
from singletons within communities, aggregation) iterated until the
aggregate graph stops shrinking. All randomness is a counter-based per-node
key stream derived from (seed, node index): processing order, candidate scan
order and tie-breaking depend only on those keys and the graph, so results
are deterministic for a fixed (graph, gamma, objective, seed), independent
of thread count, and equivariant under node relabeling when the same key
mapping is carried along.

Quality functions (edge weights count, self-loop free input):

* cpm:            sum_c [ W_c - gamma * n_c (n_c - 1) / 2 ]
* rb_modularity:  sum_c [ W_c - gamma * K_c^2 / (4m) ]

with W_c the intra-cluster weight, n_c the cluster size, K_c the summed
weighted degrees and m the total edge weight.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

import numpy as np

from . import _core
from ._core import OBJ_CPM, OBJ_RB
from .errors import (
    DegenerateCurveWarning,
    EmptyInputError,
    NonPositiveGammaError,
    PartitionMismatchError,
    SchemaMismatch,
)
from .graph import WeightedGraph

OBJECTIVES = ("cpm", "rb_modularity")

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)


def node_keys(seed: int, n: int) -> np.ndarray:
    """Counter-based per-node pseudorandom keys (SplitMix64 stream).

    Key i depends only on (seed, i), never on processing history, so any
    sharding or batching of nodes sees the same stream.
    """
    with np.errstate(over="ignore"):
        z = _U64(seed & 0xFFFFFFFFFFFFFFFF) + np.arange(1, n + 1, dtype=_U64) * _GOLDEN
        z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
        return z ^ (z >> _U64(31))


@dataclass
class Partition:
    """Node -> cluster assignment with quality metadata.

    Labels are dense integers 0..k-1, each used at least once, assigned in
    order of first appearance over the node list. Every cluster induces a
    connected subgraph of the input graph.
    """

    nodes: list[str]
    labels: np.ndarray  # int64, aligned with nodes
    gamma: float
    objective: str
    seed: int
    quality_value: float

    @property
    def num_clusters(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def sizes(self) -> np.ndarray:
        """Cluster sizes indexed by label."""
        return np.bincount(self.labels, minlength=self.num_clusters).astype(np.int64)

    def as_dict(self) -> dict[str, int]:
        return {node: int(lab) for node, lab in zip(self.nodes, self.labels)}

    def clusters(self) -> list[list[str]]:
        out: list[list[str]] = [[] for _ in range(self.num_clusters)]
        for node, lab in zip(self.nodes, self.labels):
            out[lab].append(node)
        return out


@dataclass
class SweepCurve:
    """(gamma, cluster_count) points with strictly increasing gammas."""

    points: list[tuple[float, int]]

    def __post_init__(self):
        if len(self.points) < 3:
            raise SchemaMismatch("sweep curve needs at least 3 points")
        gammas = [g for g, _ in self.points]
        if any(b <= a for a, b in zip(gammas, gammas[1:])):
            raise SchemaMismatch("sweep gammas must be strictly increasing")

    @property
    def gammas(self) -> list[float]:
        return [g for g, _ in self.points]

    @property
    def cluster_counts(self) -> list[int]:
        return [c for _, c in self.points]


def _objective_code(objective: str) -> int:
    if objective == "cpm":
        return OBJ_CPM
    if objective == "rb_modularity":
        return OBJ_RB
    raise SchemaMismatch(f"unknown objective {objective!r}; expected {OBJECTIVES}")


def _as_labels(graph: WeightedGraph, assignment) -> np.ndarray:
    if isinstance(assignment, Partition):
        return np.asarray(assignment.labels, dtype=np.int64)
    if isinstance(assignment, Mapping):
        try:
            return np.fromiter(
                (assignment[node] for node in graph.nodes),
                dtype=np.int64,
                count=graph.num_nodes,
            )
        except KeyError as exc:
            raise PartitionMismatchError(f"node {exc.args[0]!r} has no assignment")
    labels = np.asarray(assignment, dtype=np.int64)
    if len(labels) != graph.num_nodes:
        raise PartitionMismatchError(
            f"assignment covers {len(labels)} nodes, graph has {graph.num_nodes}"
        )
    return labels


def quality(
    graph: WeightedGraph,
    assignment,
    gamma: float,
    objective: str = "cpm",
    use_weights: bool = True,
) -> float:
    """Evaluate a partition's quality on a graph (see module formulas).

    ``use_weights=False`` treats every edge as weight 1 (ablation mode).
    """
    labels = _as_labels(graph, assignment)
    code = _objective_code(objective)
    w = (
        graph.edge_w.astype(np.float64)
        if use_weights
        else np.ones(graph.num_edges, dtype=np.float64)
    )
    if graph.num_edges:
        same = labels[graph.edge_a] == labels[graph.edge_b]
        intra = float(np.sum(w[same]))
    else:
        intra = 0.0
    if code == OBJ_CPM:
        sizes = np.bincount(labels).astype(np.int64)
        pairs = int(np.sum(sizes * (sizes - 1))) // 2
        return intra - gamma * float(pairs)
    m = float(np.sum(w))
    if m == 0.0:
        return 0.0
    k = np.bincount(graph.edge_a, weights=w, minlength=graph.num_nodes)
    k += np.bincount(graph.edge_b, weights=w, minlength=graph.num_nodes)
    big_k = np.bincount(labels, weights=k)
    return intra - gamma * float(np.sum(big_k * big_k)) / (4.0 * m)


def _csr_key_sorted(
    n: int, a: np.ndarray, b: np.ndarray, w: np.ndarray, keys: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])
    ww = np.concatenate([w, w]).astype(np.float64)
    order = np.lexsort((keys[dst], src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(np.bincount(src, minlength=n))
    return indptr, dst[order].astype(np.int64), ww[order]


def _canonical_labels(raw: np.ndarray) -> np.ndarray:
    """Relabel to dense 0..k-1 by order of first appearance."""
    uniq, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq), dtype=np.int64)
    return rank[inverse]


def _compact_by_min_key(
    labels: np.ndarray, keys: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Compact arbitrary labels to 0..k-1 ranked by min member key.

    Returns (new label per element, min key per new label). Ranking by key
    keeps aggregate node order equivariant under input relabeling.
    """
    uniq, inverse = np.unique(labels, return_inverse=True)
    min_key = np.full(len(uniq), np.iinfo(np.uint64).max, dtype=np.uint64)
    np.minimum.at(min_key, inverse, keys)
    order = np.lexsort((uniq, min_key))
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq), dtype=np.int64)
    return rank[inverse], min_key[order]


def _split_disconnected(
    n: int, a: np.ndarray, b: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    """Split every cluster into its connected components.

    Never decreases CPM or RB quality: intra weight is unchanged while the
    size/degree penalty is superadditive under splitting.
    """
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    same = labels[a] == labels[b]
    for u, v in zip(a[same].tolist(), b[same].tolist()):
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[rv] = ru

    roots = np.fromiter((find(i) for i in range(n)), dtype=np.int64, count=n)
    combined = labels.astype(np.int64) * np.int64(n + 1) + roots
    return _canonical_labels(combined)


def leiden_labels(
    n: int,
    edge_a: np.ndarray,
    edge_b: np.ndarray,
    edge_w: np.ndarray,
    gamma: float,
    objective: str = "cpm",
    seed: int = 0,
    max_iterations: int = 100,
    keys: np.ndarray | None = None,
) -> np.ndarray:
    """Core Leiden loop on index arrays; returns canonical labels.

    ``keys`` overrides the per-node random stream (used by the relabeling
    equivariance tests); by default it is derived from the seed.
    """
    if gamma <= 0:
        raise NonPositiveGammaError(f"gamma must be > 0, got {gamma}")
    code = _objective_code(objective)
    if n == 0:
        return np.empty(0, dtype=np.int64)

    keys = node_keys(seed, n) if keys is None else np.asarray(keys, dtype=np.uint64)
    a = np.asarray(edge_a, dtype=np.int64)
    b = np.asarray(edge_b, dtype=np.int64)
    w = np.asarray(edge_w, dtype=np.float64)
    node_size = np.ones(n, dtype=np.int64)
    self_w = np.zeros(n, dtype=np.float64)
    total_m = float(np.sum(w))
    two_m = 2.0 * total_m if total_m > 0.0 else 1.0

    flat = np.arange(n, dtype=np.int64)  # original node -> current level node
    n_level = n
    membership = np.arange(n_level, dtype=np.int64)

    for _ in range(max_iterations):
        indptr, indices, weights = _csr_key_sorted(n_level, a, b, w, keys)
        strength = np.bincount(
            np.concatenate([a, b]),
            weights=np.concatenate([w, w]),
            minlength=n_level,
        ) + 2.0 * self_w
        comm_size = np.zeros(n_level, dtype=np.int64)
        np.add.at(comm_size, membership, node_size)
        comm_strength = np.zeros(n_level, dtype=np.float64)
        np.add.at(comm_strength, membership, strength)
        order = np.argsort(keys, kind="stable").astype(np.int64)

        _core.kernels.local_move(
            indptr, indices, weights, node_size, strength,
            membership, comm_size, comm_strength, order,
            float(gamma), code, two_m,
        )

        if len(np.unique(membership)) == n_level:
            break  # every community is a single node; nothing to aggregate

        # w(v, S\v) for the refinement well-connectedness checks.
        src = np.concatenate([a, b])
        dst = np.concatenate([b, a])
        ww2 = np.concatenate([w, w])
        same = membership[src] == membership[dst]
        ext_node = np.bincount(src[same], weights=ww2[same], minlength=n_level)
        comm_total_size = np.zeros(n_level, dtype=np.int64)
        np.add.at(comm_total_size, membership, node_size)
        comm_total_strength = np.zeros(n_level, dtype=np.float64)
        np.add.at(comm_total_strength, membership, strength)

        refined = _core.kernels.refine(
            indptr, indices, weights, node_size, strength,
            membership, comm_total_size, comm_total_strength,
            ext_node.astype(np.float64), order,
            float(gamma), code, two_m,
        )
        refined = np.asarray(refined, dtype=np.int64)

        new_id, new_keys = _compact_by_min_key(refined, keys)
        n_new = len(new_keys)
        if n_new == n_level:
            break  # refinement kept all singletons; aggregation is identity

        # Aggregate nodes: sizes, self weights, strengths recompute next level.
        new_size = np.zeros(n_new, dtype=np.int64)
        np.add.at(new_size, new_id, node_size)
        new_self = np.zeros(n_new, dtype=np.float64)
        np.add.at(new_self, new_id, self_w)
        ra, rb = new_id[a], new_id[b]
        intra = ra == rb
        if intra.any():
            np.add.at(new_self, ra[intra], w[intra])
        lo = np.minimum(ra[~intra], rb[~intra])
        hi = np.maximum(ra[~intra], rb[~intra])
        cw = w[~intra]
        if len(lo):
            eorder = np.lexsort((hi, lo))
            lo, hi, cw = lo[eorder], hi[eorder], cw[eorder]
            boundary = np.ones(len(lo), dtype=bool)
            boundary[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
            starts = np.flatnonzero(boundary)
            cw = np.add.reduceat(cw, starts)
            lo, hi = lo[starts], hi[starts]

        # Initial communities on the aggregate graph come from the unrefined
        # partition; refined blocks of one community start out together.
        parent = np.zeros(n_new, dtype=np.int64)
        parent[new_id] = membership
        new_membership, _ = _compact_by_min_key(parent, new_keys)

        flat = new_id[flat]
        a, b, w = lo, hi, cw
        node_size, self_w, keys = new_size, new_self, new_keys
        n_level = n_new
        membership = new_membership

    final = _canonical_labels(membership[flat])
    final = _split_disconnected(
        n, np.asarray(edge_a, dtype=np.int64), np.asarray(edge_b, dtype=np.int64), final
    )
    return final


def leiden(
    graph: WeightedGraph,
    gamma: float,
    objective: str = "cpm",
    seed: int = 0,
    max_iterations: int = 100,
    threads: int = 1,
    keys: np.ndarray | None = None,
    use_weights: bool = True,
) -> Partition:
    """Run Leiden on a weighted graph at one resolution.

    The returned partition's quality is at least the all-singleton
    partition's, every cluster is connected, and identical (graph, gamma,
    objective, seed) give identical assignments regardless of ``threads``
    (the move phases are sequential by construction; threads only parallelize
    across sweep points).
    """
    del threads  # deterministic core is sequential; kept for API symmetry
    if graph.num_nodes < 1:
        raise EmptyInputError("leiden requires at least one node")
    edge_w = (
        graph.edge_w if use_weights else np.ones(graph.num_edges, dtype=np.int64)
    )
    labels = leiden_labels(
        graph.num_nodes, graph.edge_a, graph.edge_b, edge_w,
        gamma, objective, seed, max_iterations, keys,
    )
    q = quality(graph, labels, gamma, objective, use_weights)
    return Partition(
        nodes=list(graph.nodes),
        labels=labels,
        gamma=float(gamma),
        objective=objective,
        seed=int(seed),
        quality_value=q,
    )


def sweep(
    graph: WeightedGraph,
    gamma_grid: Sequence[float],
    objective: str = "cpm",
    seed: int = 0,
    max_iterations: int = 100,
    threads: int = 1,
    use_weights: bool = True,
) -> tuple[SweepCurve, list[Partition]]:
    """One Leiden run per gamma; sweep points are independent, so they can
    run in parallel without affecting results."""
    grid = [float(g) for g in gamma_grid]
    if len(grid) < 3 or any(y <= x for x, y in zip(grid, grid[1:])):
        raise SchemaMismatch("gamma grid must be strictly increasing with >= 3 values")

    def run(g: float) -> Partition:
        return leiden(graph, g, objective, seed, max_iterations, use_weights=use_weights)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partitions = list(pool.map(run, grid))
    else:
        partitions = [run(g) for g in grid]
    curve = SweepCurve(points=[(g, p.num_clusters) for g, p in zip(grid, partitions)])
    return curve, partitions


def elbow(curve: SweepCurve) -> float:
    """Pick the sweep gamma at the knee of the (log gamma, log clusters)
    curve: the grid point with maximum perpendicular distance to the chord
    joining the endpoints. Ties break toward smaller gamma. A collinear
    curve (within 1e-12) warns and falls back to the middle grid point."""
    x = np.log10(np.array(curve.gammas, dtype=np.float64))
    y = np.log10(np.array(curve.cluster_counts, dtype=np.float64))
    dx, dy = x[-1] - x[0], y[-1] - y[0]
    norm = float(np.hypot(dx, dy))
    if norm == 0.0:
        warnings.warn("sweep endpoints coincide", DegenerateCurveWarning, stacklevel=2)
        return curve.gammas[len(curve.points) // 2]
    dist = np.abs(dy * (x - x[0]) - dx * (y - y[0])) / norm
    if float(dist.max()) <= 1e-12:
        warnings.warn(
            "sweep curve is collinear; returning the middle grid point",
            DegenerateCurveWarning,
            stacklevel=2,
        )
        return curve.gammas[len(curve.points) // 2]
    return curve.gammas[int(np.argmax(dist))]


def write_partition(partition: Partition, path: str) -> None:
    """Write ``node_id\\tcluster_id`` sorted by node_id, with header comments
    recording gamma, objective, seed and quality."""
    order = np.argsort(np.array(partition.nodes, dtype=object), kind="stable")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# gamma = {partition.gamma!r}\n")
        fh.write(f"# objective = {partition.objective}\n")
        fh.write(f"# seed = {partition.seed}\n")
        fh.write(f"# quality = {partition.quality_value!r}\n")
        fh.write("node_id\tcluster_id\n")
        for i in order:
            fh.write(f"{partition.nodes[i]}\t{int(partition.labels[i])}\n")


def read_partition(path: str | IO[str]) -> Partition:
    """Read a partition file written by :func:`write_partition`."""
    meta: dict[str, str] = {}
    nodes: list[str] = []
    labels: list[int] = []
    fh = open(path, "r", encoding="utf-8") if isinstance(path, str) else path
    try:
        header_seen = False
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                meta[key.strip()] = value.strip()
                continue
            if not header_seen:
                if line.split("\t") != ["node_id", "cluster_id"]:
                    raise SchemaMismatch(f"unexpected partition header: {line!r}")
                header_seen = True
                continue
            node, _, label = line.partition("\t")
            nodes.append(node)
            labels.append(int(label))
    finally:
        if isinstance(path, str):
            fh.close()
    return Partition(
        nodes=nodes,
        labels=np.array(labels, dtype=np.int64),
        gamma=float(meta.get("gamma", "nan")),
        objective=meta.get("objective", "cpm"),
        seed=int(meta.get("seed", "0")),
        quality_value=float(meta.get("quality", "nan")),
    )


def partition_for_graph(partition: Partition, graph: WeightedGraph) -> np.ndarray:
    """Align a (possibly file-loaded) partition to a graph's node order.

    Raises:
        PartitionMismatchError: when any graph node lacks an assignment.
    """
    assign = {node: int(lab) for node, lab in zip(partition.nodes, partition.labels)}
    missing = [node for node in graph.nodes if node not in assign]
    if missing:
        raise PartitionMismatchError(
            f"{len(missing)} node(s) lack an assignment (first: {missing[0]!r})"
        )
    return np.fromiter(
        (assign[node] for node in graph.nodes), dtype=np.int64, count=graph.num_nodes
    )


def write_sweep(curve: SweepCurve, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("gamma\tcluster_count\n")
        for g, c in curve.points:
            fh.write(f"{g!r}\t{c}\n")


def read_sweep(path: str) -> SweepCurve:
    points: list[tuple[float, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.split("\t") != ["gamma", "cluster_count"]:
            raise SchemaMismatch(f"unexpected sweep header: {header!r}")
        for line in fh:
            g, c = line.rstrip("\n").split("\t")
            points.append((float(g), int(c)))
    return SweepCurve(points=points)
