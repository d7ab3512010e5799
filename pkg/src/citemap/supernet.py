"""Coarsen a clustered network into a supernetwork of clusters.

Supernodes carry the member count and the summed within-cluster edge weight
(never self-loop edges); superedges sum the cross-cluster weights, so the
conservation identities hold exactly in integer arithmetic:

* sum of supernode sizes = node count of the underlying network
* sum of superedge weights + sum of intra weights = total underlying weight

Cluster metadata mixes are fractional-counting sums over member nodes, and
supernetworks can be trimmed at the cluster size threshold reaching a target
cumulative share of underlying nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .cluster import Partition
from .errors import PartitionMismatchError
from .graph import WeightedGraph
from .ingest import MembershipTable


@dataclass
class Supernetwork:
    """Network of clusters: supernode sizes/intra weights plus superedges."""

    kind: str
    cluster_ids: np.ndarray  # int64, ascending
    sizes: np.ndarray  # int64, aligned with cluster_ids
    intra_weights: np.ndarray  # int64, aligned with cluster_ids
    edge_a: np.ndarray  # int64 cluster ids, edge_a < edge_b, lexsorted
    edge_b: np.ndarray
    edge_w: np.ndarray  # int64
    metadata_mix: dict[int, dict[str, float]] = field(default_factory=dict)

    @property
    def num_clusters(self) -> int:
        return len(self.cluster_ids)

    @property
    def num_edges(self) -> int:
        return len(self.edge_a)

    def size_of(self) -> dict[int, int]:
        return {int(c): int(s) for c, s in zip(self.cluster_ids, self.sizes)}


def _labels_for(graph: WeightedGraph, partition) -> np.ndarray:
    if isinstance(partition, Partition):
        if partition.nodes == graph.nodes:
            return np.asarray(partition.labels, dtype=np.int64)
        from .cluster import partition_for_graph

        return partition_for_graph(partition, graph)
    labels = np.asarray(partition, dtype=np.int64)
    if len(labels) != graph.num_nodes:
        raise PartitionMismatchError(
            f"partition covers {len(labels)} nodes, graph has {graph.num_nodes}"
        )
    return labels


def coarsen(graph: WeightedGraph, partition) -> Supernetwork:
    """Aggregate a partitioned graph into its supernetwork.

    Raises:
        PartitionMismatchError: when a node lacks an assignment.
    """
    labels = _labels_for(graph, partition)
    if len(labels) and labels.min() < 0:
        raise PartitionMismatchError("negative cluster id in partition")
    n_clusters = int(labels.max()) + 1 if len(labels) else 0
    sizes = np.bincount(labels, minlength=n_clusters).astype(np.int64)

    intra = np.zeros(n_clusters, dtype=np.int64)
    if graph.num_edges:
        ca = labels[graph.edge_a]
        cb = labels[graph.edge_b]
        same = ca == cb
        np.add.at(intra, ca[same], graph.edge_w[same])
        lo = np.minimum(ca[~same], cb[~same])
        hi = np.maximum(ca[~same], cb[~same])
        cw = graph.edge_w[~same]
    else:
        lo = hi = cw = np.empty(0, dtype=np.int64)
    if len(lo):
        order = np.lexsort((hi, lo))
        lo, hi, cw = lo[order], hi[order], cw[order]
        boundary = np.ones(len(lo), dtype=bool)
        boundary[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
        starts = np.flatnonzero(boundary)
        cw = np.add.reduceat(cw, starts)
        lo, hi = lo[starts], hi[starts]

    return Supernetwork(
        kind=graph.kind,
        cluster_ids=np.arange(n_clusters, dtype=np.int64),
        sizes=sizes,
        intra_weights=intra,
        edge_a=lo.astype(np.int64),
        edge_b=hi.astype(np.int64),
        edge_w=cw.astype(np.int64),
    )


def aggregate_metadata(
    graph: WeightedGraph, partition, memberships: MembershipTable
) -> dict[int, dict[str, float]]:
    """Fractional category mix per cluster: sum of member node weights.

    Nodes unknown to the membership table count as Missing, so each
    cluster's mix sums to its size.
    """
    labels = _labels_for(graph, partition)
    mixes: dict[int, dict[str, float]] = {}
    for node, cluster in zip(graph.nodes, labels):
        mix = mixes.setdefault(int(cluster), {})
        for category, weight in memberships.weights_or_missing(node).items():
            mix[category] = mix.get(category, 0.0) + weight
    return {c: dict(sorted(mix.items())) for c, mix in sorted(mixes.items())}


def cumulative_share_curve(sizes) -> list[tuple[int, float]]:
    """(cluster size threshold, cumulative node share) points, clusters
    ordered largest first, one point per distinct size."""
    if isinstance(sizes, Partition):
        sizes = sizes.sizes()
    sizes = sorted((int(s) for s in sizes), reverse=True)
    if not sizes:
        return []
    total = sum(sizes)
    curve: list[tuple[int, float]] = []
    running = 0
    for i, s in enumerate(sizes):
        running += s
        last_of_size = i + 1 == len(sizes) or sizes[i + 1] != s
        if last_of_size:
            curve.append((s, running / total))
    return curve


def share_threshold(sizes, target_share: float) -> int:
    """Size of the smallest cluster in the minimal largest-first prefix whose
    cumulative node share reaches ``target_share``."""
    if isinstance(sizes, Partition):
        sizes = sizes.sizes()
    ordered = sorted((int(s) for s in sizes), reverse=True)
    if not ordered:
        raise PartitionMismatchError("no clusters to threshold")
    if not 0.0 < target_share <= 1.0:
        raise ValueError(f"target_share must be in (0, 1], got {target_share}")
    total = sum(ordered)
    running = 0
    for s in ordered:
        running += s
        if running >= target_share * total:
            return s
    return ordered[-1]


def trim(
    supernet: Supernetwork, target_share: float = 0.7
) -> tuple[int, Supernetwork]:
    """Remove clusters strictly below the share threshold, with their edges.

    Equal-size clusters at the boundary are all kept (removal is
    strict-below). Returns (threshold, trimmed supernetwork).
    """
    threshold = share_threshold(supernet.sizes, target_share)
    keep = supernet.sizes >= threshold
    kept_ids = supernet.cluster_ids[keep]
    kept_set = set(int(c) for c in kept_ids)
    edge_keep = np.isin(supernet.edge_a, kept_ids) & np.isin(
        supernet.edge_b, kept_ids
    )
    return threshold, Supernetwork(
        kind=supernet.kind,
        cluster_ids=kept_ids,
        sizes=supernet.sizes[keep],
        intra_weights=supernet.intra_weights[keep],
        edge_a=supernet.edge_a[edge_keep],
        edge_b=supernet.edge_b[edge_keep],
        edge_w=supernet.edge_w[edge_keep],
        metadata_mix={
            c: mix for c, mix in supernet.metadata_mix.items() if c in kept_set
        },
    )


def top_category(mix: dict[str, float]) -> str:
    """Dominant category of a mix; ties break lexicographically."""
    if not mix:
        return ""
    return max(sorted(mix), key=lambda cat: mix[cat])


def write_supernetwork_edges(supernet: Supernetwork, path: str) -> None:
    """Plain superedge list ``cluster_a\\tcluster_b\\tweight``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("cluster_a\tcluster_b\tweight\n")
        for a, b, w in zip(supernet.edge_a, supernet.edge_b, supernet.edge_w):
            fh.write(f"{int(a)}\t{int(b)}\t{int(w)}\n")


def write_supernetwork_nodes(supernet: Supernetwork, path: str) -> None:
    """Supernode table: cluster id, size, intra weight, top category."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("cluster_id\tsize\tintra_weight\ttop_category\n")
        for c, s, iw in zip(supernet.cluster_ids, supernet.sizes, supernet.intra_weights):
            top = top_category(supernet.metadata_mix.get(int(c), {}))
            fh.write(f"{int(c)}\t{int(s)}\t{int(iw)}\t{top}\n")


def write_metadata_mix(
    mixes: dict[int, dict[str, float]],
    sizes: dict[int, int],
    path: str,
) -> None:
    """Per-cluster category mix, both raw mass and normalized by cluster
    size (the normalization is explicit in the header)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("cluster_id\tcategory\tmass_raw\tmass_normalized_by_size\n")
        for cluster in sorted(mixes):
            size = sizes.get(cluster, 0)
            for category, mass in sorted(mixes[cluster].items()):
                norm = mass / size if size else math.nan
                fh.write(f"{cluster}\t{category}\t{mass!r}\t{norm!r}\n")


def write_supernetwork_graphml(supernet: Supernetwork, path: str) -> None:
    """GraphML export with size, intra_weight and top_category node
    attributes; consumable by standard network-visualization tools."""
    lines: list[str] = []
    lines.append('<?xml version="1.0" encoding="UTF-8"?>')
    lines.append(
        '<graphml xmlns="http://graphml.graphdrawing.org/xmlns" '
        'xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" '
        'xsi:schemaLocation="http://graphml.graphdrawing.org/xmlns '
        'http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd">'
    )
    lines.append('  <key id="d0" for="node" attr.name="size" attr.type="long"/>')
    lines.append(
        '  <key id="d1" for="node" attr.name="intra_weight" attr.type="long"/>'
    )
    lines.append(
        '  <key id="d2" for="node" attr.name="top_category" attr.type="string"/>'
    )
    lines.append('  <key id="d3" for="edge" attr.name="weight" attr.type="long"/>')
    lines.append(f'  <graph id="{escape(supernet.kind)}" edgedefault="undirected">')
    for c, s, iw in zip(supernet.cluster_ids, supernet.sizes, supernet.intra_weights):
        top = top_category(supernet.metadata_mix.get(int(c), {}))
        lines.append(f'    <node id="c{int(c)}">')
        lines.append(f'      <data key="d0">{int(s)}</data>')
        lines.append(f'      <data key="d1">{int(iw)}</data>')
        lines.append(f'      <data key="d2">{escape(top)}</data>')
        lines.append("    </node>")
    for i, (a, b, w) in enumerate(
        zip(supernet.edge_a, supernet.edge_b, supernet.edge_w)
    ):
        lines.append(
            f'    <edge id="e{i}" source="c{int(a)}" target="c{int(b)}">'
            f'<data key="d3">{int(w)}</data></edge>'
        )
    lines.append("  </graph>")
    lines.append("</graphml>")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
