"""Bipartite citation graph, pruning rules, and one-mode projections.

The bipartite graph keeps binary adjacency (duplicate page->DOI citations
collapse to one edge) with per-edge multiplicity retained separately for
per-citation statistics. Projections count, for each unordered node pair,
the number of shared neighbors on the other side:

* co-citation: two cited works linked by the number of distinct pages citing
  both;
* bibliographic coupling: two pages linked by the number of works they both
  cite.

Projection is the hot loop at corpus scale (tens of millions of pairs); it
runs through the compiled kernel when available and can be sharded by group
ranges, with the merged result identical to a single-shard run.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _core
from .errors import DegenerateGraphError, DegreeCapExceeded
from .ingest import CitationRecord

WARN_DEGREE_DEFAULT = 10_000


@dataclass
class BipartiteCitationGraph:
    """Deduplicated page/DOI node sets plus directed page->DOI edges."""

    sources: list[str]  # sorted page ids
    targets: list[str]  # sorted DOIs
    edge_src: np.ndarray  # int64 indices into sources, lexsorted with edge_tgt
    edge_tgt: np.ndarray  # int64 indices into targets
    multiplicity: np.ndarray  # int64, raw citation count per deduped edge

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    @property
    def n_edges(self) -> int:
        return len(self.edge_src)

    @property
    def n_citations(self) -> int:
        """Raw citation count (edge multiplicities summed)."""
        return int(self.multiplicity.sum()) if len(self.multiplicity) else 0

    def out_degrees(self, count: str = "distinct") -> np.ndarray:
        """Per-source degree; ``distinct`` counts deduped edges, ``raw``
        counts citations."""
        w = None if count == "distinct" else self.multiplicity
        deg = np.bincount(self.edge_src, weights=w, minlength=self.n_sources)
        return deg.astype(np.int64)

    def in_degrees(self, count: str = "distinct") -> np.ndarray:
        w = None if count == "distinct" else self.multiplicity
        deg = np.bincount(self.edge_tgt, weights=w, minlength=self.n_targets)
        return deg.astype(np.int64)


def build_bipartite(records: Iterable[CitationRecord]) -> BipartiteCitationGraph:
    """Build the deduplicated bipartite graph from parsed citation records."""
    pages: list[str] = []
    dois: list[str] = []
    for rec in records:
        pages.append(rec.page_id)
        dois.append(rec.doi)
    if not pages:
        empty = np.empty(0, dtype=np.int64)
        return BipartiteCitationGraph([], [], empty, empty.copy(), empty.copy())

    sources, src_idx = np.unique(pages, return_inverse=True)
    targets, tgt_idx = np.unique(dois, return_inverse=True)
    # Dedup (page, doi) pairs, keeping multiplicity.
    key = src_idx.astype(np.int64) * len(targets) + tgt_idx.astype(np.int64)
    uniq, counts = np.unique(key, return_counts=True)
    return BipartiteCitationGraph(
        sources=[str(s) for s in sources],
        targets=[str(t) for t in targets],
        edge_src=(uniq // len(targets)).astype(np.int64),
        edge_tgt=(uniq % len(targets)).astype(np.int64),
        multiplicity=counts.astype(np.int64),
    )


def _filter_nodes(
    g: BipartiteCitationGraph, keep_mask: np.ndarray, side: str
) -> BipartiteCitationGraph:
    if side == "targets":
        old_nodes, edge_idx = g.targets, g.edge_tgt
    else:
        old_nodes, edge_idx = g.sources, g.edge_src
    new_of_old = np.full(len(old_nodes), -1, dtype=np.int64)
    new_of_old[keep_mask] = np.arange(int(keep_mask.sum()), dtype=np.int64)
    kept_nodes = [old_nodes[i] for i in np.flatnonzero(keep_mask)]
    edge_keep = keep_mask[edge_idx]
    if side == "targets":
        return BipartiteCitationGraph(
            sources=g.sources,
            targets=kept_nodes,
            edge_src=g.edge_src[edge_keep],
            edge_tgt=new_of_old[g.edge_tgt[edge_keep]],
            multiplicity=g.multiplicity[edge_keep],
        )
    return BipartiteCitationGraph(
        sources=kept_nodes,
        targets=g.targets,
        edge_src=new_of_old[g.edge_src[edge_keep]],
        edge_tgt=g.edge_tgt[edge_keep],
        multiplicity=g.multiplicity[edge_keep],
    )


def prune_targets_min_citations(
    g: BipartiteCitationGraph, min_citations: int = 2, count: str = "distinct"
) -> BipartiteCitationGraph:
    """Drop targets cited by fewer than ``min_citations`` pages (they would be
    isolated in the co-citation network). Sources are untouched even if their
    out-degree drops to zero. Single pass, idempotent at a fixed threshold."""
    keep = g.in_degrees(count) >= min_citations
    return _filter_nodes(g, keep, "targets")


def prune_sources_min_outcitations(
    g: BipartiteCitationGraph, min_outcitations: int = 2, count: str = "distinct"
) -> BipartiteCitationGraph:
    """Drop sources citing fewer than ``min_outcitations`` works (isolated in
    the coupling network). ``count="raw"`` uses citation multiplicities
    instead of distinct works, for sensitivity analysis."""
    keep = g.out_degrees(count) >= min_outcitations
    return _filter_nodes(g, keep, "sources")


@dataclass
class WeightedGraph:
    """Undirected integer-weighted graph (a projection or a generic network)."""

    kind: str  # "cocitation" | "coupling" | "generic"
    nodes: list[str]  # sorted, unique
    edge_a: np.ndarray  # int64 indices into nodes, edge_a < edge_b, lexsorted
    edge_b: np.ndarray
    edge_w: np.ndarray  # int64, all >= 1

    def __post_init__(self):
        self.edge_a = np.asarray(self.edge_a, dtype=np.int64)
        self.edge_b = np.asarray(self.edge_b, dtype=np.int64)
        self.edge_w = np.asarray(self.edge_w, dtype=np.int64)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edge_a)

    @property
    def total_weight(self) -> int:
        return int(self.edge_w.sum()) if len(self.edge_w) else 0

    def density(self) -> float:
        return density_from_counts(self.num_nodes, self.num_edges)

    def strengths(self) -> np.ndarray:
        """Weighted degree per node."""
        k = np.bincount(self.edge_a, weights=self.edge_w, minlength=self.num_nodes)
        k += np.bincount(self.edge_b, weights=self.edge_w, minlength=self.num_nodes)
        return k


def density_from_counts(n_nodes: int, n_edges: int) -> float:
    """Undirected density 2E / (N(N-1))."""
    if n_nodes < 2:
        raise DegenerateGraphError(f"density undefined for {n_nodes} node(s)")
    return 2.0 * n_edges / (n_nodes * (n_nodes - 1))


def _group_csr(
    group_idx: np.ndarray, member_idx: np.ndarray, n_groups: int
) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((member_idx, group_idx))
    members = member_idx[order].astype(np.int64)
    indptr = np.zeros(n_groups + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(np.bincount(group_idx, minlength=n_groups))
    return indptr, members


def _check_degrees(
    indptr: np.ndarray, warn_degree: int | None, max_degree: int | None, what: str
) -> None:
    if len(indptr) < 2:
        return
    degs = np.diff(indptr)
    top = int(degs.max()) if len(degs) else 0
    if max_degree is not None and top > max_degree:
        raise DegreeCapExceeded(
            f"{what}: degree {top} exceeds hard cap {max_degree}; "
            f"raise the cap or prune the input"
        )
    if warn_degree is not None and top > warn_degree:
        n_big = int((degs > warn_degree).sum())
        warnings.warn(
            f"{what}: {n_big} group(s) exceed degree {warn_degree} (max {top}); "
            f"pair expansion is quadratic in group degree",
            stacklevel=3,
        )


def _project(
    indptr: np.ndarray,
    members: np.ndarray,
    nodes: list[str],
    kind: str,
    shards: int,
    threads: int,
) -> WeightedGraph:
    n_groups = len(indptr) - 1
    shards = max(1, min(shards, n_groups)) if n_groups else 1
    bounds = np.linspace(0, n_groups, shards + 1).astype(np.int64)

    def run(lo: int, hi: int):
        sub_indptr = indptr[lo : hi + 1] - indptr[lo]
        sub_members = members[indptr[lo] : indptr[hi]]
        return _core.kernels.pair_counts(sub_indptr, sub_members)

    if shards == 1:
        parts = [run(0, n_groups)]
    elif threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(
                pool.map(lambda se: run(se[0], se[1]), zip(bounds[:-1], bounds[1:]))
            )
    else:
        parts = [run(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]

    a = np.concatenate([p[0] for p in parts])
    b = np.concatenate([p[1] for p in parts])
    w = np.concatenate([p[2] for p in parts])
    if len(a):
        # Merge shard-local counts: identical pairs sum, output lexsorted.
        order = np.lexsort((b, a))
        a, b, w = a[order], b[order], w[order]
        boundary = np.ones(len(a), dtype=bool)
        boundary[1:] = (a[1:] != a[:-1]) | (b[1:] != b[:-1])
        starts = np.flatnonzero(boundary)
        w = np.add.reduceat(w, starts)
        a, b = a[starts], b[starts]
    return WeightedGraph(kind=kind, nodes=list(nodes), edge_a=a, edge_b=b, edge_w=w)


def project_cocitation(
    g: BipartiteCitationGraph,
    *,
    shards: int = 1,
    threads: int = 1,
    warn_degree: int | None = WARN_DEGREE_DEFAULT,
    max_degree: int | None = None,
) -> WeightedGraph:
    """Co-citation network over targets: weight(a, b) = number of distinct
    pages citing both. Each citing page contributes at most 1 per pair.
    Expects ``g`` pruned with :func:`prune_targets_min_citations`."""
    indptr, members = _group_csr(g.edge_src, g.edge_tgt, g.n_sources)
    _check_degrees(indptr, warn_degree, max_degree, "co-citation pair expansion")
    return _project(indptr, members, g.targets, "cocitation", shards, threads)


def project_coupling(
    g: BipartiteCitationGraph,
    *,
    shards: int = 1,
    threads: int = 1,
    warn_degree: int | None = WARN_DEGREE_DEFAULT,
    max_degree: int | None = None,
) -> WeightedGraph:
    """Bibliographic coupling network over sources: weight(p, q) = number of
    works cited by both pages. Expects ``g`` pruned with
    :func:`prune_sources_min_outcitations`."""
    indptr, members = _group_csr(g.edge_tgt, g.edge_src, g.n_targets)
    _check_degrees(indptr, warn_degree, max_degree, "coupling pair expansion")
    return _project(indptr, members, g.sources, "coupling", shards, threads)


def write_bipartite(g: BipartiteCitationGraph, path: str) -> None:
    """Serialize the deduped bipartite graph as
    ``page_id\\tdoi\\tmultiplicity`` rows (sorted by page then DOI)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("page_id\tdoi\tmultiplicity\n")
        for s, t, m in zip(g.edge_src, g.edge_tgt, g.multiplicity):
            fh.write(f"{g.sources[s]}\t{g.targets[t]}\t{int(m)}\n")


def read_bipartite(path: str) -> BipartiteCitationGraph:
    """Read a bipartite graph written by :func:`write_bipartite`."""
    rows: list[tuple[str, str, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.split("\t") != ["page_id", "doi", "multiplicity"]:
            from .errors import SchemaMismatch

            raise SchemaMismatch(f"unexpected bipartite header: {header!r}")
        for line in fh:
            page, doi, mult = line.rstrip("\n").split("\t")
            rows.append((page, doi, int(mult)))
    sources = sorted(set(r[0] for r in rows))
    targets = sorted(set(r[1] for r in rows))
    s_index = {s: i for i, s in enumerate(sources)}
    t_index = {t: i for i, t in enumerate(targets)}
    n = len(rows)
    src = np.fromiter((s_index[r[0]] for r in rows), dtype=np.int64, count=n)
    tgt = np.fromiter((t_index[r[1]] for r in rows), dtype=np.int64, count=n)
    mult = np.fromiter((r[2] for r in rows), dtype=np.int64, count=n)
    order = np.lexsort((tgt, src))
    return BipartiteCitationGraph(
        sources=sources,
        targets=targets,
        edge_src=src[order],
        edge_tgt=tgt[order],
        multiplicity=mult[order],
    )


def write_weighted_edges(graph: WeightedGraph, path: str) -> None:
    """Write the ``node_a\\tnode_b\\tweight`` edge list; nodes lexicographic
    within a row, rows sorted. This file is the graph->cluster contract."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("node_a\tnode_b\tweight\n")
        for i in range(graph.num_edges):
            na = graph.nodes[graph.edge_a[i]]
            nb = graph.nodes[graph.edge_b[i]]
            if nb < na:
                na, nb = nb, na
            fh.write(f"{na}\t{nb}\t{int(graph.edge_w[i])}\n")


def write_node_list(nodes: Sequence[str], path: str) -> None:
    """Companion node list so isolated nodes survive the file round trip."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for node in nodes:
            fh.write(f"{node}\n")


def read_weighted_edges(
    path: str, kind: str = "generic", nodes_path: str | None = None
) -> WeightedGraph:
    """Read an edge list written by :func:`write_weighted_edges`.

    ``nodes_path`` (optional) supplies the full node set, so nodes isolated
    in the projection are preserved as singletons for clustering.
    """
    pairs: list[tuple[str, str, int]] = []
    node_set: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.split("\t") != ["node_a", "node_b", "weight"]:
            from .errors import SchemaMismatch

            raise SchemaMismatch(f"unexpected edge list header: {header!r}")
        for line in fh:
            na, nb, w = line.rstrip("\n").split("\t")
            pairs.append((na, nb, int(w)))
            node_set.add(na)
            node_set.add(nb)
    if nodes_path is not None:
        with open(nodes_path, "r", encoding="utf-8") as fh:
            node_set.update(line.strip() for line in fh if line.strip())
    nodes = sorted(node_set)
    index = {node: i for i, node in enumerate(nodes)}
    a = np.fromiter((index[p[0]] for p in pairs), dtype=np.int64, count=len(pairs))
    b = np.fromiter((index[p[1]] for p in pairs), dtype=np.int64, count=len(pairs))
    w = np.fromiter((p[2] for p in pairs), dtype=np.int64, count=len(pairs))
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    order = np.lexsort((hi, lo))
    return WeightedGraph(
        kind=kind, nodes=nodes, edge_a=lo[order], edge_b=hi[order], edge_w=w[order]
    )
