"""Pipeline orchestration as subcommands with resumable file artifacts.

Every stage reads only its declared inputs, writes only its declared outputs
under the configured output directory, and prints one machine-readable JSON
summary line to stdout (logs go to stderr). With ``--resume``, a stage whose
inputs and parameters are unchanged (content hashing) is skipped. Two runs
with identical config and inputs produce byte-identical artifact trees.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict

import numpy as np

from . import cluster as cl
from . import enrich as en
from . import graph as gr
from . import ingest as ing
from . import report as rp
from . import supernet as sn
from .config import RunConfig, ServiceSettings, load_config
from .errors import CitemapError, ConfigError

log = logging.getLogger("citemap")

KINDS = ("cocitation", "coupling")


def _out(config: RunConfig, name: str) -> str:
    return os.path.join(config.output_dir, name)


def _require(path: str | None, what: str) -> str:
    if not path:
        raise ConfigError(f"{what} is not configured")
    return path


def _hash_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _signature(config: RunConfig, inputs: list[str], params: dict) -> str:
    h = hashlib.sha256()
    for path in sorted(inputs):
        # Relative to the output dir, so identical runs into different
        # directories leave byte-identical trees (stamps included).
        h.update(os.path.relpath(path, config.output_dir).encode())
        h.update(_hash_file(path).encode())
    h.update(json.dumps(params, sort_keys=True, default=str).encode())
    return h.hexdigest()


def _stamp_path(config: RunConfig, stage: str) -> str:
    return os.path.join(config.output_dir, ".stamps", f"{stage}.json")


def _resume_hit(config: RunConfig, stage: str, signature: str, outputs: list[str]) -> bool:
    if not config.resume:
        return False
    try:
        with open(_stamp_path(config, stage), "r", encoding="utf-8") as fh:
            stamp = json.load(fh)
    except (FileNotFoundError, json.JSONDecodeError):
        return False
    if stamp.get("signature") != signature:
        return False
    return all(os.path.exists(path) for path in outputs)


def _write_stamp(config: RunConfig, stage: str, signature: str, outputs: list[str]) -> None:
    path = _stamp_path(config, stage)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    rel = [os.path.relpath(p, config.output_dir) for p in outputs]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"signature": signature, "outputs": rel}, fh, sort_keys=True)
        fh.write("\n")


def _emit(summary: dict) -> dict:
    print(json.dumps(summary, sort_keys=True))
    sys.stdout.flush()
    return summary


# ---------------------------------------------------------------------------
# Stages


def stage_ingest(config: RunConfig, args) -> dict:
    citations_in = _require(config.citations, "citations path")
    os.makedirs(config.output_dir, exist_ok=True)
    inputs = [citations_in] + sorted(config.memberships.values())
    if config.works:
        inputs.append(config.works)
    for uni in (config.universe_pages, config.universe_works):
        if uni:
            inputs.append(uni)
    signature = _signature(config, inputs, {"stage": "ingest"})
    outputs = [_out(config, "citations.tsv"), _out(config, "parse_report.json")]
    outputs += [
        _out(config, f"memberships_{scheme}.tsv") for scheme in sorted(config.memberships)
    ]
    if config.works:
        outputs.append(_out(config, "works.tsv"))
    if _resume_hit(config, "ingest", signature, outputs):
        return _emit({"stage": "ingest", "skipped": True, "outputs": outputs})

    records, parse_report = ing.parse_citations(citations_in)
    ing.write_citations(records, _out(config, "citations.tsv"))
    with open(_out(config, "parse_report.json"), "w", encoding="utf-8") as fh:
        json.dump(parse_report.as_dict(), fh, sort_keys=True)
        fh.write("\n")

    page_universe = (
        ing.load_universe(config.universe_pages) if config.universe_pages else None
    )
    work_universe = (
        ing.load_universe(config.universe_works) if config.universe_works else None
    )
    membership_counts = {}
    for scheme in sorted(config.memberships):
        universe = page_universe if scheme in ("ores_topic", "wikiproject") else work_universe
        table = ing.load_memberships(config.memberships[scheme], scheme, universe)
        ing.write_memberships(table, _out(config, f"memberships_{scheme}.tsv"))
        membership_counts[scheme] = len(table)

    works_report = None
    if config.works:
        works, works_report = ing.load_works(config.works)
        ing.write_works(
            [works[doi] for doi in sorted(works)], _out(config, "works.tsv")
        )

    _write_stamp(config, "ingest", signature, outputs)
    return _emit(
        {
            "stage": "ingest",
            "outputs": outputs,
            "citations": parse_report.as_dict(),
            "memberships": membership_counts,
            "works": works_report.as_dict() if works_report else None,
        }
    )


def _service_config(settings: ServiceSettings) -> en.ServiceConfig:
    return en.ServiceConfig(**asdict(settings))


def stage_enrich(config: RunConfig, args) -> dict:
    if config.topics_service is None and config.works_service is None:
        raise ConfigError("enrich requires topics_service and/or works_service")
    citations_path = _out(config, "citations.tsv")
    records, _ = ing.parse_citations(citations_path)
    summary: dict = {"stage": "enrich", "outputs": []}

    if config.topics_service is not None:
        client = en.TopicsClient(
            _service_config(config.topics_service),
            en.DiskCache(config.cache_dir, "topics"),
        )
        page_ids = sorted(set(rec.page_id for rec in records))
        table, report = client.fetch_topics(page_ids)
        out = _out(config, "memberships_ores_topic.tsv")
        ing.write_memberships(table, out)
        summary["outputs"].append(out)
        summary["topics"] = report.as_dict()

    if config.works_service is not None:
        client = en.WorksClient(
            _service_config(config.works_service),
            en.DiskCache(config.cache_dir, "works"),
        )
        dois = sorted(set(rec.doi for rec in records))
        works, report = client.fetch_works(dois)
        out = _out(config, "works.tsv")
        ing.write_works([works[doi] for doi in sorted(works)], out)
        summary["outputs"].append(out)
        summary["works"] = report.as_dict()

    return _emit(summary)


def stage_build(config: RunConfig, args) -> dict:
    citations_path = _out(config, "citations.tsv")
    signature = _signature(config, [citations_path], {"stage": "build"})
    outputs = [_out(config, "bipartite.tsv")]
    if _resume_hit(config, "build", signature, outputs):
        return _emit({"stage": "build", "skipped": True, "outputs": outputs})

    records, _ = ing.parse_citations(citations_path)
    bip = gr.build_bipartite(records)
    gr.write_bipartite(bip, outputs[0])
    _write_stamp(config, "build", signature, outputs)
    return _emit(
        {
            "stage": "build",
            "outputs": outputs,
            "sources": bip.n_sources,
            "targets": bip.n_targets,
            "edges": bip.n_edges,
            "citations": bip.n_citations,
        }
    )


def _kinds_from(args) -> list[str]:
    kind = getattr(args, "kind", "both")
    return list(KINDS) if kind == "both" else [kind]


def stage_project(config: RunConfig, args) -> dict:
    bip_path = _out(config, "bipartite.tsv")
    kinds = _kinds_from(args)
    params = {
        "stage": "project",
        "kinds": kinds,
        "min_cit": config.prune_min_citations,
        "min_out": config.prune_min_outcitations,
        "count": config.prune_count,
    }
    signature = _signature(config, [bip_path], params)
    outputs = []
    for kind in kinds:
        outputs += [_out(config, f"{kind}_edges.tsv"), _out(config, f"{kind}_nodes.tsv")]
    if _resume_hit(config, "project", signature, outputs):
        return _emit({"stage": "project", "skipped": True, "outputs": outputs})

    bip = gr.read_bipartite(bip_path)
    summary: dict = {"stage": "project", "outputs": outputs}
    for kind in kinds:
        if kind == "cocitation":
            pruned = gr.prune_targets_min_citations(
                bip, config.prune_min_citations, config.prune_count
            )
            graph = gr.project_cocitation(
                pruned,
                shards=config.threads,
                threads=config.threads,
                warn_degree=config.warn_degree,
                max_degree=config.max_degree,
            )
            survivors, universe = pruned.n_targets, bip.n_targets
        else:
            pruned = gr.prune_sources_min_outcitations(
                bip, config.prune_min_outcitations, config.prune_count
            )
            graph = gr.project_coupling(
                pruned,
                shards=config.threads,
                threads=config.threads,
                warn_degree=config.warn_degree,
                max_degree=config.max_degree,
            )
            survivors, universe = pruned.n_sources, bip.n_sources
        gr.write_weighted_edges(graph, _out(config, f"{kind}_edges.tsv"))
        gr.write_node_list(graph.nodes, _out(config, f"{kind}_nodes.tsv"))
        summary[kind] = {
            "nodes": graph.num_nodes,
            "edges": graph.num_edges,
            "density": graph.density() if graph.num_nodes >= 2 else None,
            "survivors": survivors,
            "survivor_share_percent": rp.share_percent(survivors, universe)
            if universe
            else None,
        }
    _write_stamp(config, "project", signature, outputs)
    return _emit(summary)


def _load_projection(config: RunConfig, kind: str) -> gr.WeightedGraph:
    return gr.read_weighted_edges(
        _out(config, f"{kind}_edges.tsv"), kind, _out(config, f"{kind}_nodes.tsv")
    )


def stage_cluster(config: RunConfig, args) -> dict:
    kinds = _kinds_from(args)
    params = {
        "stage": "cluster",
        "gamma": config.gamma,
        "objective": config.objective,
        "unweighted": config.unweighted,
        "seed": config.seed,
        "max_iterations": config.max_iterations,
    }
    inputs = []
    for kind in kinds:
        inputs += [_out(config, f"{kind}_edges.tsv"), _out(config, f"{kind}_nodes.tsv")]
    signature = _signature(config, inputs, params)
    outputs = [_out(config, f"partition_{kind}.tsv") for kind in kinds]
    if _resume_hit(config, "cluster", signature, outputs):
        return _emit({"stage": "cluster", "skipped": True, "outputs": outputs})

    summary: dict = {"stage": "cluster", "outputs": outputs}
    for kind in kinds:
        graph = _load_projection(config, kind)
        if graph.num_nodes == 0:
            # Degenerate corpus: pruning removed everything.
            part = cl.Partition(
                nodes=[], labels=np.empty(0, dtype=np.int64),
                gamma=config.gamma, objective=config.objective,
                seed=config.seed, quality_value=0.0,
            )
        else:
            part = cl.leiden(
                graph,
                gamma=config.gamma,
                objective=config.objective,
                seed=config.seed,
                max_iterations=config.max_iterations,
                threads=config.threads,
                use_weights=not config.unweighted,
            )
        cl.write_partition(part, _out(config, f"partition_{kind}.tsv"))
        summary[kind] = {
            "nodes": graph.num_nodes,
            "clusters": part.num_clusters,
            "quality": part.quality_value,
        }
    _write_stamp(config, "cluster", signature, outputs)
    return _emit(summary)


def stage_sweep(config: RunConfig, args) -> dict:
    kinds = _kinds_from(args)
    summary: dict = {"stage": "sweep", "outputs": []}
    for kind in kinds:
        graph = _load_projection(config, kind)
        curve, partitions = cl.sweep(
            graph,
            config.gamma_grid,
            objective=config.objective,
            seed=config.seed,
            max_iterations=config.max_iterations,
            threads=config.threads,
            use_weights=not config.unweighted,
        )
        sweep_path = _out(config, f"sweep_{kind}.tsv")
        cl.write_sweep(curve, sweep_path)
        summary["outputs"].append(sweep_path)
        for i, part in enumerate(partitions):
            path = _out(config, f"partition_{kind}_sweep{i:02d}.tsv")
            cl.write_partition(part, path)
            summary["outputs"].append(path)
        summary[kind] = {
            "points": curve.points,
            "gamma_star": cl.elbow(curve),
        }
    return _emit(summary)


def _memberships_for(config: RunConfig, kind: str) -> dict[str, ing.MembershipTable]:
    schemes = ("ores_topic", "wikiproject") if kind == "coupling" else ("for_major",)
    tables = {}
    for scheme in schemes:
        path = _out(config, f"memberships_{scheme}.tsv")
        if os.path.exists(path):
            tables[scheme] = ing.load_memberships(path, scheme)
    return tables


def stage_supernet(config: RunConfig, args) -> dict:
    kinds = _kinds_from(args)
    summary: dict = {"stage": "supernet", "outputs": []}
    for kind in kinds:
        graph = _load_projection(config, kind)
        part = cl.read_partition(_out(config, f"partition_{kind}.tsv"))
        labels = cl.partition_for_graph(part, graph)
        supernet = sn.coarsen(graph, labels)

        curve = sn.cumulative_share_curve(supernet.sizes)
        curve_path = _out(config, f"cumulative_share_{kind}.tsv")
        with open(curve_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("cluster_size_threshold\tcumulative_share\n")
            for size, share in curve:
                fh.write(f"{size}\t{share!r}\n")
        summary["outputs"].append(curve_path)

        tables = _memberships_for(config, kind)
        sizes_by_id = supernet.size_of()
        for scheme, table in tables.items():
            mixes = sn.aggregate_metadata(graph, labels, table)
            if not supernet.metadata_mix:
                supernet.metadata_mix = mixes
            meta_path = _out(config, f"supernet_{kind}_metadata_{scheme}.tsv")
            sn.write_metadata_mix(mixes, sizes_by_id, meta_path)
            summary["outputs"].append(meta_path)

        pre_trim_edges = supernet.num_edges
        if supernet.num_clusters == 0:
            threshold, trimmed = 0, supernet
        else:
            threshold, trimmed = sn.trim(supernet, config.target_share)
        nodes_path = _out(config, f"supernet_{kind}_nodes.tsv")
        edges_path = _out(config, f"supernet_{kind}_edges.tsv")
        sn.write_supernetwork_nodes(trimmed, nodes_path)
        sn.write_supernetwork_edges(trimmed, edges_path)
        summary["outputs"] += [nodes_path, edges_path]
        summary[kind] = {
            "clusters": supernet.num_clusters,
            "edges_pre_trim": pre_trim_edges,
            "size_threshold": threshold,
            "clusters_kept": trimmed.num_clusters,
            "edges_post_trim": trimmed.num_edges,
        }
    return _emit(summary)


def stage_report(config: RunConfig, args) -> dict:
    citations_path = _out(config, "citations.tsv")
    records, _ = ing.parse_citations(citations_path)
    summary: dict = {"stage": "report", "outputs": []}

    def table_path(name: str) -> str:
        path = _out(config, name)
        summary["outputs"].append(path)
        return path

    # Field tables at both levels, where memberships exist.
    for level, scheme in (("major", "for_major"), ("minor", "for_minor")):
        path = _out(config, f"memberships_{scheme}.tsv")
        if not os.path.exists(path):
            continue
        table = ing.load_memberships(path, scheme)
        ft = rp.field_table(records, table, level=level)
        ft.to_csv(table_path(f"field_table_{level}.csv"))
        rp.write_totals_sidecar(
            table_path(f"field_table_{level}.totals.json"), ft.totals_sidecar()
        )
        summary[f"field_table_{level}"] = {
            "rows": len(ft.rows),
            "total_citations": ft.total_citations,
            "total_works": ft.total_works,
        }

    works = {}
    works_path = _out(config, "works.tsv")
    if os.path.exists(works_path):
        works, _ = ing.load_works(works_path)

    if works:
        ranking = rp.top_journals(records, works)
        rp.write_top_journals_csv(ranking, table_path("top_journals.csv"))

        stats = rp.citation_stats(works.values(), config.share_below_ks)
        rp.write_citation_stats_csv(stats, table_path("citation_stats.csv"))
        with open(table_path("citation_stats.json"), "w", encoding="utf-8") as fh:
            json.dump(
                {key: st.as_dict() for key, st in stats.items()},
                fh,
                sort_keys=True,
                indent=2,
            )
            fh.write("\n")

        oa = {
            "per_work": rp.oa_share(works, "per_work"),
            "per_citation": rp.oa_share(works, "per_citation", records),
        }
        rp.write_oa_share_csv(oa, table_path("oa_share.csv"))
        with open(table_path("oa_share.json"), "w", encoding="utf-8") as fh:
            json.dump(oa, fh, sort_keys=True, indent=2)
            fh.write("\n")

        hist = rp.year_histogram(works.values(), config.year_from, config.year_to)
        rp.write_year_histogram_csv(hist, table_path("year_histogram.csv"))
        rp.write_totals_sidecar(
            table_path("year_histogram.totals.json"), hist.as_dict()
        )

    # Citation flows: topics -> major fields, top-k projects -> major fields.
    fields_path = _out(config, "memberships_for_major.tsv")
    if os.path.exists(fields_path):
        fields = ing.load_memberships(fields_path, "for_major")
        for scheme, top_k, name in (
            ("ores_topic", None, "flow_topics_fields"),
            ("wikiproject", config.top_k, "flow_projects_fields"),
        ):
            src_path = _out(config, f"memberships_{scheme}.tsv")
            if not os.path.exists(src_path):
                continue
            sources = ing.load_memberships(src_path, scheme)
            flow = rp.flow_matrix(records, sources, fields, top_k=top_k)
            flow.to_csv(table_path(f"{name}_matrix.csv"))
            flow.to_long_csv(table_path(f"{name}.csv"))
            rp.write_totals_sidecar(
                table_path(f"{name}.totals.json"),
                {
                    "total_mass": flow.total,
                    "covered_citations": len(records),
                    "source_groups": len(flow.source_groups),
                    "target_fields": len(flow.target_fields),
                },
            )
            summary[name] = {"total_mass": flow.total}
    return _emit(summary)


def _read_supernet_tables(config: RunConfig, kind: str) -> sn.Supernetwork:
    nodes_path = _out(config, f"supernet_{kind}_nodes.tsv")
    edges_path = _out(config, f"supernet_{kind}_edges.tsv")
    ids, sizes, intra, tops = [], [], [], {}
    with open(nodes_path, "r", encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            cid, size, iw, top = line.rstrip("\n").split("\t")
            ids.append(int(cid))
            sizes.append(int(size))
            intra.append(int(iw))
            if top:
                tops[int(cid)] = {top: 1.0}
    ea, eb, ew = [], [], []
    with open(edges_path, "r", encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            a, b, w = line.rstrip("\n").split("\t")
            ea.append(int(a))
            eb.append(int(b))
            ew.append(int(w))
    return sn.Supernetwork(
        kind=kind,
        cluster_ids=np.array(ids, dtype=np.int64),
        sizes=np.array(sizes, dtype=np.int64),
        intra_weights=np.array(intra, dtype=np.int64),
        edge_a=np.array(ea, dtype=np.int64),
        edge_b=np.array(eb, dtype=np.int64),
        edge_w=np.array(ew, dtype=np.int64),
        metadata_mix=tops,
    )


def stage_export(config: RunConfig, args) -> dict:
    kinds = _kinds_from(args)
    summary: dict = {"stage": "export", "outputs": []}
    for kind in kinds:
        supernet = _read_supernet_tables(config, kind)
        path = _out(config, f"supernet_{kind}.graphml")
        sn.write_supernetwork_graphml(supernet, path)
        summary["outputs"].append(path)
        summary[kind] = {"nodes": supernet.num_clusters, "edges": supernet.num_edges}
    return _emit(summary)


def stage_pipeline(config: RunConfig, args) -> dict:
    stages = [("ingest", stage_ingest)]
    if config.topics_service is not None or config.works_service is not None:
        stages.append(("enrich", stage_enrich))
    stages += [
        ("build", stage_build),
        ("project", stage_project),
        ("cluster", stage_cluster),
        ("supernet", stage_supernet),
        ("report", stage_report),
        ("export", stage_export),
    ]
    ran = []
    for name, fn in stages:
        log.info("pipeline: %s", name)
        fn(config, args)
        ran.append(name)
    return _emit({"stage": "pipeline", "ran": ran})


STAGES = {
    "ingest": stage_ingest,
    "enrich": stage_enrich,
    "build": stage_build,
    "project": stage_project,
    "cluster": stage_cluster,
    "sweep": stage_sweep,
    "supernet": stage_supernet,
    "report": stage_report,
    "export": stage_export,
    "pipeline": stage_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="citemap",
        description="Citation-network science mapping pipeline",
    )
    parser.add_argument("--config", help="JSON run configuration file")
    parser.add_argument("--seed", type=int, help="override the random seed")
    parser.add_argument("--gamma", type=float, help="override the resolution")
    parser.add_argument("--threads", type=int, help="global parallelism cap")
    parser.add_argument(
        "--resume",
        action="store_true",
        help="skip stages whose inputs are unchanged",
    )
    parser.add_argument("--out", help="override the output directory")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for name in STAGES:
        sp = sub.add_parser(name, help=f"run the {name} stage")
        if name in ("project", "cluster", "sweep", "supernet", "export"):
            sp.add_argument(
                "--kind",
                choices=("cocitation", "coupling", "both"),
                default="both",
            )
        if name in ("cluster", "sweep"):
            sp.add_argument("--objective", choices=cl.OBJECTIVES)
    return parser


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        config.seed = args.seed
    if args.gamma is not None:
        config.gamma = args.gamma
    if args.threads is not None:
        config.threads = args.threads
    if args.resume:
        config.resume = True
    if args.out:
        config.output_dir = args.out
    if getattr(args, "objective", None):
        config.objective = args.objective
    config.validate()
    return config


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _apply_overrides(load_config(args.config), args)
        os.makedirs(config.output_dir, exist_ok=True)
        STAGES[args.command](config, args)
        return 0
    except ConfigError as exc:
        log.error("config: %s", exc)
        return 2
    except OSError as exc:
        log.error("io: %s", exc)
        return 3
    except CitemapError as exc:
        log.error("data: %s", exc)
        return 4
    except Exception as exc:  # pragma: no cover - defensive
        log.exception("internal: %s", exc)
        return 70


if __name__ == "__main__":
    raise SystemExit(main())
