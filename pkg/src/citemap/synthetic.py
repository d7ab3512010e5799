"""Deterministic synthetic corpus generator.

Produces a block-structured citation corpus (pages cite mostly within their
topical block) plus all companion tables in the pipeline's input formats, so
the end-to-end path can be exercised and benchmarked without any licensed
data. Same seed, same files, byte for byte.
"""

from __future__ import annotations

import os

import numpy as np

_BLOCK_THEMES = [
    {
        "topics": ["STEM.Biology", "STEM.Medicine"],
        "projects": ["Biology", "Medicine", "Biography"],
        "minors": ["0604", "0601", "0602", "1103"],
        "journals": ["Nature", "Cell", "Genome Research"],
    },
    {
        "topics": ["STEM.Physics", "STEM.Space"],
        "projects": ["Physics", "Astronomy", "Biography"],
        "minors": ["0201", "0202", "0403"],
        "journals": ["The Astrophysical Journal", "Physical Review B", "Science"],
    },
    {
        "topics": ["History and Society.History", "Culture.Philosophy and religion"],
        "projects": ["Military history", "History", "Biography"],
        "minors": ["2103", "2202", "1601"],
        "journals": ["Journal of Historical Studies", "Past & Present"],
    },
    {
        "topics": ["Geography.Regions", "Culture.Sports"],
        "projects": ["Geography", "Football", "United States"],
        "minors": ["0406", "1604", "1701"],
        "journals": ["Annals of Regional Science", "PLOS ONE"],
    },
]

CORPUS_FILES = (
    "citations.tsv",
    "page_topics.tsv",
    "page_projects.tsv",
    "work_fields_minor.tsv",
    "work_fields_major.tsv",
    "works.tsv",
    "universe_pages.txt",
    "universe_works.txt",
)


def generate_corpus(
    out_dir: str,
    n_pages: int = 200,
    n_works: int = 300,
    mean_citations: float = 6.0,
    malformed_rate: float = 0.01,
    seed: int = 0,
) -> dict:
    """Write a synthetic corpus into ``out_dir``; returns summary counts."""
    rng = np.random.default_rng(seed)
    os.makedirs(out_dir, exist_ok=True)
    n_blocks = len(_BLOCK_THEMES)

    page_ids = [f"p{i:06d}" for i in range(n_pages)]
    page_block = [i * n_blocks // n_pages for i in range(n_pages)]
    dois = [
        f"10.{5000 + (j * n_blocks // n_works)}/w{j:06d}" for j in range(n_works)
    ]
    work_block = [j * n_blocks // n_works for j in range(n_works)]
    works_by_block = [
        [j for j in range(n_works) if work_block[j] == b] for b in range(n_blocks)
    ]

    # Citations: mostly within-block, occasional duplicates and junk rows.
    rows: list[tuple[str, str, str]] = []
    n_malformed = 0
    for i in range(n_pages):
        k = 1 + rng.poisson(max(mean_citations - 1.0, 0.0))
        block_pool = works_by_block[page_block[i]]
        for _ in range(k):
            if rng.random() < 0.85 and block_pool:
                j = int(block_pool[rng.integers(0, len(block_pool))])
            else:
                j = int(rng.integers(0, n_works))
            rows.append((page_ids[i], f"Article {i:06d}", dois[j]))
            if rng.random() < 0.04:  # raw duplicate citation
                rows.append((page_ids[i], f"Article {i:06d}", dois[j]))
        if rng.random() < malformed_rate:
            rows.append((page_ids[i], f"Article {i:06d}", "not-a-doi"))
            n_malformed += 1

    with open(os.path.join(out_dir, "citations.tsv"), "w", encoding="utf-8") as fh:
        fh.write("page_id\tpage_title\tdoi\n")
        for page_id, title, doi in rows:
            fh.write(f"{page_id}\t{title}\t{doi}\n")

    # Page topics (ORES-style): 1-2 per page, a few pages unlabeled.
    with open(os.path.join(out_dir, "page_topics.tsv"), "w", encoding="utf-8") as fh:
        fh.write("entity_id\tcategory_id\n")
        for i in range(n_pages):
            if rng.random() < 0.02:
                continue
            theme = _BLOCK_THEMES[page_block[i]]["topics"]
            n_topics = 1 + (rng.random() < 0.3)
            for t in range(n_topics):
                fh.write(f"{page_ids[i]}\t{theme[t % len(theme)]}\n")

    # Page WikiProjects: 0-2 thematic plus the cross-cutting Biography.
    with open(os.path.join(out_dir, "page_projects.tsv"), "w", encoding="utf-8") as fh:
        fh.write("entity_id\tcategory_id\n")
        for i in range(n_pages):
            if rng.random() < 0.04:
                continue
            projects = _BLOCK_THEMES[page_block[i]]["projects"]
            chosen = {projects[int(rng.integers(0, len(projects)))]}
            if rng.random() < 0.25:
                chosen.add("Biography")
            for name in sorted(chosen):
                fh.write(f"{page_ids[i]}\t{name}\n")

    # Work fields: minor codes; the major table is the 2-digit prefix of the
    # same assignment, so prefix re-aggregation is exact.
    minor_rows: list[tuple[str, str]] = []
    for j in range(n_works):
        if rng.random() < 0.08:
            continue
        minors = _BLOCK_THEMES[work_block[j]]["minors"]
        n_fields = 1 + (rng.random() < 0.4) + (rng.random() < 0.1)
        chosen = sorted(
            {minors[int(rng.integers(0, len(minors)))] for _ in range(n_fields)}
        )
        for code in chosen:
            minor_rows.append((dois[j], code))
    with open(
        os.path.join(out_dir, "work_fields_minor.tsv"), "w", encoding="utf-8"
    ) as fh:
        fh.write("entity_id\tcategory_id\n")
        for doi, code in minor_rows:
            fh.write(f"{doi}\t{code}\n")
    with open(
        os.path.join(out_dir, "work_fields_major.tsv"), "w", encoding="utf-8"
    ) as fh:
        fh.write("entity_id\tcategory_id\n")
        seen: set[tuple[str, str]] = set()
        for doi, code in minor_rows:
            pair = (doi, code[:2])
            if pair not in seen:
                seen.add(pair)
                fh.write(f"{doi}\t{code[:2]}\n")

    # Work metadata: ~96% of DOIs matched, OA roughly 41/55/4.
    with open(os.path.join(out_dir, "works.tsv"), "w", encoding="utf-8") as fh:
        fh.write(
            "doi\tpublication_year\tjournal_name\toa_status\t"
            "citations_total\tcitations_recent\n"
        )
        for j in range(n_works):
            if rng.random() < 0.04:
                continue  # unmatched upstream
            year = int(np.clip(rng.normal(2012, 6), 1970, 2023))
            journals = _BLOCK_THEMES[work_block[j]]["journals"]
            journal = journals[int(rng.integers(0, len(journals)))]
            r = rng.random()
            oa = "open" if r < 0.41 else ("closed" if r < 0.96 else "missing")
            if rng.random() < 0.03:
                total_s = recent_s = ""
            else:
                total = int(rng.lognormal(3.0, 1.6))
                recent = int(rng.integers(0, total + 1))
                total_s, recent_s = str(total), str(recent)
            fh.write(f"{dois[j]}\t{year}\t{journal}\t{oa}\t{total_s}\t{recent_s}\n")

    with open(os.path.join(out_dir, "universe_pages.txt"), "w", encoding="utf-8") as fh:
        for page_id in page_ids:
            fh.write(page_id + "\n")
    with open(os.path.join(out_dir, "universe_works.txt"), "w", encoding="utf-8") as fh:
        for doi in dois:
            fh.write(doi + "\n")

    return {
        "out_dir": out_dir,
        "n_pages": n_pages,
        "n_works": n_works,
        "n_citation_rows": len(rows),
        "n_malformed_rows": n_malformed,
        "seed": seed,
    }


def main(argv=None) -> int:
    import argparse
    import json

    ap = argparse.ArgumentParser(description="Generate a synthetic citation corpus")
    ap.add_argument("out_dir")
    ap.add_argument("--pages", type=int, default=200)
    ap.add_argument("--works", type=int, default=300)
    ap.add_argument("--mean-citations", type=float, default=6.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    summary = generate_corpus(
        args.out_dir,
        n_pages=args.pages,
        n_works=args.works,
        mean_citations=args.mean_citations,
        seed=args.seed,
    )
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
