"""Tables and figure data: fractional-count field tables, journal rankings,
citation statistics, open-access shares, year histograms, and citation-flow
matrices.

Fractional counting attributes one unit per entity across its categories, so
every table reconciles exactly to its input totals: the citations column of a
field table sums to the citation count, the works column to the distinct-work
count, and a flow matrix's mass to the covered citation count.

Citation columns always use per-citation multiplicity while work columns use
distinct works; both bases are emitted wherever the distinction matters.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyInputError, SchemaMismatch
from .ingest import MISSING_CATEGORY, CitationRecord, MembershipTable, WorkRecord

UNKNOWN_JOURNAL = "(unknown)"

SHARE_BELOW_KS = (10, 100, 1000)


def share_percent(part: int | float, whole: int | float, digits: int = 0) -> float:
    """Percentage share rounded to ``digits`` decimals."""
    if whole == 0:
        raise EmptyInputError("share of an empty whole")
    return round(100.0 * part / whole, digits) if digits else round(100.0 * part / whole)


@dataclass
class FieldRow:
    category: str
    citations_fractional: float
    works_fractional: float
    share_citations: float  # percent, full precision
    share_works: float


@dataclass
class FieldTable:
    """Fractional citations and works per category, with grand totals."""

    level: str  # "major" | "minor"
    rows: list[FieldRow]
    total_citations: int
    total_works: int

    def row_map(self) -> dict[str, FieldRow]:
        return {row.category: row for row in self.rows}

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "category",
                    "citations_fractional",
                    "works_fractional",
                    "share_citations",
                    "share_works",
                ]
            )
            for row in self.rows:
                writer.writerow(
                    [
                        row.category,
                        repr(row.citations_fractional),
                        repr(row.works_fractional),
                        repr(row.share_citations),
                        repr(row.share_works),
                    ]
                )

    def format(self) -> str:
        """Display rendering with one-decimal percentages."""
        lines = [f"{'category':<40} {'citations':>22} {'works':>22}"]
        for row in self.rows:
            citations = f"{row.citations_fractional:,.1f}({row.share_citations:.1f}%)"
            works = f"{row.works_fractional:,.1f}({row.share_works:.1f}%)"
            lines.append(f"{row.category:<40} {citations:>22} {works:>22}")
        total_c = f"{self.total_citations:,}(100%)"
        total_w = f"{self.total_works:,}(100%)"
        lines.append(f"{'Total':<40} {total_c:>22} {total_w:>22}")
        return "\n".join(lines)

    def totals_sidecar(self) -> dict:
        return {
            "level": self.level,
            "total_citations": self.total_citations,
            "total_works": self.total_works,
            "sum_citations_fractional": math.fsum(
                r.citations_fractional for r in self.rows
            ),
            "sum_works_fractional": math.fsum(r.works_fractional for r in self.rows),
        }


def field_table(
    citations: Sequence[CitationRecord],
    work_memberships: MembershipTable,
    level: str = "major",
) -> FieldTable:
    """Fractional field table over citations (with multiplicity) and
    distinct works. Works without a field carry the Missing category."""
    if level not in ("major", "minor"):
        raise SchemaMismatch(f"level must be major or minor, got {level!r}")
    cit_mass: dict[str, float] = {}
    for rec in citations:
        for cat, w in work_memberships.weights_or_missing(rec.doi).items():
            cit_mass[cat] = cit_mass.get(cat, 0.0) + w
    distinct = sorted(set(rec.doi for rec in citations))
    work_mass: dict[str, float] = {}
    for doi in distinct:
        for cat, w in work_memberships.weights_or_missing(doi).items():
            work_mass[cat] = work_mass.get(cat, 0.0) + w

    total_citations = len(citations)
    total_works = len(distinct)
    categories = sorted(set(cit_mass) | set(work_mass))
    # Order rows by citation mass descending (ties by category), Missing last.
    categories.sort(
        key=lambda c: (c == MISSING_CATEGORY, -cit_mass.get(c, 0.0), c)
    )
    rows = [
        FieldRow(
            category=cat,
            citations_fractional=cit_mass.get(cat, 0.0),
            works_fractional=work_mass.get(cat, 0.0),
            share_citations=(
                100.0 * cit_mass.get(cat, 0.0) / total_citations
                if total_citations
                else 0.0
            ),
            share_works=(
                100.0 * work_mass.get(cat, 0.0) / total_works if total_works else 0.0
            ),
        )
        for cat in categories
    ]
    return FieldTable(
        level=level, rows=rows, total_citations=total_citations, total_works=total_works
    )


def reaggregate_minor_to_major(table: FieldTable, prefix_len: int = 2) -> FieldTable:
    """Collapse a minor-level table to major divisions by code prefix."""
    cit: dict[str, float] = {}
    wrk: dict[str, float] = {}
    for row in table.rows:
        major = (
            row.category
            if row.category == MISSING_CATEGORY
            else row.category[:prefix_len]
        )
        cit[major] = cit.get(major, 0.0) + row.citations_fractional
        wrk[major] = wrk.get(major, 0.0) + row.works_fractional
    categories = sorted(cit, key=lambda c: (c == MISSING_CATEGORY, -cit[c], c))
    rows = [
        FieldRow(
            category=cat,
            citations_fractional=cit[cat],
            works_fractional=wrk[cat],
            share_citations=(
                100.0 * cit[cat] / table.total_citations if table.total_citations else 0.0
            ),
            share_works=(
                100.0 * wrk[cat] / table.total_works if table.total_works else 0.0
            ),
        )
        for cat in categories
    ]
    return FieldTable(
        level="major",
        rows=rows,
        total_citations=table.total_citations,
        total_works=table.total_works,
    )


def top_journals(
    citations: Sequence[CitationRecord], works: Mapping[str, WorkRecord]
) -> list[tuple[str, int]]:
    """Per-citation journal counts, descending, ties lexicographic. Works
    without a journal name group under ``(unknown)``."""
    counts: dict[str, int] = {}
    for rec in citations:
        work = works.get(rec.doi)
        journal = (work.journal_name if work else None) or UNKNOWN_JOURNAL
        counts[journal] = counts.get(journal, 0) + 1
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass
class CitationStats:
    """Order statistics over one citation-count field."""

    n: int
    n_missing: int
    mean: float
    median: float
    max: int
    min: int
    share_zero: float
    share_below: dict[int, float]

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "n_missing": self.n_missing,
            "mean": self.mean,
            "median": self.median,
            "max": self.max,
            "min": self.min,
            "share_zero": self.share_zero,
            "share_below": {str(k): v for k, v in self.share_below.items()},
        }


def _stats_over(values: list[int], n_missing: int, ks: Sequence[int]) -> CitationStats:
    if not values:
        raise EmptyInputError("no citation counts after dropping absent values")
    arr = np.sort(np.array(values, dtype=np.int64))
    n = len(arr)
    return CitationStats(
        n=n,
        n_missing=n_missing,
        mean=float(arr.mean()),
        median=float(np.median(arr)),
        max=int(arr[-1]),
        min=int(arr[0]),
        share_zero=float(np.count_nonzero(arr == 0)) / n,
        share_below={int(k): float(np.count_nonzero(arr < k)) / n for k in ks},
    )


def citation_stats(
    works: Iterable[WorkRecord], ks: Sequence[int] = SHARE_BELOW_KS
) -> dict[str, CitationStats]:
    """Stats for total and recent citation counts; absent values are dropped
    and reported as ``n_missing``."""
    total: list[int] = []
    recent: list[int] = []
    miss_total = miss_recent = 0
    for work in works:
        if work.citations_total is None:
            miss_total += 1
        else:
            total.append(work.citations_total)
        if work.citations_recent is None:
            miss_recent += 1
        else:
            recent.append(work.citations_recent)
    return {
        "total": _stats_over(total, miss_total, ks),
        "recent": _stats_over(recent, miss_recent, ks),
    }


def oa_share(
    works: Mapping[str, WorkRecord],
    basis: str = "per_work",
    citations: Sequence[CitationRecord] | None = None,
) -> dict[str, float]:
    """Open/closed/missing shares, summing to 1.

    ``per_work`` tallies each work once; ``per_citation`` weighs works by
    citation multiplicity (citations to works absent from the metadata count
    as missing). The dual basis exists because either reading of an OA share
    must be checkable.
    """
    counts = {"open": 0, "closed": 0, "missing": 0}
    if basis == "per_work":
        for work in works.values():
            counts[work.oa_status] += 1
    elif basis == "per_citation":
        if citations is None:
            raise SchemaMismatch("per_citation basis requires the citations list")
        for rec in citations:
            work = works.get(rec.doi)
            counts[work.oa_status if work else "missing"] += 1
    else:
        raise SchemaMismatch(f"basis must be per_work or per_citation, got {basis!r}")
    total = sum(counts.values())
    if total == 0:
        raise EmptyInputError("no works to tally")
    return {status: counts[status] / total for status in ("open", "closed", "missing")}


@dataclass
class YearHistogram:
    from_year: int
    to_year: int
    counts: dict[int, int]  # every year in range, zero-filled
    underflow: int
    overflow: int
    missing: int

    def as_dict(self) -> dict:
        return {
            "from_year": self.from_year,
            "to_year": self.to_year,
            "counts": {str(y): c for y, c in sorted(self.counts.items())},
            "underflow": self.underflow,
            "overflow": self.overflow,
            "missing": self.missing,
        }


def year_histogram(
    works: Iterable[WorkRecord], from_year: int = 2000, to_year: int = 2020
) -> YearHistogram:
    """Publication-year counts over [from_year, to_year] with under/overflow
    bins; works without a year are counted separately."""
    if from_year > to_year:
        raise SchemaMismatch(f"bad range: {from_year} > {to_year}")
    counts = {year: 0 for year in range(from_year, to_year + 1)}
    under = over = missing = 0
    for work in works:
        year = work.publication_year
        if year is None:
            missing += 1
        elif year < from_year:
            under += 1
        elif year > to_year:
            over += 1
        else:
            counts[year] += 1
    return YearHistogram(from_year, to_year, counts, under, over, missing)


@dataclass
class FlowMatrix:
    """Fractional citation mass from source groups to target fields."""

    source_groups: list[str]
    target_fields: list[str]
    matrix: np.ndarray  # float64 [len(source_groups), len(target_fields)]

    @property
    def total(self) -> float:
        return float(self.matrix.sum())

    def row_marginals(self) -> dict[str, float]:
        sums = self.matrix.sum(axis=1)
        return {g: float(s) for g, s in zip(self.source_groups, sums)}

    def col_marginals(self) -> dict[str, float]:
        sums = self.matrix.sum(axis=0)
        return {f: float(s) for f, s in zip(self.target_fields, sums)}

    def to_long_csv(self, path: str) -> None:
        """Long-format ``source,target,value`` rows for river/sankey tools."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["source", "target", "value"])
            for i, group in enumerate(self.source_groups):
                for j, fld in enumerate(self.target_fields):
                    value = float(self.matrix[i, j])
                    if value != 0.0:
                        writer.writerow([group, fld, repr(value)])

    def to_csv(self, path: str) -> None:
        """Wide matrix: one row per source group, one column per field."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["source"] + self.target_fields)
            for i, group in enumerate(self.source_groups):
                writer.writerow(
                    [group] + [repr(float(v)) for v in self.matrix[i]]
                )


def top_source_groups(memberships: MembershipTable, k: int) -> list[str]:
    """The k source groups largest by fractional entity mass; ties break
    lexicographically."""
    mass = memberships.category_mass()
    ranked = sorted(mass.items(), key=lambda kv: (-kv[1], kv[0]))
    return [group for group, _ in ranked[:k]]


def flow_matrix(
    citations: Sequence[CitationRecord],
    source_memberships: MembershipTable,
    target_memberships: MembershipTable,
    top_k: int | None = None,
) -> FlowMatrix:
    """Each citation contributes the outer product of its page's group
    weights and its work's field weights. With ``top_k``, source groups are
    restricted to the k largest by fractional page mass and only the retained
    mass is covered."""
    kept: set[str] | None = None
    if top_k is not None:
        kept = set(top_source_groups(source_memberships, top_k))

    cells: dict[tuple[str, str], float] = {}
    for rec in citations:
        src = source_memberships.weights_or_missing(rec.page_id)
        tgt = target_memberships.weights_or_missing(rec.doi)
        for group, gw in src.items():
            if kept is not None and group not in kept:
                continue
            for fld, fw in tgt.items():
                key = (group, fld)
                cells[key] = cells.get(key, 0.0) + gw * fw

    source_groups = sorted(set(g for g, _ in cells))
    target_fields = sorted(set(f for _, f in cells))
    gi = {g: i for i, g in enumerate(source_groups)}
    fi = {f: i for i, f in enumerate(target_fields)}
    matrix = np.zeros((len(source_groups), len(target_fields)), dtype=np.float64)
    for (g, f), v in cells.items():
        matrix[gi[g], fi[f]] = v
    return FlowMatrix(source_groups, target_fields, matrix)


def write_totals_sidecar(path: str, totals: dict) -> None:
    """JSON sidecar of totals accompanying a CSV artifact."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(totals, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_top_journals_csv(ranking: list[tuple[str, int]], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["journal", "citations"])
        for journal, count in ranking:
            writer.writerow([journal, count])


def write_year_histogram_csv(hist: YearHistogram, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "works"])
        for year in sorted(hist.counts):
            writer.writerow([year, hist.counts[year]])


def write_citation_stats_csv(stats: Mapping[str, CitationStats], path: str) -> None:
    """One row per metric, one column per count field (total, recent)."""
    fields = list(stats)
    metrics: list[tuple[str, callable]] = [
        ("n", lambda s: s.n),
        ("n_missing", lambda s: s.n_missing),
        ("mean", lambda s: repr(s.mean)),
        ("median", lambda s: repr(s.median)),
        ("max", lambda s: s.max),
        ("min", lambda s: s.min),
        ("share_zero", lambda s: repr(s.share_zero)),
    ]
    ks = sorted(next(iter(stats.values())).share_below) if stats else []
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric"] + fields)
        for name, get in metrics:
            writer.writerow([name] + [get(stats[f]) for f in fields])
        for k in ks:
            writer.writerow(
                [f"share_below_{k}"] + [repr(stats[f].share_below[k]) for f in fields]
            )


def write_oa_share_csv(shares: Mapping[str, Mapping[str, float]], path: str) -> None:
    """One row per basis with open/closed/missing share columns."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["basis", "open", "closed", "missing"])
        for basis in sorted(shares):
            row = shares[basis]
            writer.writerow(
                [basis, repr(row["open"]), repr(row["closed"]), repr(row["missing"])]
            )
