"""Parse citation corpora and categorical metadata into validated tables.

Input formats (all UTF-8, tab-separated, one header row):

* citations:   ``page_id  page_title  doi``
* memberships: ``entity_id  category_id`` (one row per pair)
* works:       ``doi  publication_year  journal_name  oa_status
  citations_total  citations_recent`` (empty field = absent)

Rows with malformed DOIs or broken structure are dropped and counted, never
fatal: large citation corpora always contain junk and the pipeline has to
degrade gracefully.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Mapping, Sequence
from urllib.parse import unquote

from .errors import MalformedDoi, SchemaMismatch

MISSING_CATEGORY = "Missing"

MEMBERSHIP_SCHEMES = ("ores_topic", "wikiproject", "for_major", "for_minor")

OA_STATUSES = ("open", "closed", "missing")

_DOI_RE = re.compile(r"10\.\d{4,9}/.+")
_URL_PREFIX_RE = re.compile(r"^https?://(dx\.)?doi\.org/", re.IGNORECASE)

# Per-entity fractional weights must reconcile to 1; float64 rounding on 1/k
# stays far below this.
WEIGHT_SUM_TOL = 1e-9


def normalize_doi(raw: str) -> str:
    """Normalize a raw DOI string to canonical form.

    Strips surrounding whitespace and ``http(s)://(dx.)doi.org/`` prefixes,
    percent-decodes (to fixpoint, so normalization is idempotent), and
    lowercases.

    Raises:
        MalformedDoi: if the residue does not match ``10.<4-9 digits>/<suffix>``.
    """
    s = raw.strip()
    s = _URL_PREFIX_RE.sub("", s)
    # Decode until stable: a single unquote() pass is not idempotent when the
    # suffix contains encoded percent signs.
    for _ in range(8):
        decoded = unquote(s)
        if decoded == s:
            break
        s = decoded
    s = s.strip().lower()
    if not _DOI_RE.fullmatch(s):
        raise MalformedDoi(f"not a DOI: {raw!r}")
    return s


@dataclass(frozen=True)
class CitationRecord:
    """One directed citation: encyclopedia page -> DOI."""

    page_id: str
    page_title: str
    doi: str


@dataclass
class ParseReport:
    """Counts of rows read / kept / dropped while parsing a stream."""

    read: int = 0
    kept: int = 0
    dropped: int = 0

    def __add__(self, other: "ParseReport") -> "ParseReport":
        return ParseReport(
            self.read + other.read,
            self.kept + other.kept,
            self.dropped + other.dropped,
        )

    def as_dict(self) -> dict:
        return {"read": self.read, "kept": self.kept, "dropped": self.dropped}


def _open_rows(stream: str | IO[str]) -> Iterator[list[str]]:
    if isinstance(stream, str):
        with open(stream, "r", encoding="utf-8", newline="") as fh:
            yield from csv.reader(fh, dialect="excel-tab")
    else:
        yield from csv.reader(stream, dialect="excel-tab")


def _header_index(header: Sequence[str], required: Sequence[str]) -> dict[str, int]:
    cols = {name.strip(): i for i, name in enumerate(header)}
    missing = [name for name in required if name not in cols]
    if missing:
        raise SchemaMismatch(f"missing required columns: {missing} (header={header})")
    return {name: cols[name] for name in required}


def parse_citations(
    stream: str | IO[str],
) -> tuple[list[CitationRecord], ParseReport]:
    """Parse a citations TSV into records, dropping and counting bad rows.

    Exact duplicate (page_id, doi) pairs are retained; collapsing multiplicity
    is a graph-construction concern. Re-parsing the output of
    :func:`write_citations` reproduces the same records.

    Raises:
        SchemaMismatch: when the header lacks page_id / page_title / doi.
        OSError: when the stream is unreadable.
    """
    rows = _open_rows(stream)
    try:
        header = next(rows)
    except StopIteration:
        raise SchemaMismatch("empty stream: no header row")
    idx = _header_index(header, ("page_id", "page_title", "doi"))
    return _parse_citation_rows(rows, idx)


def _parse_citation_rows(
    rows: Iterable[Sequence[str]], idx: Mapping[str, int]
) -> tuple[list[CitationRecord], ParseReport]:
    """Fold body rows into records. Pure per-row, so callers may shard row
    ranges and merge with ``+``; results are identical for any split."""
    width = max(idx.values()) + 1
    records: list[CitationRecord] = []
    report = ParseReport()
    for row in rows:
        report.read += 1
        if len(row) < width:
            report.dropped += 1
            continue
        page_id = row[idx["page_id"]].strip()
        if not page_id:
            report.dropped += 1
            continue
        try:
            doi = normalize_doi(row[idx["doi"]])
        except MalformedDoi:
            report.dropped += 1
            continue
        records.append(CitationRecord(page_id, row[idx["page_title"]], doi))
        report.kept += 1
    return records, report


def write_citations(records: Iterable[CitationRecord], path: str) -> None:
    """Serialize records back to the citations TSV format."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, dialect="excel-tab")
        writer.writerow(["page_id", "page_title", "doi"])
        for rec in records:
            writer.writerow([rec.page_id, rec.page_title, rec.doi])


@dataclass
class MembershipTable:
    """Entity -> fractional category weights under one labeling scheme.

    Each entity's distinct categories receive weight 1/k; entities known to
    the universe but absent from the source get ``{"Missing": 1.0}``. Weights
    per entity always sum to 1 within ``WEIGHT_SUM_TOL``.
    """

    scheme: str
    weights: dict[str, dict[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in MEMBERSHIP_SCHEMES:
            raise SchemaMismatch(
                f"unknown scheme {self.scheme!r}; expected one of {MEMBERSHIP_SCHEMES}"
            )
        for entity, wts in self.weights.items():
            total = math.fsum(wts.values())
            if abs(total - 1.0) > WEIGHT_SUM_TOL:
                raise SchemaMismatch(
                    f"weights for entity {entity!r} sum to {total!r}, expected 1"
                )

    def __len__(self) -> int:
        return len(self.weights)

    def __contains__(self, entity: str) -> bool:
        return entity in self.weights

    def get(self, entity: str) -> dict[str, float] | None:
        return self.weights.get(entity)

    def weights_or_missing(self, entity: str) -> dict[str, float]:
        """Weights for an entity, treating unknown entities as Missing."""
        return self.weights.get(entity) or {MISSING_CATEGORY: 1.0}

    def category_mass(self) -> dict[str, float]:
        """Total fractional mass per category across all entities."""
        acc: dict[str, list[float]] = {}
        for wts in self.weights.values():
            for cat, w in wts.items():
                acc.setdefault(cat, []).append(w)
        return {cat: math.fsum(parts) for cat, parts in sorted(acc.items())}


def fractional_weights(categories: Iterable[str]) -> dict[str, float]:
    """Equal 1/k split over the distinct categories, sorted for determinism."""
    cats = sorted(set(categories))
    if not cats:
        return {MISSING_CATEGORY: 1.0}
    w = 1.0 / len(cats)
    return {cat: w for cat in cats}


def load_memberships(
    stream: str | IO[str],
    scheme: str,
    universe: Iterable[str] | None = None,
) -> MembershipTable:
    """Load a (entity_id, category_id) TSV into a MembershipTable.

    Duplicate (entity, category) rows collapse; each entity's k distinct
    categories get weight 1/k. Entities listed in ``universe`` but absent
    from the stream receive ``{"Missing": 1.0}``.
    """
    rows = _open_rows(stream)
    try:
        header = next(rows)
    except StopIteration:
        raise SchemaMismatch("empty stream: no header row")
    idx = _header_index(header, ("entity_id", "category_id"))
    by_entity: dict[str, set[str]] = {}
    for row in rows:
        if len(row) < max(idx.values()) + 1:
            raise SchemaMismatch(f"short membership row: {row!r}")
        entity = row[idx["entity_id"]].strip()
        category = row[idx["category_id"]].strip()
        if not entity or not category:
            raise SchemaMismatch(f"empty entity or category in row: {row!r}")
        by_entity.setdefault(entity, set()).add(category)

    weights = {entity: fractional_weights(cats) for entity, cats in by_entity.items()}
    if universe is not None:
        for entity in universe:
            if entity not in weights:
                weights[entity] = {MISSING_CATEGORY: 1.0}
    return MembershipTable(scheme=scheme, weights=weights)


def load_universe(path: str) -> list[str]:
    """Read a newline-separated entity id list (blank lines skipped)."""
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


@dataclass(frozen=True)
class WorkRecord:
    """Bibliometric attributes of one cited work (absent fields are None)."""

    doi: str
    publication_year: int | None = None
    journal_name: str | None = None
    oa_status: str = "missing"
    citations_total: int | None = None
    citations_recent: int | None = None

    def __post_init__(self):
        if self.oa_status not in OA_STATUSES:
            raise SchemaMismatch(f"bad oa_status {self.oa_status!r} for {self.doi}")
        if (
            self.citations_total is not None
            and self.citations_recent is not None
            and self.citations_recent > self.citations_total
        ):
            raise SchemaMismatch(
                f"recent citations exceed total for {self.doi}: "
                f"{self.citations_recent} > {self.citations_total}"
            )


WORKS_COLUMNS = (
    "doi",
    "publication_year",
    "journal_name",
    "oa_status",
    "citations_total",
    "citations_recent",
)


def _opt_int(text: str) -> int | None:
    text = text.strip()
    return int(text) if text else None


def load_works(stream: str | IO[str]) -> tuple[dict[str, WorkRecord], ParseReport]:
    """Load per-work metadata keyed by DOI, dropping and counting bad rows."""
    rows = _open_rows(stream)
    try:
        header = next(rows)
    except StopIteration:
        raise SchemaMismatch("empty stream: no header row")
    idx = _header_index(header, WORKS_COLUMNS)
    works: dict[str, WorkRecord] = {}
    report = ParseReport()
    for row in rows:
        report.read += 1
        if len(row) < len(WORKS_COLUMNS):
            report.dropped += 1
            continue
        try:
            doi = normalize_doi(row[idx["doi"]])
            rec = WorkRecord(
                doi=doi,
                publication_year=_opt_int(row[idx["publication_year"]]),
                journal_name=row[idx["journal_name"]].strip() or None,
                oa_status=row[idx["oa_status"]].strip() or "missing",
                citations_total=_opt_int(row[idx["citations_total"]]),
                citations_recent=_opt_int(row[idx["citations_recent"]]),
            )
        except (MalformedDoi, SchemaMismatch, ValueError):
            report.dropped += 1
            continue
        works[doi] = rec
        report.kept += 1
    return works, report


def write_works(works: Iterable[WorkRecord], path: str) -> None:
    """Serialize work records to the works TSV format (absent = empty field)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, dialect="excel-tab")
        writer.writerow(WORKS_COLUMNS)
        for rec in works:
            writer.writerow(
                [
                    rec.doi,
                    "" if rec.publication_year is None else rec.publication_year,
                    rec.journal_name or "",
                    rec.oa_status,
                    "" if rec.citations_total is None else rec.citations_total,
                    "" if rec.citations_recent is None else rec.citations_recent,
                ]
            )


def write_memberships(table: MembershipTable, path: str) -> None:
    """Serialize a membership table back to (entity_id, category_id) rows.

    Weights are reconstructible (1/k over the listed categories); entities
    whose only category is Missing are written as-is so reloading with the
    same universe is lossless.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, dialect="excel-tab")
        writer.writerow(["entity_id", "category_id"])
        for entity in sorted(table.weights):
            for category in sorted(table.weights[entity]):
                writer.writerow([entity, category])
