import io
import math
import re
from urllib.parse import unquote

import pytest

from citemap.errors import MalformedDoi, SchemaMismatch
from citemap.ingest import (
    CitationRecord,
    MembershipTable,
    WorkRecord,
    fractional_weights,
    load_memberships,
    load_works,
    normalize_doi,
    parse_citations,
    write_citations,
    write_memberships,
    write_works,
)


def tsv(*rows):
    return io.StringIO("\n".join("\t".join(r) for r in rows) + "\n")


class TestNormalizeDoi:
    def test_url_prefix_and_case_folding(self):
        assert normalize_doi("https://doi.org/10.1038/227680A0") == "10.1038/227680a0"

    def test_identity(self):
        assert normalize_doi("10.1000/xyz") == "10.1000/xyz"

    def test_rejects_junk(self):
        with pytest.raises(MalformedDoi):
            normalize_doi("not-a-doi")

    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("http://dx.doi.org/10.1000/abc", "10.1000/abc"),
            ("  10.1000/abc  ", "10.1000/abc"),
            ("10.1000/a%2Fb", "10.1000/a/b"),
            ("10.1000/a%252Fb", "10.1000/a/b"),  # double-encoded
            ("HTTPS://DOI.ORG/10.1000/ABC", "10.1000/abc"),
        ],
    )
    def test_normal_forms(self, raw, expected):
        assert normalize_doi(raw) == expected

    @pytest.mark.parametrize(
        "raw", ["", "10.123/x", "11.1234/x", "10.1234", "doi.org/10.1/x"]
    )
    def test_malformed(self, raw):
        with pytest.raises(MalformedDoi):
            normalize_doi(raw)

    def test_idempotent_over_sampled_inputs(self, rng):
        corpus = [
            "10.1038/227680A0",
            "https://doi.org/10.1145/3442381.3450136",
            "10.1000/a%25b",
            "10.1000/a%2525b",
            "10.5555/weird(parens)[brackets]",
            "10.1234/UPPER.lower.123",
        ]
        corpus += [f"10.{rng.randint(1000, 999999999)}/x{rng.random()}" for _ in range(200)]
        for raw in corpus:
            once = normalize_doi(raw)
            assert normalize_doi(once) == once


class TestParseCitations:
    def test_drops_and_counts_bad_rows(self):
        stream = tsv(
            ("page_id", "page_title", "doi"),
            ("p1", "A", "10.1000/x"),
            ("p2", "B", "bad"),
            ("p3", "C", "10.2000/y"),
        )
        records, report = parse_citations(stream)
        assert [r.doi for r in records] == ["10.1000/x", "10.2000/y"]
        assert (report.read, report.kept, report.dropped) == (3, 2, 1)

    def test_empty_body(self):
        records, report = parse_citations(tsv(("page_id", "page_title", "doi")))
        assert records == []
        assert (report.read, report.kept, report.dropped) == (0, 0, 0)

    def test_missing_columns(self):
        with pytest.raises(SchemaMismatch):
            parse_citations(tsv(("page_id", "doi"), ("p1", "10.1000/x")))

    def test_requires_header(self):
        with pytest.raises(SchemaMismatch):
            parse_citations(io.StringIO(""))

    def test_column_order_and_extras_tolerated(self):
        stream = tsv(
            ("doi", "extra", "page_title", "page_id"),
            ("10.1000/x", "zzz", "A", "p1"),
        )
        records, _ = parse_citations(stream)
        assert records == [CitationRecord("p1", "A", "10.1000/x")]

    def test_duplicates_retained(self):
        stream = tsv(
            ("page_id", "page_title", "doi"),
            ("p1", "A", "10.1000/x"),
            ("p1", "A", "10.1000/x"),
        )
        records, report = parse_citations(stream)
        assert len(records) == 2 and report.kept == 2

    def test_kept_count_matches_independent_validator(self, rng):
        # Oracle: a separate line validator with its own normalization logic.
        rows = [("page_id", "page_title", "doi")]
        for i in range(10_000):
            if rng.random() < 0.05:
                doi = rng.choice(["oops", "10.12/", "10./x", "doi:garbage", ""])
            else:
                doi = f"10.{rng.randint(1000, 99999)}/item{i}"
            rows.append((f"p{i}", f"T{i}", doi))

        doi_re = re.compile(r"10\.\d{4,9}/.+")

        def oracle_valid(raw):
            s = re.sub(r"^https?://(dx\.)?doi\.org/", "", raw.strip(), flags=re.I)
            prev = None
            while prev != s:
                prev, s = s, unquote(s)
            return doi_re.fullmatch(s.strip().lower()) is not None

        expected_kept = sum(1 for r in rows[1:] if oracle_valid(r[2]))
        records, report = parse_citations(tsv(*rows))
        assert report.kept == len(records) == expected_kept
        assert report.read == 10_000
        assert report.dropped == 10_000 - expected_kept

    def test_reparse_of_serialized_output_is_identity(self, rng, tmp_path):
        rows = [("page_id", "page_title", "doi")]
        rows += [
            (f"p{i}", f"Title {i}", f"10.{1000 + i}/X{i}") for i in range(50)
        ]
        records, _ = parse_citations(tsv(*rows))
        path = tmp_path / "citations.tsv"
        write_citations(records, str(path))
        records2, report2 = parse_citations(str(path))
        assert records2 == records
        assert report2.dropped == 0

    def test_shard_merge_equals_single_parse(self):
        header = ("page_id", "page_title", "doi")
        body = [(f"p{i}", f"T{i}", f"10.1000/d{i}" if i % 7 else "bad") for i in range(100)]
        full_records, full_report = parse_citations(tsv(header, *body))
        rec_a, rep_a = parse_citations(tsv(header, *body[:37]))
        rec_b, rep_b = parse_citations(tsv(header, *body[37:]))
        assert rec_a + rec_b == full_records
        assert (rep_a + rep_b).as_dict() == full_report.as_dict()


class TestMemberships:
    def test_equal_split(self):
        table = load_memberships(
            tsv(("entity_id", "category_id"), ("e1", "06"), ("e1", "11")), "for_major"
        )
        assert table.get("e1") == {"06": 0.5, "11": 0.5}

    def test_universe_missing(self):
        table = load_memberships(
            tsv(("entity_id", "category_id"), ("e1", "06")),
            "for_major",
            universe=["e1", "e2"],
        )
        assert table.get("e2") == {"Missing": 1.0}

    def test_third_weights_sum_to_one(self):
        table = load_memberships(
            tsv(
                ("entity_id", "category_id"),
                ("e3", "0604"),
                ("e3", "0601"),
                ("e3", "1103"),
            ),
            "for_minor",
        )
        weights = table.get("e3")
        assert set(weights) == {"0604", "0601", "1103"}
        assert abs(math.fsum(weights.values()) - 1.0) <= 1e-9

    def test_duplicate_rows_collapse(self):
        table = load_memberships(
            tsv(("entity_id", "category_id"), ("e1", "06"), ("e1", "06")), "for_major"
        )
        assert table.get("e1") == {"06": 1.0}

    def test_all_entities_sum_to_one(self, rng):
        rows = [("entity_id", "category_id")]
        for i in range(300):
            for _ in range(rng.randint(1, 7)):
                rows.append((f"e{i}", f"c{rng.randint(0, 9)}"))
        table = load_memberships(tsv(*rows), "wikiproject")
        for entity, weights in table.weights.items():
            assert abs(math.fsum(weights.values()) - 1.0) <= 1e-9

    def test_unknown_scheme_rejected(self):
        with pytest.raises(SchemaMismatch):
            MembershipTable(scheme="nope", weights={})

    def test_weights_or_missing_for_unknown_entity(self):
        table = load_memberships(tsv(("entity_id", "category_id"), ("e1", "06")), "for_major")
        assert table.weights_or_missing("ghost") == {"Missing": 1.0}

    def test_roundtrip(self, tmp_path):
        table = load_memberships(
            tsv(("entity_id", "category_id"), ("e1", "06"), ("e1", "11"), ("e2", "02")),
            "for_major",
            universe=["e1", "e2", "e3"],
        )
        path = tmp_path / "m.tsv"
        write_memberships(table, str(path))
        table2 = load_memberships(str(path), "for_major")
        assert table2.weights == table.weights

    def test_fractional_weights_empty_is_missing(self):
        assert fractional_weights([]) == {"Missing": 1.0}


class TestWorks:
    def test_roundtrip(self, tmp_path):
        works = [
            WorkRecord("10.1000/a", 1970, "Nature", "closed", 214886, 6111),
            WorkRecord("10.1000/b", None, None, "missing", None, None),
            WorkRecord("10.1000/c", 2016, "CVPR", "open", 100, 0),
        ]
        path = tmp_path / "works.tsv"
        write_works(works, str(path))
        loaded, report = load_works(str(path))
        assert report.kept == 3 and report.dropped == 0
        assert loaded["10.1000/a"] == works[0]
        assert loaded["10.1000/b"] == works[1]

    def test_recent_exceeding_total_dropped(self):
        stream = tsv(
            (
                "doi",
                "publication_year",
                "journal_name",
                "oa_status",
                "citations_total",
                "citations_recent",
            ),
            ("10.1000/a", "2000", "J", "open", "5", "9"),
            ("10.1000/b", "2000", "J", "open", "9", "5"),
        )
        loaded, report = load_works(stream)
        assert list(loaded) == ["10.1000/b"]
        assert report.dropped == 1

    def test_record_invariant(self):
        with pytest.raises(SchemaMismatch):
            WorkRecord("10.1000/a", oa_status="sorta-open")
        with pytest.raises(SchemaMismatch):
            WorkRecord("10.1000/a", citations_total=1, citations_recent=2)
