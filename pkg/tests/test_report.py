import math
import random

import numpy as np
import pytest

from citemap.errors import EmptyInputError, SchemaMismatch
from citemap.ingest import CitationRecord, MembershipTable, WorkRecord
from citemap.report import (
    citation_stats,
    field_table,
    flow_matrix,
    oa_share,
    reaggregate_minor_to_major,
    share_percent,
    top_journals,
    top_source_groups,
    year_histogram,
)


def rec(page, doi):
    return CitationRecord(page, f"Title {page}", doi)


def table(scheme, weights):
    return MembershipTable(scheme=scheme, weights=weights)


class TestFieldTable:
    def test_linearity_of_fractional_counting(self):
        citations = [rec("p1", "10.1000/w"), rec("p2", "10.1000/w"), rec("p3", "10.1000/w")]
        fields = table("for_major", {"10.1000/w": {"06": 0.5, "11": 0.5}})
        ft = field_table(citations, fields, level="major")
        rows = ft.row_map()
        assert rows["06"].citations_fractional == pytest.approx(1.5)
        assert rows["11"].citations_fractional == pytest.approx(1.5)
        assert rows["06"].works_fractional == pytest.approx(0.5)
        assert rows["11"].works_fractional == pytest.approx(0.5)

    def test_no_metadata_all_mass_missing(self):
        citations = [rec("p1", "10.1000/a"), rec("p2", "10.1000/b")]
        ft = field_table(citations, table("for_major", {}), level="major")
        assert [r.category for r in ft.rows] == ["Missing"]
        assert ft.rows[0].citations_fractional == pytest.approx(2.0)
        assert ft.rows[0].works_fractional == pytest.approx(2.0)

    def test_missing_row_sorts_last(self):
        citations = [rec("p1", "10.1000/a"), rec("p1", "10.1000/b")]
        fields = table("for_major", {"10.1000/a": {"06": 1.0}})
        ft = field_table(citations, fields, level="major")
        assert [r.category for r in ft.rows] == ["06", "Missing"]

    def test_conservation_on_synthetic_corpus(self):
        rng = random.Random(42)
        minors = ["0604", "0601", "1103", "1117", "2103", "0403"]
        works = [f"10.1000/w{i:04d}" for i in range(800)]
        minor_weights = {}
        for doi in works:
            if rng.random() < 0.1:
                continue
            chosen = sorted(set(rng.choice(minors) for _ in range(rng.randint(1, 3))))
            minor_weights[doi] = {m: 1.0 / len(chosen) for m in chosen}
        minor_table = table("for_minor", minor_weights)
        major_table = table(
            "for_major",
            {
                doi: {
                    major: sum(w for m, w in wts.items() if m[:2] == major)
                    for major in {m[:2] for m in wts}
                }
                for doi, wts in minor_weights.items()
            },
        )
        citations = [rec(f"p{rng.randint(0, 300)}", rng.choice(works)) for _ in range(10_000)]

        ft_minor = field_table(citations, minor_table, level="minor")
        ft_major = field_table(citations, major_table, level="major")
        for ft, total_works in ((ft_minor, None), (ft_major, None)):
            assert math.fsum(r.citations_fractional for r in ft.rows) == pytest.approx(
                len(citations), abs=1e-9
            )
            assert math.fsum(r.works_fractional for r in ft.rows) == pytest.approx(
                ft.total_works, abs=1e-9
            )
        # minor -> major prefix re-aggregation equals the major-level table
        re_major = reaggregate_minor_to_major(ft_minor)
        got = re_major.row_map()
        want = ft_major.row_map()
        assert set(got) == set(want)
        for cat in want:
            assert got[cat].citations_fractional == pytest.approx(
                want[cat].citations_fractional, abs=1e-9
            )
            assert got[cat].works_fractional == pytest.approx(
                want[cat].works_fractional, abs=1e-9
            )

    def test_csv_roundtrip_full_precision(self, tmp_path):
        citations = [rec("p1", "10.1000/w")]
        fields = table("for_major", {"10.1000/w": {"06": 1 / 3, "11": 2 / 3}})
        ft = field_table(citations, fields)
        path = tmp_path / "ft.csv"
        ft.to_csv(str(path))
        lines = path.read_text().splitlines()
        assert lines[0].startswith("category,")
        assert repr(1 / 3) in lines[1] + lines[2]

    def test_format_renders_one_decimal(self):
        citations = [rec("p1", "10.1000/w"), rec("p2", "10.1000/w")]
        fields = table("for_major", {"10.1000/w": {"06": 0.5, "11": 0.5}})
        text = field_table(citations, fields).format()
        assert "(50.0%)" in text

    def test_bad_level(self):
        with pytest.raises(SchemaMismatch):
            field_table([], table("for_major", {}), level="mega")


class TestTopJournals:
    def test_counts_and_ordering(self):
        citations = [rec("p1", "10.1000/d1"), rec("p2", "10.1000/d1"), rec("p1", "10.1000/d2")]
        works = {
            "10.1000/d1": WorkRecord("10.1000/d1", journal_name="Nature"),
            "10.1000/d2": WorkRecord("10.1000/d2", journal_name="Science"),
        }
        assert top_journals(citations, works) == [("Nature", 2), ("Science", 1)]

    def test_unknown_journal_grouped(self):
        citations = [rec("p1", "10.1000/d1"), rec("p1", "10.1000/d2")]
        works = {"10.1000/d1": WorkRecord("10.1000/d1")}
        assert top_journals(citations, works) == [("(unknown)", 2)]

    def test_ties_lexicographic(self):
        citations = [rec("p1", "10.1000/d1"), rec("p1", "10.1000/d2")]
        works = {
            "10.1000/d1": WorkRecord("10.1000/d1", journal_name="Zeta"),
            "10.1000/d2": WorkRecord("10.1000/d2", journal_name="Alpha"),
        }
        assert top_journals(citations, works) == [("Alpha", 1), ("Zeta", 1)]


class TestCitationStats:
    def work(self, doi, total=None, recent=None):
        return WorkRecord(doi, citations_total=total, citations_recent=recent)

    def test_mean_median(self):
        works = [self.work(f"10.1000/{i}", t, 0) for i, t in enumerate([1, 2, 3])]
        stats = citation_stats(works)
        assert stats["total"].mean == 2 and stats["total"].median == 2

    def test_share_zero(self):
        works = [self.work(f"10.1000/{i}", t, 0) for i, t in enumerate([0, 0, 5])]
        assert citation_stats(works)["total"].share_zero == pytest.approx(2 / 3)

    def test_missing_counted(self):
        works = [self.work("10.1000/a", 5, 1), self.work("10.1000/b")]
        stats = citation_stats(works)
        assert stats["total"].n == 1 and stats["total"].n_missing == 1

    def test_empty_raises(self):
        with pytest.raises(EmptyInputError):
            citation_stats([self.work("10.1000/a")])

    def test_matches_sorted_array_oracle(self):
        rng = np.random.default_rng(3)
        counts = np.floor(rng.lognormal(3, 1.5, 10_000)).astype(int)
        works = [self.work(f"10.1000/{i}", int(c), 0) for i, c in enumerate(counts)]
        stats = citation_stats(works)["total"]
        s = np.sort(counts)
        assert stats.mean == pytest.approx(float(s.mean()))
        assert stats.median == pytest.approx(float(np.median(s)))
        assert stats.max == int(s[-1]) and stats.min == int(s[0])
        for k in (10, 100, 1000):
            assert stats.share_below[k] == pytest.approx(float((s < k).mean()))


class TestOaShare:
    def test_trivial_per_work(self):
        works = {
            f"10.1000/{i}": WorkRecord(f"10.1000/{i}", oa_status=status)
            for i, status in enumerate(["open", "closed", "closed", "missing"])
        }
        shares = oa_share(works, "per_work")
        assert shares == {"open": 0.25, "closed": 0.5, "missing": 0.25}
        assert math.fsum(shares.values()) == pytest.approx(1.0)

    def test_paper_arithmetic(self):
        assert 686_952 + 942_885 + 75_248 == 1_705_085
        assert round(686_952 / 1_705_085 * 100) == 40  # "41%" in per-work basis
        assert round(686_952 / (686_952 + 942_885 + 75_248) * 100) == 40

    def test_dual_basis_against_hand_oracles(self):
        rng = random.Random(12)
        works = {}
        for i in range(200):
            status = rng.choice(["open", "closed", "closed", "missing"])
            works[f"10.1000/w{i}"] = WorkRecord(f"10.1000/w{i}", oa_status=status)
        citations = [
            rec(f"p{rng.randint(0, 50)}", f"10.1000/w{rng.randint(0, 249)}")
            for _ in range(2000)
        ]
        per_work = oa_share(works, "per_work")
        tally = {"open": 0, "closed": 0, "missing": 0}
        for w in works.values():
            tally[w.oa_status] += 1
        for status, count in tally.items():
            assert per_work[status] == pytest.approx(count / len(works))

        per_cit = oa_share(works, "per_citation", citations)
        tally = {"open": 0, "closed": 0, "missing": 0}
        for c in citations:
            w = works.get(c.doi)
            tally[w.oa_status if w else "missing"] += 1
        for status, count in tally.items():
            assert per_cit[status] == pytest.approx(count / len(citations))

    def test_per_citation_needs_citations(self):
        with pytest.raises(SchemaMismatch):
            oa_share({}, "per_citation")


class TestYearHistogram:
    def work(self, doi, year):
        return WorkRecord(doi, publication_year=year)

    def test_out_of_range_binned(self):
        works = [self.work("10.1000/a", 2001), self.work("10.1000/b", 2001),
                 self.work("10.1000/c", 1990)]
        hist = year_histogram(works, 2000, 2020)
        assert hist.counts[2001] == 2
        assert hist.underflow == 1 and hist.overflow == 0

    def test_empty_input_zero_bins(self):
        hist = year_histogram([], 2000, 2005)
        assert all(v == 0 for v in hist.counts.values())
        assert len(hist.counts) == 6

    def test_matches_counting_oracle(self):
        rng = random.Random(8)
        years = [rng.randint(1980, 2030) if rng.random() > 0.1 else None for _ in range(2000)]
        works = [self.work(f"10.1000/{i}", y) for i, y in enumerate(years)]
        hist = year_histogram(works, 2000, 2020)
        for year in range(2000, 2021):
            assert hist.counts[year] == sum(1 for y in years if y == year)
        assert hist.underflow == sum(1 for y in years if y is not None and y < 2000)
        assert hist.overflow == sum(1 for y in years if y is not None and y > 2020)
        assert hist.missing == sum(1 for y in years if y is None)


class TestFlowMatrix:
    def test_outer_product_single_citation(self):
        src = table("ores_topic", {"p1": {"STEM": 1.0}})
        tgt = table("for_major", {"10.1000/w": {"06": 0.5, "11": 0.5}})
        flow = flow_matrix([rec("p1", "10.1000/w")], src, tgt)
        assert flow.source_groups == ["STEM"]
        assert flow.target_fields == ["06", "11"]
        assert flow.matrix.tolist() == [[0.5, 0.5]]

    def test_split_page_whole_work(self):
        src = table("ores_topic", {"p1": {"Culture": 0.5, "History": 0.5}})
        tgt = table("for_major", {"10.1000/w": {"21": 1.0}})
        flow = flow_matrix([rec("p1", "10.1000/w")], src, tgt)
        assert flow.matrix.tolist() == [[0.5], [0.5]]

    def test_mass_conservation_and_marginal_oracle(self):
        rng = random.Random(31)
        topics = ["STEM", "Culture", "History", "Geography"]
        fields = ["06", "11", "02", "21"]
        src_weights = {}
        for i in range(60):
            chosen = sorted(set(rng.choice(topics) for _ in range(rng.randint(1, 2))))
            src_weights[f"p{i}"] = {t: 1.0 / len(chosen) for t in chosen}
        tgt_weights = {}
        for j in range(80):
            chosen = sorted(set(rng.choice(fields) for _ in range(rng.randint(1, 3))))
            tgt_weights[f"10.1000/w{j}"] = {f: 1.0 / len(chosen) for f in chosen}
        src = table("ores_topic", src_weights)
        tgt = table("for_major", tgt_weights)
        citations = [
            rec(f"p{rng.randint(0, 69)}", f"10.1000/w{rng.randint(0, 89)}")
            for _ in range(500)
        ]
        flow = flow_matrix(citations, src, tgt)
        assert flow.total == pytest.approx(500.0, abs=1e-9)

        # independent per-citation accumulation oracle
        cell_oracle: dict[tuple[str, str], float] = {}
        for c in citations:
            for g, gw in src.weights_or_missing(c.page_id).items():
                for f, fw in tgt.weights_or_missing(c.doi).items():
                    cell_oracle[(g, f)] = cell_oracle.get((g, f), 0.0) + gw * fw
        for (g, f), v in cell_oracle.items():
            i, j = flow.source_groups.index(g), flow.target_fields.index(f)
            assert flow.matrix[i, j] == pytest.approx(v, abs=1e-9)

        # marginals equal one-dimensional tallies
        row_oracle: dict[str, float] = {}
        for c in citations:
            for g, gw in src.weights_or_missing(c.page_id).items():
                row_oracle[g] = row_oracle.get(g, 0.0) + gw
        for g, total in flow.row_marginals().items():
            assert total == pytest.approx(row_oracle[g], abs=1e-9)

    def test_top_k_filter(self):
        src = table(
            "wikiproject",
            {
                "p1": {"Big": 1.0},
                "p2": {"Big": 1.0},
                "p3": {"Small": 1.0},
            },
        )
        tgt = table("for_major", {"10.1000/w": {"06": 1.0}})
        citations = [rec(p, "10.1000/w") for p in ("p1", "p2", "p3")]
        assert top_source_groups(src, 1) == ["Big"]
        flow = flow_matrix(citations, src, tgt, top_k=1)
        assert flow.source_groups == ["Big"]
        assert flow.total == pytest.approx(2.0)

    def test_top_k_ties_lexicographic(self):
        src = table("wikiproject", {"p1": {"A": 1.0}, "p2": {"B": 1.0}})
        assert top_source_groups(src, 1) == ["A"]


class TestSharePercent:
    def test_rounding(self):
        assert share_percent(1_050_686, 1_157_571) == 91
        assert share_percent(257_452, 405_358) == 64
        assert share_percent(1, 3, digits=1) == 33.3
