import math

import pytest

from citemap.enrich import DiskCache, ServiceConfig, TopicsClient, WorksClient
from citemap.errors import TransportError, UpstreamSchemaError
from mockserver import MockService


def make_topics_client(server, tmp_path, **overrides):
    config = ServiceConfig(
        base_url=server.base_url,
        backoff_base=0.0,
        backoff_jitter=0.0,
        **overrides,
    )
    return TopicsClient(config, DiskCache(str(tmp_path / "cache"), "topics"))


def make_works_client(server, tmp_path, **overrides):
    config = ServiceConfig(
        base_url=server.base_url,
        backoff_base=0.0,
        backoff_jitter=0.0,
        **overrides,
    )
    return WorksClient(config, DiskCache(str(tmp_path / "cache"), "works"))


class TestTopics:
    def test_batch_with_unknown_page(self, tmp_path):
        with MockService(topics={"p1": ["STEM.Biology"], "p2": ["Culture.Arts"]}) as srv:
            client = make_topics_client(srv, tmp_path)
            table, report = client.fetch_topics(["p1", "p2", "p3"])
        assert table.get("p1") == {"STEM.Biology": 1.0}
        assert table.get("p3") == {"Missing": 1.0}
        assert report.unmatched == 1

    def test_multi_topic_fractionalized(self, tmp_path):
        with MockService(topics={"p1": ["STEM.Biology", "STEM.Medicine"]}) as srv:
            client = make_topics_client(srv, tmp_path)
            table, _ = client.fetch_topics(["p1"])
        assert table.get("p1") == {"STEM.Biology": 0.5, "STEM.Medicine": 0.5}

    def test_cache_hit_makes_no_network_call(self, tmp_path):
        with MockService(topics={"p1": ["STEM.Biology"]}) as srv:
            client = make_topics_client(srv, tmp_path)
            client.fetch_topics(["p1"])
            first_count = srv.request_count
            table, report = client.fetch_topics(["p1"])
            assert srv.request_count == first_count  # zero new requests
        assert report.cache_hits == 1 and report.http_requests == 0
        assert table.get("p1") == {"STEM.Biology": 1.0}

    def test_hundred_pages_match_fixture_oracle(self, tmp_path):
        fixtures = {
            f"p{i:03d}": [f"T{i % 5}"] + (["Extra"] if i % 7 == 0 else [])
            for i in range(0, 100, 2)  # half the pages are known upstream
        }
        with MockService(topics=fixtures) as srv:
            client = make_topics_client(srv, tmp_path, batch_size=10)
            table, report = client.fetch_topics([f"p{i:03d}" for i in range(100)])
        # oracle: direct transform of the fixture map
        for i in range(100):
            page = f"p{i:03d}"
            cats = fixtures.get(page)
            if cats:
                expected = {c: 1.0 / len(set(cats)) for c in set(cats)}
            else:
                expected = {"Missing": 1.0}
            assert table.get(page) == expected
        assert report.http_requests == 10  # all 100 fetched in batches of 10
        for weights in table.weights.values():
            assert abs(math.fsum(weights.values()) - 1.0) <= 1e-9

    def test_warm_cache_rerun_identical_and_offline(self, tmp_path):
        fixtures = {f"p{i}": [f"T{i % 3}"] for i in range(20)}
        ids = [f"p{i}" for i in range(25)]
        with MockService(topics=fixtures) as srv:
            client = make_topics_client(srv, tmp_path)
            table1, _ = client.fetch_topics(ids)
            total = srv.request_count
            table2, report2 = client.fetch_topics(ids)
            assert srv.request_count == total
        assert report2.http_requests == 0
        assert table1.weights == table2.weights


class TestWorks:
    def test_unmatched_doi_becomes_missing_record(self, tmp_path):
        with MockService(works={}) as srv:
            client = make_works_client(srv, tmp_path)
            works, report = client.fetch_works(["10.1000/ghost"])
        record = works["10.1000/ghost"]
        assert record.oa_status == "missing"
        assert record.publication_year is None
        assert record.citations_total is None
        assert report.unmatched == 1

    def test_matched_fields_copied(self, tmp_path):
        payload = {
            "publication_year": 1970,
            "journal_name": "Nature",
            "oa_status": "closed",
            "citations_total": 214886,
            "citations_recent": 6111,
        }
        with MockService(works={"10.1000/laemmli": payload}) as srv:
            client = make_works_client(srv, tmp_path)
            works, _ = client.fetch_works(["10.1000/laemmli"])
        record = works["10.1000/laemmli"]
        assert record.publication_year == 1970
        assert record.journal_name == "Nature"
        assert record.citations_total == 214886

    def test_batch_of_fifty_with_two_matched(self, tmp_path):
        fixtures = {
            "10.1000/w0001": {"publication_year": 2001, "oa_status": "open"},
            "10.1000/w0002": {"publication_year": 2002, "oa_status": "closed"},
        }
        dois = [f"10.1000/w{i:04d}" for i in range(1, 51)]
        with MockService(works=fixtures) as srv:
            client = make_works_client(srv, tmp_path)
            works, report = client.fetch_works(dois)
        populated = [d for d, w in works.items() if w.publication_year is not None]
        assert sorted(populated) == ["10.1000/w0001", "10.1000/w0002"]
        assert report.unmatched == 48
        assert len(works) == 50


class TestRetriesAndErrors:
    def test_transient_failures_retried(self, tmp_path):
        with MockService(topics={"p1": ["T"]}) as srv:
            srv.fail_next = 2
            client = make_topics_client(srv, tmp_path, max_attempts=3)
            table, _ = client.fetch_topics(["p1"])
            assert srv.request_count == 3
        assert table.get("p1") == {"T": 1.0}

    def test_retries_exhausted(self, tmp_path):
        with MockService(topics={"p1": ["T"]}) as srv:
            srv.fail_next = 5
            client = make_topics_client(srv, tmp_path, max_attempts=3)
            with pytest.raises(TransportError) as excinfo:
                client.fetch_topics(["p1"])
            assert srv.request_count == 3
        assert excinfo.value.retryable

    def test_parseable_error_body_not_retried(self, tmp_path):
        with MockService(topics={"p1": ["T"]}) as srv:
            srv.reject_next = 1
            client = make_topics_client(srv, tmp_path, max_attempts=3)
            with pytest.raises(TransportError) as excinfo:
                client.fetch_topics(["p1"])
            assert srv.request_count == 1  # no retry
        assert not excinfo.value.retryable

    def test_contract_violation_raises_upstream_schema(self, tmp_path):
        with MockService() as srv:
            srv.garbage_next = 1
            client = make_topics_client(srv, tmp_path)
            with pytest.raises(UpstreamSchemaError):
                client.fetch_topics(["p1"])


class TestRateLimit:
    def test_sliding_window_respected(self, tmp_path):
        fixtures = {f"p{i}": ["T"] for i in range(12)}
        with MockService(topics=fixtures) as srv:
            client = make_topics_client(
                srv, tmp_path, batch_size=1, rate_limit=4, rate_window=0.25
            )
            client.fetch_topics(sorted(fixtures))
            observed = srv.max_requests_in_window(0.25)
        # Allowing +1 slack for timestamping on opposite sides of the wire.
        assert observed <= 5
        assert srv.request_count == 12

    def test_no_limit_fires_freely(self, tmp_path):
        fixtures = {f"p{i}": ["T"] for i in range(8)}
        with MockService(topics=fixtures) as srv:
            client = make_topics_client(srv, tmp_path, batch_size=1)
            client.fetch_topics(sorted(fixtures))
            assert srv.request_count == 8


class TestAuth:
    def test_token_from_environment_sent_as_bearer(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CITEMAP_TEST_TOKEN", "s3cret")
        with MockService(topics={"p1": ["T"]}) as srv:
            client = make_topics_client(srv, tmp_path, token_env="CITEMAP_TEST_TOKEN")
            client.fetch_topics(["p1"])
            assert srv.seen_auth == ["Bearer s3cret"]

    def test_no_token_env_sends_no_header(self, tmp_path):
        with MockService(topics={"p1": ["T"]}) as srv:
            client = make_topics_client(srv, tmp_path)
            client.fetch_topics(["p1"])
            assert srv.seen_auth == [None]


class TestCacheLayout:
    def test_one_file_per_key_under_shard_dirs(self, tmp_path):
        cache = DiskCache(str(tmp_path / "cache"), "topics")
        cache.put("p1", "[1]")
        cache.put("p2", "[2]")
        files = sorted((tmp_path / "cache" / "topics").rglob("*.json"))
        assert len(files) == 2
        # layout: cache/topics/<2-hex shard>/<sha>.json
        for path in files:
            assert len(path.parent.name) == 2
        assert cache.get("p1") == "[1]"
        assert cache.get("missing") is None
