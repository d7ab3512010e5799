"""Clients for the topic-labeling and bibliographic-metadata services.

Both clients speak a small JSON-over-HTTP contract (below) so the whole test
suite runs against a local mock server, offline. Responses are cached on disk
per entity; cache hits never touch the network, and re-running over a warm
cache produces identical tables with zero requests.

Wire contract (POST, JSON body, JSON response):

* topics service:  ``POST {base}/topics`` with ``{"page_ids": [...]}`` ->
  ``{"topics": {page_id: [category, ...], ...}}`` (unknown pages omitted)
* works service:   ``POST {base}/works`` with ``{"dois": [...]}`` ->
  ``{"works": {doi: {"publication_year": int|null, "journal_name": str|null,
  "oa_status": "open"|"closed", "citations_total": int|null,
  "citations_recent": int|null}, ...}}`` (unmatched DOIs omitted)

API tokens come from the environment (never CLI flags) via the variable
named in the service config.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import requests

from .errors import TransportError, UpstreamSchemaError
from .ingest import MembershipTable, WorkRecord, fractional_weights


@dataclass
class ServiceConfig:
    """Connection and politeness settings for one upstream service."""

    base_url: str
    token_env: str | None = None  # name of the env var holding the token
    batch_size: int = 50
    max_in_flight: int = 1
    rate_limit: int | None = None  # max requests per sliding window
    rate_window: float = 1.0  # seconds
    max_attempts: int = 3
    backoff_base: float = 0.5  # seconds; doubles per attempt, plus jitter
    backoff_jitter: float = 0.1
    timeout: float = 10.0

    def token(self) -> str | None:
        return os.environ.get(self.token_env) if self.token_env else None


class DiskCache:
    """Append-only on-disk key-value cache, one file per (service, key).

    Files live under ``root/<service>/<2-hex shard>/<sha256>.json`` and store
    the payload verbatim along with the key and fetch timestamp.
    """

    def __init__(self, root: str, service: str):
        self.root = os.path.join(root, service)
        self._lock = threading.Lock()

    def _path(self, key: str) -> str:
        digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
        return os.path.join(self.root, digest[:2], digest + ".json")

    def get(self, key: str) -> str | None:
        path = self._path(key)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                entry = json.load(fh)
        except FileNotFoundError:
            return None
        return entry["payload"]

    def put(self, key: str, payload: str) -> None:
        path = self._path(key)
        with self._lock:
            os.makedirs(os.path.dirname(path), exist_ok=True)
            tmp = path + ".tmp"
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(
                    {"key": key, "fetched_at": time.time(), "payload": payload}, fh
                )
            os.replace(tmp, path)


class SlidingWindowLimiter:
    """Allows at most ``limit`` acquisitions per ``window`` seconds."""

    def __init__(self, limit: int | None, window: float):
        self.limit = limit
        self.window = window
        self._stamps: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        if self.limit is None:
            return
        while True:
            with self._lock:
                now = time.monotonic()
                while self._stamps and self._stamps[0] <= now - self.window:
                    self._stamps.popleft()
                if len(self._stamps) < self.limit:
                    self._stamps.append(now)
                    return
                wait = self._stamps[0] + self.window - now
            time.sleep(max(wait, 1e-4))


@dataclass
class FetchReport:
    """Accounting for one enrichment call."""

    requested: int = 0
    cache_hits: int = 0
    fetched: int = 0
    unmatched: int = 0
    http_requests: int = 0

    def as_dict(self) -> dict:
        return {
            "requested": self.requested,
            "cache_hits": self.cache_hits,
            "fetched": self.fetched,
            "unmatched": self.unmatched,
            "http_requests": self.http_requests,
        }


class _BatchClient:
    """Shared batching / caching / retry machinery for both services."""

    service: str
    endpoint: str
    payload_key: str
    response_key: str

    def __init__(
        self,
        config: ServiceConfig,
        cache: DiskCache,
        session: requests.Session | None = None,
    ):
        self.config = config
        self.cache = cache
        self.session = session or requests.Session()
        self.limiter = SlidingWindowLimiter(config.rate_limit, config.rate_window)
        self._rng = random.Random(0)  # jitter only; not result-determining

    def _post_batch(self, ids: Sequence[str]) -> dict:
        url = self.config.base_url.rstrip("/") + self.endpoint
        headers = {}
        token = self.config.token()
        if token:
            headers["Authorization"] = f"Bearer {token}"
        last_error: Exception | None = None
        for attempt in range(self.config.max_attempts):
            if attempt:
                delay = self.config.backoff_base * (2 ** (attempt - 1))
                delay += self._rng.uniform(0, self.config.backoff_jitter)
                time.sleep(delay)
            self.limiter.acquire()
            try:
                resp = self.session.post(
                    url,
                    json={self.payload_key: list(ids)},
                    headers=headers,
                    timeout=self.config.timeout,
                )
            except requests.RequestException as exc:
                last_error = TransportError(f"{self.service}: {exc}", retryable=True)
                continue
            if resp.status_code // 100 == 2:
                try:
                    body = resp.json()
                except ValueError as exc:
                    raise UpstreamSchemaError(
                        f"{self.service}: non-JSON 2xx body: {exc}"
                    )
                if (
                    not isinstance(body, dict)
                    or self.response_key not in body
                    or not isinstance(body[self.response_key], dict)
                ):
                    raise UpstreamSchemaError(
                        f"{self.service}: response missing {self.response_key!r} map"
                    )
                return body[self.response_key]
            # Non-2xx: a parseable error body is a definitive rejection.
            try:
                detail = resp.json()
            except ValueError:
                detail = None
            if detail is not None:
                raise TransportError(
                    f"{self.service}: HTTP {resp.status_code}: {detail}",
                    retryable=False,
                )
            last_error = TransportError(
                f"{self.service}: HTTP {resp.status_code}", retryable=True
            )
        raise last_error if last_error else TransportError(
            f"{self.service}: exhausted retries", retryable=True
        )

    def _lookup(self, ids: Iterable[str]) -> tuple[dict[str, object], FetchReport]:
        """Per-entity payloads, from cache where possible; fetch the rest in
        batches and cache every answer (including definitive misses)."""
        report = FetchReport()
        unique = sorted(set(ids))
        report.requested = len(unique)
        results: dict[str, object] = {}
        misses: list[str] = []
        for entity in unique:
            payload = self.cache.get(entity)
            if payload is None:
                misses.append(entity)
            else:
                report.cache_hits += 1
                results[entity] = json.loads(payload)

        batch = self.config.batch_size
        chunks = [misses[i : i + batch] for i in range(0, len(misses), batch)]

        def fetch_chunk(chunk: list[str]) -> tuple[list[str], dict]:
            return chunk, self._post_batch(chunk)

        if self.config.max_in_flight > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=self.config.max_in_flight) as pool:
                answers = list(pool.map(fetch_chunk, chunks))
        else:
            answers = [fetch_chunk(chunk) for chunk in chunks]

        # Assembly is per-entity, so completion order cannot matter.
        for chunk, answer in answers:
            report.http_requests += 1
            for entity in chunk:
                value = answer.get(entity)
                results[entity] = value
                self.cache.put(entity, json.dumps(value))
                report.fetched += 1
        report.unmatched = sum(1 for v in results.values() if v is None)
        return results, report


class TopicsClient(_BatchClient):
    """Topic labels for encyclopedia pages."""

    service = "topics"
    endpoint = "/topics"
    payload_key = "page_ids"
    response_key = "topics"

    def fetch_topics(
        self, page_ids: Iterable[str]
    ) -> tuple[MembershipTable, FetchReport]:
        """Topic memberships per page; unlabeled pages map to Missing."""
        results, report = self._lookup(page_ids)
        weights: dict[str, dict[str, float]] = {}
        for page_id in sorted(results):
            value = results[page_id]
            if value is not None and not isinstance(value, list):
                raise UpstreamSchemaError(
                    f"topics: expected a category list for {page_id!r}"
                )
            cats = [str(c) for c in value] if value else []
            weights[page_id] = fractional_weights(cats)
        return MembershipTable(scheme="ores_topic", weights=weights), report


class WorksClient(_BatchClient):
    """Bibliographic metadata for cited works."""

    service = "works"
    endpoint = "/works"
    payload_key = "dois"
    response_key = "works"

    def fetch_works(
        self, dois: Iterable[str]
    ) -> tuple[dict[str, WorkRecord], FetchReport]:
        """WorkRecords per DOI; unmatched DOIs yield records with all
        optional fields absent and oa_status missing."""
        results, report = self._lookup(dois)
        works: dict[str, WorkRecord] = {}
        for doi in sorted(results):
            value = results[doi]
            if value is None:
                works[doi] = WorkRecord(doi=doi)
                continue
            if not isinstance(value, dict):
                raise UpstreamSchemaError(f"works: expected an object for {doi!r}")
            try:
                works[doi] = WorkRecord(
                    doi=doi,
                    publication_year=value.get("publication_year"),
                    journal_name=value.get("journal_name"),
                    oa_status=value.get("oa_status") or "missing",
                    citations_total=value.get("citations_total"),
                    citations_recent=value.get("citations_recent"),
                )
            except Exception as exc:
                raise UpstreamSchemaError(f"works: bad record for {doi!r}: {exc}")
        return works, report
