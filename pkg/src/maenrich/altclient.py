"""Altmetric v1 DOI client with an on-disk cache and an offline mode.

The cache holds one JSON file per DOI, named by a hash of the normalized
DOI, plus ``index.json`` mapping DOIs to file names. Each file stores the
raw response body, so recorded fixtures and live responses share a
format. Set ``ALTMETRIC_KEY`` to send an API key; without one the public
keyless endpoint is used.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Protocol, Sequence

import httpx

from maenrich.errors import InputError, NetworkError
from maenrich.ingest.records import normalize_doi
from maenrich.serialize import atomic_write

log = logging.getLogger(__name__)

API_ROOT = "https://api.altmetric.com/v1/doi/"
TRACKED = "Tracked"
NOT_TRACKED = "NotTracked"
LIVE = "live"
CACHE_ONLY = "cache-only"
BACKOFF = (1.0, 2.0, 4.0)

_DOI_SHAPE = re.compile(r"^10\.[^/\s]+/\S+$")


class InvalidDoi(InputError):
    def __init__(self, doi: str):
        super().__init__(f"not a DOI: {doi!r}")
        self.doi = doi


class CacheMiss(NetworkError):
    def __init__(self, doi: str):
        super().__init__(f"{doi}: not in the altmetric cache (cache-only mode)")
        self.doi = doi


class HttpError(NetworkError):
    def __init__(self, status: int, doi: str = ""):
        super().__init__(f"{doi}: HTTP {status}")
        self.status = status
        self.doi = doi


class RateLimited(NetworkError):
    def __init__(self, doi: str):
        super().__init__(f"{doi}: still rate limited (HTTP 429) after {len(BACKOFF)} retries")
        self.doi = doi


class Clock(Protocol):
    def monotonic(self) -> float: ...

    def sleep(self, seconds: float) -> None: ...

    def now(self) -> datetime: ...


class SystemClock:
    def monotonic(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)

    def now(self) -> datetime:
        return datetime.now(timezone.utc)


@dataclass(frozen=True)
class AltmetricRecord:
    """Impact counts for one DOI. ``NotTracked`` records carry no counts."""

    doi: str
    status: str
    fetched_at: str
    score: float | None = None
    policy_count: int | None = None
    patent_count: int | None = None

    @property
    def tracked(self) -> bool:
        return self.status == TRACKED

    def to_dict(self) -> dict:
        return {
            "doi": self.doi,
            "status": self.status,
            "score": self.score,
            "policy_count": self.policy_count,
            "patent_count": self.patent_count,
            "fetched_at": self.fetched_at,
        }


def validate_doi(doi: str) -> str:
    norm = normalize_doi(doi)
    if not norm or not _DOI_SHAPE.match(norm):
        raise InvalidDoi(doi)
    return norm


def record_from_body(doi: str, http_status: int, body: dict | None, fetched_at: str) -> AltmetricRecord:
    if http_status == 404 or body is None:
        return AltmetricRecord(doi=doi, status=NOT_TRACKED, fetched_at=fetched_at)
    return AltmetricRecord(
        doi=doi,
        status=TRACKED,
        fetched_at=fetched_at,
        score=float(body.get("score") or 0.0),
        policy_count=int(body.get("cited_by_policies_count") or 0),
        patent_count=int(body.get("cited_by_patents_count") or 0),
    )


class AltmetricCache:
    def __init__(self, directory: str | os.PathLike):
        self.dir = Path(directory)
        self._lock = threading.Lock()

    @staticmethod
    def filename(doi: str) -> str:
        return hashlib.sha256(doi.encode("utf-8")).hexdigest()[:32] + ".json"

    def path(self, doi: str) -> Path:
        return self.dir / self.filename(doi)

    def get(self, doi: str) -> dict | None:
        p = self.path(doi)
        if not p.exists():
            return None
        return json.loads(p.read_text("utf-8"))

    def put(self, doi: str, http_status: int, body: dict | None, fetched_at: str) -> None:
        entry = {"doi": doi, "http_status": http_status, "fetched_at": fetched_at, "body": body}
        with self._lock:
            atomic_write(self.path(doi), json.dumps(entry, indent=2, sort_keys=True) + "\n")
            index_path = self.dir / "index.json"
            index = json.loads(index_path.read_text("utf-8")) if index_path.exists() else {}
            index[doi] = self.filename(doi)
            atomic_write(index_path, json.dumps(index, indent=2, sort_keys=True) + "\n")


@dataclass
class BatchResult:
    """Per-input-position records (None where that DOI failed) and failures."""

    records: list[AltmetricRecord | None]
    errors: list[tuple[str, Exception]] = field(default_factory=list)
    network_calls: int = 0

    def report(self) -> list[str]:
        return [f"{doi}: {type(err).__name__}: {err}" for doi, err in self.errors]


class AltmetricClient:
    """Serializes outbound requests through one rate-limited lane.

    ``transport`` and ``clock`` are injectable for tests (recorded
    fixtures, mock time). Cache-only calls never build an HTTP client.
    """

    def __init__(
        self,
        cache: AltmetricCache | None = None,
        *,
        rate_limit_per_sec: float = 1.0,
        transport: httpx.BaseTransport | None = None,
        clock: Clock | None = None,
        api_key: str | None = None,
        timeout: float = 30.0,
    ):
        self.cache = cache
        self.rate_limit_per_sec = rate_limit_per_sec
        self.transport = transport
        self.clock = clock or SystemClock()
        self.api_key = api_key if api_key is not None else os.environ.get("ALTMETRIC_KEY")
        self.timeout = timeout
        self._http: httpx.Client | None = None
        self._lane = threading.Lock()
        self._last_request: float | None = None
        self.request_times: list[float] = []

    def close(self) -> None:
        if self._http is not None:
            self._http.close()
            self._http = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _client(self) -> httpx.Client:
        if self._http is None:
            kwargs = {"timeout": self.timeout, "headers": {"User-Agent": "maenrich/0.1"}}
            if self.transport is not None:
                kwargs["transport"] = self.transport
            self._http = httpx.Client(**kwargs)
        return self._http

    def _wait_turn(self) -> None:
        if self._last_request is not None and self.rate_limit_per_sec > 0:
            gap = 1.0 / self.rate_limit_per_sec
            wait = self._last_request + gap - self.clock.monotonic()
            if wait > 0:
                self.clock.sleep(wait)
        self._last_request = self.clock.monotonic()
        self.request_times.append(self._last_request)

    def _get(self, doi: str) -> httpx.Response:
        params = {"key": self.api_key} if self.api_key else None
        with self._lane:
            for attempt in range(len(BACKOFF) + 1):
                self._wait_turn()
                try:
                    resp = self._client().get(API_ROOT + doi, params=params)
                except httpx.HTTPError as exc:
                    raise NetworkError(f"{doi}: {exc}") from exc
                if resp.status_code != 429:
                    return resp
                if attempt < len(BACKOFF):
                    log.info("429 for %s; backing off %.0fs", doi, BACKOFF[attempt])
                    self.clock.sleep(BACKOFF[attempt])
            raise RateLimited(doi)

    def fetch_doi(self, doi: str, mode: str = LIVE) -> AltmetricRecord:
        """One DOI. ``cache-only`` reads the cache and raises CacheMiss if absent."""
        norm = validate_doi(doi)
        if mode == CACHE_ONLY:
            entry = self.cache.get(norm) if self.cache else None
            if entry is None:
                raise CacheMiss(norm)
            return record_from_body(norm, entry["http_status"], entry["body"], entry["fetched_at"])
        if mode != LIVE:
            raise ValueError(f"mode must be {LIVE!r} or {CACHE_ONLY!r}")
        resp = self._get(norm)
        if resp.status_code not in (200, 404):
            raise HttpError(resp.status_code, norm)
        body = resp.json() if resp.status_code == 200 else None
        fetched_at = self.clock.now().astimezone(timezone.utc).isoformat(timespec="seconds")
        if self.cache is not None:
            self.cache.put(norm, resp.status_code, body, fetched_at)
        return record_from_body(norm, resp.status_code, body, fetched_at)

    def fetch_batch(
        self, dois: Sequence[str], mode: str = LIVE, rate_limit_per_sec: float | None = None
    ) -> BatchResult:
        """Fetch many DOIs; duplicates (after normalization) are fetched once.

        Failures are collected rather than raised; output positions follow
        the input.
        """
        if rate_limit_per_sec is not None:
            self.rate_limit_per_sec = rate_limit_per_sec
        before = len(self.request_times)
        results: dict[str, AltmetricRecord | Exception] = {}
        keys = []
        for doi in dois:
            try:
                key = validate_doi(doi)
            except InvalidDoi as exc:
                keys.append(None)
                results.setdefault(doi, exc)
                continue
            keys.append(key)
            if key not in results:
                try:
                    results[key] = self.fetch_doi(key, mode)
                except (NetworkError, InputError) as exc:
                    results[key] = exc
        out = BatchResult(records=[], network_calls=0)
        reported = set()
        for doi, key in zip(dois, keys):
            res = results[key if key is not None else doi]
            if isinstance(res, Exception):
                out.records.append(None)
                tag = key or doi
                if tag not in reported:
                    out.errors.append((tag, res))
                    reported.add(tag)
            else:
                out.records.append(res)
        out.network_calls = len(self.request_times) - before
        return out
