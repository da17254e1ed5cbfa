"""Document-frequency providers and the persistent df cache.

IDF needs two numbers per term: how many documents contain it and how many
documents there are.  A provider answers both.  ``LocalIndexProvider`` counts
exactly over an in-memory corpus; ``HitCountProvider`` asks something that
reports hit counts (an HTTP endpoint or a recorded TSV table) and pairs the
answer with a configured corpus size.
"""

from __future__ import annotations

import csv
import logging
import os
import tempfile
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence
from urllib.parse import quote

from .errors import CacheCorrupt, RelictError, TransientError

logger = logging.getLogger(__name__)

WEB_SCALE_N = 25_000_000_000
KINDS = ("local-index", "remote-hitcount", "cache-wrapped")


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class DfRecord:
    term: str
    df: int
    n_docs: int
    provider_id: str
    fetched_at: datetime = field(default_factory=utcnow, compare=False)

    def __post_init__(self):
        if not self.term:
            raise ValueError("DfRecord term must be non-empty")
        if self.df < 0 or self.n_docs < 1:
            raise ValueError(f"bad df/n_docs for {self.term!r}: {self.df}/{self.n_docs}")


@dataclass(frozen=True)
class DfProviderConfig:
    provider_id: str
    kind: str = "local-index"
    n_docs_override: Optional[int] = None
    rate_limit: float = 0.0
    endpoint: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown df provider kind {self.kind!r}")
        if self.kind == "remote-hitcount" and not self.endpoint:
            raise ValueError("remote-hitcount provider needs an endpoint")
        if self.n_docs_override is not None and self.n_docs_override < 1:
            raise ValueError("n_docs_override must be >= 1")


class RateLimiter:
    """Spaces calls at least ``1/rate`` seconds apart. Thread-safe.

    ``clock`` and ``sleep`` are injectable so tests can run on simulated time.
    """

    def __init__(self, rate: float, clock: Callable[[], float] = None, sleep: Callable[[float], None] = None):
        self.interval = 1.0 / rate if rate and rate > 0 else 0.0
        self._clock = clock or time.monotonic
        self._sleep = sleep or time.sleep
        self._next = None
        self._lock = threading.Lock()

    def wait(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self._clock()
            if self._next is not None and now < self._next:
                self._sleep(self._next - now)
                now = self._next
            self._next = now + self.interval


class DfProvider:
    provider_id: str

    @property
    def n_docs(self) -> int:
        raise NotImplementedError

    def lookup(self, terms: Sequence[str]) -> list[DfRecord]:
        raise NotImplementedError


class LocalIndexProvider(DfProvider):
    """Exact document frequencies over a corpus of token collections."""

    def __init__(self, docs: Iterable = (), provider_id: str = "local", n_docs_override: Optional[int] = None):
        self.provider_id = provider_id
        self.config = DfProviderConfig(provider_id, "local-index", n_docs_override)
        self._df: Counter = Counter()
        self._count = 0
        for doc in docs:
            self.add(doc)

    @classmethod
    def from_index(cls, index, provider_id: str = "local"):
        prov = cls(provider_id=provider_id)
        prov._count = index.n_docs
        prov._df = Counter({t: len(p) for t, p in index.postings.items()})
        return prov

    def add(self, doc) -> None:
        """Count one document; accepts an ExtractedDoc, a term->count map or an iterable of terms."""
        terms = getattr(doc, "term_freqs", doc)
        self._df.update(set(terms))
        self._count += 1

    @property
    def n_docs(self) -> int:
        if self.config.n_docs_override is not None:
            return self.config.n_docs_override
        return max(self._count, 1)

    def lookup(self, terms: Sequence[str]) -> list[DfRecord]:
        now = utcnow()
        n = self.n_docs
        return [DfRecord(t, self._df.get(t, 0), n, self.provider_id, now) for t in terms]


class HitCountProvider(DfProvider):
    """df from a hit-count source, one term per request.

    ``counter(term)`` returns the hit count; ``None`` means unknown (df 0).
    Use :meth:`from_endpoint` or :meth:`from_tsv` rather than building the
    counter by hand.
    """

    def __init__(self, config: DfProviderConfig, counter: Callable[[str], Optional[int]], limiter: RateLimiter = None):
        self.config = config
        self.provider_id = config.provider_id
        self._counter = counter
        self._limiter = limiter or RateLimiter(config.rate_limit)

    @property
    def n_docs(self) -> int:
        return self.config.n_docs_override or WEB_SCALE_N

    @classmethod
    def from_tsv(cls, path, provider_id: str = "fixture-hits", n_docs: int = WEB_SCALE_N):
        """Read ``term<TAB>count`` lines; the table stands in for a remote engine."""
        table = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                term, count = line.split("\t")
                table[term.lower()] = int(count)
        config = DfProviderConfig(provider_id, "remote-hitcount", n_docs, 0.0, endpoint=f"file://{path}")
        return cls(config, table.get)

    @classmethod
    def from_endpoint(cls, config: DfProviderConfig, transport):
        """Query ``config.endpoint`` (a template with ``{term}``) through ``transport``.

        The response body must be a decimal hit count.
        """

        def count(term: str) -> Optional[int]:
            url = config.endpoint.format(term=quote(term))
            status, body = transport.get(url)
            if status >= 500 or status == 429:
                raise TransientError(f"hit-count endpoint returned {status}", [term])
            if status == 404:
                return None
            if status >= 400:
                raise RelictError(f"hit-count endpoint returned {status} for {term!r}")
            text = body.decode("utf-8").strip() if isinstance(body, bytes) else str(body).strip()
            return int(text)

        return cls(config, count)

    def lookup(self, terms: Sequence[str]) -> list[DfRecord]:
        n = self.n_docs
        out = []
        for term in terms:
            self._limiter.wait()
            try:
                hits = self._counter(term)
            except TransientError as exc:
                raise TransientError(str(exc), list(terms)) from exc
            except (OSError, TimeoutError) as exc:
                raise TransientError(f"hit-count lookup failed: {exc}", list(terms)) from exc
            out.append(DfRecord(term, int(hits or 0), n, self.provider_id, utcnow()))
        return out


def lookup_df(terms: Sequence[str], provider: DfProvider) -> list[DfRecord]:
    """One DfRecord per term, in input order."""
    terms = list(terms)
    if not terms:
        raise ValueError("lookup_df needs at least one term")
    if any(not t for t in terms):
        raise ValueError("df lookup terms must be non-empty")
    return provider.lookup(terms)


# -- persistent cache ------------------------------------------------------------

class DfCache:
    """Append-only TSV of DfRecords keyed by (provider_id, term); last line wins.

    Columns: provider_id, term, df, n_docs, fetched_at (ISO-8601).  Writes go
    through a lock so one process may share a cache between threads.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict[tuple[str, str], DfRecord] = {}
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        with open(self.path, encoding="utf-8", newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), 1):
                if not row:
                    continue
                try:
                    pid, term, df, n_docs, ts = row
                    rec = DfRecord(term, int(df), int(n_docs), pid, datetime.fromisoformat(ts))
                except (ValueError, TypeError) as exc:
                    raise CacheCorrupt(f"{self.path}:{lineno}: {exc}") from None
                self._records[(pid, term)] = rec

    def get(self, provider_id: str, term: str) -> Optional[DfRecord]:
        return self._records.get((provider_id, term))

    def __len__(self) -> int:
        return len(self._records)

    def put(self, records: Sequence[DfRecord]) -> None:
        if not records:
            return
        with self._lock:
            self._append(records)
            for rec in records:
                self._records[(rec.provider_id, rec.term)] = rec

    def _append(self, records: Sequence[DfRecord]) -> None:
        # copy + append + rename: the file only grows, and a crash never
        # leaves a half-written line behind
        self.path.parent.mkdir(parents=True, exist_ok=True)
        previous = self.path.read_bytes() if self.path.exists() else b""
        if previous and not previous.endswith(b"\n"):
            previous += b"\n"
        fd, tmp = tempfile.mkstemp(dir=self.path.parent, prefix=self.path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(previous)
                for rec in records:
                    line = f"{rec.provider_id}\t{rec.term}\t{rec.df}\t{rec.n_docs}\t{rec.fetched_at.isoformat()}\n"
                    fh.write(line.encode("utf-8"))
            os.replace(tmp, self.path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def _aware(ts: datetime) -> datetime:
    return ts if ts.tzinfo else ts.replace(tzinfo=timezone.utc)


def cache_get_or_fetch(
    terms: Sequence[str],
    cache: DfCache | str | Path,
    provider: DfProvider,
    max_age: timedelta = timedelta(days=30),
    now: Optional[datetime] = None,
) -> list[DfRecord]:
    """Serve fresh cached records, fetch the rest from ``provider`` and persist them.

    A cached record recorded under a different corpus size N counts as a miss.
    """
    if not isinstance(cache, DfCache):
        cache = DfCache(cache)
    now = now or utcnow()
    found: dict[str, DfRecord] = {}
    missing: list[str] = []
    n_docs = provider.n_docs
    for term in dict.fromkeys(terms):
        rec = cache.get(provider.provider_id, term)
        if rec is not None and rec.n_docs == n_docs and now - _aware(rec.fetched_at) <= max_age:
            found[term] = rec
        else:
            missing.append(term)
    if missing:
        fetched = lookup_df(missing, provider)
        logger.debug("df cache: %d hits, %d fetched from %s", len(found), len(fetched), provider.provider_id)
        cache.put(fetched)
        found.update((r.term, r) for r in fetched)
    return [found[t] for t in terms]


class CachedProvider(DfProvider):
    """A provider whose lookups go through a DfCache (the "cache-wrapped" kind)."""

    def __init__(self, inner: DfProvider, cache: DfCache | str | Path, max_age: timedelta = timedelta(days=30)):
        self.inner = inner
        self.provider_id = inner.provider_id
        self.config = DfProviderConfig(inner.provider_id, "cache-wrapped")
        self.cache = cache if isinstance(cache, DfCache) else DfCache(cache)
        self.max_age = max_age

    @property
    def n_docs(self) -> int:
        return self.inner.n_docs

    def lookup(self, terms: Sequence[str]) -> list[DfRecord]:
        return cache_get_or_fetch(terms, self.cache, self.inner, self.max_age)
