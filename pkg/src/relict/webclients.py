"""Search backends, tag sources and backlink sources.

Every outside service has a fixture-file implementation so experiments run
offline.  Remote calls go through a ``Transport`` (``get(url, params,
headers) -> (status, body)``), which tests replace with a counting stub.
"""

from __future__ import annotations

import json
import logging
import os
import socket
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence
from urllib.parse import urlencode

from .dfsource import RateLimiter
from .errors import FixtureMiss, RelictError, TransientError
from .searchsim import Index, ResultPage, SearchQuery, search
from .uri import normalize_uri

logger = logging.getLogger(__name__)

TAG_CAP = 10
INLINK_CAP = 50
ENGINE_KINDS = ("local-sim", "remote-generic", "fixture-replay")


# -- transports --------------------------------------------------------------------

class UrllibTransport:
    def __init__(self, timeout: float = 10.0):
        self.timeout = timeout

    def get(self, url: str, params: Optional[dict] = None, headers: Optional[dict] = None):
        if params:
            url = f"{url}{'&' if '?' in url else '?'}{urlencode(params)}"
        req = urllib.request.Request(url, headers=headers or {})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.status, resp.read()
        except urllib.error.HTTPError as exc:
            return exc.code, exc.read()
        except (urllib.error.URLError, socket.timeout, ConnectionError) as exc:
            raise TransientError(f"GET {url} failed: {exc}", url) from exc


class CountingTransport:
    """Records every request and answers from a canned table (or refuses)."""

    def __init__(self, responses: Optional[dict] = None):
        self.responses = responses or {}
        self.calls: list[tuple[str, Optional[dict]]] = []

    @property
    def count(self) -> int:
        return len(self.calls)

    def get(self, url, params=None, headers=None):
        self.calls.append((url, params))
        key = (url, tuple(sorted((params or {}).items())))
        if key in self.responses:
            return self.responses[key]
        if url in self.responses:
            return self.responses[url]
        raise TransientError(f"no canned response for {url}", url)


# -- engines -------------------------------------------------------------------------

@dataclass(frozen=True)
class EngineBinding:
    engine_id: str
    kind: str = "local-sim"
    endpoint: Optional[str] = None
    rate_limit: float = 0.0
    max_results: int = 100

    def __post_init__(self):
        if self.kind not in ENGINE_KINDS:
            raise ValueError(f"unknown engine kind {self.kind!r}")
        if self.kind == "remote-generic" and not self.endpoint:
            raise ValueError("remote-generic binding needs an endpoint")
        if self.max_results < 1:
            raise ValueError("max_results must be >= 1")

    @classmethod
    def remote(cls, engine_id: str, endpoint: Optional[str] = None, rate_limit: float = 0.0,
               max_results: int = 100) -> "EngineBinding":
        """A remote-generic binding; the endpoint defaults to ``$RELICT_ENGINE_ENDPOINT``."""
        endpoint = endpoint or os.environ.get("RELICT_ENGINE_ENDPOINT")
        return cls(engine_id, "remote-generic", endpoint, rate_limit, max_results)


class Engine:
    """A bound search backend. Subclasses implement ``_search``."""

    def __init__(self, binding: EngineBinding, limiter: Optional[RateLimiter] = None):
        self.binding = binding
        self.limiter = limiter or RateLimiter(binding.rate_limit)

    @property
    def engine_id(self) -> str:
        return self.binding.engine_id

    def search(self, query: SearchQuery) -> ResultPage:
        self.limiter.wait()
        page = self._search(query)
        cap = min(self.binding.max_results, query.max_results)
        return ResultPage(tuple(page.hits[:cap]), self.engine_id)

    def _search(self, query: SearchQuery) -> ResultPage:
        raise NotImplementedError


class LocalSimEngine(Engine):
    def __init__(self, binding: EngineBinding, index: Index, limiter=None):
        super().__init__(binding, limiter)
        self.index = index

    def _search(self, query):
        return search(self.index, query)


def _replay_key(engine_id: str, terms: Sequence[str], quoted: bool) -> tuple:
    return engine_id, tuple(terms), bool(quoted)


class ReplayEngine(Engine):
    """Answers from recorded responses.

    File format: JSONL, one ``{engine_id, terms, quoted, hits: [{uri, score}]}``
    object per line.
    """

    def __init__(self, binding: EngineBinding, path, limiter=None):
        super().__init__(binding, limiter)
        self.path = Path(path)
        self.recorded: dict[tuple, ResultPage] = {}
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                hits = tuple((h["uri"], float(h.get("score", 0.0))) for h in rec["hits"])
                key = _replay_key(rec["engine_id"], rec["terms"], rec.get("quoted", False))
                self.recorded[key] = ResultPage(hits, rec["engine_id"])

    def _search(self, query):
        key = _replay_key(self.engine_id, query.terms, query.quoted)
        try:
            return self.recorded[key]
        except KeyError:
            raise FixtureMiss(f"no recorded response for {self.engine_id} query {query.text!r}") from None


def record_response(path, engine_id: str, query: SearchQuery, page: ResultPage) -> None:
    """Append one response in the replay format."""
    rec = {
        "engine_id": engine_id,
        "terms": list(query.terms),
        "quoted": query.quoted,
        "hits": [{"uri": u, "score": s} for u, s in page.hits],
    }
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


class RemoteEngine(Engine):
    """GET ``endpoint?q=...&count=...``; the body is a JSON array of ``{url}`` in rank order."""

    def __init__(self, binding: EngineBinding, transport=None, api_key: Optional[str] = None, limiter=None):
        super().__init__(binding, limiter)
        self.transport = transport or UrllibTransport()
        self.api_key = api_key if api_key is not None else os.environ.get("RELICT_ENGINE_KEY")

    def _search(self, query):
        params = {"q": query.text, "count": min(query.max_results, self.binding.max_results)}
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        status, body = self.transport.get(self.binding.endpoint, params, headers)
        if status >= 500 or status == 429:
            raise TransientError(f"{self.engine_id} returned {status}", query.text)
        if status >= 400:
            raise RelictError(f"{self.engine_id} returned {status} for {query.text!r}")
        try:
            items = json.loads(body)
        except ValueError as exc:
            raise RelictError(f"{self.engine_id}: bad response body: {exc}") from None
        hits, seen = [], set()
        for item in items:
            try:
                uri = normalize_uri(item["url"])
            except Exception:
                continue
            if uri in seen:
                continue
            seen.add(uri)
            hits.append(uri)
        # the wire format carries no scores; rank position stands in
        return ResultPage(tuple((u, 1.0 / i) for i, u in enumerate(hits, 1)), self.engine_id)


def open_engine(binding: EngineBinding, *, index: Index = None, replay_path=None, transport=None) -> Engine:
    if binding.kind == "local-sim":
        if index is None:
            raise ValueError("local-sim binding needs an index")
        return LocalSimEngine(binding, index)
    if binding.kind == "fixture-replay":
        if replay_path is None:
            raise ValueError("fixture-replay binding needs a recorded responses file")
        return ReplayEngine(binding, replay_path)
    return RemoteEngine(binding, transport)


def engine_search(engine: Engine, query: SearchQuery) -> ResultPage:
    return engine.search(query)


# -- tags and inlinks ------------------------------------------------------------------

@dataclass(frozen=True)
class TagSet:
    uri: str
    tags: tuple[str, ...]

    def __post_init__(self):
        if not 1 <= len(self.tags) <= TAG_CAP:
            raise ValueError(f"a TagSet holds 1..{TAG_CAP} tags, got {len(self.tags)}")


@dataclass(frozen=True)
class InlinkSet:
    uri: str
    inlinks: tuple[str, ...]


def _read_jsonl_map(path, field: str) -> dict[str, list]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out[normalize_uri(rec["uri"])] = list(rec[field])
            except (ValueError, KeyError) as exc:
                raise RelictError(f"{path}:{lineno}: bad record: {exc}") from None
    return out


class JsonlSource:
    """Maps URIs to lists read from a JSONL fixture (``{uri, <field>: [...]}``)."""

    def __init__(self, path, field: str):
        self.path = path
        self.field = field
        self._data = _read_jsonl_map(path, field)

    def lookup(self, uri: str) -> Optional[list]:
        return self._data.get(normalize_uri(uri))


class FixtureTagSource(JsonlSource):
    def __init__(self, path):
        super().__init__(path, "tags")


class FixtureInlinkSource(JsonlSource):
    def __init__(self, path):
        super().__init__(path, "inlinks")


class DictSource:
    """In-memory source, handy for tests and programmatic use."""

    def __init__(self, mapping: dict):
        self._data = {normalize_uri(k): list(v) for k, v in mapping.items()}

    def lookup(self, uri):
        return self._data.get(normalize_uri(uri))


def _lookup(source, uri):
    try:
        return source.lookup(uri)
    except (OSError, TimeoutError) as exc:
        raise TransientError(f"lookup for {uri} failed: {exc}", uri) from exc


def fetch_tags(uri: str, source) -> Optional[TagSet]:
    """Up to ten tags for ``uri`` in the provider's (frequency) order, or None."""
    raw = _lookup(source, uri) or []
    tags = []
    for tag in raw:
        tag = str(tag).strip().lower()
        if tag and tag not in tags:
            tags.append(tag)
    if not tags:
        return None
    return TagSet(normalize_uri(uri), tuple(tags[:TAG_CAP]))


def fetch_inlinks(uri: str, source, cap: int = INLINK_CAP) -> Optional[InlinkSet]:
    """Up to ``cap`` distinct inlinks in provider order, self-links removed; None when empty."""
    if cap < 1:
        raise ValueError("inlink cap must be >= 1")
    centroid = normalize_uri(uri)
    out: list[str] = []
    for link in _lookup(source, uri) or []:
        try:
            link = normalize_uri(link)
        except ValueError:
            continue
        if link == centroid or link in out:
            continue
        out.append(link)
        if len(out) == cap:
            break
    if not out:
        return None
    return InlinkSet(centroid, tuple(out))


class ConnectionGuard:
    """Counts (and blocks) outbound socket connections while active.

    Used by the test suite to prove that fixture and local-sim runs never
    touch the network.
    """

    def __init__(self):
        self.attempts: list = []
        self._orig = None
        self._lock = threading.Lock()

    def __enter__(self):
        guard = self
        self._orig = (socket.socket.connect, socket.socket.connect_ex)

        def make(orig):
            def connect(sock, address):
                with guard._lock:
                    guard.attempts.append(address)
                if sock.family == getattr(socket, "AF_UNIX", None):
                    return orig(sock, address)
                raise ConnectionRefusedError(f"network disabled: {address}")
            return connect

        socket.socket.connect = make(self._orig[0])
        socket.socket.connect_ex = make(self._orig[1])
        return self

    def __exit__(self, *exc):
        socket.socket.connect, socket.socket.connect_ex = self._orig
        return False

    @property
    def count(self) -> int:
        return sum(1 for a in self.attempts if not isinstance(a, (str, bytes)))
