"""A small inverted-index engine that stands in for a web search engine.

Documents are scored by TF-IDF cosine against the query.  Unquoted queries
match any document containing at least one query term; quoted queries only
match documents containing the query terms as a consecutive run.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
import zlib
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .content import ExtractedDoc, default_stopwords, stopword_hash, tokenize
from .errors import RelictError
from .uri import normalize_uri, same_page

MAX_RESULTS = 100
INDEX_MAGIC = b"RELICTIX"
INDEX_VERSION = 1


class DuplicateURI(RelictError, ValueError):
    def __init__(self, collisions: Sequence[tuple[str, str]]):
        self.collisions = list(collisions)
        listed = "; ".join(f"{a} == {b}" for a, b in self.collisions)
        super().__init__(f"duplicate URIs after normalization: {listed}")


@dataclass(frozen=True)
class SearchQuery:
    terms: tuple[str, ...]
    quoted: bool = False
    max_results: int = MAX_RESULTS

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms or not any(t.strip() for t in self.terms):
            raise ValueError("query needs at least one term")
        if self.max_results < 1:
            raise ValueError("max_results must be >= 1")

    @property
    def text(self) -> str:
        joined = " ".join(self.terms)
        return f'"{joined}"' if self.quoted else joined


@dataclass(frozen=True)
class ResultPage:
    hits: tuple[tuple[str, float], ...]
    engine_id: str = "local-sim"

    @property
    def uris(self) -> list[str]:
        return [u for u, _ in self.hits]


class Index:
    """Postings, positions and per-document vector norms for a fixed corpus.

    Build with :func:`build_index`; the object is not modified afterwards.
    """

    def __init__(self, uris, streams, stopwords, content_hash):
        self.doc_uris: list[str] = list(uris)
        self.stopwords = frozenset(stopwords)
        self.content_hash = content_hash
        self.postings: dict[str, list[tuple[int, int]]] = defaultdict(list)
        self.positions: dict[str, dict[int, tuple[int, ...]]] = defaultdict(dict)
        self.token_counts: list[int] = []
        for doc_id, stream in enumerate(streams):
            self.token_counts.append(len(stream))
            where = defaultdict(list)
            for pos, term in enumerate(stream):
                where[term].append(pos)
            for term in sorted(where):
                self.postings[term].append((doc_id, len(where[term])))
                self.positions[term][doc_id] = tuple(where[term])
        self.postings = dict(self.postings)
        self.positions = dict(self.positions)
        n = self.n_docs
        self.idf = {t: math.log(n / len(p)) for t, p in self.postings.items()}
        sq = [0.0] * n
        for term, plist in self.postings.items():
            w = self.idf[term]
            for doc_id, count in plist:
                sq[doc_id] += (count * w) ** 2
        self.norms = [math.sqrt(v) for v in sq]
        self._streams = [tuple(s) for s in streams]

    @property
    def n_docs(self) -> int:
        return len(self.doc_uris)

    @property
    def doc_table(self) -> dict[int, tuple[str, int]]:
        return {i: (u, self.token_counts[i]) for i, u in enumerate(self.doc_uris)}

    def doc_id(self, uri: str) -> Optional[int]:
        try:
            return self.doc_uris.index(normalize_uri(uri))
        except ValueError:
            return None

    def stream(self, doc_id: int) -> tuple[str, ...]:
        return self._streams[doc_id]


def corpus_hash(pairs: Sequence[tuple[str, Sequence[str]]], stopwords=()) -> str:
    h = hashlib.sha256()
    h.update(stopword_hash(stopwords).encode())
    for uri, stream in sorted(pairs, key=lambda p: p[0]):
        h.update(json.dumps([uri, list(stream)], ensure_ascii=False).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def build_index(corpus: Sequence[ExtractedDoc], stopwords: Optional[frozenset[str]] = None) -> Index:
    """Index ``corpus``; doc ids follow sorted URI order so input order is irrelevant.

    ``stopwords`` should be the set the documents were extracted with; the
    engine drops the same words from queries.
    """
    if not corpus:
        raise ValueError("cannot index an empty corpus")
    if stopwords is None:
        stopwords = default_stopwords()
    seen: dict[str, str] = {}
    collisions = []
    for doc in corpus:
        key = normalize_uri(doc.uri)
        if key in seen:
            collisions.append((seen[key], doc.uri))
        else:
            seen[key] = doc.uri
    if collisions:
        raise DuplicateURI(collisions)
    docs = sorted(corpus, key=lambda d: normalize_uri(d.uri))
    uris = [normalize_uri(d.uri) for d in docs]
    streams = [tuple(d.tokens) for d in docs]
    return Index(uris, streams, stopwords, corpus_hash(list(zip(uris, streams)), stopwords))


def query_tokens(index: Index, query: SearchQuery) -> list[str]:
    """Tokenize query terms the way documents were tokenized, minus stopwords."""
    out = []
    for term in query.terms:
        out.extend(t for t in tokenize(term) if t not in index.stopwords)
    return out


def _phrase_docs(index: Index, tokens: Sequence[str]) -> set[int]:
    if any(t not in index.positions for t in tokens):
        return set()
    first = index.positions[tokens[0]]
    candidates = set(first)
    for t in tokens[1:]:
        candidates &= set(index.positions[t])
    matched = set()
    for doc_id in candidates:
        starts = set(first[doc_id])
        for offset, t in enumerate(tokens[1:], 1):
            starts &= {p - offset for p in index.positions[t][doc_id]}
            if not starts:
                break
        if starts:
            matched.add(doc_id)
    return matched


def search(index: Index, query: SearchQuery) -> ResultPage:
    tokens = query_tokens(index, query)
    if not tokens:
        return ResultPage(())
    qtf = Counter(tokens)
    qweights = {t: c * index.idf[t] for t, c in qtf.items() if t in index.idf}
    qnorm = math.sqrt(sum(w * w for w in qweights.values()))
    dots: dict[int, float] = defaultdict(float)
    for term, qw in qweights.items():
        w = index.idf[term]
        for doc_id, count in index.postings[term]:
            dots[doc_id] += qw * count * w
    if query.quoted:
        allowed = _phrase_docs(index, tokens)
        dots = {d: v for d, v in dots.items() if d in allowed}
    scored = []
    for doc_id, dot in dots.items():
        denom = qnorm * index.norms[doc_id]
        scored.append((index.doc_uris[doc_id], dot / denom if denom else 0.0))
    scored.sort(key=lambda h: (-h[1], h[0]))
    return ResultPage(tuple(scored[: query.max_results]))


def rank_of(result: ResultPage, target: str) -> Optional[int]:
    """1-based position of ``target`` among the hits, or None."""
    key = normalize_uri(target)
    for i, (uri, _) in enumerate(result.hits, 1):
        if same_page(uri, key):
            return i
    return None


# -- persistence -------------------------------------------------------------------
# layout: magic(8) | version(u16) | hash length(u16) | hash | zlib(JSON payload)

def save_index(index: Index, path) -> None:
    payload = {
        "uris": index.doc_uris,
        "streams": [list(index.stream(i)) for i in range(index.n_docs)],
        "stopwords": sorted(index.stopwords),
    }
    digest = index.content_hash.encode("ascii")
    blob = zlib.compress(json.dumps(payload, ensure_ascii=False, sort_keys=True).encode("utf-8"), 9)
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC + struct.pack(">HH", INDEX_VERSION, len(digest)) + digest + blob)


def read_index_hash(path) -> str:
    with open(path, "rb") as fh:
        head = fh.read(12)
        if head[:8] != INDEX_MAGIC:
            raise RelictError(f"{path}: not a relict index file")
        version, hlen = struct.unpack(">HH", head[8:12])
        if version != INDEX_VERSION:
            raise RelictError(f"{path}: unsupported index version {version}")
        return fh.read(hlen).decode("ascii")


def load_index(path) -> Index:
    data = Path(path).read_bytes()
    digest = read_index_hash(path)
    payload = json.loads(zlib.decompress(data[12 + len(digest):]).decode("utf-8"))
    index = Index(payload["uris"], payload["streams"], payload["stopwords"], digest)
    expected = corpus_hash(list(zip(index.doc_uris, payload["streams"])), index.stopwords)
    if expected != digest:
        raise RelictError(f"{path}: content hash mismatch, file is corrupt")
    return index
